#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace damf {

using Scalar = double;

template <class S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Matrix = MatrixX<Scalar>;
using Vector = VectorX<Scalar>;

inline constexpr int kNumClasses = 10;

// Canonical class order, identical across all datasets. "Non-moral" is the
// all-false vector, never an 11th class.
inline constexpr std::array<const char*, kNumClasses> kClassNames = {
    "care",      "harm",       "fairness", "cheating",   "loyalty",
    "betrayal",  "authority",  "subversion", "purity",   "degradation"};

int class_index(const std::string& name);  // -1 if unknown

struct MoralLabelVector {
  std::array<bool, kNumClasses> flags{};

  bool operator==(const MoralLabelVector&) const = default;
  bool any() const {
    for (bool f : flags)
      if (f) return true;
    return false;
  }
};

struct DomainId {
  int index = 0;  // dense 0..D-1 within an experiment
  std::string name;

  bool operator==(const DomainId&) const = default;
};

enum class Split { train, val, test, unlabeled_target };

struct Document {
  std::string id;
  std::string raw_text;
  std::string processed_text;  // ASCII only
  DomainId domain;
  std::optional<MoralLabelVector> labels;  // absent iff split == unlabeled_target
  Split split = Split::train;
};

// Raw multi-annotator labels for one document, before majority vote.
struct AnnotationSet {
  std::string doc_id;
  std::vector<MoralLabelVector> per_annotator;
};

struct LabelCounts {
  std::array<std::int64_t, kNumClasses> positives{};
  std::array<std::int64_t, kNumClasses> negatives{};

  bool operator==(const LabelCounts&) const = default;
};

struct Corpus {
  std::string name;
  DomainId domain;
  std::vector<Document> documents;
  LabelCounts label_counts;

  std::int64_t num_labeled() const {
    std::int64_t n = 0;
    for (const auto& d : documents)
      if (d.labels) ++n;
    return n;
  }
};

// Recomputes label_counts from the documents.
LabelCounts count_labels(const std::vector<Document>& docs);

struct SyntheticSpec {
  int num_domains = 2;
  int docs_per_domain = 100;
  // num_domains x kNumClasses matrix of per-class positive priors in [0,1]
  Matrix per_domain_class_prior;
  int vocab_size = 200;
  double domain_marker_strength = 0.0;  // in [0,1]
  std::uint64_t seed = 0;
};

}  // namespace damf
