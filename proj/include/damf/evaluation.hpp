#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "damf/types.hpp"

namespace damf {

// Per-document model outputs next to the gold labels. DDR's one-hot
// predictions ride along as ±1 pseudo-logits so the same machinery applies.
struct PredictionSet {
  Matrix logits;  // N×10
  Matrix gold;    // N×10, entries 0/1
};

struct ClassReport {
  std::array<Scalar, kNumClasses> precision{};
  std::array<Scalar, kNumClasses> recall{};
  std::array<Scalar, kNumClasses> f1{};
  std::array<long, kNumClasses> support{};
};

// flag_c = sigmoid(logit_c) ≥ 0.5, i.e. logit_c ≥ 0 (0 counts as positive).
MoralLabelVector binarize(const Vector& logits);

// Standard binary P/R/F1 per class over binarized predictions.
// 0/0 conventions: precision 0 with no positive predictions, recall 0 with
// zero support, F1 0 when P+R = 0.
ClassReport per_class_prf(const PredictionSet& preds);

// Support-weighted mean of per-class F1 over the 10 moral classes.
// Throws std::invalid_argument when every support is zero.
Scalar weighted_f1(const ClassReport& report);

struct SeedAggregate {
  std::map<std::string, Scalar> mean;
  std::map<std::string, Scalar> stddev;  // population std
};

// Per-key mean and population standard deviation over ≥2 runs with
// identical key sets.
SeedAggregate aggregate_seeds(
    const std::vector<std::map<std::string, Scalar>>& runs);

}  // namespace damf
