#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "damf/text.hpp"
#include "damf/types.hpp"

namespace damf {

// Per-class strict majority: a flag is set iff more than half of the
// annotators set it. Returns nullopt (document discarded) iff no class
// reaches a strict positive majority and at least one class is tied at
// exactly half, i.e. the annotation is contested with no decisive signal.
// Throws on an empty annotator list.
std::optional<MoralLabelVector> majority_vote(const AnnotationSet& ann,
                                              int num_annotators);

enum class CorpusFormat { jsonl };

struct LoadReport {
  std::int64_t total_records = 0;
  std::int64_t kept = 0;
  std::int64_t discarded_no_majority = 0;
};

// Reads the canonical line-delimited corpus format: one JSON record per line
// with fields {id, text, labels?, annotations?}. Labels use the canonical
// class names. Preprocessing is applied to every record; records whose
// annotations fail majority vote are dropped and counted in the report.
Corpus load_corpus(const std::string& path, const DomainId& domain,
                   CorpusFormat format = CorpusFormat::jsonl,
                   LoadReport* report = nullptr,
                   const EmojiTable& emoji = EmojiTable::bundled());

void save_corpus(const Corpus& corpus, const std::string& path);

// Deterministic shuffled partition into (floor(ratio*N), remainder) pieces.
// The first part is tagged Split::train, the second Split::val.
std::pair<Corpus, Corpus> split_train_val(const Corpus& corpus, double ratio,
                                          std::uint64_t seed);

// fraction_c = positives_c / number of labeled documents
Vector compute_label_distribution(const Corpus& corpus);

// Drops labels from every document and tags them unlabeled_target.
Corpus strip_labels(const Corpus& corpus);

}  // namespace damf
