#pragma once

#include <string>
#include <vector>

#include "damf/embeddings.hpp"
#include "damf/types.hpp"

namespace damf {

// Per-class word lists from a moral-foundations dictionary file. Format:
// "[class]" section headers using the canonical class names, one word per
// line below each header; '#' starts a comment. Every class must have a
// section.
struct Lexicon {
  std::array<std::vector<std::string>, kNumClasses> words;

  static Lexicon load(const std::string& path);
};

struct CentroidTable {
  Matrix centroids;  // 10 × embedding dim
};

// centroid_c = mean vector of class c's in-vocabulary words. Out-of-vocabulary
// words are skipped (and reported via skipped when given); a class with no
// in-vocabulary word at all is an error.
CentroidTable build_centroids(const Lexicon& lexicon,
                              const EmbeddingTable& embeddings,
                              std::vector<std::string>* skipped = nullptr);

struct DdrPrediction {
  int class_index = -1;  // -1 when abstained
  Vector scores;         // 10 cosine similarities (zeros when abstained)
  bool abstained = false;
};

// Mean in-vocabulary token vector, cosine against each centroid, argmax with
// ties broken toward the lowest class index. Texts with no in-vocabulary
// token abstain (evaluated as the all-false prediction).
DdrPrediction ddr_predict(const std::string& processed_text,
                          const CentroidTable& centroids,
                          const EmbeddingTable& embeddings);

// ±1 pseudo-logits so DDR flows through the shared metric path: +1 on the
// predicted class, −1 elsewhere, all −1 for an abstention.
Vector ddr_pseudo_logits(const DdrPrediction& prediction);

}  // namespace damf
