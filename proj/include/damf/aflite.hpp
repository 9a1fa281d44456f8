#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "damf/probe.hpp"
#include "damf/types.hpp"

namespace damf {

// Adversarial filtering ahead of baseline training. The paper leaves the
// internals open; these defaults follow the original AFLite literature and
// are all overridable.
struct AFLiteConfig {
  int num_partitions = 64;                  // m
  double train_fraction = 0.8;
  double predictability_threshold = 0.75;   // τ
  int max_remove_per_round = 0;             // k; 0 = auto ⌈0.05·current size⌉
  double min_size_fraction = 0.5;
  double min_delta_fraction = 0.02;
  ProbeConfig probe;
};

struct PredictabilityScore {
  int evaluated = 0;
  int predicted = 0;

  Scalar value() const {
    return evaluated > 0 ? static_cast<Scalar>(predicted) / evaluated : 0.0;
  }
};

// One scoring round over m random partitions. For every partition a linear
// probe is fit on the train part; a held-out doc counts as predicted when its
// thresholded multi-label output exactly matches the gold label vector. Docs
// never held out in any partition are absent from the map.
//
// features: N×F frozen-encoder embeddings, gold: N×10 0/1, ids aligned by row.
std::map<std::string, PredictabilityScore> aflite_round(
    const Matrix& features, const Matrix& gold,
    const std::vector<std::string>& ids, const AFLiteConfig& cfg,
    std::uint64_t seed);

struct AFLiteResult {
  std::vector<int> kept_indices;        // rows of the input, ascending
  std::vector<std::string> kept_ids;
  std::vector<std::size_t> sizes;       // post-removal size per removing round
  int rounds = 0;                       // scoring rounds executed
};

// Iteratively scores and drops the most predictable docs (score ≥ τ, highest
// score first, ties toward the lowest row index), at most k per round and
// never below ⌈min_size_fraction·N₀⌉. Stops at that floor or when a round
// removes fewer than min_delta_fraction of its starting size.
AFLiteResult aflite_filter(const Matrix& features, const Matrix& gold,
                           const std::vector<std::string>& ids,
                           const AFLiteConfig& cfg, std::uint64_t seed);

}  // namespace damf
