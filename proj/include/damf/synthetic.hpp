#pragma once

#include <vector>

#include "damf/types.hpp"

namespace damf {

// Builds one corpus per domain from disjoint token pools:
//   - shared "content" tokens drawn by every document,
//   - per-class tokens emitted by documents labeled with that class
//     (plus a small label-noise rate that emits class tokens without the
//     label, so token presence alone is not a perfect predictor),
//   - per-domain marker tokens emitted with probability
//     domain_marker_strength (0 disables them, making the domains
//     indistinguishable whenever their class priors agree).
// Labels are drawn per class from per_domain_class_prior (row d, col c).
// Fully deterministic given spec.seed.
std::vector<Corpus> generate_synthetic_corpus(const SyntheticSpec& spec);

}  // namespace damf
