#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "damf/types.hpp"

namespace damf {

// Exact (quadratic) t-SNE: fine at the sample sizes the figures use.
struct TsneConfig {
  int output_dims = 2;
  Scalar perplexity = 30.0;
  int iters = 500;
  Scalar learning_rate = 100.0;
  Scalar early_exaggeration = 4.0;
  int exaggeration_iters = 100;
  int momentum_switch_iter = 250;   // 0.5 before, 0.8 after
  std::uint64_t seed = 0;
};

// Row-stochastic conditional affinities p_{j|i}; each row's Gaussian
// bandwidth is binary-searched so that exp(H(P_i)) matches the perplexity.
Matrix tsne_conditional_affinities(const Matrix& x, Scalar perplexity);

// Symmetrized joint affinities (p + pᵀ)/(2N), floored at 1e-12.
Matrix tsne_affinities(const Matrix& x, Scalar perplexity);

// KL(P ‖ Q) of a candidate low-dimensional layout under the Student-t kernel.
Scalar tsne_kl(const Matrix& p, const Matrix& y);

// Gradient descent with momentum and adaptive per-coordinate gains from a
// small Gaussian init. Same seed ⇒ same layout, bit for bit.
Matrix tsne_embed(const Matrix& x, const TsneConfig& cfg = {});

struct TsnePoint {
  Scalar x = 0.0;
  Scalar y = 0.0;
  std::string domain;
};

// Draws sample_size docs from every corpus (without replacement), embeds
// them with `embed`, and reduces to 2-D.
std::vector<TsnePoint> tsne_points(
    const std::vector<const Corpus*>& corpora,
    const std::function<Vector(const Document&)>& embed, int sample_size,
    std::uint64_t seed, const TsneConfig& cfg = {});

// Comma-separated "x,y,domain" rows with a header line.
void export_tsne(const std::vector<TsnePoint>& points,
                 const std::string& path);

}  // namespace damf
