#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "damf/tokenizer.hpp"
#include "damf/types.hpp"

namespace damf {

struct EncoderConfig {
  enum class Kind { pretrained_transformer, tiny_transformer };
  enum class Pooling { first_token, mean };

  Kind kind = Kind::tiny_transformer;
  int hidden_size = 32;
  int max_len = 50;
  Pooling pooling = Pooling::mean;
  int num_layers = 2;
  int ffn_multiplier = 2;  // FFN width = ffn_multiplier * hidden_size
};

// cls-first id sequence, truncated to config.max_len and padded with pad ids;
// deterministic.
TokenSequence tokenize_truncate(const std::string& text,
                                const EncoderConfig& config,
                                const Vocabulary& vocab);

// One named parameter tensor with its gradient accumulator. Vectors are
// stored as 1×n rows so the optimizer can treat everything uniformly.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}
};

// Two-layer single-head post-LayerNorm transformer over learned token +
// position embeddings. Small enough that forward/backward are hand written;
// padding positions are simply never computed, so padding invariance is
// exact rather than masked-approximate.
class TinyTransformer {
 public:
  TinyTransformer(const EncoderConfig& config, int vocab_size,
                  std::uint64_t seed);

  // Pooled embeddings for a batch, N×H; caches activations for backward.
  Matrix forward(const std::vector<TokenSequence>& batch);
  // Accumulates parameter gradients from d(pooled). Must follow a forward
  // with a batch of the same size.
  void backward(const Matrix& dpooled);

  // Evaluation-mode single-document encoding; bitwise identical to the
  // corresponding forward row.
  Vector encode(const TokenSequence& seq) const;

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  void zero_grad();

  const EncoderConfig& config() const { return config_; }
  int vocab_size() const { return vocab_size_; }

 private:
  struct Layer {
    Param wq, bq, wk, bk, wv, bv, wo, bo;
    Param ln1_g, ln1_b;
    Param w1, b1, w2, b2;
    Param ln2_g, ln2_b;
  };

  struct LayerCache {
    Matrix x, q, k, v, a, ctx;
    Matrix xhat1, h1, f_pre, f, xhat2;
    Vector sig1, sig2;
  };

  struct DocCache {
    std::vector<LayerCache> layers;
    int n = 0;
  };

  void check_sequence(const TokenSequence& seq) const;
  // Final hidden states (n×H) for one document; fills cache when given.
  Matrix run_doc(const TokenSequence& seq, DocCache* cache) const;
  Vector pool(const Matrix& hidden) const;

  EncoderConfig config_;
  int vocab_size_;
  Param embedding_;  // V×H
  Param position_;   // max_len×H
  std::vector<Layer> layers_;

  std::vector<TokenSequence> cached_batch_;
  std::vector<DocCache> cache_;
};

}  // namespace damf
