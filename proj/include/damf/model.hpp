#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "damf/encoder.hpp"
#include "damf/rng.hpp"
#include "damf/types.hpp"

namespace damf {

struct ModelConfig {
  EncoderConfig encoder;
  int num_domains = 2;
  int head_hidden = 0;  // 0 -> encoder.hidden_size
  Scalar dropout_rate = 0.3;
  bool trans_enabled = true;  // false omits the transformation layer entirely
};

// Identity forward, gradient scaled by −λ on the way back. λ is captured at
// forward time so the backward pass uses the schedule value of that step.
class GradReversal {
 public:
  Matrix forward(const Matrix& x, Scalar lambda_d) {
    lambda_ = lambda_d;
    return x;
  }
  Matrix backward(const Matrix& dy) const { return -lambda_ * dy; }
  Scalar lambda() const { return lambda_; }

 private:
  Scalar lambda_ = 0.0;
};

// x_trans = W·x (no bias, no activation), W regularized toward identity.
class TransformLayer {
 public:
  TransformLayer(int hidden, std::uint64_t seed);

  Vector transform(const Vector& x) const;
  Matrix forward(const Matrix& x);          // rows are examples; caches x
  Matrix backward(const Matrix& dy);        // accumulates dW, returns dx
  Scalar regularizer() const;               // ‖W − I‖²_F
  void add_regularizer_grad(Scalar coeff);  // dW += coeff·2(W−I)

  Param& weight() { return w_; }
  const Param& weight() const { return w_; }

 private:
  Param w_;  // H×H
  Matrix cached_x_;
};

// Linear → ReLU → Dropout → Linear. Shared by the MF head (in = H+D,
// out = 10) and the domain head (in = H, out = D).
class FeedForwardHead {
 public:
  FeedForwardHead(const std::string& name, int in, int hidden, int out,
                  Scalar dropout_rate, std::uint64_t seed);

  // training=true applies inverted dropout using rng (required then).
  Matrix forward(const Matrix& x, bool training, Rng* rng);
  Vector forward_eval(const Vector& x) const;
  Matrix backward(const Matrix& dlogits);  // returns d(input), full width

  std::vector<Param*> params();
  int in_dim() const { return static_cast<int>(w1_.value.rows()); }
  int out_dim() const { return static_cast<int>(w2_.value.cols()); }

 private:
  Param w1_, b1_, w2_, b2_;
  Scalar dropout_rate_;
  Matrix cached_x_, cached_pre_, cached_act_, cached_mask_;
  bool cached_training_ = false;
};

// tanh(W·x + b)
class ReconstructionHead {
 public:
  ReconstructionHead(int hidden, std::uint64_t seed);

  Vector reconstruct(const Vector& x) const;
  Matrix forward(const Matrix& x);   // caches
  Matrix backward(const Matrix& dout);

  std::vector<Param*> params();

 private:
  Param w_, b_;
  Matrix cached_x_, cached_out_;
};

// The full head-stack over the tiny encoder (Fig. 1 wiring):
//   x_bert = encoder(batch)
//   x_trans = W_trans · x_bert            (or identity when disabled)
//   mf logits    = MFHead([x_trans ; onehot(domain)])
//   domain logits= DomainHead(GRL(x_trans, λ_D))
//   recon        = tanh(W·x_bert + b), compared to tanh(x_orig)
// Backward methods mirror the forward data flow; the trainer sums the
// trunk gradients from each head before calling encoder_backward.
class DamfModel {
 public:
  DamfModel(const ModelConfig& config, int vocab_size, std::uint64_t seed);

  // --- batched training path ---
  Matrix encode_batch(const std::vector<TokenSequence>& batch);
  Matrix transform_batch(const Matrix& x_bert);
  Matrix mf_logits(const Matrix& x_trans, const std::vector<int>& domains,
                   bool training, Rng* rng);
  Matrix domain_logits(const Matrix& x_trans, Scalar lambda_d, bool training,
                       Rng* rng);
  Matrix reconstruct_batch(const Matrix& x_bert);

  Matrix mf_backward(const Matrix& dlogits);       // -> d(x_trans)
  Matrix domain_backward(const Matrix& dlogits);   // -> d(x_trans), GRL applied
  Matrix recon_backward(const Matrix& drecon);     // -> d(x_bert)
  Matrix transform_backward(const Matrix& dx_trans);  // -> d(x_bert)
  void add_transform_regularizer_grad(Scalar coeff);
  void encoder_backward(const Matrix& dx_bert);

  // --- single-example evaluation path (dropout off, no caches) ---
  Vector encode(const TokenSequence& seq) const;
  Vector transform(const Vector& x_bert) const;
  Vector mf_forward(const Vector& x_trans, const DomainId& domain) const;
  Vector domain_forward(const Vector& x_trans, Scalar lambda_d) const;
  Vector reconstruct(const Vector& x_bert) const;

  // --- frozen reference encoder for x_orig ---
  void snapshot_reference();
  bool has_reference() const { return reference_.has_value(); }
  Vector encode_reference(const TokenSequence& seq) const;
  Matrix encode_reference_batch(const std::vector<TokenSequence>& batch) const;

  Scalar transform_regularizer() const;  // 0 when the layer is disabled

  std::vector<Param*> params();
  void zero_grad();

  TinyTransformer& encoder() { return encoder_; }
  const TinyTransformer& encoder() const { return encoder_; }
  const ModelConfig& config() const { return config_; }
  int hidden_size() const { return config_.encoder.hidden_size; }

 private:
  Matrix concat_domains(const Matrix& x_trans,
                        const std::vector<int>& domains) const;

  ModelConfig config_;
  TinyTransformer encoder_;
  std::optional<TinyTransformer> reference_;
  std::optional<TransformLayer> trans_;
  FeedForwardHead mf_head_;
  FeedForwardHead domain_head_;
  ReconstructionHead recon_head_;
  GradReversal grl_;
};

}  // namespace damf
