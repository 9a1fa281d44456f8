#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "damf/types.hpp"

// Scalar losses, class weights, and the training-time schedules. Everything
// here is a pure function of its arguments; batch reduction is always the
// arithmetic mean over example-and-class (or example-and-component) terms so
// magnitudes are batch-size invariant.

namespace damf {

inline constexpr Scalar kClassWeightCap = 100.0;   // used when a class has no positives
inline constexpr Scalar kClassWeightFloor = 0.01;  // used when a class has no negatives

inline Vector compute_class_weights(const LabelCounts& counts) {
  Vector w(kNumClasses);
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts.positives[c] == 0)
      w[c] = kClassWeightCap;
    else if (counts.negatives[c] == 0)
      w[c] = kClassWeightFloor;
    else
      w[c] = static_cast<Scalar>(counts.negatives[c]) /
             static_cast<Scalar>(counts.positives[c]);
  }
  return w;
}

// Weights come from the training split only; validation and unlabeled
// documents are excluded.
inline Vector compute_class_weights(const Corpus& corpus) {
  LabelCounts counts;
  for (const auto& doc : corpus.documents) {
    if (!doc.labels || doc.split != Split::train) continue;
    for (int c = 0; c < kNumClasses; ++c) {
      if (doc.labels->flags[c])
        ++counts.positives[c];
      else
        ++counts.negatives[c];
    }
  }
  return compute_class_weights(counts);
}

inline Matrix labels_to_matrix(const std::vector<MoralLabelVector>& labels) {
  Matrix y(static_cast<Eigen::Index>(labels.size()), kNumClasses);
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (int c = 0; c < kNumClasses; ++c)
      y(i, c) = labels[static_cast<std::size_t>(i)].flags[c] ? 1.0 : 0.0;
  return y;
}

namespace detail {

inline Scalar softplus(Scalar x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline Scalar sigmoid(Scalar x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (1.0 + e);
}

inline void check_bce_args(const Matrix& logits, const Matrix& targets,
                           const Vector& weights) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw std::invalid_argument("weighted_bce: logits/targets shape mismatch");
  if (weights.size() != logits.cols())
    throw std::invalid_argument("weighted_bce: weight vector size mismatch");
  if (logits.size() == 0)
    throw std::invalid_argument("weighted_bce: empty batch");
  if (!logits.allFinite())
    throw std::runtime_error("weighted_bce: non-finite logit");
}

}  // namespace detail

// Mean over all N·C (example, class) terms of
//   −[w_c·y·log σ(x) + (1−y)·log(1−σ(x))]
// with the weight on the positive term only. Stabilized via softplus:
// −log σ(x) = softplus(−x), −log(1−σ(x)) = softplus(x).
inline Scalar weighted_bce(const Matrix& logits, const Matrix& targets,
                           const Vector& weights) {
  detail::check_bce_args(logits, targets, weights);
  Scalar sum = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const Scalar x = logits(i, c);
      const Scalar y = targets(i, c);
      sum += weights[c] * y * detail::softplus(-x) +
             (1.0 - y) * detail::softplus(x);
    }
  return sum / static_cast<Scalar>(logits.size());
}

// d(weighted_bce)/d(logits); same mean scaling as the loss.
inline Matrix weighted_bce_grad(const Matrix& logits, const Matrix& targets,
                                const Vector& weights) {
  detail::check_bce_args(logits, targets, weights);
  Matrix grad(logits.rows(), logits.cols());
  const Scalar scale = 1.0 / static_cast<Scalar>(logits.size());
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const Scalar s = detail::sigmoid(logits(i, c));
      const Scalar y = targets(i, c);
      grad(i, c) = scale * (weights[c] * y * (s - 1.0) + (1.0 - y) * s);
    }
  return grad;
}

// Mean softmax cross-entropy over the batch; labels index the logit columns.
inline Scalar domain_ce(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
    throw std::invalid_argument("domain_ce: label count mismatch");
  if (logits.rows() == 0) throw std::invalid_argument("domain_ce: empty batch");
  Scalar sum = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols())
      throw std::out_of_range("domain_ce: label " + std::to_string(y) +
                              " outside [0, " + std::to_string(logits.cols()) +
                              ")");
    const Scalar m = logits.row(i).maxCoeff();
    Scalar lse = 0.0;
    for (Eigen::Index d = 0; d < logits.cols(); ++d)
      lse += std::exp(logits(i, d) - m);
    sum += m + std::log(lse) - logits(i, y);
  }
  return sum / static_cast<Scalar>(logits.rows());
}

// (softmax − one-hot)/N
inline Matrix domain_ce_grad(const Matrix& logits,
                             const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
    throw std::invalid_argument("domain_ce_grad: label count mismatch");
  Matrix grad(logits.rows(), logits.cols());
  const Scalar scale = 1.0 / static_cast<Scalar>(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols())
      throw std::out_of_range("domain_ce_grad: label out of range");
    const Scalar m = logits.row(i).maxCoeff();
    Scalar z = 0.0;
    for (Eigen::Index d = 0; d < logits.cols(); ++d)
      z += std::exp(logits(i, d) - m);
    for (Eigen::Index d = 0; d < logits.cols(); ++d)
      grad(i, d) = scale * std::exp(logits(i, d) - m) / z;
    grad(i, y) -= scale;
  }
  return grad;
}

// ‖W − I‖²_F, the penalty keeping the transformation near identity.
inline Scalar transform_regularizer(const Matrix& w) {
  if (w.rows() != w.cols())
    throw std::invalid_argument("transform_regularizer: matrix not square");
  return (w - Matrix::Identity(w.rows(), w.cols())).squaredNorm();
}

inline Matrix transform_regularizer_grad(const Matrix& w) {
  if (w.rows() != w.cols())
    throw std::invalid_argument("transform_regularizer_grad: matrix not square");
  return 2.0 * (w - Matrix::Identity(w.rows(), w.cols()));
}

// Mean over N·H terms of (reconstructed − tanh(x_orig))². The head already
// applied tanh to its own output; the target embedding is squashed here so
// both sides live in (−1,1).
inline Scalar reconstruction_loss(const Matrix& reconstructed,
                                  const Matrix& x_orig) {
  if (reconstructed.rows() != x_orig.rows() ||
      reconstructed.cols() != x_orig.cols())
    throw std::invalid_argument("reconstruction_loss: shape mismatch");
  if (reconstructed.size() == 0)
    throw std::invalid_argument("reconstruction_loss: empty batch");
  return (reconstructed - x_orig.array().tanh().matrix()).squaredNorm() /
         static_cast<Scalar>(reconstructed.size());
}

// d(reconstruction_loss)/d(reconstructed)
inline Matrix reconstruction_loss_grad(const Matrix& reconstructed,
                                       const Matrix& x_orig) {
  if (reconstructed.rows() != x_orig.rows() ||
      reconstructed.cols() != x_orig.cols())
    throw std::invalid_argument("reconstruction_loss_grad: shape mismatch");
  return 2.0 / static_cast<Scalar>(reconstructed.size()) *
         (reconstructed - x_orig.array().tanh().matrix());
}

struct LossHyperParams {
  Scalar lambda_rec = 0.0;
  bool trans_enabled = true;  // false for the "no transformation layer" presets
  Scalar lambda_trans = 0.0;
  Scalar gamma = 1.0;
};

struct ScheduleState {
  int current_epoch = 0;
  int warmup_epochs = 0;
  int total_epochs = 1;
  Scalar lr_init = 5e-5;
  Scalar alpha = 10.0;
  Scalar beta = 0.25;
};

// λ^D = 2/(1 + e^{−γ·p}) − 1 with p = (epoch − warmup)/total, forced to 0
// for the whole warm-up (the adversary is inactive, not merely down-weighted).
inline Scalar lambda_d(const ScheduleState& state, Scalar gamma) {
  if (state.total_epochs <= 0)
    throw std::invalid_argument("lambda_d: total_epochs must be positive");
  if (state.current_epoch < state.warmup_epochs) return 0.0;
  const Scalar p =
      static_cast<Scalar>(state.current_epoch - state.warmup_epochs) /
      static_cast<Scalar>(state.total_epochs);
  return 2.0 / (1.0 + std::exp(-gamma * p)) - 1.0;
}

// lr = lr_init / (1 + α·p)^β with p = epoch/total
inline Scalar lr_at(const ScheduleState& state) {
  if (state.total_epochs <= 0)
    throw std::invalid_argument("lr_at: total_epochs must be positive");
  const Scalar p = static_cast<Scalar>(state.current_epoch) /
                   static_cast<Scalar>(state.total_epochs);
  return state.lr_init / std::pow(1.0 + state.alpha * p, state.beta);
}

// The logged scalar L = λ^rec·L^rec + λ^trans·L^trans + L^MF − λ^D·L^D.
// The sign flip on L^D is realized by the gradient reversal layer during
// optimization; this function only composes the reported value.
inline Scalar total_loss(Scalar l_rec, Scalar l_trans, Scalar l_mf,
                         Scalar l_d, const LossHyperParams& hp,
                         Scalar lambda_d_val) {
  const Scalar trans_term =
      hp.trans_enabled ? hp.lambda_trans * l_trans : 0.0;
  return hp.lambda_rec * l_rec + trans_term + l_mf - lambda_d_val * l_d;
}

}  // namespace damf
