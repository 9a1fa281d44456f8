#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "damf/corpus.hpp"
#include "damf/model.hpp"
#include "damf/objective.hpp"
#include "damf/optimizer.hpp"
#include "damf/tokenizer.hpp"

namespace damf {

// Where x_orig comes from: the encoder frozen at the end of the adversary-free
// warm-up (default), or frozen at initialization. During warm-up under
// warmup_end the live encoder output doubles as the (constant) target.
enum class ReferenceMode { warmup_end, init };

struct TrainOptions {
  ModelConfig model;
  LossHyperParams hp;
  int total_epochs = 60;
  int warmup_epochs = 15;
  int batch_size = 64;
  Scalar lr_init = 5e-5;
  std::uint64_t seed = 0;
  bool use_class_weights = true;
  ReferenceMode reference = ReferenceMode::warmup_end;
  Scalar val_fraction = 0.2;  // 80/20 split of the labeled training corpora
  AdamConfig adam;
  int probe_sample_cap = 200;  // per-domain sample for the epoch domain probe
  int probe_iters = 300;
};

struct EpochLog {
  int epoch = 0;
  Scalar loss_mf = 0.0;
  Scalar loss_rec = 0.0;
  Scalar loss_trans = 0.0;
  Scalar loss_domain = 0.0;  // logged as +L^D
  Scalar loss_total = 0.0;
  Scalar lambda_d = 0.0;
  Scalar lr = 0.0;
  Scalar val_weighted_f1 = 0.0;
  // Held-out accuracy of a fresh linear domain probe on current x_trans
  // features — measures how domain-separable the representation still is.
  Scalar domain_probe_acc = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// One slot of a mixed batch. Pointers alias the corpora passed to
// build_mixed_batches and stay valid as long as those do.
struct BatchSlot {
  const Document* doc = nullptr;
  int domain = 0;
  bool labeled = false;
};

struct MixedBatch {
  std::vector<BatchSlot> slots;
};

// Domain-balanced batches: quota floor(batch_size/D) per domain with the
// remainder going to the lowest domain indices. Sources contribute their
// labeled train-split documents; the target contributes every document,
// unlabeled. Pools smaller than the epoch need are resampled with
// replacement. The stream is a pure function of the seed.
std::vector<MixedBatch> build_mixed_batches(
    const std::vector<const Corpus*>& sources, const Corpus& target_unlabeled,
    int batch_size, std::uint64_t seed);

struct TrainResult {
  DamfModel model;  // best-validation checkpoint
  std::vector<EpochLog> log;
  int best_epoch = -1;
  Scalar best_val_f1 = 0.0;
  Vector class_weights;           // as used (all ones when disabled)
  std::vector<DomainId> domains;  // registry: sources in order, then target
};

// Two-phase semi-supervised training: warm-up epochs fit encoder/transform/
// MF/reconstruction on the labeled slices only (the domain head receives no
// updates at all), then the adversary joins with λ^D following its schedule.
// Returns the checkpoint with the best validation weighted F1.
// Throws std::runtime_error on divergence (non-finite loss).
TrainResult train_damf(const std::vector<Corpus>& sources, const Corpus& target,
                       const Vocabulary& vocab, const TrainOptions& opts,
                       const EpochCallback& on_epoch = {});

// Plain fine-tuned encoder + dropout + one linear layer, unweighted BCE.
class BaselineModel {
 public:
  BaselineModel(const EncoderConfig& encoder_config, int vocab_size,
                Scalar dropout_rate, std::uint64_t seed);

  Matrix forward(const std::vector<TokenSequence>& batch, bool training,
                 Rng* rng);
  void backward(const Matrix& dlogits);
  Vector predict(const TokenSequence& seq) const;  // eval-mode logits

  std::vector<Param*> params();
  void zero_grad();
  TinyTransformer& encoder() { return encoder_; }
  const TinyTransformer& encoder() const { return encoder_; }
  Scalar dropout_rate() const { return dropout_rate_; }

 private:
  TinyTransformer encoder_;
  Param w_, b_;
  Scalar dropout_rate_;
  Matrix cached_feat_, cached_mask_;
  bool cached_training_ = false;
};

struct BaselineResult {
  BaselineModel model;  // best-validation checkpoint
  std::vector<EpochLog> log;
  int best_epoch = -1;
  Scalar best_val_f1 = 0.0;
};

// Merged-source fine-tuning for total_epochs (20 in the reference setup) with
// the same lr schedule and best-validation checkpointing. No target corpus,
// no domain machinery, no class weighting.
BaselineResult train_baseline(const std::vector<Corpus>& sources,
                              const Vocabulary& vocab,
                              const TrainOptions& opts,
                              const EpochCallback& on_epoch = {});

}  // namespace damf
