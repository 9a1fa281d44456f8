#include "damf/training.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "damf/evaluation.hpp"
#include "damf/probe.hpp"

namespace damf {

namespace {

Matrix gaussian(Rng& rng, int rows, int cols, Scalar stddev) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

std::vector<const Document*> labeled_train_pool(const Corpus& corpus) {
  std::vector<const Document*> pool;
  for (const Document& d : corpus.documents)
    if (d.labels && d.split == Split::train) pool.push_back(&d);
  return pool;
}

std::vector<const Document*> whole_pool(const Corpus& corpus) {
  std::vector<const Document*> pool;
  for (const Document& d : corpus.documents) pool.push_back(&d);
  return pool;
}

// Tokenizes each document at most once per run.
class SequenceCache {
 public:
  SequenceCache(const EncoderConfig& config, const Vocabulary& vocab)
      : config_(config), vocab_(vocab) {}

  const TokenSequence& of(const Document* doc) {
    auto it = cache_.find(doc);
    if (it == cache_.end())
      it = cache_
               .emplace(doc,
                        tokenize_truncate(doc->processed_text, config_, vocab_))
               .first;
    return it->second;
  }

 private:
  const EncoderConfig& config_;
  const Vocabulary& vocab_;
  std::unordered_map<const Document*, TokenSequence> cache_;
};

struct ValExample {
  const Document* doc;
  int domain;
};

// Weighted F1 of `logits_fn` over a validation set; 0.0 when the set has no
// positive gold labels at all (weighted F1 is undefined there).
Scalar validation_f1(
    const std::vector<ValExample>& examples,
    const std::function<Vector(const Document*, int domain)>& logits_fn) {
  if (examples.empty())
    throw std::logic_error("validation_f1: empty validation set");
  PredictionSet set;
  set.logits = Matrix(static_cast<Eigen::Index>(examples.size()), kNumClasses);
  set.gold = Matrix::Zero(static_cast<Eigen::Index>(examples.size()),
                          kNumClasses);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    set.logits.row(idx) = logits_fn(examples[i].doc, examples[i].domain)
                              .transpose();
    for (int c = 0; c < kNumClasses; ++c)
      if (examples[i].doc->labels->flags[static_cast<std::size_t>(c)])
        set.gold(idx, c) = 1.0;
  }
  const ClassReport report = per_class_prf(set);
  long total_support = 0;
  for (long s : report.support) total_support += s;
  if (total_support == 0) return 0.0;
  return weighted_f1(report);
}

ScheduleState schedule_at(const TrainOptions& opts, int epoch) {
  ScheduleState st;
  st.current_epoch = epoch;
  st.warmup_epochs = opts.warmup_epochs;
  st.total_epochs = opts.total_epochs;
  st.lr_init = opts.lr_init;
  return st;
}

void check_common_options(const TrainOptions& opts, const Vocabulary& vocab) {
  if (opts.total_epochs < 1)
    throw std::invalid_argument("train: total_epochs must be ≥ 1");
  if (opts.warmup_epochs < 0 || opts.warmup_epochs > opts.total_epochs)
    throw std::invalid_argument("train: warmup_epochs outside [0, total]");
  if (opts.batch_size < 1)
    throw std::invalid_argument("train: batch_size must be ≥ 1");
  if (!(opts.val_fraction > 0.0 && opts.val_fraction < 1.0))
    throw std::invalid_argument("train: val_fraction outside (0,1)");
  if (vocab.size() <= Vocabulary::kClsId)
    throw std::invalid_argument("train: vocabulary missing special tokens");
}

}  // namespace

std::vector<MixedBatch> build_mixed_batches(
    const std::vector<const Corpus*>& sources, const Corpus& target_unlabeled,
    int batch_size, std::uint64_t seed) {
  const int num_sources = static_cast<int>(sources.size());
  const int num_domains = num_sources + 1;
  if (num_sources < 1)
    throw std::invalid_argument("build_mixed_batches: need ≥1 source corpus");
  if (batch_size < num_domains)
    throw std::invalid_argument(
        "build_mixed_batches: batch_size smaller than the domain count");

  // quota: floor(batch/D) each, remainder to the lowest domain indices
  std::vector<int> quota(static_cast<std::size_t>(num_domains),
                         batch_size / num_domains);
  for (int d = 0; d < batch_size % num_domains; ++d)
    ++quota[static_cast<std::size_t>(d)];

  std::vector<std::vector<const Document*>> pools;
  for (const Corpus* c : sources) pools.push_back(labeled_train_pool(*c));
  pools.push_back(whole_pool(target_unlabeled));
  for (int d = 0; d < num_domains; ++d)
    if (pools[static_cast<std::size_t>(d)].empty())
      throw std::invalid_argument(
          "build_mixed_batches: empty pool for domain " + std::to_string(d) +
          (d < num_sources ? " (no labeled train documents)" : " (target)"));

  // epoch length: enough batches for the largest pool to be seen once
  int num_batches = 1;
  for (int d = 0; d < num_domains; ++d) {
    const auto need = static_cast<int>(
        (pools[static_cast<std::size_t>(d)].size() +
         static_cast<std::size_t>(quota[static_cast<std::size_t>(d)]) - 1) /
        static_cast<std::size_t>(quota[static_cast<std::size_t>(d)]));
    num_batches = std::max(num_batches, need);
  }

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> order(
      static_cast<std::size_t>(num_domains));
  std::vector<std::size_t> cursor(static_cast<std::size_t>(num_domains), 0);
  for (std::size_t d = 0; d < order.size(); ++d) {
    order[d].resize(pools[d].size());
    for (std::size_t i = 0; i < pools[d].size(); ++i) order[d][i] = i;
    rng.shuffle(order[d]);
  }

  std::vector<MixedBatch> batches(static_cast<std::size_t>(num_batches));
  for (MixedBatch& batch : batches) {
    batch.slots.reserve(static_cast<std::size_t>(batch_size));
    for (int d = 0; d < num_domains; ++d) {
      const auto du = static_cast<std::size_t>(d);
      for (int k = 0; k < quota[du]; ++k) {
        std::size_t idx;
        if (cursor[du] < order[du].size()) {
          idx = order[du][cursor[du]++];
        } else {
          // pool exhausted this epoch: resample with replacement
          idx = static_cast<std::size_t>(rng.below(pools[du].size()));
        }
        BatchSlot slot;
        slot.doc = pools[du][idx];
        slot.domain = d;
        slot.labeled = d < num_sources;
        batch.slots.push_back(slot);
      }
    }
  }
  return batches;
}

namespace {

struct StepStats {
  Scalar mf = 0.0, rec = 0.0, trans = 0.0, dom = 0.0, total = 0.0;
};

StepStats damf_step(DamfModel& model, Adam& adam, const MixedBatch& batch,
                    const Vector& class_weights, const LossHyperParams& hp,
                    Scalar lam_d, Scalar lr, bool warmup, Rng& drop_rng,
                    SequenceCache& seqs, int epoch, int batch_index) {
  // during warm-up the unlabeled target slices sit the step out entirely
  std::vector<const BatchSlot*> active;
  for (const BatchSlot& s : batch.slots)
    if (!warmup || s.labeled) active.push_back(&s);
  if (active.empty())
    throw std::logic_error("damf_step: batch with no participating examples");

  std::vector<TokenSequence> inputs;
  std::vector<int> domains;
  std::vector<int> labeled_rows;
  std::vector<int> labeled_domains;
  std::vector<MoralLabelVector> labels;
  inputs.reserve(active.size());
  for (std::size_t i = 0; i < active.size(); ++i) {
    inputs.push_back(seqs.of(active[i]->doc));
    domains.push_back(active[i]->domain);
    if (active[i]->labeled) {
      labeled_rows.push_back(static_cast<int>(i));
      labeled_domains.push_back(active[i]->domain);
      labels.push_back(*active[i]->doc->labels);
    }
  }

  const Matrix x_bert = model.encode_batch(inputs);
  const Matrix x_trans = model.transform_batch(x_bert);

  StepStats stats;
  Matrix mf_logits, targets;
  const auto num_labeled = static_cast<Eigen::Index>(labeled_rows.size());
  if (num_labeled > 0) {
    Matrix x_labeled(num_labeled, x_trans.cols());
    for (Eigen::Index k = 0; k < num_labeled; ++k)
      x_labeled.row(k) = x_trans.row(labeled_rows[static_cast<std::size_t>(k)]);
    targets = labels_to_matrix(labels);
    mf_logits = model.mf_logits(x_labeled, labeled_domains, true, &drop_rng);
    stats.mf = weighted_bce(mf_logits, targets, class_weights);
  }

  const Matrix recon = model.reconstruct_batch(x_bert);
  // before the reference snapshot exists, the live encoder output doubles as
  // the (constant) reconstruction target
  const Matrix x_orig =
      model.has_reference() ? model.encode_reference_batch(inputs) : x_bert;
  stats.rec = reconstruction_loss(recon, x_orig);
  stats.trans = model.transform_regularizer();

  Matrix dom_logits;
  if (!warmup) {
    dom_logits = model.domain_logits(x_trans, lam_d, true, &drop_rng);
    stats.dom = domain_ce(dom_logits, domains);
  }

  stats.total = total_loss(stats.rec, stats.trans, stats.mf, stats.dom, hp,
                           lam_d);
  if (!std::isfinite(stats.total))
    throw std::runtime_error("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));

  model.zero_grad();
  Matrix dx_trans = Matrix::Zero(x_trans.rows(), x_trans.cols());
  if (num_labeled > 0) {
    const Matrix dmf = weighted_bce_grad(mf_logits, targets, class_weights);
    const Matrix dxl = model.mf_backward(dmf);
    for (Eigen::Index k = 0; k < num_labeled; ++k)
      dx_trans.row(labeled_rows[static_cast<std::size_t>(k)]) += dxl.row(k);
  }
  if (!warmup) {
    const Matrix ddom = domain_ce_grad(dom_logits, domains);
    dx_trans += model.domain_backward(ddom);  // GRL: arrives scaled by −λ^D
  }
  Matrix dx_bert = model.transform_backward(dx_trans);
  {
    const Matrix drecon =
        hp.lambda_rec * reconstruction_loss_grad(recon, x_orig);
    dx_bert += model.recon_backward(drecon);
  }
  model.add_transform_regularizer_grad(hp.trans_enabled ? hp.lambda_trans
                                                        : 0.0);
  model.encoder_backward(dx_bert);
  adam.step(lr);
  return stats;
}

// Held-out accuracy of a fresh softmax probe fit on current x_trans features.
Scalar epoch_domain_probe(DamfModel& model,
                          const std::vector<std::vector<const Document*>>& pools,
                          SequenceCache& seqs, const TrainOptions& opts,
                          int epoch) {
  const int num_domains = static_cast<int>(pools.size());
  Rng rng(mix_seed(opts.seed, 5000 + static_cast<std::uint64_t>(epoch)));

  std::vector<Vector> train_feats, eval_feats;
  std::vector<int> train_labels, eval_labels;
  for (int d = 0; d < num_domains; ++d) {
    const auto& pool = pools[static_cast<std::size_t>(d)];
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const auto take = std::min<std::size_t>(
        pool.size(), static_cast<std::size_t>(opts.probe_sample_cap));
    const std::size_t eval_count = take >= 2 ? std::max<std::size_t>(1, take / 5) : 0;
    for (std::size_t i = 0; i < take; ++i) {
      const Document* doc = pool[order[i]];
      Vector feat = model.transform(model.encode(seqs.of(doc)));
      if (i < take - eval_count) {
        train_feats.push_back(std::move(feat));
        train_labels.push_back(d);
      } else {
        eval_feats.push_back(std::move(feat));
        eval_labels.push_back(d);
      }
    }
  }
  if (train_feats.empty() || eval_feats.empty()) return 0.0;

  const auto pack = [](const std::vector<Vector>& rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return m;
  };
  ProbeConfig probe_cfg;
  probe_cfg.iters = opts.probe_iters;
  // condition on train-split statistics; raw x_trans magnitudes put the
  // probe's full-batch GD at its stability edge
  const Matrix train_x = pack(train_feats);
  const ColumnStats stats = column_stats(train_x);
  const Matrix w =
      fit_softmax_probe(standardize_columns(train_x, stats), train_labels,
                        num_domains, probe_cfg);
  return probe_accuracy(
      softmax_probe_predict(w, standardize_columns(pack(eval_feats), stats)),
      eval_labels);
}

}  // namespace

TrainResult train_damf(const std::vector<Corpus>& sources, const Corpus& target,
                       const Vocabulary& vocab, const TrainOptions& opts,
                       const EpochCallback& on_epoch) {
  check_common_options(opts, vocab);
  if (sources.empty())
    throw std::invalid_argument("train_damf: no source corpora");
  if (target.documents.empty())
    throw std::invalid_argument("train_damf: empty target corpus");
  for (const Corpus& c : sources) {
    if (c.num_labeled() == 0)
      throw std::invalid_argument("train_damf: source corpus '" + c.name +
                                  "' has no labeled documents");
    if (c.name == target.name)
      throw std::invalid_argument(
          "train_damf: target corpus also appears as a source: " + c.name);
  }
  const int num_sources = static_cast<int>(sources.size());
  const int num_domains = num_sources + 1;
  if (opts.batch_size < num_domains)
    throw std::invalid_argument("train_damf: batch_size below domain count");

  // 80/20 split of each labeled corpus; val keeps only labeled docs
  std::vector<Corpus> train_parts, val_parts;
  train_parts.reserve(static_cast<std::size_t>(num_sources));
  val_parts.reserve(static_cast<std::size_t>(num_sources));
  for (int i = 0; i < num_sources; ++i) {
    auto [tr, va] = split_train_val(
        sources[static_cast<std::size_t>(i)], 1.0 - opts.val_fraction,
        mix_seed(opts.seed, 100 + static_cast<std::uint64_t>(i)));
    train_parts.push_back(std::move(tr));
    val_parts.push_back(std::move(va));
  }

  // class weights from the merged labeled training split, fixed before training
  Vector class_weights;
  if (opts.use_class_weights) {
    LabelCounts counts;
    for (const Corpus& part : train_parts)
      for (const Document& d : part.documents)
        if (d.labels && d.split == Split::train)
          for (int c = 0; c < kNumClasses; ++c) {
            auto& bucket = d.labels->flags[static_cast<std::size_t>(c)]
                               ? counts.positives
                               : counts.negatives;
            ++bucket[static_cast<std::size_t>(c)];
          }
    class_weights = compute_class_weights(counts);
  } else {
    class_weights = Vector::Ones(kNumClasses);
  }

  ModelConfig model_config = opts.model;
  model_config.num_domains = num_domains;
  model_config.trans_enabled = opts.hp.trans_enabled;
  DamfModel model(model_config, vocab.size(), opts.seed);
  if (opts.reference == ReferenceMode::init) model.snapshot_reference();

  Adam adam(model.params(), opts.adam);
  Rng drop_rng(mix_seed(opts.seed, 1));
  SequenceCache seqs(model_config.encoder, vocab);

  std::vector<const Corpus*> source_ptrs;
  for (const Corpus& part : train_parts) source_ptrs.push_back(&part);

  std::vector<ValExample> val_examples;
  for (int i = 0; i < num_sources; ++i)
    for (const Document& d : val_parts[static_cast<std::size_t>(i)].documents)
      if (d.labels) val_examples.push_back({&d, i});
  if (val_examples.empty())
    throw std::invalid_argument("train_damf: empty validation split");

  std::vector<std::vector<const Document*>> probe_pools;
  for (const Corpus& part : train_parts)
    probe_pools.push_back(labeled_train_pool(part));
  probe_pools.push_back(whole_pool(target));

  std::vector<DomainId> registry;
  for (int i = 0; i < num_sources; ++i)
    registry.push_back(DomainId{i, sources[static_cast<std::size_t>(i)].name});
  registry.push_back(DomainId{num_sources, target.name});

  std::optional<DamfModel> best;
  int best_epoch = -1;
  Scalar best_f1 = -1.0;
  std::vector<EpochLog> log;

  for (int epoch = 0; epoch < opts.total_epochs; ++epoch) {
    const ScheduleState st = schedule_at(opts, epoch);
    const Scalar lr = lr_at(st);
    const Scalar lam_d = lambda_d(st, opts.hp.gamma);
    const bool warmup = epoch < opts.warmup_epochs;
    if (!warmup && opts.reference == ReferenceMode::warmup_end &&
        !model.has_reference())
      model.snapshot_reference();

    const auto batches = build_mixed_batches(
        source_ptrs, target, opts.batch_size,
        mix_seed(opts.seed, 1000 + static_cast<std::uint64_t>(epoch)));

    EpochLog row;
    row.epoch = epoch;
    row.lambda_d = lam_d;
    row.lr = lr;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const StepStats stats =
          damf_step(model, adam, batches[b], class_weights, opts.hp, lam_d, lr,
                    warmup, drop_rng, seqs, epoch, static_cast<int>(b));
      row.loss_mf += stats.mf;
      row.loss_rec += stats.rec;
      row.loss_trans += stats.trans;
      row.loss_domain += stats.dom;
      row.loss_total += stats.total;
    }
    const auto inv = 1.0 / static_cast<Scalar>(batches.size());
    row.loss_mf *= inv;
    row.loss_rec *= inv;
    row.loss_trans *= inv;
    row.loss_domain *= inv;
    row.loss_total *= inv;

    row.val_weighted_f1 = validation_f1(
        val_examples, [&](const Document* doc, int domain) {
          const Vector x = model.transform(model.encode(seqs.of(doc)));
          return model.mf_forward(
              x, registry[static_cast<std::size_t>(domain)]);
        });
    row.domain_probe_acc =
        epoch_domain_probe(model, probe_pools, seqs, opts, epoch);

    if (row.val_weighted_f1 > best_f1) {
      best_f1 = row.val_weighted_f1;
      best_epoch = epoch;
      best = model;
    }
    log.push_back(row);
    if (on_epoch) on_epoch(row);
  }

  TrainResult result{std::move(*best), std::move(log), best_epoch, best_f1,
                     std::move(class_weights), std::move(registry)};
  return result;
}

BaselineModel::BaselineModel(const EncoderConfig& encoder_config,
                             int vocab_size, Scalar dropout_rate,
                             std::uint64_t seed)
    : encoder_(encoder_config, vocab_size, seed),
      dropout_rate_(dropout_rate) {
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw std::invalid_argument("BaselineModel: dropout_rate outside [0,1)");
  Rng rng(mix_seed(seed, 7));
  w_ = Param("head.w",
             gaussian(rng, encoder_config.hidden_size, kNumClasses, 0.02));
  b_ = Param("head.b", Matrix::Zero(1, kNumClasses));
}

Matrix BaselineModel::forward(const std::vector<TokenSequence>& batch,
                              bool training, Rng* rng) {
  if (training && dropout_rate_ > 0.0 && rng == nullptr)
    throw std::logic_error("BaselineModel: training forward needs an rng");
  Matrix feat = encoder_.forward(batch);
  cached_training_ = training;
  if (training && dropout_rate_ > 0.0) {
    const Scalar keep = 1.0 - dropout_rate_;
    cached_mask_ = Matrix(feat.rows(), feat.cols());
    for (Eigen::Index i = 0; i < feat.rows(); ++i)
      for (Eigen::Index j = 0; j < feat.cols(); ++j)
        cached_mask_(i, j) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    feat = feat.cwiseProduct(cached_mask_);
  } else {
    cached_mask_.resize(0, 0);
  }
  cached_feat_ = feat;
  return (feat * w_.value).rowwise() + b_.value.row(0);
}

void BaselineModel::backward(const Matrix& dlogits) {
  if (dlogits.rows() != cached_feat_.rows() ||
      dlogits.cols() != w_.value.cols())
    throw std::logic_error("BaselineModel::backward: no matching forward");
  w_.grad += cached_feat_.transpose() * dlogits;
  b_.grad.row(0) += dlogits.colwise().sum();
  Matrix dfeat = dlogits * w_.value.transpose();
  if (cached_training_ && cached_mask_.size() > 0)
    dfeat = dfeat.cwiseProduct(cached_mask_);
  encoder_.backward(dfeat);
}

Vector BaselineModel::predict(const TokenSequence& seq) const {
  const Vector feat = encoder_.encode(seq);
  return ((feat.transpose() * w_.value).row(0) + b_.value.row(0)).transpose();
}

std::vector<Param*> BaselineModel::params() {
  std::vector<Param*> out = encoder_.params();
  out.push_back(&w_);
  out.push_back(&b_);
  return out;
}

void BaselineModel::zero_grad() {
  for (Param* p : params()) p->grad.setZero();
}

BaselineResult train_baseline(const std::vector<Corpus>& sources,
                              const Vocabulary& vocab,
                              const TrainOptions& options,
                              const EpochCallback& on_epoch) {
  TrainOptions opts = options;
  opts.warmup_epochs = 0;  // the baseline has no warm-up phase
  check_common_options(opts, vocab);
  if (sources.empty())
    throw std::invalid_argument("train_baseline: no source corpora");
  for (const Corpus& c : sources)
    if (c.num_labeled() == 0)
      throw std::invalid_argument("train_baseline: source corpus '" + c.name +
                                  "' has no labeled documents");

  std::vector<Corpus> train_parts, val_parts;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    auto [tr, va] =
        split_train_val(sources[i], 1.0 - opts.val_fraction,
                        mix_seed(opts.seed, 100 + static_cast<std::uint64_t>(i)));
    train_parts.push_back(std::move(tr));
    val_parts.push_back(std::move(va));
  }

  std::vector<const Document*> train_docs;
  for (const Corpus& part : train_parts)
    for (const Document* d : labeled_train_pool(part)) train_docs.push_back(d);
  if (train_docs.empty())
    throw std::invalid_argument("train_baseline: empty training split");

  std::vector<ValExample> val_examples;
  for (const Corpus& part : val_parts)
    for (const Document& d : part.documents)
      if (d.labels) val_examples.push_back({&d, 0});
  if (val_examples.empty())
    throw std::invalid_argument("train_baseline: empty validation split");

  BaselineModel model(opts.model.encoder, vocab.size(),
                      opts.model.dropout_rate, opts.seed);
  Adam adam(model.params(), opts.adam);
  Rng drop_rng(mix_seed(opts.seed, 1));
  Rng shuffle_rng(mix_seed(opts.seed, 2));
  SequenceCache seqs(opts.model.encoder, vocab);
  const Vector ones = Vector::Ones(kNumClasses);

  std::optional<BaselineModel> best;
  int best_epoch = -1;
  Scalar best_f1 = -1.0;
  std::vector<EpochLog> log;

  for (int epoch = 0; epoch < opts.total_epochs; ++epoch) {
    const ScheduleState st = schedule_at(opts, epoch);
    const Scalar lr = lr_at(st);

    std::vector<const Document*> shuffled = train_docs;
    shuffle_rng.shuffle(shuffled);

    EpochLog row;
    row.epoch = epoch;
    row.lr = lr;
    int steps = 0;
    for (std::size_t start = 0; start < shuffled.size();
         start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t stop = std::min(
          shuffled.size(), start + static_cast<std::size_t>(opts.batch_size));
      std::vector<TokenSequence> inputs;
      std::vector<MoralLabelVector> labels;
      for (std::size_t i = start; i < stop; ++i) {
        inputs.push_back(seqs.of(shuffled[i]));
        labels.push_back(*shuffled[i]->labels);
      }
      const Matrix targets = labels_to_matrix(labels);
      const Matrix logits = model.forward(inputs, true, &drop_rng);
      const Scalar loss = weighted_bce(logits, targets, ones);
      if (!std::isfinite(loss))
        throw std::runtime_error(
            "training diverged: non-finite loss at epoch " +
            std::to_string(epoch));
      row.loss_mf += loss;
      row.loss_total += loss;
      ++steps;

      model.zero_grad();
      model.backward(weighted_bce_grad(logits, targets, ones));
      adam.step(lr);
    }
    row.loss_mf /= static_cast<Scalar>(steps);
    row.loss_total /= static_cast<Scalar>(steps);

    row.val_weighted_f1 =
        validation_f1(val_examples, [&](const Document* doc, int) {
          return model.predict(seqs.of(doc));
        });

    if (row.val_weighted_f1 > best_f1) {
      best_f1 = row.val_weighted_f1;
      best_epoch = epoch;
      best = model;
    }
    log.push_back(row);
    if (on_epoch) on_epoch(row);
  }

  BaselineResult result{std::move(*best), std::move(log), best_epoch, best_f1};
  return result;
}

}  // namespace damf
