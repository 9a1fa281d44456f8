#include "damf/aflite.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "damf/rng.hpp"

namespace damf {

namespace {

void check_config(const AFLiteConfig& cfg) {
  if (cfg.num_partitions < 2) {
    throw std::invalid_argument("aflite: num_partitions must be at least 2");
  }
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw std::invalid_argument("aflite: train_fraction must be in (0,1)");
  }
  if (!(cfg.predictability_threshold > 0.0 &&
        cfg.predictability_threshold <= 1.0)) {
    throw std::invalid_argument("aflite: threshold must be in (0,1]");
  }
  if (cfg.max_remove_per_round < 0) {
    throw std::invalid_argument("aflite: max_remove_per_round must be >= 0");
  }
  if (!(cfg.min_size_fraction > 0.0 && cfg.min_size_fraction <= 1.0)) {
    throw std::invalid_argument("aflite: min_size_fraction must be in (0,1]");
  }
  if (cfg.min_delta_fraction < 0.0) {
    throw std::invalid_argument("aflite: min_delta_fraction must be >= 0");
  }
}

void check_round_size(std::size_t n, const AFLiteConfig& cfg) {
  // the 1e-9 slack keeps exact boundaries (e.g. 2/(1-0.8) = 10) legal
  if (static_cast<double>(n) < 2.0 / (1.0 - cfg.train_fraction) - 1e-9) {
    throw std::invalid_argument(
        "aflite: dataset of size " + std::to_string(n) +
        " is too small for train_fraction " +
        std::to_string(cfg.train_fraction));
  }
}

// Per-position (evaluated, predicted) counts over the rows named by `active`.
std::vector<PredictabilityScore> score_active(
    const Matrix& features, const Matrix& gold, const std::vector<int>& active,
    const AFLiteConfig& cfg, std::uint64_t seed) {
  const std::size_t n = active.size();
  check_round_size(n, cfg);

  std::vector<PredictabilityScore> counts(n);
  const std::size_t n_train =
      static_cast<std::size_t>(cfg.train_fraction * static_cast<double>(n));
  // n ≥ 2/(1−f) guarantees ≥2 held-out rows; the train side needs a check
  // only for very small train fractions.
  if (n_train == 0) {
    throw std::invalid_argument("aflite: empty train side of the partition");
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (int part = 0; part < cfg.num_partitions; ++part) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(part)));
    rng.shuffle(order);

    Matrix train_x(static_cast<Eigen::Index>(n_train), features.cols());
    Matrix train_y(static_cast<Eigen::Index>(n_train), gold.cols());
    for (std::size_t i = 0; i < n_train; ++i) {
      train_x.row(static_cast<Eigen::Index>(i)) = features.row(active[order[i]]);
      train_y.row(static_cast<Eigen::Index>(i)) = gold.row(active[order[i]]);
    }
    Matrix w = fit_multilabel_probe(train_x, train_y, cfg.probe);

    const std::size_t n_held = n - n_train;
    Matrix held_x(static_cast<Eigen::Index>(n_held), features.cols());
    for (std::size_t i = 0; i < n_held; ++i) {
      held_x.row(static_cast<Eigen::Index>(i)) =
          features.row(active[order[n_train + i]]);
    }
    Matrix logits = multilabel_probe_logits(w, held_x);
    for (std::size_t i = 0; i < n_held; ++i) {
      const std::size_t pos = order[n_train + i];
      bool match = true;
      for (Eigen::Index c = 0; c < gold.cols(); ++c) {
        bool flag = logits(static_cast<Eigen::Index>(i), c) >= 0.0;
        bool truth = gold(active[pos], c) != 0.0;
        if (flag != truth) {
          match = false;
          break;
        }
      }
      ++counts[pos].evaluated;
      if (match) ++counts[pos].predicted;
    }
  }
  return counts;
}

void check_inputs(const Matrix& features, const Matrix& gold,
                  const std::vector<std::string>& ids) {
  if (features.rows() != gold.rows() ||
      features.rows() != static_cast<Eigen::Index>(ids.size())) {
    throw std::invalid_argument(
        "aflite: features, gold, and ids must agree in length");
  }
  if (gold.cols() != kNumClasses) {
    throw std::invalid_argument("aflite: gold must have 10 columns");
  }
}

}  // namespace

std::map<std::string, PredictabilityScore> aflite_round(
    const Matrix& features, const Matrix& gold,
    const std::vector<std::string>& ids, const AFLiteConfig& cfg,
    std::uint64_t seed) {
  check_config(cfg);
  check_inputs(features, gold, ids);

  std::vector<int> active(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) active[i] = static_cast<int>(i);
  std::vector<PredictabilityScore> counts =
      score_active(features, gold, active, cfg, seed);

  std::map<std::string, PredictabilityScore> scores;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (counts[i].evaluated > 0) scores[ids[i]] = counts[i];
  }
  return scores;
}

AFLiteResult aflite_filter(const Matrix& features, const Matrix& gold,
                           const std::vector<std::string>& ids,
                           const AFLiteConfig& cfg, std::uint64_t seed) {
  check_config(cfg);
  check_inputs(features, gold, ids);
  check_round_size(ids.size(), cfg);

  const std::size_t n0 = ids.size();
  const std::size_t floor_size = static_cast<std::size_t>(
      std::ceil(cfg.min_size_fraction * static_cast<double>(n0)));

  std::vector<int> active(n0);
  for (std::size_t i = 0; i < n0; ++i) active[i] = static_cast<int>(i);

  AFLiteResult result;
  while (active.size() > floor_size) {
    const std::size_t pre = active.size();
    std::vector<PredictabilityScore> counts = score_active(
        features, gold, active, cfg,
        mix_seed(seed, static_cast<std::uint64_t>(result.rounds)));
    ++result.rounds;

    std::size_t k = cfg.max_remove_per_round > 0
                        ? static_cast<std::size_t>(cfg.max_remove_per_round)
                        : (pre + 19) / 20;  // ⌈0.05·pre⌉

    // candidates: score ≥ τ, highest first, ties toward the lowest row index
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < pre; ++i) {
      if (counts[i].evaluated > 0 &&
          counts[i].value() >= cfg.predictability_threshold) {
        candidates.push_back(i);
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [&](std::size_t a, std::size_t b) {
                if (counts[a].value() != counts[b].value()) {
                  return counts[a].value() > counts[b].value();
                }
                return active[a] < active[b];
              });

    const std::size_t remove_n =
        std::min({k, candidates.size(), pre - floor_size});
    if (remove_n > 0) {
      std::vector<bool> drop(pre, false);
      for (std::size_t i = 0; i < remove_n; ++i) drop[candidates[i]] = true;
      std::vector<int> next;
      next.reserve(pre - remove_n);
      for (std::size_t i = 0; i < pre; ++i) {
        if (!drop[i]) next.push_back(active[i]);
      }
      active = std::move(next);
      result.sizes.push_back(active.size());
    }
    if (static_cast<double>(remove_n) <
        cfg.min_delta_fraction * static_cast<double>(pre)) {
      break;
    }
  }

  result.kept_indices = active;
  result.kept_ids.reserve(active.size());
  for (int i : active) result.kept_ids.push_back(ids[static_cast<std::size_t>(i)]);
  return result;
}

}  // namespace damf
