#include "damf/evaluation.hpp"

#include <cmath>
#include <stdexcept>

namespace damf {

MoralLabelVector binarize(const Vector& logits) {
  if (logits.size() != kNumClasses)
    throw std::invalid_argument("binarize: expected 10 logits");
  MoralLabelVector out;
  for (int c = 0; c < kNumClasses; ++c) {
    if (!std::isfinite(logits[c]))
      throw std::invalid_argument("binarize: non-finite logit");
    out.flags[static_cast<std::size_t>(c)] = logits[c] >= 0.0;
  }
  return out;
}

ClassReport per_class_prf(const PredictionSet& preds) {
  if (preds.logits.rows() == 0)
    throw std::invalid_argument("per_class_prf: empty prediction set");
  if (preds.logits.cols() != kNumClasses || preds.gold.cols() != kNumClasses ||
      preds.gold.rows() != preds.logits.rows())
    throw std::invalid_argument("per_class_prf: shape mismatch");

  std::array<long, kNumClasses> tp{}, fp{}, fn{};
  for (Eigen::Index i = 0; i < preds.logits.rows(); ++i) {
    const MoralLabelVector pred = binarize(preds.logits.row(i).transpose());
    for (int c = 0; c < kNumClasses; ++c) {
      const double g = preds.gold(i, c);
      if (g != 0.0 && g != 1.0)
        throw std::invalid_argument("per_class_prf: gold entries must be 0/1");
      const bool gold = g == 1.0;
      const bool hat = pred.flags[static_cast<std::size_t>(c)];
      if (hat && gold)
        ++tp[static_cast<std::size_t>(c)];
      else if (hat)
        ++fp[static_cast<std::size_t>(c)];
      else if (gold)
        ++fn[static_cast<std::size_t>(c)];
    }
  }

  ClassReport report;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    report.support[c] = tp[c] + fn[c];
    report.precision[c] =
        (tp[c] + fp[c]) > 0 ? static_cast<Scalar>(tp[c]) / (tp[c] + fp[c]) : 0.0;
    report.recall[c] =
        report.support[c] > 0 ? static_cast<Scalar>(tp[c]) / report.support[c]
                              : 0.0;
    const Scalar pr = report.precision[c] + report.recall[c];
    report.f1[c] = pr > 0.0 ? 2.0 * report.precision[c] * report.recall[c] / pr
                            : 0.0;
  }
  return report;
}

Scalar weighted_f1(const ClassReport& report) {
  long total = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) total += report.support[c];
  if (total == 0)
    throw std::invalid_argument("weighted_f1: all class supports are zero");
  Scalar acc = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    acc += static_cast<Scalar>(report.support[c]) * report.f1[c];
  return acc / static_cast<Scalar>(total);
}

SeedAggregate aggregate_seeds(
    const std::vector<std::map<std::string, Scalar>>& runs) {
  if (runs.size() < 2)
    throw std::invalid_argument("aggregate_seeds: need at least 2 runs");
  for (const auto& run : runs)
    if (run.size() != runs.front().size())
      throw std::invalid_argument("aggregate_seeds: metric key mismatch");

  SeedAggregate agg;
  for (const auto& [key, first_val] : runs.front()) {
    Scalar sum = 0.0;
    for (const auto& run : runs) {
      auto it = run.find(key);
      if (it == run.end())
        throw std::invalid_argument("aggregate_seeds: metric key mismatch: " +
                                    key);
      sum += it->second;
    }
    const Scalar mean = sum / static_cast<Scalar>(runs.size());
    Scalar sq = 0.0;
    for (const auto& run : runs) {
      const Scalar d = run.at(key) - mean;
      sq += d * d;
    }
    agg.mean[key] = mean;
    agg.stddev[key] = std::sqrt(sq / static_cast<Scalar>(runs.size()));
  }
  return agg;
}

}  // namespace damf
