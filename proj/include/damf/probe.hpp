#pragma once

#include <vector>

#include "damf/types.hpp"

namespace damf {

// Linear probes used to measure feature quality rather than to model:
// the diagnostic domain classifier run on frozen features each epoch, and
// the per-partition predictability classifier inside the data filter.
// Both are fit with full-batch gradient descent from a zero init, so a
// given (features, labels) pair always produces the same probe bit for bit.
struct ProbeConfig {
  int iters = 300;
  Scalar lr = 0.5;
};

// Per-column mean/sd used to condition features before probing. The default
// lr above assumes roughly unit-scale inputs; encoder features have row
// norm² ≈ hidden_size, which puts full-batch GD at its stability edge, so
// callers probing such features standardize them first.
struct ColumnStats {
  Vector mean;
  Vector sd;  // floored at 1e-12, so constant columns map to 0
};

ColumnStats column_stats(const Matrix& x);
Matrix standardize_columns(const Matrix& x, const ColumnStats& stats);

// Multinomial softmax regression. Returns weights of shape (F+1)×C with the
// bias in the last row.
Matrix fit_softmax_probe(const Matrix& x, const std::vector<int>& labels,
                         int num_classes, const ProbeConfig& cfg = {});

// Row-wise class scores; prediction is the argmax (ties -> lowest index).
Matrix softmax_probe_scores(const Matrix& w, const Matrix& x);
std::vector<int> softmax_probe_predict(const Matrix& w, const Matrix& x);
Scalar probe_accuracy(const std::vector<int>& predicted,
                      const std::vector<int>& gold);

// Independent logistic regressions, one per output column of gold (0/1).
// Returns (F+1)×C weights; positive prediction ⟺ logit ≥ 0.
Matrix fit_multilabel_probe(const Matrix& x, const Matrix& gold,
                            const ProbeConfig& cfg = {});
Matrix multilabel_probe_logits(const Matrix& w, const Matrix& x);

}  // namespace damf
