#include "damf/probe.hpp"

#include <stdexcept>

namespace damf {

namespace {

Matrix augment(const Matrix& x) {
  Matrix a(x.rows(), x.cols() + 1);
  a.leftCols(x.cols()) = x;
  a.col(x.cols()).setOnes();
  return a;
}

Matrix row_softmax(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Scalar m = z.row(i).maxCoeff();
    p.row(i) = (z.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

}  // namespace

ColumnStats column_stats(const Matrix& x) {
  if (x.rows() == 0) throw std::invalid_argument("column_stats: empty matrix");
  ColumnStats stats;
  stats.mean = x.colwise().mean().transpose();
  stats.sd = ((x.rowwise() - stats.mean.transpose()).array().square())
                 .colwise()
                 .mean()
                 .sqrt()
                 .max(1e-12)
                 .matrix()
                 .transpose();
  return stats;
}

Matrix standardize_columns(const Matrix& x, const ColumnStats& stats) {
  if (x.cols() != stats.mean.size())
    throw std::invalid_argument("standardize_columns: width mismatch");
  return ((x.rowwise() - stats.mean.transpose()).array().rowwise() /
          stats.sd.transpose().array())
      .matrix();
}

Matrix fit_softmax_probe(const Matrix& x, const std::vector<int>& labels,
                         int num_classes, const ProbeConfig& cfg) {
  if (x.rows() == 0) throw std::invalid_argument("probe: empty feature matrix");
  if (static_cast<Eigen::Index>(labels.size()) != x.rows())
    throw std::invalid_argument("probe: label count mismatch");
  if (num_classes < 2) throw std::invalid_argument("probe: need ≥2 classes");

  Matrix onehot = Matrix::Zero(x.rows(), num_classes);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= num_classes)
      throw std::out_of_range("probe: label outside class range");
    onehot(i, y) = 1.0;
  }

  const Matrix xa = augment(x);
  const Scalar inv_n = 1.0 / static_cast<Scalar>(xa.rows());
  Matrix w = Matrix::Zero(xa.cols(), num_classes);
  for (int it = 0; it < cfg.iters; ++it) {
    Matrix p = row_softmax(xa * w);
    w -= cfg.lr * inv_n * (xa.transpose() * (p - onehot));
  }
  return w;
}

Matrix softmax_probe_scores(const Matrix& w, const Matrix& x) {
  if (x.cols() + 1 != w.rows())
    throw std::invalid_argument("probe: feature width mismatch");
  return augment(x) * w;
}

std::vector<int> softmax_probe_predict(const Matrix& w, const Matrix& x) {
  const Matrix scores = softmax_probe_scores(w, x);
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(i, c) > scores(i, best)) best = static_cast<int>(c);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

Scalar probe_accuracy(const std::vector<int>& predicted,
                      const std::vector<int>& gold) {
  if (predicted.size() != gold.size() || predicted.empty())
    throw std::invalid_argument("probe_accuracy: size mismatch or empty");
  long hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == gold[i]) ++hits;
  return static_cast<Scalar>(hits) / static_cast<Scalar>(predicted.size());
}

Matrix fit_multilabel_probe(const Matrix& x, const Matrix& gold,
                            const ProbeConfig& cfg) {
  if (x.rows() == 0) throw std::invalid_argument("probe: empty feature matrix");
  if (gold.rows() != x.rows() || gold.cols() < 1)
    throw std::invalid_argument("probe: gold shape mismatch");
  for (Eigen::Index i = 0; i < gold.rows(); ++i)
    for (Eigen::Index c = 0; c < gold.cols(); ++c)
      if (gold(i, c) != 0.0 && gold(i, c) != 1.0)
        throw std::invalid_argument("probe: gold entries must be 0/1");

  const Matrix xa = augment(x);
  const Scalar inv_n = 1.0 / static_cast<Scalar>(xa.rows());
  Matrix w = Matrix::Zero(xa.cols(), gold.cols());
  for (int it = 0; it < cfg.iters; ++it) {
    Matrix sig = (1.0 + (-(xa * w)).array().exp()).inverse();
    w -= cfg.lr * inv_n * (xa.transpose() * (sig.matrix() - gold));
  }
  return w;
}

Matrix multilabel_probe_logits(const Matrix& w, const Matrix& x) {
  if (x.cols() + 1 != w.rows())
    throw std::invalid_argument("probe: feature width mismatch");
  return augment(x) * w;
}

}  // namespace damf
