#include "damf/tsne.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "damf/rng.hpp"

namespace damf {

namespace {

constexpr Scalar kTinyP = 1e-12;

Matrix squared_distances(const Matrix& x) {
  const Eigen::Index n = x.rows();
  Vector sq = x.rowwise().squaredNorm();
  Matrix d2 = -2.0 * (x * x.transpose());
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();
  // clamp the tiny negatives rounding produces
  return d2.cwiseMax(0.0).eval();
}

void check_perplexity(Eigen::Index n, Scalar perplexity) {
  if (!(perplexity >= 1.0)) {
    throw std::invalid_argument("tsne: perplexity must be at least 1");
  }
  if (static_cast<Scalar>(n - 1) <= perplexity) {
    throw std::invalid_argument(
        "tsne: need more than perplexity+1 points, got " + std::to_string(n));
  }
}

// Student-t numerator (1+d²)⁻¹ with a zero diagonal.
Matrix t_kernel(const Matrix& y) {
  Matrix num = (squared_distances(y).array() + 1.0).inverse().matrix();
  num.diagonal().setZero();
  return num;
}

}  // namespace

Matrix tsne_conditional_affinities(const Matrix& x, Scalar perplexity) {
  const Eigen::Index n = x.rows();
  check_perplexity(n, perplexity);
  const Matrix d2 = squared_distances(x);
  const Scalar target = std::log(perplexity);  // entropy target in nats

  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar beta = 1.0;
    Scalar beta_min = -std::numeric_limits<Scalar>::infinity();
    Scalar beta_max = std::numeric_limits<Scalar>::infinity();

    Vector row = Vector::Zero(n);
    for (int step = 0; step < 50; ++step) {
      Scalar sum = 0.0;
      Scalar weighted_d = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) {
          row(j) = 0.0;
          continue;
        }
        row(j) = std::exp(-beta * d2(i, j));
        sum += row(j);
        weighted_d += row(j) * d2(i, j);
      }
      if (sum < 1e-300) sum = 1e-300;
      const Scalar entropy = std::log(sum) + beta * weighted_d / sum;
      row /= sum;

      const Scalar diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0.0) {  // too wide: sharpen
        beta_min = beta;
        beta = std::isinf(beta_max) ? beta * 2.0 : 0.5 * (beta + beta_max);
      } else {
        beta_max = beta;
        beta = std::isinf(beta_min) ? beta * 0.5 : 0.5 * (beta + beta_min);
      }
    }
    p.row(i) = row.transpose();
  }
  return p;
}

Matrix tsne_affinities(const Matrix& x, Scalar perplexity) {
  Matrix cond = tsne_conditional_affinities(x, perplexity);
  Matrix joint =
      (cond + cond.transpose()) / (2.0 * static_cast<Scalar>(x.rows()));
  return joint.cwiseMax(kTinyP).eval();
}

Scalar tsne_kl(const Matrix& p, const Matrix& y) {
  if (p.rows() != p.cols() || p.rows() != y.rows()) {
    throw std::invalid_argument("tsne_kl: shape mismatch");
  }
  Matrix num = t_kernel(y);
  const Scalar z = num.sum();
  Scalar kl = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (i == j) continue;
      const Scalar q = std::max(num(i, j) / z, kTinyP);
      const Scalar pij = std::max(p(i, j), kTinyP);
      kl += pij * std::log(pij / q);
    }
  }
  return kl;
}

Matrix tsne_embed(const Matrix& x, const TsneConfig& cfg) {
  if (cfg.output_dims < 1) {
    throw std::invalid_argument("tsne: output_dims must be positive");
  }
  if (cfg.iters < 1 || cfg.learning_rate <= 0.0 ||
      cfg.early_exaggeration < 1.0) {
    throw std::invalid_argument("tsne: bad optimizer settings");
  }
  const Eigen::Index n = x.rows();
  Matrix p = tsne_affinities(x, cfg.perplexity);
  p *= cfg.early_exaggeration;

  Rng rng(cfg.seed);
  Matrix y(n, cfg.output_dims);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int d = 0; d < cfg.output_dims; ++d) y(i, d) = 1e-4 * rng.normal();
  }

  Matrix update = Matrix::Zero(n, cfg.output_dims);
  Matrix gains = Matrix::Ones(n, cfg.output_dims);

  for (int iter = 0; iter < cfg.iters; ++iter) {
    Matrix num = t_kernel(y);
    const Scalar z = num.sum();
    Matrix q = (num / z).cwiseMax(kTinyP);

    // Σ_j (p−q)·num·(y_i − y_j) via the row-sum trick
    Matrix l = (p - q).cwiseProduct(num);
    Vector row_sums = l.rowwise().sum();
    Matrix grad = 4.0 * (row_sums.asDiagonal() * y - l * y);

    const Scalar momentum =
        iter < cfg.momentum_switch_iter ? 0.5 : 0.8;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int d = 0; d < cfg.output_dims; ++d) {
        const bool same_dir = (grad(i, d) > 0.0) == (update(i, d) > 0.0);
        gains(i, d) = same_dir ? gains(i, d) * 0.8 : gains(i, d) + 0.2;
        if (gains(i, d) < 0.01) gains(i, d) = 0.01;
      }
    }
    update = momentum * update -
             cfg.learning_rate * gains.cwiseProduct(grad);
    y += update;
    y.rowwise() -= y.colwise().mean();

    if (iter + 1 == cfg.exaggeration_iters) p /= cfg.early_exaggeration;
  }
  return y;
}

std::vector<TsnePoint> tsne_points(
    const std::vector<const Corpus*>& corpora,
    const std::function<Vector(const Document&)>& embed, int sample_size,
    std::uint64_t seed, const TsneConfig& cfg) {
  if (corpora.empty()) throw std::invalid_argument("tsne: no corpora");
  if (sample_size < 1) {
    throw std::invalid_argument("tsne: sample_size must be positive");
  }

  std::vector<const Document*> docs;
  std::vector<std::string> domains;
  for (std::size_t c = 0; c < corpora.size(); ++c) {
    const Corpus& corpus = *corpora[c];
    if (corpus.documents.size() < static_cast<std::size_t>(sample_size)) {
      throw std::invalid_argument(
          "tsne: sample of " + std::to_string(sample_size) + " exceeds " +
          corpus.name + " (" + std::to_string(corpus.documents.size()) + ")");
    }
    std::vector<std::size_t> order(corpus.documents.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, 2000 + c));
    rng.shuffle(order);
    for (int i = 0; i < sample_size; ++i) {
      docs.push_back(&corpus.documents[order[static_cast<std::size_t>(i)]]);
      domains.push_back(corpus.domain.name);
    }
  }

  Matrix features(static_cast<Eigen::Index>(docs.size()), 0);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Vector v = embed(*docs[i]);
    if (features.cols() == 0) {
      features.resize(static_cast<Eigen::Index>(docs.size()), v.size());
    }
    if (v.size() != features.cols()) {
      throw std::invalid_argument("tsne: embed returned inconsistent sizes");
    }
    features.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }

  TsneConfig local = cfg;
  local.output_dims = 2;
  local.seed = mix_seed(seed, 3000);
  Matrix y = tsne_embed(features, local);

  std::vector<TsnePoint> points(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    points[i] = {y(static_cast<Eigen::Index>(i), 0),
                 y(static_cast<Eigen::Index>(i), 1), domains[i]};
  }
  return points;
}

void export_tsne(const std::vector<TsnePoint>& points,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write tsne export: " + path);
  out << "x,y,domain\n";
  out.precision(17);
  for (const TsnePoint& p : points) {
    out << p.x << ',' << p.y << ',' << p.domain << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace damf
