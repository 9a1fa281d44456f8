#include "damf/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "damf/rng.hpp"

namespace damf {

namespace {
constexpr Scalar kLnEps = 1e-5;
}

TokenSequence tokenize_truncate(const std::string& text,
                                const EncoderConfig& config,
                                const Vocabulary& vocab) {
  if (config.max_len < 1)
    throw std::invalid_argument("tokenize_truncate: max_len must be >= 1");
  TokenSequence seq;
  seq.ids.reserve(static_cast<std::size_t>(config.max_len));
  seq.ids.push_back(Vocabulary::kClsId);
  for (const auto& tok : split_tokens(text)) {
    if (static_cast<int>(seq.ids.size()) >= config.max_len) break;
    seq.ids.push_back(vocab.id(tok));
  }
  seq.length = static_cast<int>(seq.ids.size());
  seq.ids.resize(static_cast<std::size_t>(config.max_len), Vocabulary::kPadId);
  return seq;
}

TinyTransformer::TinyTransformer(const EncoderConfig& config, int vocab_size,
                                 std::uint64_t seed)
    : config_(config), vocab_size_(vocab_size) {
  if (config.kind != EncoderConfig::Kind::tiny_transformer)
    throw std::invalid_argument(
        "TinyTransformer: pretrained_transformer weights are an external "
        "artifact; this build constructs tiny_transformer encoders only");
  if (config.hidden_size <= 0 || config.max_len <= 0 ||
      config.num_layers <= 0 || config.ffn_multiplier <= 0)
    throw std::invalid_argument("TinyTransformer: non-positive dimension");
  if (vocab_size < 3)
    throw std::invalid_argument("TinyTransformer: vocabulary too small");

  const int h = config.hidden_size;
  const int f = h * config.ffn_multiplier;
  Rng rng(seed);
  auto init = [&](const std::string& name, int rows, int cols, bool zero) {
    Matrix m(rows, cols);
    if (zero) {
      m.setZero();
    } else {
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, 0.02);
    }
    return Param(name, std::move(m));
  };

  embedding_ = init("encoder.embedding", vocab_size, h, false);
  position_ = init("encoder.position", config.max_len, h, false);
  for (int l = 0; l < config.num_layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l) + ".";
    Layer layer;
    layer.wq = init(p + "wq", h, h, false);
    layer.bq = init(p + "bq", 1, h, true);
    layer.wk = init(p + "wk", h, h, false);
    layer.bk = init(p + "bk", 1, h, true);
    layer.wv = init(p + "wv", h, h, false);
    layer.bv = init(p + "bv", 1, h, true);
    layer.wo = init(p + "wo", h, h, false);
    layer.bo = init(p + "bo", 1, h, true);
    layer.ln1_g = Param(p + "ln1_g", Matrix::Ones(1, h));
    layer.ln1_b = init(p + "ln1_b", 1, h, true);
    layer.w1 = init(p + "w1", h, f, false);
    layer.b1 = init(p + "b1", 1, f, true);
    layer.w2 = init(p + "w2", f, h, false);
    layer.b2 = init(p + "b2", 1, h, true);
    layer.ln2_g = Param(p + "ln2_g", Matrix::Ones(1, h));
    layer.ln2_b = init(p + "ln2_b", 1, h, true);
    layers_.push_back(std::move(layer));
  }
}

std::vector<Param*> TinyTransformer::params() {
  std::vector<Param*> out = {&embedding_, &position_};
  for (auto& l : layers_)
    for (Param* p : {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo,
                     &l.ln1_g, &l.ln1_b, &l.w1, &l.b1, &l.w2, &l.b2, &l.ln2_g,
                     &l.ln2_b})
      out.push_back(p);
  return out;
}

std::vector<const Param*> TinyTransformer::params() const {
  auto mutable_params = const_cast<TinyTransformer*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

void TinyTransformer::zero_grad() {
  for (Param* p : params()) p->grad.setZero();
}

void TinyTransformer::check_sequence(const TokenSequence& seq) const {
  if (seq.length < 1 || seq.length > config_.max_len)
    throw std::invalid_argument("TinyTransformer: sequence length " +
                                std::to_string(seq.length) +
                                " outside [1, max_len]");
  if (static_cast<int>(seq.ids.size()) < seq.length)
    throw std::invalid_argument("TinyTransformer: ids shorter than length");
  for (int t = 0; t < seq.length; ++t)
    if (seq.ids[static_cast<std::size_t>(t)] < 0 ||
        seq.ids[static_cast<std::size_t>(t)] >= vocab_size_)
      throw std::invalid_argument("TinyTransformer: token id " +
                                  std::to_string(seq.ids[static_cast<std::size_t>(t)]) +
                                  " outside vocabulary of size " +
                                  std::to_string(vocab_size_));
}

namespace {

// y = gamma ⊙ (x−μ)/σ + beta rowwise; writes x̂ and σ for backward.
Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                  Matrix* xhat_out, Vector* sig_out) {
  const auto n = x.rows();
  const auto h = x.cols();
  Matrix xhat(n, h);
  Vector sig(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar mu = x.row(i).mean();
    const Scalar var = (x.row(i).array() - mu).square().mean();
    sig[i] = std::sqrt(var + kLnEps);
    xhat.row(i) = (x.row(i).array() - mu) / sig[i];
  }
  Matrix y = (xhat.array().rowwise() * gamma.row(0).array()).rowwise() +
             beta.row(0).array();
  if (xhat_out) *xhat_out = std::move(xhat);
  if (sig_out) *sig_out = std::move(sig);
  return y;
}

// Backward through layer_norm: accumulates dgamma/dbeta, returns dx.
Matrix layer_norm_backward(const Matrix& dy, const Matrix& xhat,
                           const Vector& sig, const Matrix& gamma,
                           Matrix& dgamma, Matrix& dbeta) {
  dgamma.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbeta.row(0) += dy.colwise().sum();
  Matrix dyg = dy.array().rowwise() * gamma.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const Scalar m1 = dyg.row(i).mean();
    const Scalar m2 = (dyg.row(i).array() * xhat.row(i).array()).mean();
    dx.row(i) =
        ((dyg.row(i).array() - m1) - xhat.row(i).array() * m2) / sig[i];
  }
  return dx;
}

}  // namespace

Matrix TinyTransformer::run_doc(const TokenSequence& seq,
                                DocCache* cache) const {
  check_sequence(seq);
  const int n = seq.length;
  const int h = config_.hidden_size;
  const Scalar inv_sqrt_h = 1.0 / std::sqrt(static_cast<Scalar>(h));

  Matrix x(n, h);
  for (int t = 0; t < n; ++t)
    x.row(t) = embedding_.value.row(seq.ids[static_cast<std::size_t>(t)]) +
               position_.value.row(t);

  if (cache) {
    cache->n = n;
    cache->layers.resize(layers_.size());
  }

  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& L = layers_[li];
    LayerCache* lc = cache ? &cache->layers[li] : nullptr;

    Matrix q = (x * L.wq.value).rowwise() + L.bq.value.row(0);
    Matrix k = (x * L.wk.value).rowwise() + L.bk.value.row(0);
    Matrix v = (x * L.wv.value).rowwise() + L.bv.value.row(0);

    Matrix scores = q * k.transpose() * inv_sqrt_h;
    Matrix a(n, n);
    for (int i = 0; i < n; ++i) {
      const Scalar m = scores.row(i).maxCoeff();
      Vector e = (scores.row(i).array() - m).exp();
      a.row(i) = e.transpose() / e.sum();
    }

    Matrix ctx = a * v;
    Matrix o = (ctx * L.wo.value).rowwise() + L.bo.value.row(0);

    Matrix r1 = x + o;
    Matrix xhat1;
    Vector sig1;
    Matrix h1 = layer_norm(r1, L.ln1_g.value, L.ln1_b.value, &xhat1, &sig1);

    Matrix f_pre = (h1 * L.w1.value).rowwise() + L.b1.value.row(0);
    Matrix f = f_pre.cwiseMax(0.0);
    Matrix g = (f * L.w2.value).rowwise() + L.b2.value.row(0);

    Matrix r2 = h1 + g;
    Matrix xhat2;
    Vector sig2;
    Matrix h2 = layer_norm(r2, L.ln2_g.value, L.ln2_b.value, &xhat2, &sig2);

    if (lc) {
      lc->x = std::move(x);
      lc->q = std::move(q);
      lc->k = std::move(k);
      lc->v = std::move(v);
      lc->a = std::move(a);
      lc->ctx = std::move(ctx);
      lc->xhat1 = std::move(xhat1);
      lc->sig1 = std::move(sig1);
      lc->h1 = std::move(h1);
      lc->f_pre = std::move(f_pre);
      lc->f = std::move(f);
      lc->xhat2 = std::move(xhat2);
      lc->sig2 = std::move(sig2);
      x = std::move(h2);
    } else {
      x = std::move(h2);
    }
  }
  return x;
}

Vector TinyTransformer::pool(const Matrix& hidden) const {
  if (config_.pooling == EncoderConfig::Pooling::mean)
    return hidden.colwise().mean().transpose();
  return hidden.row(0).transpose();
}

Matrix TinyTransformer::forward(const std::vector<TokenSequence>& batch) {
  if (batch.empty())
    throw std::invalid_argument("TinyTransformer::forward: empty batch");
  cached_batch_ = batch;
  cache_.assign(batch.size(), DocCache{});
  Matrix pooled(static_cast<Eigen::Index>(batch.size()), config_.hidden_size);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Matrix hidden = run_doc(batch[b], &cache_[b]);
    pooled.row(static_cast<Eigen::Index>(b)) = pool(hidden).transpose();
  }
  return pooled;
}

Vector TinyTransformer::encode(const TokenSequence& seq) const {
  return pool(run_doc(seq, nullptr));
}

void TinyTransformer::backward(const Matrix& dpooled) {
  if (static_cast<std::size_t>(dpooled.rows()) != cache_.size() ||
      cache_.empty())
    throw std::logic_error(
        "TinyTransformer::backward: no matching forward cache");
  if (dpooled.cols() != config_.hidden_size)
    throw std::invalid_argument("TinyTransformer::backward: bad gradient width");

  const Scalar inv_sqrt_h =
      1.0 / std::sqrt(static_cast<Scalar>(config_.hidden_size));

  for (std::size_t b = 0; b < cache_.size(); ++b) {
    DocCache& dc = cache_[b];
    const int n = dc.n;

    // pooled -> final hidden rows
    Matrix dh(n, config_.hidden_size);
    if (config_.pooling == EncoderConfig::Pooling::mean) {
      for (int t = 0; t < n; ++t)
        dh.row(t) = dpooled.row(static_cast<Eigen::Index>(b)) /
                    static_cast<Scalar>(n);
    } else {
      dh.setZero();
      dh.row(0) = dpooled.row(static_cast<Eigen::Index>(b));
    }

    for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
      Layer& L = layers_[li];
      LayerCache& lc = dc.layers[static_cast<std::size_t>(li)];

      // h2 = LN2(h1 + g)
      Matrix dr2 = layer_norm_backward(dh, lc.xhat2, lc.sig2, L.ln2_g.value,
                                       L.ln2_g.grad, L.ln2_b.grad);
      Matrix dh1 = dr2;
      const Matrix& dg = dr2;

      // g = relu(f_pre) * w2 + b2
      L.w2.grad += lc.f.transpose() * dg;
      L.b2.grad.row(0) += dg.colwise().sum();
      Matrix df = dg * L.w2.value.transpose();
      Matrix df_pre =
          (lc.f_pre.array() > 0.0).select(df, Matrix::Zero(df.rows(), df.cols()));

      // f_pre = h1 * w1 + b1
      L.w1.grad += lc.h1.transpose() * df_pre;
      L.b1.grad.row(0) += df_pre.colwise().sum();
      dh1 += df_pre * L.w1.value.transpose();

      // h1 = LN1(x + o)
      Matrix dr1 = layer_norm_backward(dh1, lc.xhat1, lc.sig1, L.ln1_g.value,
                                       L.ln1_g.grad, L.ln1_b.grad);
      Matrix dx = dr1;
      const Matrix& do_ = dr1;

      // o = ctx * wo + bo
      L.wo.grad += lc.ctx.transpose() * do_;
      L.bo.grad.row(0) += do_.colwise().sum();
      Matrix dctx = do_ * L.wo.value.transpose();

      // ctx = a * v
      Matrix da = dctx * lc.v.transpose();
      Matrix dv = lc.a.transpose() * dctx;

      // a = softmax(scores) rowwise
      Matrix ds(n, n);
      for (int i = 0; i < n; ++i) {
        const Scalar dot = da.row(i).dot(lc.a.row(i));
        ds.row(i) = lc.a.row(i).array() * (da.row(i).array() - dot);
      }

      // scores = q k^T / sqrt(h)
      Matrix dq = ds * lc.k * inv_sqrt_h;
      Matrix dk = ds.transpose() * lc.q * inv_sqrt_h;

      L.wq.grad += lc.x.transpose() * dq;
      L.bq.grad.row(0) += dq.colwise().sum();
      dx += dq * L.wq.value.transpose();
      L.wk.grad += lc.x.transpose() * dk;
      L.bk.grad.row(0) += dk.colwise().sum();
      dx += dk * L.wk.value.transpose();
      L.wv.grad += lc.x.transpose() * dv;
      L.bv.grad.row(0) += dv.colwise().sum();
      dx += dv * L.wv.value.transpose();

      dh = std::move(dx);
    }

    const TokenSequence& seq = cached_batch_[b];
    for (int t = 0; t < n; ++t) {
      embedding_.grad.row(seq.ids[static_cast<std::size_t>(t)]) += dh.row(t);
      position_.grad.row(t) += dh.row(t);
    }
  }
}

}  // namespace damf
