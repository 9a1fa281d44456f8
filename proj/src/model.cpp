#include "damf/model.hpp"

#include <cmath>
#include <stdexcept>

namespace damf {

namespace {

Matrix gaussian(Rng& rng, int rows, int cols, Scalar stddev) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

}  // namespace

TransformLayer::TransformLayer(int hidden, std::uint64_t seed) {
  if (hidden <= 0)
    throw std::invalid_argument("TransformLayer: non-positive size");
  Rng rng(seed);
  // start at the regularizer optimum, plus a whisper of noise
  w_ = Param("trans.w",
             Matrix::Identity(hidden, hidden) + gaussian(rng, hidden, hidden, 0.01));
}

Vector TransformLayer::transform(const Vector& x) const {
  if (x.size() != w_.value.cols())
    throw std::invalid_argument("TransformLayer: dimension mismatch");
  return w_.value * x;
}

Matrix TransformLayer::forward(const Matrix& x) {
  if (x.cols() != w_.value.cols())
    throw std::invalid_argument("TransformLayer: dimension mismatch");
  cached_x_ = x;
  return x * w_.value.transpose();
}

Matrix TransformLayer::backward(const Matrix& dy) {
  if (dy.rows() != cached_x_.rows() || dy.cols() != w_.value.rows())
    throw std::logic_error("TransformLayer::backward: no matching forward");
  w_.grad += dy.transpose() * cached_x_;
  return dy * w_.value;
}

Scalar TransformLayer::regularizer() const {
  return (w_.value - Matrix::Identity(w_.value.rows(), w_.value.cols()))
      .squaredNorm();
}

void TransformLayer::add_regularizer_grad(Scalar coeff) {
  w_.grad += coeff * 2.0 *
             (w_.value - Matrix::Identity(w_.value.rows(), w_.value.cols()));
}

FeedForwardHead::FeedForwardHead(const std::string& name, int in, int hidden,
                                 int out, Scalar dropout_rate,
                                 std::uint64_t seed)
    : dropout_rate_(dropout_rate) {
  if (in <= 0 || hidden <= 0 || out <= 0)
    throw std::invalid_argument("FeedForwardHead: non-positive size");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw std::invalid_argument("FeedForwardHead: dropout_rate outside [0,1)");
  Rng rng(seed);
  w1_ = Param(name + ".w1", gaussian(rng, in, hidden, 0.02));
  b1_ = Param(name + ".b1", Matrix::Zero(1, hidden));
  w2_ = Param(name + ".w2", gaussian(rng, hidden, out, 0.02));
  b2_ = Param(name + ".b2", Matrix::Zero(1, out));
}

Matrix FeedForwardHead::forward(const Matrix& x, bool training, Rng* rng) {
  if (x.cols() != w1_.value.rows())
    throw std::invalid_argument("FeedForwardHead: input width " +
                                std::to_string(x.cols()) + ", expected " +
                                std::to_string(w1_.value.rows()));
  if (training && dropout_rate_ > 0.0 && rng == nullptr)
    throw std::logic_error("FeedForwardHead: training forward needs an rng");

  cached_x_ = x;
  cached_training_ = training;
  cached_pre_ = ((x * w1_.value).rowwise() + b1_.value.row(0));
  Matrix act = cached_pre_.cwiseMax(0.0);

  if (training && dropout_rate_ > 0.0) {
    const Scalar keep = 1.0 - dropout_rate_;
    cached_mask_ = Matrix(act.rows(), act.cols());
    for (Eigen::Index i = 0; i < act.rows(); ++i)
      for (Eigen::Index j = 0; j < act.cols(); ++j)
        cached_mask_(i, j) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    act = act.cwiseProduct(cached_mask_);
  } else {
    cached_mask_.resize(0, 0);
  }

  cached_act_ = act;
  return (act * w2_.value).rowwise() + b2_.value.row(0);
}

Vector FeedForwardHead::forward_eval(const Vector& x) const {
  if (x.size() != w1_.value.rows())
    throw std::invalid_argument("FeedForwardHead: input width mismatch");
  Vector act =
      ((x.transpose() * w1_.value).row(0) + b1_.value.row(0)).transpose();
  act = act.cwiseMax(0.0);
  return ((act.transpose() * w2_.value).row(0) + b2_.value.row(0)).transpose();
}

Matrix FeedForwardHead::backward(const Matrix& dlogits) {
  if (dlogits.rows() != cached_x_.rows() || dlogits.cols() != w2_.value.cols())
    throw std::logic_error("FeedForwardHead::backward: no matching forward");

  w2_.grad += cached_act_.transpose() * dlogits;
  b2_.grad.row(0) += dlogits.colwise().sum();
  Matrix dact = dlogits * w2_.value.transpose();

  if (cached_training_ && cached_mask_.size() > 0)
    dact = dact.cwiseProduct(cached_mask_);
  Matrix dpre = (cached_pre_.array() > 0.0)
                    .select(dact, Matrix::Zero(dact.rows(), dact.cols()));

  w1_.grad += cached_x_.transpose() * dpre;
  b1_.grad.row(0) += dpre.colwise().sum();
  return dpre * w1_.value.transpose();
}

std::vector<Param*> FeedForwardHead::params() {
  return {&w1_, &b1_, &w2_, &b2_};
}

ReconstructionHead::ReconstructionHead(int hidden, std::uint64_t seed) {
  if (hidden <= 0)
    throw std::invalid_argument("ReconstructionHead: non-positive size");
  Rng rng(seed);
  w_ = Param("recon.w", gaussian(rng, hidden, hidden, 0.02));
  b_ = Param("recon.b", Matrix::Zero(1, hidden));
}

Vector ReconstructionHead::reconstruct(const Vector& x) const {
  if (x.size() != w_.value.cols())
    throw std::invalid_argument("ReconstructionHead: dimension mismatch");
  return (w_.value * x + b_.value.row(0).transpose()).array().tanh();
}

Matrix ReconstructionHead::forward(const Matrix& x) {
  if (x.cols() != w_.value.cols())
    throw std::invalid_argument("ReconstructionHead: dimension mismatch");
  cached_x_ = x;
  cached_out_ =
      ((x * w_.value.transpose()).rowwise() + b_.value.row(0)).array().tanh();
  return cached_out_;
}

Matrix ReconstructionHead::backward(const Matrix& dout) {
  if (dout.rows() != cached_x_.rows() || dout.cols() != cached_out_.cols())
    throw std::logic_error("ReconstructionHead::backward: no matching forward");
  Matrix dpre =
      dout.array() * (1.0 - cached_out_.array().square());  // tanh'
  w_.grad += dpre.transpose() * cached_x_;
  b_.grad.row(0) += dpre.colwise().sum();
  return dpre * w_.value;
}

std::vector<Param*> ReconstructionHead::params() { return {&w_, &b_}; }

DamfModel::DamfModel(const ModelConfig& config, int vocab_size,
                     std::uint64_t seed)
    : config_(config),
      encoder_(config.encoder, vocab_size, seed),
      mf_head_("mf",
               config.encoder.hidden_size + config.num_domains,
               config.head_hidden > 0 ? config.head_hidden
                                      : config.encoder.hidden_size,
               kNumClasses, config.dropout_rate, seed + 2),
      domain_head_("domain", config.encoder.hidden_size,
                   config.head_hidden > 0 ? config.head_hidden
                                          : config.encoder.hidden_size,
                   config.num_domains, config.dropout_rate, seed + 3),
      recon_head_(config.encoder.hidden_size, seed + 4) {
  if (config.num_domains < 1)
    throw std::invalid_argument("DamfModel: need at least one domain");
  if (config.trans_enabled)
    trans_.emplace(config.encoder.hidden_size, seed + 1);
}

Matrix DamfModel::encode_batch(const std::vector<TokenSequence>& batch) {
  return encoder_.forward(batch);
}

Matrix DamfModel::transform_batch(const Matrix& x_bert) {
  return trans_ ? trans_->forward(x_bert) : x_bert;
}

Matrix DamfModel::concat_domains(const Matrix& x_trans,
                                 const std::vector<int>& domains) const {
  if (static_cast<Eigen::Index>(domains.size()) != x_trans.rows())
    throw std::invalid_argument("DamfModel: domain count mismatch");
  Matrix joined(x_trans.rows(), x_trans.cols() + config_.num_domains);
  joined.leftCols(x_trans.cols()) = x_trans;
  joined.rightCols(config_.num_domains).setZero();
  for (Eigen::Index i = 0; i < x_trans.rows(); ++i) {
    const int d = domains[static_cast<std::size_t>(i)];
    if (d < 0 || d >= config_.num_domains)
      throw std::out_of_range("DamfModel: domain index " + std::to_string(d) +
                              " outside [0, " +
                              std::to_string(config_.num_domains) + ")");
    joined(i, x_trans.cols() + d) = 1.0;
  }
  return joined;
}

Matrix DamfModel::mf_logits(const Matrix& x_trans,
                            const std::vector<int>& domains, bool training,
                            Rng* rng) {
  return mf_head_.forward(concat_domains(x_trans, domains), training, rng);
}

Matrix DamfModel::domain_logits(const Matrix& x_trans, Scalar lambda_d,
                                bool training, Rng* rng) {
  return domain_head_.forward(grl_.forward(x_trans, lambda_d), training, rng);
}

Matrix DamfModel::reconstruct_batch(const Matrix& x_bert) {
  return recon_head_.forward(x_bert);
}

Matrix DamfModel::mf_backward(const Matrix& dlogits) {
  Matrix djoined = mf_head_.backward(dlogits);
  return djoined.leftCols(config_.encoder.hidden_size);
}

Matrix DamfModel::domain_backward(const Matrix& dlogits) {
  return grl_.backward(domain_head_.backward(dlogits));
}

Matrix DamfModel::recon_backward(const Matrix& drecon) {
  return recon_head_.backward(drecon);
}

Matrix DamfModel::transform_backward(const Matrix& dx_trans) {
  return trans_ ? trans_->backward(dx_trans) : dx_trans;
}

void DamfModel::add_transform_regularizer_grad(Scalar coeff) {
  if (trans_) trans_->add_regularizer_grad(coeff);
}

void DamfModel::encoder_backward(const Matrix& dx_bert) {
  encoder_.backward(dx_bert);
}

Vector DamfModel::encode(const TokenSequence& seq) const {
  return encoder_.encode(seq);
}

Vector DamfModel::transform(const Vector& x_bert) const {
  return trans_ ? trans_->transform(x_bert) : x_bert;
}

Vector DamfModel::mf_forward(const Vector& x_trans,
                             const DomainId& domain) const {
  if (domain.index < 0 || domain.index >= config_.num_domains)
    throw std::out_of_range("DamfModel::mf_forward: domain index " +
                            std::to_string(domain.index) + " outside [0, " +
                            std::to_string(config_.num_domains) + ")");
  Vector joined(x_trans.size() + config_.num_domains);
  joined.head(x_trans.size()) = x_trans;
  joined.tail(config_.num_domains).setZero();
  joined[x_trans.size() + domain.index] = 1.0;
  return mf_head_.forward_eval(joined);
}

Vector DamfModel::domain_forward(const Vector& x_trans,
                                 Scalar /*lambda_d*/) const {
  // GRL is the identity in the forward direction
  return domain_head_.forward_eval(x_trans);
}

Vector DamfModel::reconstruct(const Vector& x_bert) const {
  return recon_head_.reconstruct(x_bert);
}

void DamfModel::snapshot_reference() { reference_ = encoder_; }

Vector DamfModel::encode_reference(const TokenSequence& seq) const {
  if (!reference_)
    throw std::logic_error(
        "DamfModel: reference snapshot missing — call snapshot_reference() "
        "before requesting x_orig");
  return reference_->encode(seq);
}

Matrix DamfModel::encode_reference_batch(
    const std::vector<TokenSequence>& batch) const {
  if (!reference_)
    throw std::logic_error(
        "DamfModel: reference snapshot missing — call snapshot_reference() "
        "before requesting x_orig");
  Matrix out(static_cast<Eigen::Index>(batch.size()),
             config_.encoder.hidden_size);
  for (std::size_t i = 0; i < batch.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) =
        reference_->encode(batch[i]).transpose();
  return out;
}

Scalar DamfModel::transform_regularizer() const {
  return trans_ ? trans_->regularizer() : 0.0;
}

std::vector<Param*> DamfModel::params() {
  std::vector<Param*> out = encoder_.params();
  if (trans_) out.push_back(&trans_->weight());
  for (Param* p : mf_head_.params()) out.push_back(p);
  for (Param* p : domain_head_.params()) out.push_back(p);
  for (Param* p : recon_head_.params()) out.push_back(p);
  return out;
}

void DamfModel::zero_grad() {
  for (Param* p : params()) p->grad.setZero();
}

}  // namespace damf
