#include "damf/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace damf {

Adam::Adam(std::vector<Param*> params, AdamConfig config)
    : params_(std::move(params)), cfg_(config) {
  if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) ||
      !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0) || !(cfg_.eps > 0.0))
    throw std::invalid_argument("Adam: bad hyperparameters");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Param* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(Scalar lr) {
  ++t_;
  const Scalar bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const Scalar bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      throw std::logic_error("Adam: gradient shape mismatch for " + p.name);
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
    v_[i].array() = cfg_.beta2 * v_[i].array() +
                    (1.0 - cfg_.beta2) * p.grad.array().square();
    p.value.array() -= lr * (m_[i].array() / bc1) /
                       ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
}

}  // namespace damf
