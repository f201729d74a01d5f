#include "pmmtalk/optimizer.hpp"

#include <cmath>

namespace pmmtalk {

double gradient_norm(const ParameterStore& store) {
  double sq = 0.0;
  for (const auto& [name, p] : store) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

void adam_step(ParameterStore& store, AdamState& state, const AdamConfig& cfg) {
  ++state.step;
  double clip = 1.0;
  if (cfg.grad_clip > 0.0) {
    const double norm = gradient_norm(store);
    if (norm > cfg.grad_clip) clip = cfg.grad_clip / norm;
  }
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : store) {
    auto [mit, m_new] = state.m.try_emplace(name, Matrix::Zero(p.value.rows(), p.value.cols()));
    auto [vit, v_new] = state.v.try_emplace(name, Matrix::Zero(p.value.rows(), p.value.cols()));
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    const Matrix grad = p.grad * clip;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    p.value.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
  }
}

}  // namespace pmmtalk
