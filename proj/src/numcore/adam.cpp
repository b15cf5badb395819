#include <stdexcept>

#include "magicnet/numcore.hpp"

namespace magicnet::numcore {

AdamState AdamState::for_params(std::span<const std::span<double>> params, AdamConfig config) {
  AdamState s;
  s.config = config;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (auto p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: tensor count mismatch");
  }
  const auto& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    auto g = grads[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (p.size() != g.size() || p.size() != m.size()) {
      throw std::invalid_argument("adam_step: tensor shape mismatch");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace magicnet::numcore
