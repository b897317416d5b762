#include "heat/optim.hpp"

#include <cmath>

#include "heat/errors.hpp"

namespace heat {

AdamState AdamState::zeros_like(const ParamStore& params) {
  AdamState s;
  for (const auto& p : params.values()) {
    s.m.push_back(Matrix::Zero(p.rows(), p.cols()));
    s.v.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
  return s;
}

void adam_step(ParamStore& params, const std::vector<Matrix>& grads, AdamState& state, const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].rows() != params[i].rows() || grads[i].cols() != params[i].cols()) {
      throw ShapeError("adam_step: gradient shape mismatch for '" + params.name(i) + "'");
    }
    if (!grads[i].allFinite()) throw NumericError("adam_step: non-finite gradient for '" + params.name(i) + "'");
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Matrix& theta = params[i];
    Matrix g = grads[i];
    if (cfg.decoupled_weight_decay) {
      theta -= cfg.learning_rate * cfg.weight_decay * theta;
    } else {
      g += cfg.weight_decay * theta;
    }
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const auto m_hat = state.m[i].array() / bc1;
    const auto v_hat = state.v[i].array() / bc2;
    theta.array() -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
  }
}

}  // namespace heat
