#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "heat/errors.hpp"
#include "heat/tensor.hpp"

namespace heat {

template <typename Scalar>
struct GradCheckResult {
  Scalar max_rel_error = 0;
  std::size_t worst_param = 0;
  Eigen::Index worst_index = 0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients with central differences.
///
/// `f(tape, leaves)` must build a scalar loss from the given leaves. The
/// reported error is the maximum over coordinates of
/// |g_a - g_n| / max(1e-6, |g_a| + |g_n|); the floor keeps round-off in
/// near-zero coordinates from dominating.
template <typename Scalar, typename F>
GradCheckResult<Scalar> grad_check(F&& f, std::vector<MatrixX<Scalar>> params, Scalar eps = Scalar(1e-4)) {
  if (!(eps > 0)) throw ConfigError("grad_check: eps must be positive");

  auto evaluate = [&](const std::vector<MatrixX<Scalar>>& p, std::vector<MatrixX<Scalar>>* grads) {
    BasicTape<Scalar> tape;
    std::vector<BasicVar<Scalar>> leaves;
    leaves.reserve(p.size());
    for (const auto& m : p) leaves.push_back(tape.leaf(m));
    BasicVar<Scalar> loss = f(tape, std::span<const BasicVar<Scalar>>(leaves));
    const Scalar value = loss.value()(0, 0);
    if (!std::isfinite(value)) throw NumericError("grad_check: objective is not finite");
    if (grads) {
      tape.backward(loss);
      grads->clear();
      for (const auto& l : leaves) grads->push_back(tape.grad(l));
    }
    return value;
  };

  std::vector<MatrixX<Scalar>> analytic;
  evaluate(params, &analytic);

  GradCheckResult<Scalar> result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k].size(); ++i) {
      Scalar& x = params[k].data()[i];
      const Scalar saved = x;
      x = saved + eps;
      const Scalar up = evaluate(params, nullptr);
      x = saved - eps;
      const Scalar down = evaluate(params, nullptr);
      x = saved;
      const Scalar numeric = (up - down) / (2 * eps);
      const Scalar a = analytic[k].data()[i];
      const Scalar err = std::abs(a - numeric) / std::max(Scalar(1e-6), std::abs(a) + std::abs(numeric));
      if (result.coordinates == 0 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = k;
        result.worst_index = i;
      }
      ++result.coordinates;
    }
  }
  return result;
}

}  // namespace heat
