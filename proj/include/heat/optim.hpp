#pragma once

#include <cstdint>
#include <vector>

#include "heat/params.hpp"
#include "heat/tensor.hpp"

namespace heat {

struct AdamConfig {
  double learning_rate = 5e-5;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool decoupled_weight_decay = true;  // false: classic L2 folded into the gradient
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step = 0;

  static AdamState zeros_like(const ParamStore& params);
};

/// One Adam update with bias correction. Decoupled decay shrinks each weight
/// by lr * wd before the moment update is applied. Throws NumericError on a
/// non-finite gradient, leaving params and state untouched.
void adam_step(ParamStore& params, const std::vector<Matrix>& grads, AdamState& state, const AdamConfig& cfg);

}  // namespace heat
