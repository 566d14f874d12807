#pragma once

#include <vector>

#include "grapple/matrix.hpp"
#include "grapple/params.hpp"

namespace grapple {

// Adam with bias correction. Moment grids are created lazily on the first
// step and always match parameter shapes.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long long step_count = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

// Applies one update in place. grads must hold one grid per parameter in
// store order; non-finite gradient entries are rejected with the parameter
// name. step_count increments by exactly 1.
void adam_step(ParamStore& params, const std::vector<Matrix>& grads, AdamState& state);

}  // namespace grapple
