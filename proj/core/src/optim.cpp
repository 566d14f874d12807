#include "grapple/optim.hpp"

#include <cmath>

#include "grapple/error.hpp"

namespace grapple {

void adam_step(ParamStore& params, const std::vector<Matrix>& grads, AdamState& state) {
  check(static_cast<int>(grads.size()) == params.count(),
        "adam_step: got " + std::to_string(grads.size()) + " gradient grids for " +
            std::to_string(params.count()) + " parameters");
  if (state.first_moment.empty()) {
    state.first_moment.reserve(params.count());
    state.second_moment.reserve(params.count());
    for (int p = 0; p < params.count(); ++p) {
      state.first_moment.push_back(Matrix::zeros(params.at(p).rows, params.at(p).cols));
      state.second_moment.push_back(Matrix::zeros(params.at(p).rows, params.at(p).cols));
    }
  }
  for (int p = 0; p < params.count(); ++p) {
    check(grads[p].same_shape(params.at(p)),
          "adam_step: gradient shape " + shape_str(grads[p]) + " != parameter '" +
              params.name(p) + "' shape " + shape_str(params.at(p)));
    if (!grads[p].all_finite())
      fail("adam_step: non-finite gradient for parameter '" + params.name(p) + "'");
  }

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (int p = 0; p < params.count(); ++p) {
    Matrix& theta = params.at(p);
    Matrix& m = state.first_moment[p];
    Matrix& v = state.second_moment[p];
    const Matrix& g = grads[p];
    for (int i = 0; i < theta.size(); ++i) {
      m.a[i] = state.beta1 * m.a[i] + (1.0 - state.beta1) * g.a[i];
      v.a[i] = state.beta2 * v.a[i] + (1.0 - state.beta2) * g.a[i] * g.a[i];
      double mhat = m.a[i] / bc1;
      double vhat = v.a[i] / bc2;
      theta.a[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace grapple
