#pragma once

#include <functional>
#include <string>
#include <vector>

#include "grapple/params.hpp"
#include "grapple/rng.hpp"

namespace grapple {

// A differentiable scalar objective over a ParamStore. Must be
// deterministic: any internal randomness has to be drawn up front and
// captured, so repeated calls at the same parameters agree bitwise.
// Returns the loss; when grads is non-null, also fills one gradient grid
// per parameter (store order).
using GradFn = std::function<double(const ParamStore&, std::vector<Matrix>* grads)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  long long worst_flat_index = -1;
  std::string worst_param;
  int coords_checked = 0;
};

// Central-difference gradient verification on randomly sampled parameter
// coordinates. Relative error per coordinate:
//   |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
// Rejects closures that are not deterministic (two evaluations at the
// unperturbed point must agree bitwise).
GradCheckReport finite_diff_check(const GradFn& fn, ParamStore& params, double step,
                                  int num_coords, RngStream& rng);

}  // namespace grapple
