#include "grapple/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "grapple/error.hpp"

namespace grapple {

GradCheckReport finite_diff_check(const GradFn& fn, ParamStore& params, double step,
                                  int num_coords, RngStream& rng) {
  check(step > 0.0, "finite_diff_check: step must be positive");
  check(num_coords > 0, "finite_diff_check: need at least one coordinate");
  const long long total = params.scalar_count();
  check(total > 0, "finite_diff_check: empty parameter store");

  std::vector<Matrix> grads;
  const double loss0 = fn(params, &grads);
  const double loss0_again = fn(params, nullptr);
  check(loss0 == loss0_again,
        "finite_diff_check: closure is not deterministic (two evaluations at "
        "identical parameters differ)");
  check(std::isfinite(loss0), "finite_diff_check: non-finite loss at base point");
  check(static_cast<int>(grads.size()) == params.count(),
        "finite_diff_check: closure returned " + std::to_string(grads.size()) +
            " gradient grids for " + std::to_string(params.count()) + " parameters");

  // Sample distinct flat coordinates (or all of them when the store is small).
  std::vector<long long> coords;
  if (total <= num_coords) {
    coords.resize(total);
    for (long long i = 0; i < total; ++i) coords[i] = i;
  } else {
    std::vector<long long> all(total);
    for (long long i = 0; i < total; ++i) all[i] = i;
    rng.shuffle(all);
    coords.assign(all.begin(), all.begin() + num_coords);
  }

  GradCheckReport report;
  report.coords_checked = static_cast<int>(coords.size());
  for (long long flat : coords) {
    ParamStore::Coord c = params.locate(flat);
    const double saved = params.get_flat(flat);
    params.set_flat(flat, saved + step);
    const double lp = fn(params, nullptr);
    params.set_flat(flat, saved - step);
    const double lm = fn(params, nullptr);
    params.set_flat(flat, saved);
    check(std::isfinite(lp) && std::isfinite(lm),
          "finite_diff_check: non-finite loss at perturbed point, parameter '" +
              params.name(c.param) + "'");
    const double g_fd = (lp - lm) / (2.0 * step);
    const double g_ad = grads[c.param].a[c.offset];
    const double rel = std::fabs(g_ad - g_fd) /
                       std::max({1.0, std::fabs(g_ad), std::fabs(g_fd)});
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_flat_index = flat;
      report.worst_param = params.name(c.param);
    }
  }
  return report;
}

}  // namespace grapple
