#include "boxseg/gradcheck.hpp"

#include <cmath>
#include <cstdio>

#include "boxseg/errors.hpp"

namespace boxseg {

GradCheckResult gradcheck(const DiffFn& fn, const Tensor& at, double eps, double denom_floor) {
  if (!(eps >= 1e-7 && eps <= 1e-4)) {
    throw NumericError("gradcheck: eps " + std::to_string(eps) + " outside [1e-7, 1e-4]");
  }
  if (!(denom_floor >= 1e-8 && denom_floor <= 1e-3)) {
    throw NumericError("gradcheck: denom_floor outside [1e-8, 1e-3]");
  }
  const int n = at.numel();
  std::vector<double> analytic(static_cast<size_t>(n), 0.0);
  const double f0 = fn(at, &analytic);
  if (!std::isfinite(f0)) throw NumericError("gradcheck: non-finite function value");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(analytic[static_cast<size_t>(i)])) {
      throw NumericError("gradcheck: non-finite analytic gradient at index " + std::to_string(i));
    }
  }

  GradCheckResult res;
  Tensor probe = at;
  for (int i = 0; i < n; ++i) {
    const double orig = probe.at(i);
    probe.at(i) = orig + eps;
    const double fp = fn(probe, nullptr);
    probe.at(i) = orig - eps;
    const double fm = fn(probe, nullptr);
    probe.at(i) = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("gradcheck: non-finite probe value at index " + std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = analytic[static_cast<size_t>(i)];
    const double rel = std::fabs(a - numeric) /
                       std::max(denom_floor, std::fabs(a) + std::fabs(numeric));
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_index = i;
      res.analytic_at_worst = a;
      res.numeric_at_worst = numeric;
    }
  }
  return res;
}

}  // namespace boxseg
