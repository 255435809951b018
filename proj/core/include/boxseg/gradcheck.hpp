#pragma once

#include <functional>
#include <string>
#include <vector>

#include "boxseg/tensor.hpp"

namespace boxseg {

// A scalar-valued differentiable function of a flat parameter vector.
// Must fill grad_out (same length as params) when grad_out != nullptr.
using DiffFn = std::function<double(const Tensor& params, std::vector<double>* grad_out)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  int worst_index = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Central-difference check of fn's analytic gradient at `at`.
// rel err per coordinate: |a - n| / max(denom_floor, |a| + |n|).
// eps must lie in [1e-7, 1e-4]; non-finite values anywhere raise NumericError.
//
// The default floor matches the op contract. Deep composites need a larger
// floor: central differences on an f ~ O(10) function carry ~|f|*2^-52/eps of
// cancellation noise, so coordinates whose true gradient sits near 1e-8 would
// report that measurement noise as error. Raising the floor to F turns the
// check into an absolute bound |a - n| < tol*F for such coordinates.
GradCheckResult gradcheck(const DiffFn& fn, const Tensor& at, double eps = 1e-5,
                          double denom_floor = 1e-8);

}  // namespace boxseg
