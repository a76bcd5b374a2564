#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vibloc/matrix.hpp"

namespace vibloc {

// Scalar loss as a function of a parameter list. Must be deterministic:
// any noise (dropout masks, latent draws) has to be frozen inside the
// closure before checking.
using ScalarFn = std::function<double(const std::vector<Matrix>&)>;

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  std::size_t worst_param = 0;
  Index worst_row = 0;
  Index worst_col = 0;
  double analytic_at_worst = 0.0;
  double fd_at_worst = 0.0;

  std::string summary() const;
};

// Central finite-difference check of `analytic` against
// (f(p+h) - f(p-h)) / 2h, entry by entry. The relative error denominator
// is max(|analytic|, |fd|, denom_floor) so that true zeros are compared
// at the floor instead of blowing up the ratio. Throws NumericError if f
// evaluates to a non-finite value.
GradCheckReport grad_check(const ScalarFn& f, std::vector<Matrix> params,
                           const std::vector<Matrix>& analytic, double h,
                           double tol, double denom_floor = 1e-6);

}  // namespace vibloc
