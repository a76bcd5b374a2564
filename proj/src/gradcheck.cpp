#include "vibloc/gradcheck.hpp"

#include <cmath>

namespace vibloc {

std::string GradCheckReport::summary() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%s: max rel err %.3e at param %zu (%ld,%ld), analytic "
                "%.6e vs fd %.6e",
                pass ? "pass" : "FAIL", max_rel_err, worst_param,
                static_cast<long>(worst_row), static_cast<long>(worst_col),
                analytic_at_worst, fd_at_worst);
  return std::string(buf);
}

GradCheckReport grad_check(const ScalarFn& f, std::vector<Matrix> params,
                           const std::vector<Matrix>& analytic, double h,
                           double tol, double denom_floor) {
  if (h <= 0.0) throw DomainError("grad_check: step h must be positive");
  if (params.size() != analytic.size()) {
    throw DimensionError("grad_check: " + std::to_string(params.size()) +
                         " params vs " + std::to_string(analytic.size()) +
                         " analytic gradients");
  }

  auto eval = [&](const std::vector<Matrix>& p) {
    double v = f(p);
    if (!std::isfinite(v)) {
      throw NumericError("grad_check: f evaluated to a non-finite value");
    }
    return v;
  };

  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = analytic[i];
    if (g.rows() != params[i].rows() || g.cols() != params[i].cols()) {
      throw DimensionError("grad_check: analytic gradient " +
                           std::to_string(i) + " is " + shape_str(g) +
                           ", parameter is " + shape_str(params[i]));
    }
    for (Index r = 0; r < params[i].rows(); ++r) {
      for (Index c = 0; c < params[i].cols(); ++c) {
        const double saved = params[i](r, c);
        params[i](r, c) = saved + h;
        const double fp = eval(params);
        params[i](r, c) = saved - h;
        const double fm = eval(params);
        params[i](r, c) = saved;

        const double fd = (fp - fm) / (2.0 * h);
        const double a = g(r, c);
        const double denom =
            std::max({std::abs(a), std::abs(fd), denom_floor});
        const double rel = std::abs(a - fd) / denom;
        if (rel > report.max_rel_err) {
          report.max_rel_err = rel;
          report.worst_param = i;
          report.worst_row = r;
          report.worst_col = c;
          report.analytic_at_worst = a;
          report.fd_at_worst = fd;
        }
      }
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace vibloc
