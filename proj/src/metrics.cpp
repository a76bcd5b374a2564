#include "vibloc/metrics.hpp"

#include <cmath>

namespace vibloc {

double rmse(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("rmse: shapes " + shape_str(pred) + " and " +
                         shape_str(target) + " differ");
  }
  if (pred.size() == 0) {
    throw DimensionError("rmse: empty matrices");
  }
  return std::sqrt((pred - target).squaredNorm() /
                   static_cast<double>(pred.size()));
}

}  // namespace vibloc
