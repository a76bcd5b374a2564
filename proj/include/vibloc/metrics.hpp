#pragma once

#include "vibloc/matrix.hpp"

namespace vibloc {

// sqrt(mean over all entries of squared error).
double rmse(const Matrix& pred, const Matrix& target);

}  // namespace vibloc
