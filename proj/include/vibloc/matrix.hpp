#pragma once

#include <Eigen/Dense>
#include <string>

#include "vibloc/errors.hpp"

namespace vibloc {

// Dense matrix of doubles, the carrier for batches, parameters and
// gradients. Rows index samples, columns index features/units.
using Matrix = Eigen::MatrixXd;

using Index = Eigen::Index;

// "3x5" formatting for error messages.
std::string shape_str(const Matrix& m);

bool all_finite(const Matrix& m);

// Throws NumericError naming `what` if m contains NaN or Inf.
void require_finite(const Matrix& m, const std::string& what);

// Throws DimensionError unless a.cols() == b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);

// Entry-wise binary ops. Shapes must match, or b may be a single row of
// a.cols() entries, broadcast over the rows of a (bias-style broadcast;
// no other broadcast is supported).
Matrix cwise_add(const Matrix& a, const Matrix& b);
Matrix cwise_sub(const Matrix& a, const Matrix& b);
Matrix cwise_mul(const Matrix& a, const Matrix& b);

Matrix cwise_exp(const Matrix& a);
// Throws DomainError if any entry is <= 0.
Matrix cwise_log(const Matrix& a);
Matrix scale(const Matrix& a, double s);

}  // namespace vibloc
