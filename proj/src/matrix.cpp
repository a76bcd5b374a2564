#include "vibloc/matrix.hpp"

namespace vibloc {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) {
    throw NumericError(what + ": non-finite entries in " + shape_str(m) +
                       " matrix");
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a) +
                         " and " + shape_str(b));
  }
  Matrix out = a * b;
  require_finite(out, "matmul");
  return out;
}

namespace {

// Shared shape handling for the binary entry-wise ops: either equal
// shapes, or b is a 1 x a.cols() row broadcast over the rows of a.
enum class BinShape { equal, broadcast_row };

BinShape check_binary(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return BinShape::equal;
  if (b.rows() == 1 && b.cols() == a.cols()) return BinShape::broadcast_row;
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_str(a) + " and " + shape_str(b));
}

}  // namespace

Matrix cwise_add(const Matrix& a, const Matrix& b) {
  Matrix out = check_binary(a, b, "cwise_add") == BinShape::equal
                   ? Matrix(a + b)
                   : Matrix(a.rowwise() + b.row(0));
  require_finite(out, "cwise_add");
  return out;
}

Matrix cwise_sub(const Matrix& a, const Matrix& b) {
  Matrix out = check_binary(a, b, "cwise_sub") == BinShape::equal
                   ? Matrix(a - b)
                   : Matrix(a.rowwise() - b.row(0));
  require_finite(out, "cwise_sub");
  return out;
}

Matrix cwise_mul(const Matrix& a, const Matrix& b) {
  Matrix out;
  if (check_binary(a, b, "cwise_mul") == BinShape::equal) {
    out = a.cwiseProduct(b);
  } else {
    out = a.array().rowwise() * b.row(0).array();
  }
  require_finite(out, "cwise_mul");
  return out;
}

Matrix cwise_exp(const Matrix& a) {
  Matrix out = a.array().exp();
  require_finite(out, "cwise_exp");
  return out;
}

Matrix cwise_log(const Matrix& a) {
  if ((a.array() <= 0.0).any()) {
    throw DomainError("cwise_log: non-positive entry in " + shape_str(a) +
                      " matrix");
  }
  Matrix out = a.array().log();
  require_finite(out, "cwise_log");
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out = a * s;
  require_finite(out, "scale");
  return out;
}

}  // namespace vibloc
