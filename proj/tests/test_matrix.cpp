#include <doctest.h>

#include "vibloc/matrix.hpp"
#include "vibloc/rng.hpp"

using namespace vibloc;

namespace {

Matrix from(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()),
           static_cast<Index>(rows.begin()->size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

}  // namespace

TEST_CASE("matmul identity") {
  const Matrix a = from({{1, 2}, {3, 4}});
  CHECK(matmul(a, Matrix::Identity(2, 2)) == a);
}

TEST_CASE("matmul hand example") {
  const Matrix a = from({{1, 2}});
  const Matrix b = from({{3}, {4}});
  const Matrix c = matmul(a, b);
  CHECK(c.rows() == 1);
  CHECK(c.cols() == 1);
  CHECK(c(0, 0) == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Matrix a = Matrix::Zero(2, 3);
  const Matrix b = Matrix::Zero(4, 2);
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       "matmul: incompatible shapes 2x3 and 4x2",
                       DimensionError);
}

TEST_CASE("matmul associativity on random matrices") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const Matrix a = rng.gaussian_matrix(4, 6);
    const Matrix b = rng.gaussian_matrix(6, 3);
    const Matrix c = rng.gaussian_matrix(3, 5);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    const double rel = (left - right).norm() / right.norm();
    CHECK(rel < 1e-10);
  }
}

TEST_CASE("cwise add identity and shape checks") {
  const Matrix a = from({{1, 2}});
  CHECK(cwise_add(a, Matrix::Zero(1, 2)) == a);
  CHECK_THROWS_AS(cwise_add(a, Matrix::Zero(2, 3)), DimensionError);
}

TEST_CASE("cwise row broadcast") {
  const Matrix a = from({{1, 2}, {3, 4}});
  const Matrix row = from({{10, 20}});
  CHECK(cwise_add(a, row) == from({{11, 22}, {13, 24}}));
  CHECK(cwise_sub(a, row) == from({{-9, -18}, {-7, -16}}));
  CHECK(cwise_mul(a, row) == from({{10, 40}, {30, 80}}));
}

TEST_CASE("cwise exp and log") {
  CHECK(cwise_exp(Matrix::Zero(1, 1))(0, 0) == 1.0);
  CHECK_THROWS_AS(cwise_log(from({{-1}})), DomainError);
  CHECK_THROWS_AS(cwise_log(from({{0}})), DomainError);
  const Matrix x = from({{0.5, 2.0}});
  CHECK(cwise_log(cwise_exp(x)).isApprox(x, 1e-14));
}

TEST_CASE("scale") {
  CHECK(scale(from({{1, -2}}), 3.0) == from({{3, -6}}));
}

TEST_CASE("non-finite results are reported") {
  const Matrix big = Matrix::Constant(1, 1, 1e308);
  CHECK_THROWS_AS(cwise_exp(big), NumericError);
  CHECK_THROWS_AS(scale(big, 1e10), NumericError);
  CHECK_THROWS_AS(matmul(Matrix::Constant(1, 1, 1e308),
                         Matrix::Constant(1, 1, 1e308)),
                  NumericError);
}

TEST_CASE("operations are pure") {
  Rng rng(7);
  const Matrix a = rng.gaussian_matrix(3, 3);
  const Matrix b = rng.gaussian_matrix(3, 3);
  CHECK(matmul(a, b) == matmul(a, b));
  CHECK(cwise_mul(a, b) == cwise_mul(a, b));
}
