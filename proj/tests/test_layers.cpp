#include <doctest.h>

#include <cmath>

#include "vibloc/gradcheck.hpp"
#include "vibloc/layers.hpp"

using namespace vibloc;

TEST_CASE("glorot init bounds and determinism") {
  Rng rng(7);
  const DenseLayer layer = init_dense(520, 512, rng);
  const double bound = std::sqrt(6.0 / (520.0 + 512.0));
  CHECK(layer.W.cwiseAbs().maxCoeff() < bound);
  CHECK(layer.b.isZero());

  Rng rng_a(7), rng_b(7);
  CHECK(init_dense(520, 512, rng_a).W == init_dense(520, 512, rng_b).W);

  Rng rng_c(9);
  const DenseLayer tiny = init_dense(1, 1, rng_c);
  CHECK(std::abs(tiny.W(0, 0)) < std::sqrt(3.0));

  Rng rng_d(1);
  CHECK_THROWS_AS(init_dense(0, 4, rng_d), DimensionError);
}

TEST_CASE("dense forward") {
  DenseLayer id{Matrix::Identity(3, 3), Matrix::Zero(1, 3)};
  Rng rng(2);
  const Matrix x = rng.gaussian_matrix(4, 3);
  CHECK(dense_forward(id, x) == x);

  DenseLayer affine{Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 1.0)};
  CHECK(dense_forward(affine, Matrix::Constant(1, 1, 3.0))(0, 0) == 7.0);

  CHECK(dense_forward(id, rng.gaussian_matrix(4, 3)).rows() == 4);
  CHECK_THROWS_AS(dense_forward(id, Matrix::Zero(2, 5)), DimensionError);
}

TEST_CASE("dense backward matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    DenseLayer layer = init_dense(4, 3, rng);
    layer.b = rng.gaussian_matrix(1, 3);
    const Matrix x = rng.gaussian_matrix(2, 4);
    // Weighted-sum head makes the scalar sensitive to every output entry.
    const Matrix weights = rng.gaussian_matrix(2, 3);

    const std::vector<Matrix> params = {layer.W, layer.b, x};
    const ScalarFn f = [&](const std::vector<Matrix>& p) {
      const DenseLayer probe{p[0], p[1]};
      return dense_forward(probe, p[2]).cwiseProduct(weights).sum();
    };
    const LayerGrad grad = dense_backward(layer, x, weights);
    const std::vector<Matrix> analytic = {grad.param_grads[0],
                                          grad.param_grads[1],
                                          grad.input_grad};
    const auto report = grad_check(f, params, analytic, 1e-5, 1e-4);
    INFO(report.summary());
    CHECK(report.pass);
  }
}

TEST_CASE("relu examples") {
  Matrix x(1, 3);
  x << -1, 0, 2;
  Matrix expected(1, 3);
  expected << 0, 0, 2;
  CHECK(relu(x) == expected);

  const Matrix pos = Matrix::Constant(2, 2, 3.5);
  CHECK(relu(pos) == pos);
}

TEST_CASE("relu backward gates by sign, tie at zero passes zero") {
  Matrix x(1, 3);
  x << -1, 2, 0;
  Matrix up(1, 3);
  up << 5, 5, 5;
  Matrix expected(1, 3);
  expected << 0, 5, 0;
  CHECK(relu_backward(x, up) == expected);
}

TEST_CASE("dropout degenerate rate and eval are identities") {
  Rng rng(5);
  const Matrix x = rng.gaussian_matrix(3, 4);
  DropoutLayer none{0.0, {}};
  CHECK(dropout_forward(none, x, Mode::train, rng) == x);
  DropoutLayer third{0.3, {}};
  CHECK(dropout_forward(third, x, Mode::eval, rng) == x);
}

TEST_CASE("inverted dropout keeps unit mean") {
  Rng rng(17);
  DropoutLayer layer{0.3, {}};
  const Matrix x = Matrix::Ones(100, 1000);
  const Matrix out = dropout_forward(layer, x, Mode::train, rng);
  CHECK(out.mean() == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("dropout mask is reused by backward") {
  Rng rng(23);
  DropoutLayer layer{0.5, {}};
  const Matrix x = Matrix::Ones(8, 8);
  const Matrix out = dropout_forward(layer, x, Mode::train, rng);
  // Output sparsity matches the stored mask exactly.
  CHECK((out.array() != 0.0).cast<int>().sum() ==
        (layer.last_mask.array() != 0.0).cast<int>().sum());
  const Matrix up = Matrix::Ones(8, 8);
  CHECK(dropout_backward(layer, up) == layer.last_mask);
}

TEST_CASE("dropout backward before forward is a state error") {
  DropoutLayer layer{0.3, {}};
  CHECK_THROWS_AS(dropout_backward(layer, Matrix::Ones(2, 2)), StateError);
}

TEST_CASE("layer stack is reproducible under a fixed seed") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    DenseLayer dense = init_dense(6, 5, rng);
    DropoutLayer drop{0.3, {}};
    const Matrix x = rng.uniform_matrix(4, 6, 0.0, 1.0);
    return dropout_forward(drop, relu(dense_forward(dense, x)), Mode::train,
                           rng);
  };
  CHECK(run(42) == run(42));
  CHECK(run(42) != run(43));
}
