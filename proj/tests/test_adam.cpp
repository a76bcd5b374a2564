#include <doctest.h>

#include <cmath>

#include "vibloc/adam.hpp"
#include "vibloc/rng.hpp"

using namespace vibloc;

TEST_CASE("zero gradient leaves parameters unchanged") {
  Matrix p = Matrix::Constant(2, 2, 0.7);
  const Matrix before = p;
  AdamState state = init_adam({&p});
  adam_step(state, {&p}, {Matrix::Zero(2, 2)});
  CHECK(p == before);
  CHECK(state.t == 1);
}

TEST_CASE("first step is close to -lr for any gradient") {
  // Bias correction makes mhat/sqrt(vhat) = sign(g) up to eps_hat.
  Matrix p = Matrix::Zero(1, 1);
  AdamState state = init_adam({&p});
  adam_step(state, {&p}, {Matrix::Constant(1, 1, 0.5)});
  const double expected = -1e-3 * 0.5 / (0.5 + 1e-8);
  CHECK(p(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(p(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("first-step magnitude is bounded by 1.2 lr elementwise") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix p = Matrix::Zero(3, 3);
    Matrix g = rng.gaussian_matrix(3, 3) * std::pow(10.0, rng.uniform(-6, 6));
    AdamState state = init_adam({&p});
    adam_step(state, {&p}, {g});
    CHECK(p.cwiseAbs().maxCoeff() <= 1.2 * state.lr);
  }
}

TEST_CASE("parameters keep independent moments") {
  Matrix a = Matrix::Zero(1, 1);
  Matrix b = Matrix::Zero(1, 1);
  AdamState state = init_adam({&a, &b});
  adam_step(state, {&a, &b},
            {Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1)});
  CHECK(a(0, 0) != 0.0);
  CHECK(b(0, 0) == 0.0);
  CHECK(state.m[0](0, 0) != 0.0);
  CHECK(state.m[1](0, 0) == 0.0);
}

TEST_CASE("same state and grads give the same update") {
  auto run = [] {
    Matrix p = Matrix::Constant(2, 2, 1.0);
    AdamState state = init_adam({&p});
    Rng rng(3);
    for (int i = 0; i < 10; ++i) {
      adam_step(state, {&p}, {rng.gaussian_matrix(2, 2)});
    }
    return p;
  };
  CHECK(run() == run());
}

TEST_CASE("converges on the quadratic") {
  // f(p) = |p|^2, grad = 2p, from p0 = 1 everywhere.
  Matrix p = Matrix::Ones(2, 2);
  AdamState state = init_adam({&p}, /*lr=*/5e-3);
  for (int i = 0; i < 500; ++i) {
    adam_step(state, {&p}, {Matrix(2.0 * p)});
  }
  CHECK(p.cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("shape misalignment is rejected") {
  Matrix p = Matrix::Zero(2, 2);
  AdamState state = init_adam({&p});
  CHECK_THROWS_AS(adam_step(state, {&p}, {Matrix::Zero(1, 2)}),
                  DimensionError);
  CHECK_THROWS_AS(adam_step(state, {&p}, {}), DimensionError);
}
