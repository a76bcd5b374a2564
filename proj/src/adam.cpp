#include "vibloc/adam.hpp"

#include <cmath>

namespace vibloc {

AdamState init_adam(const std::vector<Matrix*>& params, double lr) {
  AdamState state;
  state.lr = lr;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Matrix* p : params) {
    state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
    state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  return state;
}

void adam_step(AdamState& state, const std::vector<Matrix*>& params,
               const std::vector<Matrix>& grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DimensionError(
        "adam_step: got " + std::to_string(params.size()) + " params, " +
        std::to_string(grads.size()) + " grads, state holds " +
        std::to_string(state.m.size()));
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw DimensionError("adam_step: grad " + std::to_string(i) + " is " +
                           shape_str(g) + ", parameter is " + shape_str(p));
    }
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] =
        state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseProduct(g);
    const Matrix mhat = state.m[i] / c1;
    const Matrix vhat = state.v[i] / c2;
    p.array() -=
        state.lr * mhat.array() / (vhat.array().sqrt() + state.eps_hat);
  }
}

}  // namespace vibloc
