#pragma once

#include <vector>

#include "vibloc/matrix.hpp"

namespace vibloc {

// Adam optimizer state with bias-corrected first/second moments.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
  long t = 0;
  std::vector<Matrix> m;  // one accumulator per parameter, same shape
  std::vector<Matrix> v;
};

AdamState init_adam(const std::vector<Matrix*>& params, double lr = 1e-3);

// One update, in place:
//   t <- t+1
//   m <- b1 m + (1-b1) g        v <- b2 v + (1-b2) g^2
//   p <- p - lr * mhat / (sqrt(vhat) + eps_hat)
// with mhat = m/(1-b1^t), vhat = v/(1-b2^t).
void adam_step(AdamState& state, const std::vector<Matrix*>& params,
               const std::vector<Matrix>& grads);

}  // namespace vibloc
