#pragma once

#include <vector>

#include "vibloc/matrix.hpp"
#include "vibloc/rng.hpp"

namespace vibloc {

enum class Mode { train, eval };

// Gradient bundle for one layer: d(loss)/d(input) plus one gradient per
// parameter, in the same order as the layer's parameter list.
struct LayerGrad {
  Matrix input_grad;
  std::vector<Matrix> param_grads;
};

// Fully connected layer, y = x W + b with b broadcast over rows.
struct DenseLayer {
  Matrix W;  // in x out
  Matrix b;  // 1 x out

  Index in_dim() const { return W.rows(); }
  Index out_dim() const { return W.cols(); }
};

// Glorot-uniform init: W ~ U(-a, a) with a = sqrt(6 / (in + out)), b = 0.
DenseLayer init_dense(Index in_dim, Index out_dim, Rng& rng);

Matrix dense_forward(const DenseLayer& layer, const Matrix& x);

// Backward through y = x W + b given upstream = d(loss)/dy.
// param_grads follow the parameter order {W, b}.
LayerGrad dense_backward(const DenseLayer& layer, const Matrix& x,
                         const Matrix& upstream);

Matrix relu(const Matrix& x);

// Gate rule: passes upstream where x > 0, zero elsewhere. The tie at
// exactly 0 passes zero.
Matrix relu_backward(const Matrix& x, const Matrix& upstream);

// Inverted dropout. Kept entries are scaled by 1/(1-rate) at train time
// so the mask has unit mean and eval mode is the identity.
struct DropoutLayer {
  double rate = 0.0;
  // Entries in {0, 1/(1-rate)}. Empty until the first train-mode forward.
  Matrix last_mask;
};

// Bernoulli keep mask, keep probability 1-rate, kept entries 1/(1-rate).
Matrix sample_dropout_mask(Index rows, Index cols, double rate, Rng& rng);

// Train mode samples and stores a fresh mask and applies it; eval mode
// returns x unchanged.
Matrix dropout_forward(DropoutLayer& layer, const Matrix& x, Mode mode,
                       Rng& rng);

// Multiplies upstream by the mask stored by the last train-mode forward.
// Throws StateError if no mask has been stored yet.
Matrix dropout_backward(const DropoutLayer& layer, const Matrix& upstream);

}  // namespace vibloc
