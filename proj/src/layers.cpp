#include "vibloc/layers.hpp"

#include <cmath>

namespace vibloc {

DenseLayer init_dense(Index in_dim, Index out_dim, Rng& rng) {
  if (in_dim < 1 || out_dim < 1) {
    throw DimensionError("init_dense: dims must be >= 1, got " +
                         std::to_string(in_dim) + " and " +
                         std::to_string(out_dim));
  }
  const double a = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  DenseLayer layer;
  layer.W = rng.uniform_matrix(in_dim, out_dim, -a, a);
  layer.b = Matrix::Zero(1, out_dim);
  return layer;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  if (x.cols() != layer.in_dim()) {
    throw DimensionError("dense_forward: input " + shape_str(x) +
                         " does not match weights " + shape_str(layer.W));
  }
  Matrix out = x * layer.W;
  out.rowwise() += layer.b.row(0);
  return out;
}

LayerGrad dense_backward(const DenseLayer& layer, const Matrix& x,
                         const Matrix& upstream) {
  if (x.cols() != layer.in_dim()) {
    throw DimensionError("dense_backward: input " + shape_str(x) +
                         " does not match weights " + shape_str(layer.W));
  }
  if (upstream.rows() != x.rows() || upstream.cols() != layer.out_dim()) {
    throw DimensionError("dense_backward: upstream " + shape_str(upstream) +
                         " does not match output shape " +
                         std::to_string(x.rows()) + "x" +
                         std::to_string(layer.out_dim()));
  }
  LayerGrad grad;
  grad.input_grad = upstream * layer.W.transpose();
  grad.param_grads.resize(2);
  grad.param_grads[0] = x.transpose() * upstream;
  grad.param_grads[1] = upstream.colwise().sum();
  return grad;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& x, const Matrix& upstream) {
  if (x.rows() != upstream.rows() || x.cols() != upstream.cols()) {
    throw DimensionError("relu_backward: input " + shape_str(x) +
                         " vs upstream " + shape_str(upstream));
  }
  return (x.array() > 0.0).select(upstream, Matrix::Zero(x.rows(), x.cols()));
}

Matrix sample_dropout_mask(Index rows, Index cols, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw DomainError("dropout: rate must be in [0, 1), got " +
                      std::to_string(rate));
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      mask(r, c) = rng.bernoulli(1.0 - rate) ? keep_scale : 0.0;
  return mask;
}

Matrix dropout_forward(DropoutLayer& layer, const Matrix& x, Mode mode,
                       Rng& rng) {
  if (mode == Mode::eval) return x;
  layer.last_mask = sample_dropout_mask(x.rows(), x.cols(), layer.rate, rng);
  return x.cwiseProduct(layer.last_mask);
}

Matrix dropout_backward(const DropoutLayer& layer, const Matrix& upstream) {
  if (layer.last_mask.size() == 0) {
    throw StateError("dropout_backward: no stored mask; call a train-mode "
                     "forward first");
  }
  if (layer.last_mask.rows() != upstream.rows() ||
      layer.last_mask.cols() != upstream.cols()) {
    throw DimensionError("dropout_backward: upstream " + shape_str(upstream) +
                         " does not match stored mask " +
                         shape_str(layer.last_mask));
  }
  return upstream.cwiseProduct(layer.last_mask);
}

}  // namespace vibloc
