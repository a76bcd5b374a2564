#pragma once

#include <vector>

#include "vibloc/matrix.hpp"

namespace vibloc {

// Brute-force k-nearest-neighbor coordinate regressor over preprocessed
// fingerprint space (Euclidean distance, unweighted neighbor mean).
struct KnnRegressor {
  int k = 1;
  Matrix train_X;
  Matrix train_Y;
};

KnnRegressor make_knn(int k, Matrix train_X, Matrix train_Y);

// For each query row: the k training rows with smallest Euclidean
// distance (ties broken by lower training-row index), averaged
// unweighted over their targets.
Matrix knn_predict(const KnnRegressor& model, const Matrix& queries);

// Smallest candidate k with the lowest validation RMSE.
int tune_k(const Matrix& train_X, const Matrix& train_Y, const Matrix& val_X,
           const Matrix& val_Y, const std::vector<int>& candidates);

}  // namespace vibloc
