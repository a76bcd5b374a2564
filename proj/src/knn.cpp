#include "vibloc/knn.hpp"

#include <algorithm>
#include <numeric>

#include "vibloc/metrics.hpp"

namespace vibloc {

KnnRegressor make_knn(int k, Matrix train_X, Matrix train_Y) {
  if (train_X.rows() == 0) {
    throw DomainError("knn: empty training set");
  }
  if (train_X.rows() != train_Y.rows()) {
    throw DimensionError("knn: " + std::to_string(train_X.rows()) +
                         " feature rows vs " + std::to_string(train_Y.rows()) +
                         " target rows");
  }
  if (k < 1 || k > train_X.rows()) {
    throw DomainError("knn: k must be in [1, " +
                      std::to_string(train_X.rows()) + "], got " +
                      std::to_string(k));
  }
  return KnnRegressor{k, std::move(train_X), std::move(train_Y)};
}

Matrix knn_predict(const KnnRegressor& model, const Matrix& queries) {
  if (queries.cols() != model.train_X.cols()) {
    throw DimensionError("knn_predict: queries " + shape_str(queries) +
                         " vs training features " +
                         shape_str(model.train_X));
  }
  const Index n_train = model.train_X.rows();
  const Index n_query = queries.rows();
  const int k = model.k;

  // Squared distances via the Gram expansion |t|^2 - 2 t.q + |q|^2; the
  // |q|^2 term is constant per query and does not affect ranking.
  const Eigen::VectorXd train_sq = model.train_X.rowwise().squaredNorm();
  Matrix pred(n_query, model.train_Y.cols());

  // Chunked so the cross-product block stays small in memory.
  const Index chunk = 512;
  std::vector<Index> order(static_cast<std::size_t>(n_train));
  for (Index q0 = 0; q0 < n_query; q0 += chunk) {
    const Index rows = std::min(chunk, n_query - q0);
    const Matrix cross =
        queries.middleRows(q0, rows) * model.train_X.transpose();
    for (Index i = 0; i < rows; ++i) {
      const auto score = (train_sq.transpose() - 2.0 * cross.row(i)).eval();
      std::iota(order.begin(), order.end(), Index{0});
      std::partial_sort(order.begin(), order.begin() + k, order.end(),
                        [&](Index a, Index b) {
                          if (score(a) != score(b)) return score(a) < score(b);
                          return a < b;
                        });
      Eigen::RowVectorXd mean =
          Eigen::RowVectorXd::Zero(model.train_Y.cols());
      for (int j = 0; j < k; ++j) mean += model.train_Y.row(order[j]);
      pred.row(q0 + i) = mean / static_cast<double>(k);
    }
  }
  return pred;
}

int tune_k(const Matrix& train_X, const Matrix& train_Y, const Matrix& val_X,
           const Matrix& val_Y, const std::vector<int>& candidates) {
  if (candidates.empty()) {
    throw DomainError("tune_k: empty candidate list");
  }
  int best_k = 0;
  double best_rmse = std::numeric_limits<double>::infinity();
  for (int k : candidates) {
    if (k > train_X.rows()) continue;
    const KnnRegressor model = make_knn(k, train_X, train_Y);
    const double err = rmse(knn_predict(model, val_X), val_Y);
    if (err < best_rmse) {
      best_rmse = err;
      best_k = k;
    }
  }
  if (best_k == 0) {
    throw DomainError("tune_k: no candidate k fits the training set size " +
                      std::to_string(train_X.rows()));
  }
  return best_k;
}

}  // namespace vibloc
