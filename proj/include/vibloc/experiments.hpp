#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vibloc/dataset.hpp"
#include "vibloc/trainer.hpp"
#include "vibloc/vib.hpp"

namespace vibloc {

// One completed (config, seed, arm) run of an experiment. Doubles are
// written with full precision, so files regenerate their aggregates
// exactly; wall_seconds is the one field that varies between reruns.
struct RunRow {
  std::string experiment;
  double beta = std::numeric_limits<double>::quiet_NaN();
  double fraction = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  std::string arm;  // "vib" or "knn"
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double recon = std::numeric_limits<double>::quiet_NaN();
  double kl = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

void write_result_csv(const std::string& path,
                      const std::vector<RunRow>& rows);
std::vector<RunRow> read_result_csv(const std::string& path);

struct Aggregate {
  double beta = std::numeric_limits<double>::quiet_NaN();
  double fraction = std::numeric_limits<double>::quiet_NaN();
  std::string arm;
  double mean_rmse = std::numeric_limits<double>::quiet_NaN();
  double std_rmse = std::numeric_limits<double>::quiet_NaN();  // NaN if <2 runs
  int runs = 0;       // finite-rmse runs entering the aggregate
  int divergent = 0;  // runs recorded with non-finite rmse
};

struct ExperimentResult {
  std::string name;
  std::vector<RunRow> rows;
  std::vector<Aggregate> aggregates;
};

struct SweepOptions {
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  TrainOptions train;   // per-cell training knobs; seed is taken per cell
  int jobs = 1;
  std::string csv_path;  // when set, rows persist there and completed
                         // (config, seed, arm) cells are skipped on rerun
};

// Test RMSE and eval-mode loss terms of a trained model.
struct VibEval {
  double rmse = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

VibEval evaluate_vib(const VibModel& model, const FingerprintDataset& test,
                     std::uint64_t seed);

// Trains a fresh model per (beta, seed) cell and records test RMSE.
// Training divergence is recorded as a NaN-rmse row, not an error.
ExperimentResult beta_sweep(const DataSplit& split, const VibConfig& base,
                            const std::vector<double>& betas,
                            const SweepOptions& opts);

// Mean-RMSE argmin over the vib aggregates (first grid entry on ties).
double best_beta(const ExperimentResult& result,
                 const std::vector<double>& betas);

// Per (fraction, seed) cell: subsamples the training split, trains the
// bottleneck model and a tuned k-NN on the same subsample, and records
// test RMSE for both arms.
ExperimentResult fraction_sweep(const DataSplit& split, const VibConfig& base,
                                const std::vector<double>& fractions,
                                const std::vector<int>& knn_candidates,
                                const SweepOptions& opts);

// 2-D view of the latent means: top-2 principal components of mu over the
// given rows, or the first two latent dims when the covariance is
// degenerate (flagged via used_pca = false).
struct ProjectionTable {
  bool used_pca = true;
  Matrix points;  // rows x 2
  std::vector<int> building;
  std::vector<int> floor;
};

ProjectionTable latent_projection(const VibModel& model, const Matrix& X,
                                  const std::vector<int>& building,
                                  const std::vector<int>& floor);

void write_projection_csv(const std::string& path,
                          const ProjectionTable& table);

}  // namespace vibloc
