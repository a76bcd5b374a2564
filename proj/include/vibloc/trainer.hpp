#pragma once

#include <cstdint>
#include <vector>

#include "vibloc/adam.hpp"
#include "vibloc/dataset.hpp"
#include "vibloc/vib.hpp"

namespace vibloc {

struct TrainOptions {
  int batch_size = 256;
  int max_epochs = 300;
  long max_steps = 0;  // 0 = no cap; otherwise stop after this many updates
  int patience = 20;   // epochs without val improvement before stopping
  double val_fraction = 0.10;  // carved from the training split
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  bool verbose = false;  // per-epoch line on stderr
};

struct EpochStats {
  int epoch = 0;
  double recon = 0.0;
  double kl = 0.0;
  double beta_kl = 0.0;
  double total = 0.0;
  double val_rmse = 0.0;  // NaN when no validation rows
};

struct TrainResult {
  VibModel model;  // best-validation parameters (final ones if no val split)
  AdamState adam;  // optimizer state at the end of the run
  std::vector<EpochStats> log;
  double best_val_rmse = 0.0;  // NaN when no validation rows
  int best_epoch = 0;
  long steps_run = 0;
  // Largest relative |total - (recon + beta*kl)| seen over all batches.
  // The trainer aborts if it ever exceeds kDecompositionTol.
  double max_decomposition_error = 0.0;

  static constexpr double kDecompositionTol = 1e-12;
};

// Minibatch Adam training with per-epoch validation RMSE and early
// stopping. Fully deterministic given (config, dataset, options).
TrainResult train_vib(const VibConfig& cfg, const FingerprintDataset& train,
                      const TrainOptions& opts);

}  // namespace vibloc
