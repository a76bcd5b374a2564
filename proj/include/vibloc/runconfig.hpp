#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vibloc/trainer.hpp"
#include "vibloc/vib.hpp"

namespace vibloc {

// Everything a CLI command needs to be reproducible. Commands write the
// resolved snapshot next to their outputs; identical snapshots on the
// same data give identical artifacts.
struct RunConfig {
  std::string data_path;  // CSV or ingest cache; VIB_DATA_DIR as fallback
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  double train_frac = 0.8;

  VibConfig model;
  TrainOptions train;

  std::vector<double> beta_grid = {1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
  std::vector<double> fraction_grid = {0.05, 0.1, 0.25, 0.5, 1.0};
  std::vector<int> knn_grid = {1, 3, 5, 7, 9};
  int seeds_per_cell = 3;
  int jobs = 1;

  // Per-cell training seeds for sweeps: seed, seed+1, ...
  std::vector<std::uint64_t> sweep_seeds() const;

  std::vector<std::pair<std::string, std::string>> snapshot() const;
  void write_snapshot(const std::string& path,
                      const std::string& command) const;
};

// Resolves the data path: the explicit flag if given, otherwise
// VIB_DATA_DIR (a file, or a directory holding trainingData.csv).
std::string resolve_data_path(const std::string& flag_value);

}  // namespace vibloc
