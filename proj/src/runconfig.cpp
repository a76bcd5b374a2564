#include "vibloc/runconfig.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "vibloc/checkpoint.hpp"

namespace vibloc {

namespace {

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, double>) {
      out += format_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint64_t> RunConfig::sweep_seeds() const {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < seeds_per_cell; ++i) {
    seeds.push_back(seed + static_cast<std::uint64_t>(i));
  }
  return seeds;
}

std::vector<std::pair<std::string, std::string>> RunConfig::snapshot() const {
  return {
      {"data_path", data_path},
      {"output_dir", output_dir},
      {"seed", std::to_string(seed)},
      {"train_frac", format_double(train_frac)},
      {"input_dim", std::to_string(model.input_dim)},
      {"encoder_hidden", std::to_string(model.encoder_hidden)},
      {"latent_dim", std::to_string(model.latent_dim)},
      {"predictor_hidden", std::to_string(model.predictor_hidden)},
      {"predictor_layers", std::to_string(model.predictor_layers)},
      {"dropout_rate", format_double(model.dropout_rate)},
      {"beta", format_double(model.beta)},
      {"train_mc_samples", std::to_string(model.train_mc_samples)},
      {"eval_mc_samples", std::to_string(model.eval_mc_samples)},
      {"logvar_lo", format_double(model.logvar_lo)},
      {"logvar_hi", format_double(model.logvar_hi)},
      {"batch_size", std::to_string(train.batch_size)},
      {"max_epochs", std::to_string(train.max_epochs)},
      {"max_steps", std::to_string(train.max_steps)},
      {"patience", std::to_string(train.patience)},
      {"val_fraction", format_double(train.val_fraction)},
      {"learning_rate", format_double(train.learning_rate)},
      {"beta_grid", join(beta_grid)},
      {"fraction_grid", join(fraction_grid)},
      {"knn_grid", join(knn_grid)},
      {"seeds_per_cell", std::to_string(seeds_per_cell)},
      {"jobs", std::to_string(jobs)},
  };
}

void RunConfig::write_snapshot(const std::string& path,
                               const std::string& command) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "command=" << command << '\n';
  for (const auto& [k, v] : snapshot()) f << k << '=' << v << '\n';
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::string resolve_data_path(const std::string& flag_value) {
  std::string path = flag_value;
  if (path.empty()) {
    const char* env = std::getenv("VIB_DATA_DIR");
    if (!env || !*env) {
      throw ConfigError(
          "no data path: pass --data or set VIB_DATA_DIR");
    }
    path = env;
  }
  if (std::filesystem::is_directory(path)) {
    for (const char* name : {"trainingData.csv", "TrainingData.csv"}) {
      const std::filesystem::path candidate =
          std::filesystem::path(path) / name;
      if (std::filesystem::exists(candidate)) return candidate.string();
    }
    throw IoError("no trainingData.csv under directory '" + path + "'");
  }
  return path;
}

}  // namespace vibloc
