#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vibloc/checkpoint.hpp"
#include "vibloc/experiments.hpp"
#include "vibloc/knn.hpp"
#include "vibloc/metrics.hpp"
#include "vibloc/runconfig.hpp"
#include "vibloc/trainer.hpp"

namespace fs = std::filesystem;
using namespace vibloc;

namespace {

struct CliState {
  RunConfig cfg;
  std::string data_flag;
  std::string model_path;
  std::string cache_out = "uji_cache.vibd";
};

void add_common_options(CLI::App* sub, CliState& st) {
  sub->add_option("--data", st.data_flag,
                  "Dataset CSV or ingest cache (default: VIB_DATA_DIR)");
  sub->add_option("--out", st.cfg.output_dir, "Output directory");
  sub->add_option("--seed", st.cfg.seed, "Master seed");
  sub->add_option("--train-frac", st.cfg.train_frac,
                  "Training fraction of the dataset split");
  sub->add_option("--beta", st.cfg.model.beta, "KL weight");
  sub->add_option("--latent-dim", st.cfg.model.latent_dim, "Latent width");
  sub->add_option("--input-dim", st.cfg.model.input_dim, "Input width");
  sub->add_option("--encoder-hidden", st.cfg.model.encoder_hidden,
                  "Encoder hidden width");
  sub->add_option("--predictor-hidden", st.cfg.model.predictor_hidden,
                  "Predictor hidden width");
  sub->add_option("--predictor-layers", st.cfg.model.predictor_layers,
                  "Predictor hidden layer count");
  sub->add_option("--dropout", st.cfg.model.dropout_rate,
                  "Predictor dropout rate");
  sub->add_option("--mc-samples-train", st.cfg.model.train_mc_samples,
                  "Monte Carlo samples per training step");
  sub->add_option("--mc-samples-eval", st.cfg.model.eval_mc_samples,
                  "Monte Carlo samples at inference");
  sub->add_option("--epochs", st.cfg.train.max_epochs, "Epoch cap");
  sub->add_option("--max-steps", st.cfg.train.max_steps,
                  "Optimizer step cap (0 = none)");
  sub->add_option("--batch-size", st.cfg.train.batch_size, "Minibatch rows");
  sub->add_option("--patience", st.cfg.train.patience,
                  "Early-stop patience in epochs");
  sub->add_option("--val-fraction", st.cfg.train.val_fraction,
                  "Validation fraction carved from the training split");
  sub->add_option("--learning-rate", st.cfg.train.learning_rate,
                  "Adam learning rate");
  sub->add_option("--beta-grid", st.cfg.beta_grid, "Sweep betas")
      ->delimiter(',');
  sub->add_option("--fraction-grid", st.cfg.fraction_grid, "Sweep fractions")
      ->delimiter(',');
  sub->add_option("--knn-grid", st.cfg.knn_grid, "Candidate k values")
      ->delimiter(',');
  sub->add_option("--seeds-per-cell", st.cfg.seeds_per_cell,
                  "Training seeds per sweep cell");
  sub->add_option("--jobs", st.cfg.jobs, "Concurrent sweep cells");
  sub->add_flag("--verbose", st.cfg.train.verbose, "Per-epoch progress");
  sub->set_config("--config", "", "key=value config file (flags override)");
  sub->allow_config_extras(false);
}

fs::path ensure_output_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  return fs::path(cfg.output_dir);
}

DataSplit load_split(const CliState& st) {
  const std::string path = resolve_data_path(st.data_flag);
  const PreparedData prepared = load_prepared(path);
  return split_dataset(prepared, st.cfg.train_frac, st.cfg.seed);
}

void write_epoch_log(const std::string& path,
                     const std::vector<EpochStats>& log) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "epoch,recon,kl,beta_kl,total,val_rmse\n";
  for (const EpochStats& e : log) {
    f << e.epoch << ',' << format_double(e.recon) << ',' << format_double(e.kl)
      << ',' << format_double(e.beta_kl) << ',' << format_double(e.total)
      << ',' << format_double(e.val_rmse) << '\n';
  }
  if (!f) throw IoError("write failed for '" + path + "'");
}

SweepOptions make_sweep_options(const CliState& st, const fs::path& csv) {
  SweepOptions opts;
  opts.seeds = st.cfg.sweep_seeds();
  opts.train = st.cfg.train;
  opts.jobs = st.cfg.jobs;
  opts.csv_path = csv.string();
  return opts;
}

int cmd_ingest(const CliState& st) {
  const std::string path = resolve_data_path(st.data_flag);
  const std::vector<RawRecord> records = load_csv(path);
  const PreparedData data = prepare(records);
  save_cache(data, st.cache_out);

  RunConfig snap = st.cfg;
  snap.data_path = path;
  snap.write_snapshot(st.cache_out + ".config.txt", "ingest");

  // Per-column sanity stats next to the cache, plot-ready.
  const std::string stats_path = st.cache_out + ".colstats.csv";
  std::ofstream stats(stats_path, std::ios::trunc);
  if (!stats) throw IoError("cannot open '" + stats_path + "' for writing");
  stats << "column,min,max,mean,detected_fraction\n";
  for (Index c = 0; c < data.X.cols(); ++c) {
    const auto col = data.X.col(c);
    const double detected =
        (col.array() > 0.0).cast<double>().sum() / static_cast<double>(col.size());
    stats << "WAP" << c + 1 << ',' << format_double(col.minCoeff()) << ','
          << format_double(col.maxCoeff()) << ',' << format_double(col.mean())
          << ',' << format_double(detected) << '\n';
  }

  std::printf("ingested %ld rows from %s\n", static_cast<long>(data.rows()),
              path.c_str());
  std::printf("feature range [%g, %g], mean %g\n", data.X.minCoeff(),
              data.X.maxCoeff(), data.X.mean());
  std::printf("longitude [%g, %g], latitude [%g, %g]\n",
              data.coords.col(0).minCoeff(), data.coords.col(0).maxCoeff(),
              data.coords.col(1).minCoeff(), data.coords.col(1).maxCoeff());
  std::printf("cache written to %s (column stats in %s)\n",
              st.cache_out.c_str(), stats_path.c_str());
  return 0;
}

int cmd_train(const CliState& st) {
  const std::string path = resolve_data_path(st.data_flag);
  const DataSplit split =
      split_dataset(load_prepared(path), st.cfg.train_frac, st.cfg.seed);

  TrainOptions topts = st.cfg.train;
  topts.seed = st.cfg.seed;
  const TrainResult result = train_vib(st.cfg.model, split.train, topts);

  const fs::path out = ensure_output_dir(st.cfg);
  RunConfig snap = st.cfg;
  snap.data_path = path;
  snap.write_snapshot((out / "train_config.txt").string(), "train");
  write_epoch_log((out / "train_log.csv").string(), result.log);
  save_training_state(result.model, result.adam,
                      (out / "model.ckpt").string());

  const VibEval ev = evaluate_vib(result.model, split.test, st.cfg.seed);
  std::printf("trained %ld steps over %d epochs (best epoch %d)\n",
              result.steps_run, static_cast<int>(result.log.size()),
              result.best_epoch);
  std::printf("final val RMSE: %s\n",
              format_double(result.best_val_rmse).c_str());
  std::printf("test RMSE: %s\n", format_double(ev.rmse).c_str());
  std::printf("checkpoint: %s\n", (out / "model.ckpt").string().c_str());
  return 0;
}

int cmd_evaluate(const CliState& st) {
  if (st.model_path.empty()) throw ConfigError("evaluate needs --model");
  const std::string path = resolve_data_path(st.data_flag);
  const VibModel model = load_model(st.model_path);
  const DataSplit split =
      split_dataset(load_prepared(path), st.cfg.train_frac, st.cfg.seed);
  const VibEval ev = evaluate_vib(model, split.test, st.cfg.seed);

  const fs::path out = ensure_output_dir(st.cfg);
  RunConfig snap = st.cfg;
  snap.data_path = path;
  snap.model = model.config;
  snap.write_snapshot((out / "evaluate_config.txt").string(), "evaluate");
  RunRow row;
  row.experiment = "evaluate";
  row.beta = model.config.beta;
  row.fraction = 1.0;
  row.seed = st.cfg.seed;
  row.arm = "vib";
  row.rmse = ev.rmse;
  row.recon = ev.recon;
  row.kl = ev.kl;
  write_result_csv((out / "evaluate.csv").string(), {row});

  std::printf("test RMSE: %s\n", format_double(ev.rmse).c_str());
  return 0;
}

int cmd_sweep_beta(const CliState& st) {
  const DataSplit split = load_split(st);
  const fs::path out = ensure_output_dir(st.cfg);
  RunConfig snap = st.cfg;
  snap.data_path = resolve_data_path(st.data_flag);
  snap.write_snapshot((out / "beta_sweep_config.txt").string(), "sweep-beta");

  const ExperimentResult result =
      beta_sweep(split, st.cfg.model, st.cfg.beta_grid,
                 make_sweep_options(st, out / "beta_sweep.csv"));

  std::printf("beta        mean_rmse    std_rmse  runs\n");
  for (const Aggregate& a : result.aggregates) {
    std::printf("%-10g  %-10.6g  %-8.3g  %d\n", a.beta, a.mean_rmse,
                a.std_rmse, a.runs);
  }
  std::printf("best beta: %g\n", best_beta(result, st.cfg.beta_grid));
  std::printf("results: %s\n", (out / "beta_sweep.csv").string().c_str());
  return 0;
}

int cmd_sweep_fraction(const CliState& st) {
  const DataSplit split = load_split(st);
  const fs::path out = ensure_output_dir(st.cfg);
  RunConfig snap = st.cfg;
  snap.data_path = resolve_data_path(st.data_flag);
  snap.write_snapshot((out / "fraction_sweep_config.txt").string(),
                      "sweep-fraction");

  const ExperimentResult result =
      fraction_sweep(split, st.cfg.model, st.cfg.fraction_grid,
                     st.cfg.knn_grid,
                     make_sweep_options(st, out / "fraction_sweep.csv"));

  std::printf("fraction  arm  mean_rmse    std_rmse  runs\n");
  for (const Aggregate& a : result.aggregates) {
    std::printf("%-8g  %-3s  %-10.6g  %-8.3g  %d\n", a.fraction,
                a.arm.c_str(), a.mean_rmse, a.std_rmse, a.runs);
  }
  std::printf("results: %s\n", (out / "fraction_sweep.csv").string().c_str());
  return 0;
}

int cmd_project_latent(const CliState& st) {
  if (st.model_path.empty()) throw ConfigError("project-latent needs --model");
  const std::string path = resolve_data_path(st.data_flag);
  const PreparedData data = load_prepared(path);
  const VibModel model = load_model(st.model_path);

  const ProjectionTable table =
      latent_projection(model, data.X, data.building, data.floor);
  const fs::path out = ensure_output_dir(st.cfg);
  RunConfig snap = st.cfg;
  snap.data_path = path;
  snap.model = model.config;
  snap.write_snapshot((out / "projection_config.txt").string(),
                      "project-latent");
  write_projection_csv((out / "latent_projection.csv").string(), table);

  std::printf("projected %ld rows (%s)\n",
              static_cast<long>(table.points.rows()),
              table.used_pca ? "pca" : "fallback-first-two-latent-dims");
  std::printf("results: %s\n",
              (out / "latent_projection.csv").string().c_str());
  return 0;
}

int cmd_baseline_knn(const CliState& st) {
  const DataSplit split = load_split(st);
  const TrainValSplit tv =
      carve_validation(split.train, st.cfg.train.val_fraction, st.cfg.seed);
  const auto t0 = std::chrono::steady_clock::now();
  const int k = tv.val.rows() > 0
                    ? tune_k(tv.train.X, tv.train.Y, tv.val.X, tv.val.Y,
                             st.cfg.knn_grid)
                    : st.cfg.knn_grid.front();
  const KnnRegressor knn = make_knn(k, split.train.X, split.train.Y);
  const double err = rmse(knn_predict(knn, split.test.X), split.test.Y);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const fs::path out = ensure_output_dir(st.cfg);
  RunConfig snap = st.cfg;
  snap.data_path = resolve_data_path(st.data_flag);
  snap.write_snapshot((out / "knn_config.txt").string(), "baseline-knn");
  RunRow row;
  row.experiment = "knn_baseline";
  row.fraction = 1.0;
  row.seed = st.cfg.seed;
  row.arm = "knn";
  row.rmse = err;
  row.wall_seconds = wall;
  write_result_csv((out / "knn.csv").string(), {row});

  std::printf("tuned k: %d\n", k);
  std::printf("test RMSE: %s\n", format_double(err).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WiFi-fingerprint positioning with a variational information "
               "bottleneck regressor"};
  app.require_subcommand(1);

  CliState st;

  CLI::App* ingest = app.add_subcommand(
      "ingest", "Validate a dataset CSV and write a preprocessed cache");
  ingest->add_option("--cache-out", st.cache_out, "Cache file to write");
  add_common_options(ingest, st);

  CLI::App* train = app.add_subcommand(
      "train", "Train on the training split, write checkpoint and epoch log");
  add_common_options(train, st);

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Test-split RMSE of a checkpoint");
  evaluate->add_option("--model", st.model_path, "Checkpoint path");
  add_common_options(evaluate, st);

  CLI::App* sweep_beta = app.add_subcommand(
      "sweep-beta", "Train across the beta grid and rank by test RMSE");
  add_common_options(sweep_beta, st);

  CLI::App* sweep_fraction = app.add_subcommand(
      "sweep-fraction",
      "Train across labeled-data fractions, with a k-NN arm per cell");
  add_common_options(sweep_fraction, st);

  CLI::App* project = app.add_subcommand(
      "project-latent", "2-D projection of latent means with aux labels");
  project->add_option("--model", st.model_path, "Checkpoint path");
  add_common_options(project, st);

  CLI::App* baseline = app.add_subcommand(
      "baseline-knn", "Tune and evaluate the k-NN coordinate regressor");
  add_common_options(baseline, st);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    std::fprintf(stderr, "valid config keys:\n");
    for (const CLI::App* sub : app.get_subcommands({})) {
      for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = opt->get_lnames().empty()
                                     ? std::string()
                                     : opt->get_lnames().front();
        if (!name.empty() && name != "help") {
          std::fprintf(stderr, "  %s\n", name.c_str());
        }
      }
    }
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (ingest->parsed()) return cmd_ingest(st);
    if (train->parsed()) return cmd_train(st);
    if (evaluate->parsed()) return cmd_evaluate(st);
    if (sweep_beta->parsed()) return cmd_sweep_beta(st);
    if (sweep_fraction->parsed()) return cmd_sweep_fraction(st);
    if (project->parsed()) return cmd_project_latent(st);
    if (baseline->parsed()) return cmd_baseline_knn(st);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
  return 0;
}
