#include "vibloc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "vibloc/checkpoint.hpp"
#include "vibloc/knn.hpp"
#include "vibloc/metrics.hpp"
#include "vibloc/rng.hpp"

namespace vibloc {

namespace {

constexpr char kResultHeader[] =
    "experiment,beta,fraction,seed,arm,rmse,recon,kl,wall_seconds";

std::string row_to_csv(const RunRow& r) {
  return r.experiment + "," + format_double(r.beta) + "," +
         format_double(r.fraction) + "," + std::to_string(r.seed) + "," +
         r.arm + "," + format_double(r.rmse) + "," + format_double(r.recon) +
         "," + format_double(r.kl) + "," + format_double(r.wall_seconds);
}

// Key identifying a cell's row independent of measured values.
std::string row_key(const std::string& experiment, double beta,
                    double fraction, std::uint64_t seed,
                    const std::string& arm) {
  return experiment + "|" + format_double(beta) + "|" +
         format_double(fraction) + "|" + std::to_string(seed) + "|" + arm;
}

std::string row_key(const RunRow& r) {
  return row_key(r.experiment, r.beta, r.fraction, r.seed, r.arm);
}

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

void write_result_csv(const std::string& path,
                      const std::vector<RunRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << kResultHeader << '\n';
  for (const RunRow& r : rows) f << row_to_csv(r) << '\n';
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::vector<RunRow> read_result_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(f, line) || line != kResultHeader) {
    throw ParseError("'" + path + "': unexpected result header '" + line +
                     "'");
  }
  std::vector<RunRow> rows;
  long line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (cells.size() != 9) {
      throw ParseError("'" + path + "' line " + std::to_string(line_no) +
                       ": expected 9 cells, found " +
                       std::to_string(cells.size()));
    }
    RunRow r;
    r.experiment = cells[0];
    r.beta = parse_double(cells[1], "beta");
    r.fraction = parse_double(cells[2], "fraction");
    r.seed = static_cast<std::uint64_t>(parse_long(cells[3], "seed"));
    r.arm = cells[4];
    r.rmse = parse_double(cells[5], "rmse");
    r.recon = parse_double(cells[6], "recon");
    r.kl = parse_double(cells[7], "kl");
    r.wall_seconds = parse_double(cells[8], "wall_seconds");
    rows.push_back(std::move(r));
  }
  return rows;
}

VibEval evaluate_vib(const VibModel& model, const FingerprintDataset& test,
                     std::uint64_t seed) {
  Rng eval_rng = Rng(seed).derive("test-eval");
  const Matrix pred = infer(model, test.X, eval_rng);
  VibEval ev;
  ev.rmse = rmse(pred, test.Y);
  ev.recon = (pred - test.Y).squaredNorm() /
             static_cast<double>(pred.rows() * pred.cols());
  ev.kl = kl_standard_normal(encode(model, test.X));
  return ev;
}

namespace {

// Grouped mean/std (population of seeds, sample std with n-1) over rows
// sharing (beta, fraction, arm). Non-finite rmse rows count as divergent.
std::vector<Aggregate> aggregate_rows(const std::vector<RunRow>& rows) {
  std::vector<Aggregate> out;
  auto find = [&](const RunRow& r) -> Aggregate* {
    for (auto& a : out) {
      const bool same_beta = (std::isnan(a.beta) && std::isnan(r.beta)) ||
                             a.beta == r.beta;
      const bool same_frac =
          (std::isnan(a.fraction) && std::isnan(r.fraction)) ||
          a.fraction == r.fraction;
      if (same_beta && same_frac && a.arm == r.arm) return &a;
    }
    out.push_back({r.beta, r.fraction, r.arm, 0.0, 0.0, 0, 0});
    return &out.back();
  };
  for (const RunRow& r : rows) {
    Aggregate* a = find(r);
    if (std::isfinite(r.rmse)) {
      a->mean_rmse += r.rmse;
      ++a->runs;
    } else {
      ++a->divergent;
    }
  }
  for (auto& a : out) {
    if (a.runs > 0) {
      a.mean_rmse /= a.runs;
    } else {
      a.mean_rmse = std::numeric_limits<double>::quiet_NaN();
    }
  }
  for (auto& a : out) {
    if (a.runs < 2) {
      a.std_rmse = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double ss = 0.0;
    for (const RunRow& r : rows) {
      const bool same_beta = (std::isnan(a.beta) && std::isnan(r.beta)) ||
                             a.beta == r.beta;
      const bool same_frac =
          (std::isnan(a.fraction) && std::isnan(r.fraction)) ||
          a.fraction == r.fraction;
      if (same_beta && same_frac && a.arm == r.arm && std::isfinite(r.rmse)) {
        ss += (r.rmse - a.mean_rmse) * (r.rmse - a.mean_rmse);
      }
    }
    a.std_rmse = std::sqrt(ss / (a.runs - 1));
  }
  return out;
}

// Shared sweep machinery: runs `cells` through a worker pool, skipping
// cells whose rows already exist in the CSV, appending rows as cells
// complete, and rewriting the file in canonical cell order at the end.
struct Cell {
  std::vector<std::string> expected_keys;
  std::function<std::vector<RunRow>()> run;
};

std::vector<RunRow> run_cells(const std::string& csv_path, int jobs,
                              std::vector<Cell>& cells) {
  std::vector<RunRow> existing;
  if (!csv_path.empty() && std::filesystem::exists(csv_path)) {
    existing = read_result_csv(csv_path);
  }
  auto existing_row = [&](const std::string& key) -> const RunRow* {
    for (const RunRow& r : existing) {
      if (row_key(r) == key) return &r;
    }
    return nullptr;
  };

  // Slot per cell, filled either from the existing file or by running.
  std::vector<std::vector<RunRow>> slots(cells.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    bool complete = true;
    std::vector<RunRow> reused;
    for (const std::string& key : cells[i].expected_keys) {
      const RunRow* r = existing_row(key);
      if (!r) {
        complete = false;
        break;
      }
      reused.push_back(*r);
    }
    if (complete) {
      slots[i] = std::move(reused);
    } else {
      pending.push_back(i);
    }
  }

  std::mutex io_mutex;
  std::ofstream append;
  if (!csv_path.empty()) {
    const bool fresh = !std::filesystem::exists(csv_path);
    append.open(csv_path, std::ios::app);
    if (!append) throw IoError("cannot open '" + csv_path + "' for append");
    if (fresh) append << kResultHeader << '\n';
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t my = next.fetch_add(1);
      if (my >= pending.size()) return;
      const std::size_t idx = pending[my];
      try {
        std::vector<RunRow> rows = cells[idx].run();
        std::lock_guard<std::mutex> lock(io_mutex);
        if (append.is_open()) {
          for (const RunRow& r : rows) append << row_to_csv(r) << '\n';
          append.flush();
        }
        slots[idx] = std::move(rows);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(pending.size())));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (append.is_open()) append.close();
  if (first_error) std::rethrow_exception(first_error);

  std::vector<RunRow> all;
  for (auto& slot : slots) {
    for (RunRow& r : slot) all.push_back(std::move(r));
  }
  if (!csv_path.empty()) write_result_csv(csv_path, all);
  return all;
}

RunRow divergent_row(std::string experiment, double beta, double fraction,
                     std::uint64_t seed, std::string arm, double wall) {
  RunRow r;
  r.experiment = std::move(experiment);
  r.beta = beta;
  r.fraction = fraction;
  r.seed = seed;
  r.arm = std::move(arm);
  r.wall_seconds = wall;
  return r;  // rmse/recon/kl stay NaN
}

}  // namespace

ExperimentResult beta_sweep(const DataSplit& split, const VibConfig& base,
                            const std::vector<double>& betas,
                            const SweepOptions& opts) {
  if (betas.empty()) throw DomainError("beta_sweep: empty beta grid");

  std::vector<Cell> cells;
  for (const double beta : betas) {
    for (const std::uint64_t seed : opts.seeds) {
      Cell cell;
      cell.expected_keys = {row_key("beta_sweep", beta, 1.0, seed, "vib")};
      cell.run = [&, beta, seed]() {
        const auto t0 = std::chrono::steady_clock::now();
        VibConfig cfg = base;
        cfg.beta = beta;
        TrainOptions topts = opts.train;
        topts.seed = seed;
        RunRow r;
        r.experiment = "beta_sweep";
        r.beta = beta;
        r.fraction = 1.0;
        r.seed = seed;
        r.arm = "vib";
        try {
          const TrainResult tr = train_vib(cfg, split.train, topts);
          const VibEval ev = evaluate_vib(tr.model, split.test, seed);
          r.rmse = ev.rmse;
          r.recon = ev.recon;
          r.kl = ev.kl;
        } catch (const NumericError&) {
          return std::vector<RunRow>{divergent_row(
              "beta_sweep", beta, 1.0, seed, "vib", wall_since(t0))};
        }
        r.wall_seconds = wall_since(t0);
        return std::vector<RunRow>{r};
      };
      cells.push_back(std::move(cell));
    }
  }

  ExperimentResult result;
  result.name = "beta_sweep";
  result.rows = run_cells(opts.csv_path, opts.jobs, cells);
  result.aggregates = aggregate_rows(result.rows);
  return result;
}

double best_beta(const ExperimentResult& result,
                 const std::vector<double>& betas) {
  double best = std::numeric_limits<double>::quiet_NaN();
  double best_rmse = std::numeric_limits<double>::infinity();
  for (const double beta : betas) {
    for (const Aggregate& a : result.aggregates) {
      if (a.arm == "vib" && a.beta == beta && a.runs > 0 &&
          a.mean_rmse < best_rmse) {
        best_rmse = a.mean_rmse;
        best = beta;
      }
    }
  }
  if (std::isnan(best)) {
    throw DomainError("best_beta: no finished runs to rank");
  }
  return best;
}

ExperimentResult fraction_sweep(const DataSplit& split, const VibConfig& base,
                                const std::vector<double>& fractions,
                                const std::vector<int>& knn_candidates,
                                const SweepOptions& opts) {
  if (fractions.empty()) throw DomainError("fraction_sweep: empty grid");

  std::vector<Cell> cells;
  for (const double fraction : fractions) {
    for (const std::uint64_t seed : opts.seeds) {
      Cell cell;
      cell.expected_keys = {
          row_key("fraction_sweep", base.beta, fraction, seed, "vib"),
          row_key("fraction_sweep", base.beta, fraction, seed, "knn")};
      cell.run = [&, fraction, seed]() {
        const FingerprintDataset sub =
            labeled_fraction(split.train, fraction, seed);

        std::vector<RunRow> rows;
        {
          const auto t0 = std::chrono::steady_clock::now();
          TrainOptions topts = opts.train;
          topts.seed = seed;
          RunRow r;
          r.experiment = "fraction_sweep";
          r.beta = base.beta;
          r.fraction = fraction;
          r.seed = seed;
          r.arm = "vib";
          try {
            const TrainResult tr = train_vib(base, sub, topts);
            const VibEval ev = evaluate_vib(tr.model, split.test, seed);
            r.rmse = ev.rmse;
            r.recon = ev.recon;
            r.kl = ev.kl;
            r.wall_seconds = wall_since(t0);
          } catch (const NumericError&) {
            r = divergent_row("fraction_sweep", base.beta, fraction, seed,
                              "vib", wall_since(t0));
          }
          rows.push_back(std::move(r));
        }
        {
          const auto t0 = std::chrono::steady_clock::now();
          const TrainValSplit tv =
              carve_validation(sub, opts.train.val_fraction, seed);
          const int k = tv.val.rows() > 0
                            ? tune_k(tv.train.X, tv.train.Y, tv.val.X,
                                     tv.val.Y, knn_candidates)
                            : knn_candidates.front();
          const KnnRegressor knn = make_knn(
              std::min<int>(k, static_cast<int>(sub.rows())), sub.X, sub.Y);
          RunRow r;
          r.experiment = "fraction_sweep";
          r.beta = base.beta;
          r.fraction = fraction;
          r.seed = seed;
          r.arm = "knn";
          r.rmse = rmse(knn_predict(knn, split.test.X), split.test.Y);
          r.wall_seconds = wall_since(t0);
          rows.push_back(std::move(r));
        }
        return rows;
      };
      cells.push_back(std::move(cell));
    }
  }

  ExperimentResult result;
  result.name = "fraction_sweep";
  result.rows = run_cells(opts.csv_path, opts.jobs, cells);
  result.aggregates = aggregate_rows(result.rows);
  return result;
}

ProjectionTable latent_projection(const VibModel& model, const Matrix& X,
                                  const std::vector<int>& building,
                                  const std::vector<int>& floor) {
  if (static_cast<std::size_t>(X.rows()) != building.size() ||
      building.size() != floor.size()) {
    throw DimensionError("latent_projection: label lists do not match rows");
  }
  const Matrix mu = encode(model, X).mu;

  ProjectionTable table;
  table.building = building;
  table.floor = floor;

  const Index n = mu.rows();
  const Matrix centered = mu.rowwise() - mu.colwise().mean();
  bool degenerate = n < 2 || mu.cols() < 2;
  Eigen::SelfAdjointEigenSolver<Matrix> eig;
  if (!degenerate) {
    const Matrix cov =
        centered.transpose() * centered / static_cast<double>(n - 1);
    eig.compute(cov);
    const auto& vals = eig.eigenvalues();  // ascending
    const double top = vals(vals.size() - 1);
    const double second = vals(vals.size() - 2);
    degenerate = !(second > 1e-12 * std::max(1.0, top));
  }

  if (degenerate) {
    table.used_pca = false;
    table.points.resize(n, 2);
    table.points.col(0) = mu.col(0);
    if (mu.cols() > 1) {
      table.points.col(1) = mu.col(1);
    } else {
      table.points.col(1).setZero();
    }
    return table;
  }

  Matrix components(mu.cols(), 2);
  components.col(0) = eig.eigenvectors().col(mu.cols() - 1);
  components.col(1) = eig.eigenvectors().col(mu.cols() - 2);
  // Canonical sign: the entry with the largest magnitude is positive.
  for (Index c = 0; c < 2; ++c) {
    Index at = 0;
    components.col(c).cwiseAbs().maxCoeff(&at);
    if (components(at, c) < 0.0) components.col(c) = -components.col(c);
  }
  table.used_pca = true;
  table.points = centered * components;
  return table;
}

void write_projection_csv(const std::string& path,
                          const ProjectionTable& table) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "# projection: "
    << (table.used_pca ? "pca" : "fallback-first-two-latent-dims") << '\n';
  f << "pc1,pc2,building,floor\n";
  for (Index r = 0; r < table.points.rows(); ++r) {
    f << format_double(table.points(r, 0)) << ','
      << format_double(table.points(r, 1)) << ','
      << table.building[static_cast<std::size_t>(r)] << ','
      << table.floor[static_cast<std::size_t>(r)] << '\n';
  }
  if (!f) throw IoError("write failed for '" + path + "'");
}

}  // namespace vibloc
