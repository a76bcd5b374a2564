#include "vibloc/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "vibloc/metrics.hpp"
#include "vibloc/rng.hpp"

namespace vibloc {

namespace {

Matrix rows_of(const Matrix& m, const std::vector<Index>& idx, Index begin,
               Index count) {
  Matrix out(count, m.cols());
  for (Index i = 0; i < count; ++i) {
    out.row(i) = m.row(idx[static_cast<std::size_t>(begin + i)]);
  }
  return out;
}

}  // namespace

TrainResult train_vib(const VibConfig& cfg, const FingerprintDataset& train,
                      const TrainOptions& opts) {
  cfg.validate();
  if (opts.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (opts.max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (opts.patience < 1) throw ConfigError("train: patience must be >= 1");
  if (train.rows() < 2) {
    throw DomainError("train: need at least 2 training rows");
  }
  if (train.features() != cfg.input_dim) {
    throw DimensionError("train: dataset has " +
                         std::to_string(train.features()) +
                         " features, config expects " +
                         std::to_string(cfg.input_dim));
  }

  const TrainValSplit tv = carve_validation(train, opts.val_fraction, opts.seed);
  const bool has_val = tv.val.rows() > 0;

  const Rng master(opts.seed);
  Rng init_rng = master.derive("init");
  Rng shuffle_rng = master.derive("shuffle");
  Rng noise_rng = master.derive("noise");
  Rng val_rng = master.derive("val-eval");

  TrainResult result;
  result.model = init_vib_model(cfg, init_rng);
  result.adam = init_adam(result.model.parameters(), opts.learning_rate);
  result.best_val_rmse = std::numeric_limits<double>::quiet_NaN();
  result.best_epoch = 0;

  VibModel best_model = result.model;
  int epochs_since_best = 0;
  const Index n = tv.train.rows();
  bool step_cap_hit = false;

  for (int epoch = 1; epoch <= opts.max_epochs && !step_cap_hit; ++epoch) {
    const std::vector<Index> perm = shuffle_rng.permutation(n);
    double sum_recon = 0.0, sum_kl = 0.0, sum_total = 0.0;
    Index rows_seen = 0;

    for (Index start = 0; start < n; start += opts.batch_size) {
      const Index count = std::min<Index>(opts.batch_size, n - start);
      const Matrix bx = rows_of(tv.train.X, perm, start, count);
      const Matrix by = rows_of(tv.train.Y, perm, start, count);

      Gradients grads = backward(result.model, bx, by, noise_rng);
      const LossBreakdown& lb = grads.value;

      // The loss must decompose exactly; a violation is a defect, not a
      // tolerance issue.
      const double rel = std::abs(lb.total - (lb.recon + cfg.beta * lb.kl)) /
                         std::max(1.0, std::abs(lb.total));
      result.max_decomposition_error =
          std::max(result.max_decomposition_error, rel);
      if (rel > TrainResult::kDecompositionTol) {
        throw NumericError("train: loss decomposition violated, relative "
                           "error " + std::to_string(rel));
      }

      adam_step(result.adam, result.model.parameters(), grads.by_param);
      sum_recon += lb.recon * static_cast<double>(count);
      sum_kl += lb.kl * static_cast<double>(count);
      sum_total += lb.total * static_cast<double>(count);
      rows_seen += count;

      ++result.steps_run;
      if (opts.max_steps > 0 && result.steps_run >= opts.max_steps) {
        step_cap_hit = true;
        break;
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.recon = sum_recon / static_cast<double>(rows_seen);
    stats.kl = sum_kl / static_cast<double>(rows_seen);
    stats.beta_kl = cfg.beta * stats.kl;
    stats.total = sum_total / static_cast<double>(rows_seen);
    stats.val_rmse = std::numeric_limits<double>::quiet_NaN();

    if (has_val) {
      const Matrix val_pred = infer(result.model, tv.val.X, val_rng);
      stats.val_rmse = rmse(val_pred, tv.val.Y);
      if (std::isnan(result.best_val_rmse) ||
          stats.val_rmse < result.best_val_rmse) {
        result.best_val_rmse = stats.val_rmse;
        result.best_epoch = epoch;
        best_model = result.model;
        epochs_since_best = 0;
      } else {
        ++epochs_since_best;
      }
    }

    if (opts.verbose) {
      std::fprintf(stderr,
                   "epoch %4d  total %.6f  recon %.6f  kl %.4f  val_rmse %s\n",
                   epoch, stats.total, stats.recon, stats.kl,
                   has_val ? std::to_string(stats.val_rmse).c_str() : "-");
    }
    result.log.push_back(stats);

    if (has_val && epochs_since_best >= opts.patience) break;
  }

  if (has_val) {
    result.model = std::move(best_model);
  } else {
    result.best_epoch = result.log.empty() ? 0 : result.log.back().epoch;
  }
  return result;
}

}  // namespace vibloc
