#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>

#include "vibloc/dataset.hpp"
#include "vibloc/gradcheck.hpp"
#include "vibloc/rng.hpp"
#include "vibloc/vib.hpp"

namespace vibloc::testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    dir_ = std::filesystem::temp_directory_path() /
           ("vibloc-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::filesystem::path path() const { return dir_; }
  std::string file(const std::string& name) const {
    return (dir_ / name).string();
  }

 private:
  std::filesystem::path dir_;
};

// Toy architecture small enough for finite differences.
inline VibConfig toy_config() {
  VibConfig cfg;
  cfg.input_dim = 12;
  cfg.encoder_hidden = 8;
  cfg.latent_dim = 3;
  cfg.predictor_hidden = 8;
  cfg.predictor_layers = 3;
  cfg.dropout_rate = 0.3;
  cfg.beta = 1e-2;
  return cfg;
}

// Fingerprint-shaped CSV over a simulated floor plan: access points on a
// square area, log-distance path loss, this keeps position recoverable
// from the detected set. Columns follow the UJIIndoorLoc layout.
inline void write_fingerprint_csv(const std::string& path, int rows,
                                  std::uint64_t seed) {
  Rng rng(seed);
  Rng ap_rng = rng.derive("aps");
  const int n_aps = static_cast<int>(kNumWaps);
  std::vector<double> ap_x(n_aps), ap_y(n_aps);
  for (int a = 0; a < n_aps; ++a) {
    ap_x[a] = ap_rng.uniform(0.0, 200.0);
    ap_y[a] = ap_rng.uniform(0.0, 200.0);
  }

  std::ofstream f(path, std::ios::trunc);
  for (int a = 1; a <= n_aps; ++a) {
    char name[12];
    std::snprintf(name, sizeof(name), "WAP%03d", a);
    f << name << ',';
  }
  f << "LONGITUDE,LATITUDE,FLOOR,BUILDINGID,SPACEID,RELATIVEPOSITION,USERID,"
       "PHONEID,TIMESTAMP\n";

  Rng row_rng = rng.derive("rows");
  for (int r = 0; r < rows; ++r) {
    const double x = row_rng.uniform(0.0, 200.0);
    const double y = row_rng.uniform(0.0, 200.0);
    for (int a = 0; a < n_aps; ++a) {
      const double dist = std::hypot(x - ap_x[a], y - ap_y[a]);
      double rssi = -30.0 - 28.0 * std::log10(1.0 + dist) +
                    2.0 * row_rng.gaussian();
      if (rssi < -104.0) {
        f << "100,";
      } else {
        f << static_cast<int>(std::lround(std::max(rssi, -104.0))) << ',';
      }
    }
    const int building = x < 100.0 ? 0 : 1;
    const int floor = static_cast<int>(y / 50.0);
    f << (-7700.0 + x) << ',' << (4864700.0 + y) << ',' << floor << ','
      << building << ",101,2,7,13,1371713733\n";
  }
}

// Fresh model with every parameter jittered off zero. Zero-initialized
// biases put pre-activations exactly on the ReLU kink whenever an
// activation row is fully zeroed (dead units or a fully dropped row),
// and at the kink a central finite difference is not a valid oracle.
inline VibModel make_generic_model(const VibConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  VibModel model = init_vib_model(cfg, rng);
  Rng jitter = rng.derive("kink-jitter");
  for (Matrix* p : model.parameters()) {
    *p += 0.05 * jitter.gaussian_matrix(p->rows(), p->cols());
  }
  return model;
}

// Finite-difference check of the full loss gradient with frozen noise.
inline GradCheckReport vib_loss_gradcheck(const VibModel& model,
                                          const Matrix& x, const Matrix& y,
                                          const StepNoise& noise,
                                          double h = 1e-5, double tol = 1e-4) {
  std::vector<Matrix> params;
  for (const Matrix* p : std::as_const(model).parameters()) {
    params.push_back(*p);
  }
  const ScalarFn f = [&](const std::vector<Matrix>& ps) {
    VibModel probe = model;
    const auto dst = probe.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) *dst[i] = ps[i];
    return loss_given_noise(probe, x, y, noise).total;
  };
  const Gradients grads = backward_given_noise(model, x, y, noise);
  return grad_check(f, params, grads.by_param, h, tol);
}

// Same check for the KL term alone. Its analytic gradient is isolated as
// the difference of full-loss gradients at beta = 1 and beta = 0.
inline GradCheckReport vib_kl_gradcheck(const VibModel& model, const Matrix& x,
                                        const Matrix& y,
                                        const StepNoise& noise,
                                        double h = 1e-5, double tol = 1e-4) {
  std::vector<Matrix> params;
  for (const Matrix* p : std::as_const(model).parameters()) {
    params.push_back(*p);
  }
  const ScalarFn f = [&](const std::vector<Matrix>& ps) {
    VibModel probe = model;
    const auto dst = probe.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) *dst[i] = ps[i];
    return kl_standard_normal(encode(probe, x));
  };
  VibModel beta_one = model;
  beta_one.config.beta = 1.0;
  VibModel beta_zero = model;
  beta_zero.config.beta = 0.0;
  const Gradients g1 = backward_given_noise(beta_one, x, y, noise);
  const Gradients g0 = backward_given_noise(beta_zero, x, y, noise);
  std::vector<Matrix> analytic;
  for (std::size_t i = 0; i < g1.by_param.size(); ++i) {
    analytic.push_back(g1.by_param[i] - g0.by_param[i]);
  }
  return grad_check(f, params, analytic, h, tol);
}

// Linear regression data y = A x + noise in the pipeline's dataset form.
inline DataSplit make_linear_split(Index rows, Index input_dim,
                                   double noise_sigma, std::uint64_t seed) {
  Rng rng(seed);
  Rng x_rng = rng.derive("x");
  Rng a_rng = rng.derive("A");
  Rng n_rng = rng.derive("noise");

  PreparedData data;
  data.X = x_rng.uniform_matrix(rows, input_dim, 0.0, 1.0);
  const Matrix A = a_rng.gaussian_matrix(input_dim, 2) /
                   std::sqrt(static_cast<double>(input_dim));
  data.coords = data.X * A + noise_sigma * n_rng.gaussian_matrix(rows, 2);
  data.building.assign(static_cast<std::size_t>(rows), 0);
  data.floor.assign(static_cast<std::size_t>(rows), 0);
  return split_dataset(data, 0.8, seed);
}

}  // namespace vibloc::testutil
