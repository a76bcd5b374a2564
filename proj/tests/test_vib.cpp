#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "vibloc/vib.hpp"

using namespace vibloc;
using namespace vibloc::testutil;

namespace {

VibConfig latent5_config() {
  VibConfig cfg = toy_config();
  cfg.input_dim = 20;
  cfg.latent_dim = 5;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  VibConfig cfg = toy_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.beta = 0.0;
  CHECK_NOTHROW(cfg.validate());  // no-bottleneck ablation is allowed
  cfg.beta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = toy_config();
  cfg.latent_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = toy_config();
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = toy_config();
  cfg.logvar_lo = 2.0;
  cfg.logvar_hi = 2.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("encode shapes and clamping") {
  const VibConfig cfg = latent5_config();
  Rng rng(1);
  VibModel model = init_vib_model(cfg, rng);

  const Matrix x = rng.uniform_matrix(8, cfg.input_dim, 0.0, 1.0);
  const GaussianLatent lat = encode(model, x);
  CHECK(lat.mu.rows() == 8);
  CHECK(lat.mu.cols() == 5);
  CHECK(lat.logvar.rows() == 8);
  CHECK(lat.logvar.cols() == 5);

  CHECK_THROWS_AS(encode(model, Matrix::Zero(2, 7)), DimensionError);

  // Force the logvar head high; the output must sit at the clamp bound.
  model.logvar_head.W.setZero();
  model.logvar_head.b.setConstant(100.0);
  CHECK((encode(model, x).logvar.array() == cfg.logvar_hi).all());
}

TEST_CASE("zero-weight encoder returns the bias row") {
  const VibConfig cfg = latent5_config();
  Rng rng(2);
  VibModel model = init_vib_model(cfg, rng);
  model.encoder.W.setZero();
  model.encoder.b.setZero();
  model.mu_head.W.setZero();
  model.mu_head.b << 1, 2, 3, 4, 5;

  const Matrix x = rng.uniform_matrix(4, cfg.input_dim, 0.0, 1.0);
  const GaussianLatent lat = encode(model, x);
  for (Index r = 0; r < 4; ++r) {
    CHECK(lat.mu.row(r) == model.mu_head.b.row(0));
  }
}

TEST_CASE("reparameterize") {
  GaussianLatent lat;
  lat.mu = Matrix::Constant(2, 3, 1.5);
  lat.logvar = Matrix::Zero(2, 3);

  CHECK(reparameterize(lat, Matrix::Zero(2, 3)) == lat.mu);

  Rng rng(3);
  const Matrix eps = rng.gaussian_matrix(2, 3);
  CHECK(reparameterize(lat, eps) == lat.mu + eps);  // unit sigma

  GaussianLatent wide;
  wide.mu = Matrix::Zero(1, 1);
  wide.logvar = Matrix::Constant(1, 1, std::log(4.0));
  CHECK(reparameterize(wide, Matrix::Ones(1, 1))(0, 0) ==
        doctest::Approx(2.0).epsilon(1e-15));

  CHECK_THROWS_AS(reparameterize(lat, Matrix::Zero(1, 3)), DimensionError);
}

TEST_CASE("kl closed form") {
  GaussianLatent lat;
  lat.mu = Matrix::Zero(1, 1);
  lat.logvar = Matrix::Zero(1, 1);
  CHECK(kl_standard_normal(lat) == 0.0);

  lat.mu = Matrix::Ones(1, 1);
  CHECK(kl_standard_normal(lat) == doctest::Approx(0.5).epsilon(1e-15));

  lat.mu = Matrix::Zero(1, 1);
  lat.logvar = Matrix::Constant(1, 1, std::log(2.0));
  CHECK(kl_standard_normal(lat) ==
        doctest::Approx(0.5 * (2.0 - std::log(2.0) - 1.0)).epsilon(1e-12));
  CHECK(kl_standard_normal(lat) == doctest::Approx(0.15342640972002733));
}

TEST_CASE("kl matches a scalar-loop oracle on a grid") {
  // Independent route: plain loops over the closed form.
  auto oracle = [](const GaussianLatent& lat) {
    double total = 0.0;
    for (Index r = 0; r < lat.mu.rows(); ++r) {
      for (Index c = 0; c < lat.mu.cols(); ++c) {
        const double mu = lat.mu(r, c);
        const double lv = lat.logvar(r, c);
        total += 0.5 * (mu * mu + std::exp(lv) - lv - 1.0);
      }
    }
    return total / static_cast<double>(lat.mu.rows());
  };

  const double mus[] = {-2.0, -0.5, 0.0, 0.3, 1.0, 4.0};
  const double lvs[] = {-3.0, -1.0, 0.0, 0.25, 2.0};
  for (double mu : mus) {
    for (double lv : lvs) {
      GaussianLatent lat;
      lat.mu = Matrix::Constant(3, 2, mu);
      lat.logvar = Matrix::Constant(3, 2, lv);
      CHECK(kl_standard_normal(lat) ==
            doctest::Approx(oracle(lat)).epsilon(1e-10));
    }
  }

  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    GaussianLatent lat;
    lat.mu = rng.gaussian_matrix(4, 3);
    lat.logvar = rng.uniform_matrix(4, 3, -4.0, 3.0);
    CHECK(kl_standard_normal(lat) ==
          doctest::Approx(oracle(lat)).epsilon(1e-10));
    CHECK(kl_standard_normal(lat) >= 0.0);
  }
}

TEST_CASE("kl is zero only at the standard normal") {
  GaussianLatent lat;
  lat.mu = Matrix::Zero(2, 3);
  lat.logvar = Matrix::Zero(2, 3);
  CHECK(kl_standard_normal(lat) == 0.0);
  lat.mu(1, 2) = 1e-3;
  CHECK(kl_standard_normal(lat) > 0.0);
  lat.mu(1, 2) = 0.0;
  lat.logvar(0, 0) = -1e-3;
  CHECK(kl_standard_normal(lat) > 0.0);
}

TEST_CASE("predictor modes") {
  const VibConfig cfg = toy_config();
  Rng rng(4);
  VibModel model = init_vib_model(cfg, rng);
  const Matrix z = rng.gaussian_matrix(16, cfg.latent_dim);

  const Matrix a = predict_from_latent(model, z, Mode::eval, rng);
  const Matrix b = predict_from_latent(model, z, Mode::eval, rng);
  CHECK(a == b);
  CHECK(a.rows() == 16);
  CHECK(a.cols() == 2);

  const Matrix t1 = predict_from_latent(model, z, Mode::train, rng);
  const Matrix t2 = predict_from_latent(model, z, Mode::train, rng);
  CHECK(t1 != t2);  // fresh dropout masks

  CHECK_THROWS_AS(predict_from_latent(model, Matrix::Zero(2, 9), Mode::eval, rng),
                  DimensionError);
}

TEST_CASE("loss decomposes exactly") {
  const VibConfig cfg = toy_config();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    VibModel model = init_vib_model(cfg, rng);
    const Matrix x = rng.uniform_matrix(6, cfg.input_dim, 0.0, 1.0);
    const Matrix y = rng.gaussian_matrix(6, 2);
    const LossBreakdown lb = loss(model, x, y, rng);
    CHECK(lb.kl >= 0.0);
    CHECK(lb.beta_kl == cfg.beta * lb.kl);
    const double rel = std::abs(lb.total - (lb.recon + lb.beta_kl)) /
                       std::max(1.0, std::abs(lb.total));
    CHECK(rel <= 1e-12);
  }
}

TEST_CASE("perfect predictor with beta 0 has zero loss") {
  VibConfig cfg = toy_config();
  cfg.beta = 0.0;
  Rng rng(6);
  VibModel model = init_vib_model(cfg, rng);
  // Zero the output layer and pin its bias on the target row: the
  // prediction is that constant regardless of latent or dropout draws.
  model.predictor_out.W.setZero();
  model.predictor_out.b << 0.25, -0.5;
  const Matrix x = rng.uniform_matrix(5, cfg.input_dim, 0.0, 1.0);
  Matrix y(5, 2);
  y.col(0).setConstant(0.25);
  y.col(1).setConstant(-0.5);
  const LossBreakdown lb = loss(model, x, y, rng);
  CHECK(lb.recon == 0.0);
  CHECK(lb.total == 0.0);
}

TEST_CASE("loss input validation") {
  const VibConfig cfg = toy_config();
  Rng rng(7);
  VibModel model = init_vib_model(cfg, rng);
  const Matrix x = rng.uniform_matrix(4, cfg.input_dim, 0.0, 1.0);
  CHECK_THROWS_AS(loss(model, x, Matrix::Zero(3, 2), rng), DimensionError);
  CHECK_THROWS_AS(loss(model, x, Matrix::Zero(4, 3), rng), DimensionError);
}

TEST_CASE("monte carlo recon estimates agree within error bars") {
  VibConfig cfg = toy_config();
  Rng rng(8);
  VibModel model = init_vib_model(cfg, rng);
  const Matrix x = rng.uniform_matrix(8, cfg.input_dim, 0.0, 1.0);
  const Matrix y = rng.gaussian_matrix(8, 2);

  std::vector<double> singles;
  for (int i = 0; i < 50; ++i) {
    const StepNoise noise = sample_step_noise(cfg, 8, 1, rng);
    singles.push_back(loss_given_noise(model, x, y, noise).recon);
  }
  double mean = 0.0;
  for (double v : singles) mean += v;
  mean /= singles.size();
  double var = 0.0;
  for (double v : singles) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (singles.size() - 1));
  CHECK(sd > 0.0);

  const StepNoise big = sample_step_noise(cfg, 8, 64, rng);
  const double est64 = loss_given_noise(model, x, y, big).recon;
  // est64 has std about sd/8; the reference mean about sd/7. A one-sd
  // band is ~5 sigma for the difference.
  CHECK(std::abs(est64 - mean) <= sd);
}

TEST_CASE("full loss gradient matches finite differences") {
  const VibConfig cfg = toy_config();
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    VibModel model = make_generic_model(cfg, seed);
    Rng rng(seed + 100);
    const Matrix x = rng.uniform_matrix(4, cfg.input_dim, 0.0, 1.0);
    const Matrix y = rng.gaussian_matrix(4, 2);
    const StepNoise noise =
        sample_step_noise(cfg, 4, cfg.train_mc_samples, rng);
    const auto report = vib_loss_gradcheck(model, x, y, noise);
    INFO(report.summary());
    CHECK(report.pass);
  }
}

TEST_CASE("multi-sample loss gradient matches finite differences") {
  VibConfig cfg = toy_config();
  cfg.train_mc_samples = 3;
  VibModel model = make_generic_model(cfg, 21);
  Rng rng(22);
  const Matrix x = rng.uniform_matrix(3, cfg.input_dim, 0.0, 1.0);
  const Matrix y = rng.gaussian_matrix(3, 2);
  const StepNoise noise = sample_step_noise(cfg, 3, 3, rng);
  const auto report = vib_loss_gradcheck(model, x, y, noise);
  INFO(report.summary());
  CHECK(report.pass);
}

TEST_CASE("beta isolates the kl gradient path") {
  VibConfig cfg = toy_config();
  Rng rng(9);
  VibModel model = init_vib_model(cfg, rng);
  const Matrix x = rng.uniform_matrix(4, cfg.input_dim, 0.0, 1.0);
  const Matrix y = rng.gaussian_matrix(4, 2);
  const StepNoise noise = sample_step_noise(cfg, 4, 1, rng);

  VibModel beta_zero = model;
  beta_zero.config.beta = 0.0;
  VibModel beta_on = model;
  beta_on.config.beta = 1e-2;
  const Gradients g0 = backward_given_noise(beta_zero, x, y, noise);
  const Gradients g1 = backward_given_noise(beta_on, x, y, noise);

  // The KL term never touches predictor parameters...
  const std::size_t first_predictor = 6;
  for (std::size_t i = first_predictor; i < g0.by_param.size(); ++i) {
    CHECK(g0.by_param[i] == g1.by_param[i]);
  }
  // ...but it does pull on the heads.
  CHECK(g0.by_param[2] != g1.by_param[2]);  // mu_head.W
  CHECK(g0.by_param[4] != g1.by_param[4]);  // logvar_head.W
}

TEST_CASE("stationary point has zero gradients") {
  VibConfig cfg = toy_config();
  cfg.beta = 0.0;
  Rng rng(10);
  VibModel model = init_vib_model(cfg, rng);
  model.predictor_out.W.setZero();
  model.predictor_out.b << 0.1, 0.9;
  const Matrix x = rng.uniform_matrix(4, cfg.input_dim, 0.0, 1.0);
  Matrix y(4, 2);
  y.col(0).setConstant(0.1);
  y.col(1).setConstant(0.9);
  const StepNoise noise = sample_step_noise(cfg, 4, 1, rng);
  const Gradients g = backward_given_noise(model, x, y, noise);
  CHECK(g.value.total == 0.0);
  for (const Matrix& grad : g.by_param) {
    CHECK(grad.isZero(0.0));
  }
}

TEST_CASE("loss and backward are deterministic given frozen noise") {
  const VibConfig cfg = toy_config();
  Rng rng(11);
  VibModel model = init_vib_model(cfg, rng);
  const Matrix x = rng.uniform_matrix(4, cfg.input_dim, 0.0, 1.0);
  const Matrix y = rng.gaussian_matrix(4, 2);
  const StepNoise noise = sample_step_noise(cfg, 4, 2, rng);

  const LossBreakdown a = loss_given_noise(model, x, y, noise);
  const LossBreakdown b = loss_given_noise(model, x, y, noise);
  CHECK(a.total == b.total);
  const Gradients ga = backward_given_noise(model, x, y, noise);
  const Gradients gb = backward_given_noise(model, x, y, noise);
  CHECK(ga.by_param.size() == gb.by_param.size());
  for (std::size_t i = 0; i < ga.by_param.size(); ++i) {
    CHECK(ga.by_param[i] == gb.by_param[i]);
  }
  CHECK(ga.value.total == a.total);
}

TEST_CASE("infer with zero noise collapses onto the mean path") {
  const VibConfig cfg = toy_config();
  Rng rng(12);
  VibModel model = init_vib_model(cfg, rng);
  const Matrix x = rng.uniform_matrix(6, cfg.input_dim, 0.0, 1.0);
  const Matrix direct = predict_from_latent(model, encode(model, x).mu);
  const Matrix via_infer =
      infer_given_eps(model, x, {Matrix::Zero(6, cfg.latent_dim)});
  CHECK(via_infer == direct);
}

TEST_CASE("infer averages shrink with the sample count") {
  const VibConfig cfg = toy_config();
  Rng rng(13);
  VibModel model = init_vib_model(cfg, rng);
  // Spread the posterior so the latent draw matters.
  model.logvar_head.b.setConstant(1.0);
  const Matrix x = rng.uniform_matrix(1, cfg.input_dim, 0.0, 1.0);

  auto variance_of_runs = [&](int samples, int reps) {
    std::vector<double> vals;
    VibModel m = model;
    m.config.eval_mc_samples = samples;
    for (int i = 0; i < reps; ++i) vals.push_back(infer(m, x, rng)(0, 0));
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    return var / (vals.size() - 1);
  };

  const double v1 = variance_of_runs(1, 48);
  const double v16 = variance_of_runs(16, 48);
  CHECK(v1 > 0.0);
  CHECK(v16 < v1 / 4.0);  // ideal ratio 1/16, generous slack
}

TEST_CASE("infer is reproducible under a fixed seed") {
  const VibConfig cfg = toy_config();
  Rng init(14);
  VibModel model = init_vib_model(cfg, init);
  const Matrix x = init.uniform_matrix(3, cfg.input_dim, 0.0, 1.0);
  Rng a(77), b(77);
  CHECK(infer(model, x, a) == infer(model, x, b));
}
