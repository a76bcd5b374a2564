#include "vibloc/vib.hpp"

#include <cmath>

namespace vibloc {

void VibConfig::validate() const {
  auto positive = [](Index v, const char* name) {
    if (v < 1) {
      throw ConfigError(std::string("VibConfig: ") + name +
                        " must be >= 1, got " + std::to_string(v));
    }
  };
  positive(input_dim, "input_dim");
  positive(encoder_hidden, "encoder_hidden");
  positive(latent_dim, "latent_dim");
  positive(predictor_hidden, "predictor_hidden");
  positive(predictor_layers, "predictor_layers");
  if (train_mc_samples < 1 || eval_mc_samples < 1) {
    throw ConfigError("VibConfig: Monte Carlo sample counts must be >= 1");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("VibConfig: dropout_rate must be in [0, 1), got " +
                      std::to_string(dropout_rate));
  }
  // beta = 0 is allowed as the no-bottleneck ablation.
  if (!(beta >= 0.0)) {
    throw ConfigError("VibConfig: beta must be >= 0, got " +
                      std::to_string(beta));
  }
  if (!(logvar_lo < logvar_hi)) {
    throw ConfigError("VibConfig: logvar clamp bounds must satisfy lo < hi");
  }
}

std::vector<Matrix*> VibModel::parameters() {
  std::vector<Matrix*> ps = {&encoder.W, &encoder.b,     &mu_head.W,
                             &mu_head.b, &logvar_head.W, &logvar_head.b};
  for (auto& layer : predictor_hidden) {
    ps.push_back(&layer.W);
    ps.push_back(&layer.b);
  }
  ps.push_back(&predictor_out.W);
  ps.push_back(&predictor_out.b);
  return ps;
}

std::vector<const Matrix*> VibModel::parameters() const {
  std::vector<const Matrix*> ps = {&encoder.W, &encoder.b,     &mu_head.W,
                                   &mu_head.b, &logvar_head.W, &logvar_head.b};
  for (const auto& layer : predictor_hidden) {
    ps.push_back(&layer.W);
    ps.push_back(&layer.b);
  }
  ps.push_back(&predictor_out.W);
  ps.push_back(&predictor_out.b);
  return ps;
}

std::vector<std::string> VibModel::parameter_names() const {
  std::vector<std::string> names = {"encoder.W",     "encoder.b",
                                    "mu_head.W",     "mu_head.b",
                                    "logvar_head.W", "logvar_head.b"};
  for (std::size_t i = 0; i < predictor_hidden.size(); ++i) {
    names.push_back("predictor.h" + std::to_string(i) + ".W");
    names.push_back("predictor.h" + std::to_string(i) + ".b");
  }
  names.push_back("predictor.out.W");
  names.push_back("predictor.out.b");
  return names;
}

VibModel init_vib_model(const VibConfig& cfg, Rng& rng) {
  cfg.validate();
  VibModel m;
  m.config = cfg;
  m.encoder = init_dense(cfg.input_dim, cfg.encoder_hidden, rng);
  m.mu_head = init_dense(cfg.encoder_hidden, cfg.latent_dim, rng);
  m.logvar_head = init_dense(cfg.encoder_hidden, cfg.latent_dim, rng);
  Index in = cfg.latent_dim;
  for (Index l = 0; l < cfg.predictor_layers; ++l) {
    m.predictor_hidden.push_back(init_dense(in, cfg.predictor_hidden, rng));
    m.predictor_dropout.push_back(DropoutLayer{cfg.dropout_rate, {}});
    in = cfg.predictor_hidden;
  }
  m.predictor_out = init_dense(in, VibConfig::output_dim, rng);
  return m;
}

GaussianLatent encode(const VibModel& model, const Matrix& x) {
  if (x.cols() != model.config.input_dim) {
    throw DimensionError("encode: input " + shape_str(x) + " but input_dim " +
                         std::to_string(model.config.input_dim));
  }
  const Matrix h = relu(dense_forward(model.encoder, x));
  GaussianLatent lat;
  lat.mu = dense_forward(model.mu_head, h);
  lat.logvar = dense_forward(model.logvar_head, h)
                   .cwiseMax(model.config.logvar_lo)
                   .cwiseMin(model.config.logvar_hi);
  return lat;
}

Matrix reparameterize(const GaussianLatent& lat, const Matrix& eps) {
  if (eps.rows() != lat.mu.rows() || eps.cols() != lat.mu.cols()) {
    throw DimensionError("reparameterize: eps " + shape_str(eps) +
                         " does not match mu " + shape_str(lat.mu));
  }
  return lat.mu + ((lat.logvar * 0.5).array().exp() * eps.array()).matrix();
}

double kl_standard_normal(const GaussianLatent& lat) {
  if (lat.mu.rows() != lat.logvar.rows() ||
      lat.mu.cols() != lat.logvar.cols()) {
    throw DimensionError("kl_standard_normal: mu " + shape_str(lat.mu) +
                         " vs logvar " + shape_str(lat.logvar));
  }
  const auto mu2 = lat.mu.array().square();
  const auto var = lat.logvar.array().exp();
  const double sum = 0.5 * (mu2 + var - lat.logvar.array() - 1.0).sum();
  return sum / static_cast<double>(lat.mu.rows());
}

namespace {

// Hidden stack + output layer. `masks` selects train-mode dropout; null
// means eval (identity). When caches are requested, `pre` holds each
// hidden layer's pre-activation and `act` the inputs seen by each dense
// layer (act[0] = z, act[l] = dropout(relu(pre[l-1]))).
Matrix predictor_forward(const VibModel& model, const Matrix& z,
                         const std::vector<Matrix>* masks,
                         std::vector<Matrix>* pre, std::vector<Matrix>* act) {
  if (z.cols() != model.config.latent_dim) {
    throw DimensionError("predictor: latent " + shape_str(z) +
                         " but latent_dim " +
                         std::to_string(model.config.latent_dim));
  }
  Matrix a = z;
  if (act) act->push_back(a);
  for (std::size_t l = 0; l < model.predictor_hidden.size(); ++l) {
    Matrix p = dense_forward(model.predictor_hidden[l], a);
    Matrix r = relu(p);
    if (masks) {
      a = r.cwiseProduct((*masks)[l]);
    } else {
      a = std::move(r);
    }
    if (pre) pre->push_back(std::move(p));
    if (act) act->push_back(a);
  }
  return dense_forward(model.predictor_out, a);
}

struct ForwardCache {
  Matrix pre_h, h;        // encoder hidden pre-activation / activation
  Matrix mu, raw_logvar;  // heads before clamping
  GaussianLatent lat;
  Matrix sigma;  // exp(logvar / 2)
  // Per Monte Carlo sample.
  std::vector<Matrix> z;
  std::vector<std::vector<Matrix>> pre;  // hidden pre-activations
  std::vector<std::vector<Matrix>> act;  // dense-layer inputs
  std::vector<Matrix> yhat;
};

void check_batch(const VibModel& model, const Matrix& x, const Matrix& y) {
  if (x.cols() != model.config.input_dim) {
    throw DimensionError("loss: input " + shape_str(x) + " but input_dim " +
                         std::to_string(model.config.input_dim));
  }
  if (y.cols() != VibConfig::output_dim) {
    throw DimensionError("loss: targets " + shape_str(y) + " must have " +
                         std::to_string(VibConfig::output_dim) + " columns");
  }
  if (x.rows() != y.rows()) {
    throw DimensionError("loss: " + std::to_string(x.rows()) +
                         " inputs vs " + std::to_string(y.rows()) +
                         " target rows");
  }
}

void check_noise(const VibModel& model, Index batch, const StepNoise& noise) {
  if (noise.eps.empty() || noise.eps.size() != noise.dropout_masks.size()) {
    throw DimensionError("StepNoise: need matching, nonempty eps and mask "
                         "sample lists");
  }
  const Index layers = static_cast<Index>(model.predictor_hidden.size());
  for (std::size_t s = 0; s < noise.eps.size(); ++s) {
    if (noise.eps[s].rows() != batch ||
        noise.eps[s].cols() != model.config.latent_dim) {
      throw DimensionError("StepNoise: eps sample " + std::to_string(s) +
                           " is " + shape_str(noise.eps[s]));
    }
    if (static_cast<Index>(noise.dropout_masks[s].size()) != layers) {
      throw DimensionError("StepNoise: sample " + std::to_string(s) +
                           " has " +
                           std::to_string(noise.dropout_masks[s].size()) +
                           " masks for " + std::to_string(layers) +
                           " dropout layers");
    }
  }
}

LossBreakdown run_forward(const VibModel& model, const Matrix& x,
                          const Matrix& y, const StepNoise& noise,
                          ForwardCache* cache) {
  check_batch(model, x, y);
  check_noise(model, x.rows(), noise);

  const double batch = static_cast<double>(x.rows());
  const double samples = static_cast<double>(noise.eps.size());

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.pre_h = dense_forward(model.encoder, x);
  c.h = relu(c.pre_h);
  c.mu = dense_forward(model.mu_head, c.h);
  c.raw_logvar = dense_forward(model.logvar_head, c.h);
  c.lat.mu = c.mu;
  c.lat.logvar = c.raw_logvar.cwiseMax(model.config.logvar_lo)
                     .cwiseMin(model.config.logvar_hi);
  c.sigma = (c.lat.logvar * 0.5).array().exp();

  double sq_err_total = 0.0;
  for (std::size_t s = 0; s < noise.eps.size(); ++s) {
    Matrix z = c.lat.mu + c.sigma.cwiseProduct(noise.eps[s]);
    std::vector<Matrix> pre, act;
    Matrix yhat = predictor_forward(model, z, &noise.dropout_masks[s],
                                    cache ? &pre : nullptr,
                                    cache ? &act : nullptr);
    sq_err_total += (yhat - y).squaredNorm();
    if (cache) {
      c.z.push_back(std::move(z));
      c.pre.push_back(std::move(pre));
      c.act.push_back(std::move(act));
      c.yhat.push_back(std::move(yhat));
    }
  }

  LossBreakdown out;
  out.recon =
      sq_err_total / (batch * samples * static_cast<double>(VibConfig::output_dim));
  out.kl = kl_standard_normal(c.lat);
  out.beta_kl = model.config.beta * out.kl;
  out.total = out.recon + out.beta_kl;
  if (!std::isfinite(out.total)) {
    throw NumericError("loss: non-finite value (recon=" +
                       std::to_string(out.recon) + ", kl=" +
                       std::to_string(out.kl) + ")");
  }
  return out;
}

}  // namespace

Matrix predict_from_latent(VibModel& model, const Matrix& z, Mode mode,
                           Rng& rng) {
  if (mode == Mode::eval) return predictor_forward(model, z, nullptr, nullptr, nullptr);
  std::vector<Matrix> masks;
  masks.reserve(model.predictor_dropout.size());
  for (std::size_t l = 0; l < model.predictor_dropout.size(); ++l) {
    auto& drop = model.predictor_dropout[l];
    drop.last_mask = sample_dropout_mask(
        z.rows(), model.predictor_hidden[l].out_dim(), drop.rate, rng);
    masks.push_back(drop.last_mask);
  }
  return predictor_forward(model, z, &masks, nullptr, nullptr);
}

Matrix predict_from_latent(const VibModel& model, const Matrix& z) {
  return predictor_forward(model, z, nullptr, nullptr, nullptr);
}

StepNoise sample_step_noise(const VibConfig& cfg, Index batch, int samples,
                            Rng& rng) {
  if (samples < 1) {
    throw DomainError("sample_step_noise: need at least one sample");
  }
  StepNoise noise;
  for (int s = 0; s < samples; ++s) {
    noise.eps.push_back(rng.gaussian_matrix(batch, cfg.latent_dim));
    std::vector<Matrix> masks;
    for (Index l = 0; l < cfg.predictor_layers; ++l) {
      masks.push_back(
          sample_dropout_mask(batch, cfg.predictor_hidden, cfg.dropout_rate, rng));
    }
    noise.dropout_masks.push_back(std::move(masks));
  }
  return noise;
}

LossBreakdown loss_given_noise(const VibModel& model, const Matrix& x,
                               const Matrix& y, const StepNoise& noise) {
  return run_forward(model, x, y, noise, nullptr);
}

LossBreakdown loss(const VibModel& model, const Matrix& x, const Matrix& y,
                   Rng& rng) {
  const StepNoise noise = sample_step_noise(
      model.config, x.rows(), model.config.train_mc_samples, rng);
  return loss_given_noise(model, x, y, noise);
}

Gradients backward_given_noise(const VibModel& model, const Matrix& x,
                               const Matrix& y, const StepNoise& noise) {
  ForwardCache c;
  Gradients out;
  out.value = run_forward(model, x, y, noise, &c);

  const double batch = static_cast<double>(x.rows());
  const double samples = static_cast<double>(noise.eps.size());
  const std::size_t layers = model.predictor_hidden.size();

  Matrix d_mu = Matrix::Zero(c.mu.rows(), c.mu.cols());
  Matrix d_logvar = Matrix::Zero(c.mu.rows(), c.mu.cols());

  std::vector<Matrix> d_hidden_W(layers), d_hidden_b(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    d_hidden_W[l] = Matrix::Zero(model.predictor_hidden[l].W.rows(),
                                 model.predictor_hidden[l].W.cols());
    d_hidden_b[l] = Matrix::Zero(1, model.predictor_hidden[l].out_dim());
  }
  Matrix d_out_W = Matrix::Zero(model.predictor_out.W.rows(),
                                model.predictor_out.W.cols());
  Matrix d_out_b = Matrix::Zero(1, model.predictor_out.out_dim());

  // Reconstruction path, one Monte Carlo sample at a time.
  for (std::size_t s = 0; s < noise.eps.size(); ++s) {
    // recon = sum_s |yhat_s - y|^2 / (B*S*2)  =>  d/dyhat = (yhat-y)/(B*S)
    Matrix d_y = (c.yhat[s] - y) / (batch * samples);

    LayerGrad g_out = dense_backward(model.predictor_out, c.act[s][layers], d_y);
    d_out_W += g_out.param_grads[0];
    d_out_b += g_out.param_grads[1];
    Matrix d_act = std::move(g_out.input_grad);

    for (std::size_t l = layers; l-- > 0;) {
      // act[l+1] = relu(pre[l]) .* mask[l]
      Matrix d_relu = d_act.cwiseProduct(noise.dropout_masks[s][l]);
      Matrix d_pre = relu_backward(c.pre[s][l], d_relu);
      LayerGrad g =
          dense_backward(model.predictor_hidden[l], c.act[s][l], d_pre);
      d_hidden_W[l] += g.param_grads[0];
      d_hidden_b[l] += g.param_grads[1];
      d_act = std::move(g.input_grad);
    }

    // z = mu + sigma .* eps:  dz/dmu = 1, dz/dlogvar = sigma .* eps / 2.
    d_mu += d_act;
    d_logvar += 0.5 * d_act.cwiseProduct(c.sigma).cwiseProduct(noise.eps[s]);
  }

  // KL path: kl = mean_b 1/2 sum_d (mu^2 + e^lv - lv - 1), weighted by beta.
  const double beta = model.config.beta;
  d_mu += (beta / batch) * c.mu;
  d_logvar.array() +=
      (beta / (2.0 * batch)) * (c.lat.logvar.array().exp() - 1.0);

  // Clamp gate: zero gradient where the raw logvar was outside the bounds.
  Matrix in_bounds = ((c.raw_logvar.array() > model.config.logvar_lo) &&
                      (c.raw_logvar.array() < model.config.logvar_hi))
                         .cast<double>();
  Matrix d_raw_logvar = d_logvar.cwiseProduct(in_bounds);

  LayerGrad g_mu = dense_backward(model.mu_head, c.h, d_mu);
  LayerGrad g_lv = dense_backward(model.logvar_head, c.h, d_raw_logvar);
  Matrix d_h = g_mu.input_grad + g_lv.input_grad;
  Matrix d_pre_h = relu_backward(c.pre_h, d_h);
  LayerGrad g_enc = dense_backward(model.encoder, x, d_pre_h);

  out.by_param.push_back(std::move(g_enc.param_grads[0]));
  out.by_param.push_back(std::move(g_enc.param_grads[1]));
  out.by_param.push_back(std::move(g_mu.param_grads[0]));
  out.by_param.push_back(std::move(g_mu.param_grads[1]));
  out.by_param.push_back(std::move(g_lv.param_grads[0]));
  out.by_param.push_back(std::move(g_lv.param_grads[1]));
  for (std::size_t l = 0; l < layers; ++l) {
    out.by_param.push_back(std::move(d_hidden_W[l]));
    out.by_param.push_back(std::move(d_hidden_b[l]));
  }
  out.by_param.push_back(std::move(d_out_W));
  out.by_param.push_back(std::move(d_out_b));
  return out;
}

Gradients backward(const VibModel& model, const Matrix& x, const Matrix& y,
                   Rng& rng) {
  const StepNoise noise = sample_step_noise(
      model.config, x.rows(), model.config.train_mc_samples, rng);
  return backward_given_noise(model, x, y, noise);
}

Matrix infer_given_eps(const VibModel& model, const Matrix& x,
                       const std::vector<Matrix>& eps_samples) {
  if (eps_samples.empty()) {
    throw DomainError("infer: need at least one latent draw");
  }
  const GaussianLatent lat = encode(model, x);
  Matrix sum = Matrix::Zero(x.rows(), VibConfig::output_dim);
  for (const Matrix& eps : eps_samples) {
    sum += predict_from_latent(model, reparameterize(lat, eps));
  }
  return sum / static_cast<double>(eps_samples.size());
}

Matrix infer(const VibModel& model, const Matrix& x, Rng& rng) {
  std::vector<Matrix> eps;
  eps.reserve(static_cast<std::size_t>(model.config.eval_mc_samples));
  for (int s = 0; s < model.config.eval_mc_samples; ++s) {
    eps.push_back(rng.gaussian_matrix(x.rows(), model.config.latent_dim));
  }
  return infer_given_eps(model, x, eps);
}

}  // namespace vibloc
