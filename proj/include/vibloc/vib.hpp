#pragma once

#include <string>
#include <vector>

#include "vibloc/layers.hpp"
#include "vibloc/matrix.hpp"
#include "vibloc/rng.hpp"

namespace vibloc {

// Architecture and loss hyperparameters of the bottleneck regressor.
struct VibConfig {
  Index input_dim = 520;
  Index encoder_hidden = 512;
  Index latent_dim = 5;
  Index predictor_hidden = 512;
  Index predictor_layers = 3;
  double dropout_rate = 0.3;
  double beta = 1e-6;      // weight of the KL term in the loss
  int train_mc_samples = 1;
  int eval_mc_samples = 16;
  double logvar_lo = -10.0;  // clamp bounds on the encoder log-variance
  double logvar_hi = 10.0;

  // Coordinate outputs are always 2-D (longitude, latitude).
  static constexpr Index output_dim = 2;

  void validate() const;  // throws ConfigError on a bad field
};

// Per-sample diagonal Gaussian over the latent code: z ~ N(mu, exp(logvar)).
struct GaussianLatent {
  Matrix mu;      // batch x latent_dim
  Matrix logvar;  // batch x latent_dim, clamped to [logvar_lo, logvar_hi]
};

// total = recon + beta * kl, with recon the mean squared prediction error
// (mean over batch, Monte Carlo samples and the 2 output dims) and kl the
// batch-mean KL divergence from the latent posterior to N(0, I).
struct LossBreakdown {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double beta_kl = 0.0;
};

// One training step's frozen randomness: latent noise and dropout keep
// masks for each Monte Carlo sample. Loss and backward are deterministic
// functions of (parameters, batch, StepNoise).
struct StepNoise {
  std::vector<Matrix> eps;                          // S x (batch x latent)
  std::vector<std::vector<Matrix>> dropout_masks;   // S x layers x (batch x hidden)
};

// Encoder (hidden layer + mu/logvar heads) and predictor (hidden stack
// with ReLU + dropout, then a linear output layer).
struct VibModel {
  VibConfig config;

  DenseLayer encoder;      // input -> encoder_hidden, ReLU
  DenseLayer mu_head;      // encoder_hidden -> latent
  DenseLayer logvar_head;  // encoder_hidden -> latent
  std::vector<DenseLayer> predictor_hidden;  // latent -> h -> ... -> h
  std::vector<DropoutLayer> predictor_dropout;
  DenseLayer predictor_out;  // h -> 2

  // Canonical parameter order, shared by gradients, the optimizer and
  // checkpoints.
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<std::string> parameter_names() const;
};

VibModel init_vib_model(const VibConfig& cfg, Rng& rng);

// mu and logvar from the encoder; logvar clamped to the config bounds.
GaussianLatent encode(const VibModel& model, const Matrix& x);

// z = mu + exp(logvar/2) .* eps
Matrix reparameterize(const GaussianLatent& lat, const Matrix& eps);

// Batch mean of KL(N(mu, sigma^2) || N(0, I))
//   = 1/2 sum_d (mu^2 + sigma^2 - log sigma^2 - 1).
double kl_standard_normal(const GaussianLatent& lat);

// Predictor on a latent batch. Train mode samples fresh dropout masks
// into the model's dropout layers; eval mode is deterministic.
Matrix predict_from_latent(VibModel& model, const Matrix& z, Mode mode,
                           Rng& rng);
// Eval-mode predictor; never touches dropout state.
Matrix predict_from_latent(const VibModel& model, const Matrix& z);

StepNoise sample_step_noise(const VibConfig& cfg, Index batch, int samples,
                            Rng& rng);

LossBreakdown loss_given_noise(const VibModel& model, const Matrix& x,
                               const Matrix& y, const StepNoise& noise);
LossBreakdown loss(const VibModel& model, const Matrix& x, const Matrix& y,
                   Rng& rng);

// Gradients of LossBreakdown::total with respect to every parameter, in
// VibModel::parameters() order. `value` is the breakdown of the same pass.
struct Gradients {
  std::vector<Matrix> by_param;
  LossBreakdown value;
};

Gradients backward_given_noise(const VibModel& model, const Matrix& x,
                               const Matrix& y, const StepNoise& noise);
Gradients backward(const VibModel& model, const Matrix& x, const Matrix& y,
                   Rng& rng);

// Prediction: mean over predictor outputs at the given latent draws,
// predictor in eval mode.
Matrix infer_given_eps(const VibModel& model, const Matrix& x,
                       const std::vector<Matrix>& eps_samples);
// Draws eval_mc_samples latent samples from the encoder posterior.
Matrix infer(const VibModel& model, const Matrix& x, Rng& rng);

}  // namespace vibloc
