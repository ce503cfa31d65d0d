#pragma once

#include "gpe/core.hpp"
#include "gpe/mlp.hpp"
#include "gpe/optim.hpp"

namespace gpe {

inline constexpr double kLogvarClamp = 10.0;

struct VaeModel {
  MlpMap encoder_mean;    // D -> d
  MlpMap encoder_logvar;  // D -> d, outputs clamped to [-10, 10]
  MlpMap decoder;         // d -> D
  double beta = 1.0;

  RowMatrix mean(const RowMatrix& points) const { return encoder_mean.forward(points); }
  RowMatrix logvar(const RowMatrix& points) const;
};

struct VaeOptions {
  /// Keep both encoder networks at their initialization.
  bool freeze_encoder = false;
  /// Draw z = mean + exp(logvar / 2) eps each step; when false, z = mean.
  bool stochastic = true;
};

struct VaeTrainResult {
  VaeModel model;
  TrainTrace trace;  // cost column holds the per-step ELBO loss
};

/// (1/2) sum_k (exp(lv_k) + mu_k^2 - 1 - lv_k) per row, averaged over rows.
double gaussian_kl(const RowMatrix& mean, const RowMatrix& logvar);

/// (1/n) sum |x_i - decoder(mean(x_i))|^2, the deterministic reconstruction.
double vae_reconstruction(const VaeModel& model, const PointCloud& source);

/// Full-batch gradient descent on (1/n) sum |x - dec(z)|^2 + beta KL with one
/// reparameterization draw per sample per step. All three networks use
/// `config.hidden` and `config.slope`; the step must be numeric.
VaeTrainResult vae_train(const PointCloud& source, int d, double beta, const TrainConfig& config,
                         const VaeOptions& options = {});

}  // namespace gpe
