#include "gpe/vae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gpe {

namespace {

RowMatrix clamp_logvar(const RowMatrix& raw) {
  return raw.cwiseMax(-kLogvarClamp).cwiseMin(kLogvarClamp);
}

std::vector<int> widths_for(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

RowMatrix VaeModel::logvar(const RowMatrix& points) const {
  return clamp_logvar(encoder_logvar.forward(points));
}

double gaussian_kl(const RowMatrix& mean, const RowMatrix& logvar) {
  if (mean.rows() != logvar.rows() || mean.cols() != logvar.cols())
    throw std::invalid_argument("kl: shape mismatch");
  const double total =
      0.5 * (logvar.array().exp() + mean.array().square() - 1.0 - logvar.array()).sum();
  return total / static_cast<double>(mean.rows());
}

double vae_reconstruction(const VaeModel& model, const PointCloud& source) {
  const RowMatrix r = model.decoder.forward(model.mean(source.points())) - source.points();
  return r.squaredNorm() / static_cast<double>(source.size());
}

VaeTrainResult vae_train(const PointCloud& source, int d, double beta, const TrainConfig& config,
                         const VaeOptions& options) {
  config.validate();
  if (d < 1) throw std::invalid_argument("latent dimension must be >= 1");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  if (!config.step_size) throw std::invalid_argument("vae training needs a numeric step size");
  const int dim = static_cast<int>(source.dim());
  const Eigen::Index n = source.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double step = *config.step_size;

  VaeModel model{MlpMap(widths_for(dim, config.hidden, d), config.slope, RngSeed{mix_seed(config.seed.value, 1)}),
                 MlpMap(widths_for(dim, config.hidden, d), config.slope, RngSeed{mix_seed(config.seed.value, 2)}),
                 MlpMap(widths_for(d, config.hidden, dim), config.slope, RngSeed{mix_seed(config.seed.value, 3)}),
                 beta};
  Rng noise(config.seed, 4);

  TrainTrace trace;
  int streak = 0;
  double previous = std::numeric_limits<double>::infinity();
  MlpMap::Tape mean_tape, logvar_tape, dec_tape;
  const RowMatrix& x = source.points();

  for (int k = 0;; ++k) {
    const RowMatrix mu = model.encoder_mean.forward(x, mean_tape);
    const RowMatrix raw_lv = model.encoder_logvar.forward(x, logvar_tape);
    const RowMatrix lv = clamp_logvar(raw_lv);
    const RowMatrix eps = options.stochastic ? noise.normal_matrix(n, d) : RowMatrix::Zero(n, d);
    const RowMatrix sd = (0.5 * lv.array()).exp().matrix();
    const RowMatrix z = mu + eps.cwiseProduct(sd);
    const RowMatrix residual = model.decoder.forward(z, dec_tape) - x;

    const double rec = residual.squaredNorm() * inv_n;
    const double kl = gaussian_kl(mu, lv);
    const double loss = rec + beta * kl;

    RowMatrix grad_z;
    const MlpGradient g_dec = model.decoder.backward(dec_tape, (2.0 * inv_n) * residual, &grad_z);
    double grad_norm_sq = g_dec.squared_norm();
    MlpGradient g_mean, g_lv;
    if (!options.freeze_encoder) {
      const RowMatrix d_mu = grad_z + (beta * inv_n) * mu;
      RowMatrix d_lv = grad_z.cwiseProduct(eps).cwiseProduct(0.5 * sd) +
                       (0.5 * beta * inv_n) * (lv.array().exp() - 1.0).matrix();
      // clamped outputs pass no gradient
      d_lv = (raw_lv.array().abs() <= kLogvarClamp).select(d_lv, 0.0);
      g_mean = model.encoder_mean.backward(mean_tape, d_mu);
      g_lv = model.encoder_logvar.backward(logvar_tape, d_lv);
      grad_norm_sq += g_mean.squared_norm() + g_lv.squared_norm();
    }

    if (!std::isfinite(loss) || !std::isfinite(grad_norm_sq)) {
      trace.records.push_back({k, loss, grad_norm_sq, 0.0});
      trace.status = TrainStatus::Diverged;
      break;
    }
    streak = loss > previous ? streak + 1 : 0;
    previous = loss;
    if (loss <= config.tol || k == config.max_iters || streak >= config.divergence_window) {
      trace.records.push_back({k, loss, grad_norm_sq, 0.0});
      trace.status = loss <= config.tol ? TrainStatus::TolReached
                     : k == config.max_iters ? TrainStatus::MaxIters
                                             : TrainStatus::Diverged;
      break;
    }
    trace.records.push_back({k, loss, grad_norm_sq, step});
    model.decoder.apply_step(g_dec, step);
    if (!options.freeze_encoder) {
      model.encoder_mean.apply_step(g_mean, step);
      model.encoder_logvar.apply_step(g_lv, step);
    }
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace gpe
