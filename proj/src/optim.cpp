#include "gpe/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gpe {

BilipEstimate estimate_bilip(const PairwiseSqDists& source, const PairwiseSqDists& image) {
  const Eigen::Index n = source.size();
  if (image.size() != n) throw std::invalid_argument("bi-Lipschitz estimate: size mismatch");
  double rmin = std::numeric_limits<double>::infinity();
  double rmax = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double sx = source(i, j);
      if (sx < kBilipPairFloor) continue;
      const double r = std::sqrt(image(i, j) / sx);
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      ++pairs;
    }
  }
  if (pairs == 0) throw std::invalid_argument("bi-Lipschitz estimate: all source pairs coincide");
  BilipEstimate est;
  est.ratio_min = rmin;
  est.ratio_max = rmax;
  est.pairs = 2 * pairs;
  const double inv_min = rmin > 0.0 ? 1.0 / rmin : std::numeric_limits<double>::infinity();
  est.alpha_hat = std::max(rmax, inv_min);
  est.beta_hat = est.alpha_hat;
  return est;
}

BilipEstimate estimate_bilip(const RowMatrix& source, const RowMatrix& image) {
  if (source.rows() != image.rows())
    throw std::invalid_argument("bi-Lipschitz estimate: row count mismatch");
  return estimate_bilip(pairwise_sq_dists(source), pairwise_sq_dists(image));
}

BilipEstimate estimate_bilip(const PointCloud& source, const EmbeddingTable& embedding) {
  return estimate_bilip(source.points(), embedding.codes());
}

double hessian_ceiling(double beta) {
  if (!(beta >= 1.0)) throw std::invalid_argument("beta must be >= 1");
  return 8.0 * (4.0 * std::log(beta) + 1.0);
}

double corollary_step_size(double beta) { return 1.0 / hessian_ceiling(beta); }

std::string to_string(EncoderMode mode) { return mode == EncoderMode::Table ? "table" : "mlp"; }

std::string to_string(TrainStatus status) {
  switch (status) {
    case TrainStatus::TolReached: return "tol-reached";
    case TrainStatus::MaxIters: return "max-iters";
    case TrainStatus::Diverged: return "diverged";
  }
  return "unknown";
}

EncoderMode encoder_mode_from_string(const std::string& name) {
  if (name == "table") return EncoderMode::Table;
  if (name == "mlp") return EncoderMode::Mlp;
  throw std::invalid_argument("unknown encoder mode: " + name);
}

void TrainConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(tol >= 0.0)) throw std::invalid_argument("tol must be >= 0");
  if (step_size && !(*step_size > 0.0)) throw std::invalid_argument("step size must be > 0");
  if (!(slope > 0.0)) throw std::invalid_argument("leaky-rectifier slope must be > 0");
  if (auto_period < 1) throw std::invalid_argument("auto step period must be >= 1");
  if (divergence_window < 1) throw std::invalid_argument("divergence window must be >= 1");
  for (int w : hidden)
    if (w < 1) throw std::invalid_argument("hidden widths must be positive");
}

RowMatrix pca_projection(const PointCloud& cloud, int d) {
  if (d < 1) throw std::invalid_argument("latent dimension must be >= 1");
  const RowMatrix centered = cloud.points().rowwise() - cloud.points().colwise().mean();
  Eigen::MatrixXd dense = centered;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinV);
  const Eigen::MatrixXd& v = svd.matrixV();
  Eigen::MatrixXd directions = Eigen::MatrixXd::Zero(cloud.dim(), d);
  const Eigen::Index available = std::min<Eigen::Index>(d, v.cols());
  for (Eigen::Index c = 0; c < available; ++c) {
    Vector dir = v.col(c);
    Eigen::Index arg = 0;
    dir.cwiseAbs().maxCoeff(&arg);
    if (dir(arg) < 0.0) dir = -dir;
    directions.col(c) = dir;
  }
  return centered * directions;
}

namespace {

struct DivergenceWatch {
  int window;
  int streak = 0;
  double previous = std::numeric_limits<double>::infinity();

  // Returns true when the cost has increased `window` times in a row.
  bool update(double cost) {
    streak = cost > previous ? streak + 1 : 0;
    previous = cost;
    return streak >= window;
  }
};

}  // namespace

void center_mlp_output(MlpMap& map, RowMatrix& codes) {
  if (codes.cols() != map.output_dim()) throw std::invalid_argument("codes do not match the map output");
  const Vector mean = codes.colwise().mean().transpose();
  map.mutable_biases().back() -= mean;
  codes.rowwise() -= mean.transpose();
}

EncoderResult train_encoder(const PointCloud& source, int d, const TrainConfig& config) {
  return train_encoder(source, d, config, nullptr);
}

EncoderResult train_encoder(const PointCloud& source, int d, const TrainConfig& config,
                            const EncoderObserver& observer) {
  config.validate();
  if (d < 1) throw std::invalid_argument("latent dimension must be >= 1");
  const Eigen::Index n = source.size();
  const PairwiseSqDists source_dists = pairwise_sq_dists(source);
  const GmeObjective objective(source_dists);

  std::optional<MlpMap> mlp;
  MlpMap::Tape tape;
  RowMatrix codes;
  if (config.mode == EncoderMode::Table) {
    codes = pca_projection(source, d);
  } else {
    std::vector<int> widths{static_cast<int>(source.dim())};
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(d);
    mlp.emplace(widths, config.slope, config.seed);
    codes = mlp->forward(source.points(), tape);
  }

  TrainTrace trace;
  DivergenceWatch watch{config.divergence_window};
  double step = config.step_size.value_or(0.0);
  RowMatrix gradient;
  const double nd = static_cast<double>(n);

  for (int k = 0;; ++k) {
    const double cost = objective.cost_and_gradient(codes, gradient);
    MlpGradient param_grad;
    double grad_norm_sq = 0.0;
    if (mlp) {
      param_grad = mlp->backward(tape, gradient);
      grad_norm_sq = param_grad.squared_norm();
    } else {
      // |grad_{L2(mu_n)}|^2_{L2(mu_n)} = (1/n) sum_i |n g_i|^2
      grad_norm_sq = nd * gradient.squaredNorm();
    }

    if (!std::isfinite(cost) || !std::isfinite(grad_norm_sq)) {
      trace.records.push_back({k, cost, grad_norm_sq, 0.0});
      trace.status = TrainStatus::Diverged;
      break;
    }
    if (observer) observer(k, EmbeddingTable(codes), mlp);
    const bool diverging = watch.update(cost);
    if (cost <= config.tol) {
      trace.records.push_back({k, cost, grad_norm_sq, 0.0});
      trace.status = TrainStatus::TolReached;
      break;
    }
    if (k == config.max_iters) {
      trace.records.push_back({k, cost, grad_norm_sq, 0.0});
      trace.status = TrainStatus::MaxIters;
      break;
    }
    if (diverging) {
      trace.records.push_back({k, cost, grad_norm_sq, 0.0});
      trace.status = TrainStatus::Diverged;
      break;
    }
    if (k % config.auto_period == 0) {
      const double beta = estimate_bilip(source_dists, pairwise_sq_dists(codes)).beta_hat;
      trace.beta_max = std::max(trace.beta_max, beta);
      if (!config.step_size) step = std::isfinite(beta) ? corollary_step_size(beta) : 0.0;
    }
    trace.records.push_back({k, cost, grad_norm_sq, step});

    if (mlp) {
      mlp->apply_step(param_grad, step);
      codes = mlp->forward(source.points(), tape);
    } else {
      codes -= (step * nd) * gradient;
    }
  }

  if (mlp) center_mlp_output(*mlp, codes);
  return {EmbeddingTable(std::move(codes)), std::move(mlp), std::move(trace)};
}

DescentCheck check_descent(const TrainTrace& trace) {
  DescentCheck check;
  if (trace.records.empty()) return check;
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const TraceRecord& r = trace.records[k];
    if (r.step > 0.0) check.grad_sum += r.grad_norm_sq;
    if (k > 0) check.max_increase = std::max(check.max_increase, r.cost - trace.records[k - 1].cost);
  }
  const double drop = trace.records.front().cost - trace.records.back().cost;
  check.bound = 2.0 * hessian_ceiling(std::max(1.0, trace.beta_max)) * drop;
  check.telescoping_holds = check.grad_sum <= check.bound + 1e-12;
  check.monotone = check.max_increase <= 1e-12;
  return check;
}

DecoderResult train_decoder(const PointCloud& source, const EmbeddingTable& codes,
                            const TrainConfig& config) {
  std::vector<int> widths{static_cast<int>(codes.dim())};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(static_cast<int>(source.dim()));
  return train_decoder(source, codes, config, MlpMap(widths, config.slope, config.seed));
}

DecoderResult train_decoder(const PointCloud& source, const EmbeddingTable& codes,
                            const TrainConfig& config, MlpMap decoder) {
  config.validate();
  if (!config.step_size) throw std::invalid_argument("decoder training needs a numeric step size");
  if (codes.size() != source.size()) throw std::invalid_argument("codes and cloud size mismatch");
  if (decoder.input_dim() != codes.dim() || decoder.output_dim() != source.dim())
    throw std::invalid_argument("decoder shape does not match codes and cloud");
  const double step = *config.step_size;
  const double n = static_cast<double>(source.size());

  TrainTrace trace;
  DivergenceWatch watch{config.divergence_window};
  MlpMap::Tape tape;
  for (int k = 0;; ++k) {
    const RowMatrix residual = decoder.forward(codes.codes(), tape) - source.points();
    const double loss = residual.squaredNorm() / n;
    const RowMatrix out_grad = (2.0 / n) * residual;
    const MlpGradient grad = decoder.backward(tape, out_grad);
    const double grad_norm_sq = grad.squared_norm();
    if (!std::isfinite(loss) || !std::isfinite(grad_norm_sq)) {
      trace.records.push_back({k, loss, grad_norm_sq, 0.0});
      trace.status = TrainStatus::Diverged;
      break;
    }
    const bool diverging = watch.update(loss);
    if (loss <= config.tol || k == config.max_iters || diverging) {
      trace.records.push_back({k, loss, grad_norm_sq, 0.0});
      trace.status = loss <= config.tol      ? TrainStatus::TolReached
                     : k == config.max_iters ? TrainStatus::MaxIters
                                             : TrainStatus::Diverged;
      break;
    }
    trace.records.push_back({k, loss, grad_norm_sq, step});
    decoder.apply_step(grad, step);
  }
  return {std::move(decoder), std::move(trace)};
}

double reconstruction_loss(const PointCloud& source, const EmbeddingTable& codes,
                           const MlpMap& decoder, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("reconstruction exponent must be >= 1");
  if (codes.size() != source.size()) throw std::invalid_argument("codes and cloud size mismatch");
  const RowMatrix residual = decoder.forward(codes.codes()) - source.points();
  double total = 0.0;
  for (Eigen::Index i = 0; i < residual.rows(); ++i)
    total += std::pow(residual.row(i).norm(), p);
  return total / static_cast<double>(residual.rows());
}

}  // namespace gpe
