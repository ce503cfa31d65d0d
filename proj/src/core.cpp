#include "gpe/core.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gpe {

PointCloud::PointCloud(RowMatrix points) : points_(std::move(points)) {
  if (points_.rows() < 2) throw std::invalid_argument("point cloud needs at least 2 points");
  if (points_.cols() < 1) throw std::invalid_argument("point cloud needs dimension >= 1");
  if (!points_.allFinite()) throw std::invalid_argument("point cloud has non-finite entries");
}

PairwiseSqDists pairwise_sq_dists(const RowMatrix& points) {
  const Eigen::Index n = points.rows();
  if (n > kMaxPairwisePoints)
    throw std::invalid_argument("pairwise distances capped at " +
                                std::to_string(kMaxPairwisePoints) + " points");
  RowMatrix out = RowMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double s = (points.row(i) - points.row(j)).squaredNorm();
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return PairwiseSqDists(std::move(out));
}

PairwiseSqDists pairwise_sq_dists(const PointCloud& cloud) {
  return pairwise_sq_dists(cloud.points());
}

std::string to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::GaussianMixture: return "gaussian-mixture";
    case ManifoldKind::Circle: return "circle";
    case ManifoldKind::SwissRoll: return "swiss-roll";
  }
  return "unknown";
}

ManifoldKind manifold_kind_from_string(const std::string& name) {
  if (name == "gaussian-mixture") return ManifoldKind::GaussianMixture;
  if (name == "circle") return ManifoldKind::Circle;
  if (name == "swiss-roll") return ManifoldKind::SwissRoll;
  throw std::invalid_argument("unsupported manifold kind: " + name);
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRollTMin = 1.5 * kPi;
constexpr double kRollTMax = 4.5 * kPi;
constexpr double kRollHeight = 10.0;

}  // namespace

SyntheticManifold::SyntheticManifold(ManifoldKind kind, int ambient_dim)
    : kind_(kind), ambient_dim_(ambient_dim) {
  switch (kind) {
    case ManifoldKind::GaussianMixture:
      if (ambient_dim < 2) throw std::invalid_argument("mixture requires D >= 2");
      intrinsic_dim_ = 2;
      break;
    case ManifoldKind::Circle:
      if (ambient_dim < 2) throw std::invalid_argument("circle requires D >= 2");
      intrinsic_dim_ = 1;
      lower_ = Vector::Constant(1, 0.0);
      upper_ = Vector::Constant(1, 2.0 * kPi);
      // uniform angle -> density 1/(2 pi) w.r.t. arc length
      density_ = DensityBounds{1.0 / (2.0 * kPi), 1.0 / (2.0 * kPi)};
      break;
    case ManifoldKind::SwissRoll: {
      if (ambient_dim < 3) throw std::invalid_argument("swiss roll requires D >= 3");
      intrinsic_dim_ = 2;
      lower_ = Vector(2);
      upper_ = Vector(2);
      lower_ << kRollTMin, 0.0;
      upper_ << kRollTMax, kRollHeight;
      // uniform (t, s) over the box; area element scale^2 sqrt(1 + t^2)
      const double box = (kRollTMax - kRollTMin) * kRollHeight;
      const double s2 = kSwissRollScale * kSwissRollScale;
      density_ = DensityBounds{1.0 / (box * s2 * std::sqrt(1.0 + kRollTMax * kRollTMax)),
                               1.0 / (box * s2 * std::sqrt(1.0 + kRollTMin * kRollTMin))};
      break;
    }
  }
}

Vector SyntheticManifold::chart(const Vector& param) const {
  if (!has_chart()) throw std::logic_error("mixture has no chart");
  if (param.size() != intrinsic_dim_) throw std::invalid_argument("chart parameter size mismatch");
  Vector x = Vector::Zero(ambient_dim_);
  if (kind_ == ManifoldKind::Circle) {
    x(0) = std::cos(param(0));
    x(1) = std::sin(param(0));
  } else {
    const double t = param(0);
    x(0) = kSwissRollScale * t * std::cos(t);
    x(1) = kSwissRollScale * param(1);
    x(2) = kSwissRollScale * t * std::sin(t);
  }
  return x;
}

Eigen::MatrixXd SyntheticManifold::chart_differential(const Vector& param) const {
  if (!has_chart()) throw std::logic_error("mixture has no chart");
  if (param.size() != intrinsic_dim_) throw std::invalid_argument("chart parameter size mismatch");
  Eigen::MatrixXd dphi = Eigen::MatrixXd::Zero(ambient_dim_, intrinsic_dim_);
  if (kind_ == ManifoldKind::Circle) {
    dphi(0, 0) = -std::sin(param(0));
    dphi(1, 0) = std::cos(param(0));
  } else {
    const double t = param(0);
    dphi(0, 0) = kSwissRollScale * (std::cos(t) - t * std::sin(t));
    dphi(2, 0) = kSwissRollScale * (std::sin(t) + t * std::cos(t));
    dphi(1, 1) = kSwissRollScale;
  }
  return dphi;
}

RowMatrix mixture_centers(int k, int ambient_dim) {
  if (k < 1) throw std::invalid_argument("mixture needs k >= 1");
  if (ambient_dim < 2) throw std::invalid_argument("mixture requires D >= 2");
  RowMatrix centers = RowMatrix::Zero(k, ambient_dim);
  for (int c = 0; c < k; ++c) {
    const double angle = 2.0 * kPi * c / k;
    centers(c, 0) = std::cos(angle);
    centers(c, 1) = std::sin(angle);
  }
  return centers;
}

MixtureSample generate_gaussian_mixture(int k, int ambient_dim, int n, double manifold_sigma,
                                        double noise_sigma, RngSeed seed) {
  if (k < 1) throw std::invalid_argument("mixture needs k >= 1");
  if (ambient_dim < 2) throw std::invalid_argument("mixture requires D >= 2");
  if (n < 2) throw std::invalid_argument("mixture needs n >= 2");
  if (!(manifold_sigma >= 0.0) || !(noise_sigma >= 0.0))
    throw std::invalid_argument("mixture sigmas must be nonnegative");

  RowMatrix centers = mixture_centers(k, ambient_dim);

  Rng rng(seed);
  RowMatrix points(n, ambient_dim);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    const int c = i % k;
    labels[i] = c;
    for (int j = 0; j < ambient_dim; ++j) {
      const double sigma = j < 2 ? manifold_sigma : noise_sigma;
      points(i, j) = centers(c, j) + sigma * rng.normal();
    }
  }
  return {PointCloud(std::move(points)), std::move(labels), std::move(centers)};
}

RowMatrix sample_params(const SyntheticManifold& manifold, int n, Rng& rng) {
  const int m = manifold.intrinsic_dim();
  RowMatrix params(n, m);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < m; ++a)
      params(i, a) = rng.uniform(manifold.param_lower()(a), manifold.param_upper()(a));
  return params;
}

ManifoldSample generate_synthetic_manifold(ManifoldKind kind, int ambient_dim, int n,
                                           double noise_sigma, RngSeed seed) {
  if (kind == ManifoldKind::GaussianMixture)
    throw std::invalid_argument("use generate_gaussian_mixture for mixtures");
  if (n < 2) throw std::invalid_argument("manifold sample needs n >= 2");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be nonnegative");
  SyntheticManifold manifold(kind, ambient_dim);
  Rng rng(seed);
  RowMatrix params = sample_params(manifold, n, rng);
  RowMatrix points(n, ambient_dim);
  for (int i = 0; i < n; ++i) {
    points.row(i) = manifold.chart(params.row(i).transpose()).transpose();
    for (int j = 0; j < ambient_dim; ++j) points(i, j) += noise_sigma * rng.normal();
  }
  return {PointCloud(std::move(points)), std::move(manifold), std::move(params)};
}

}  // namespace gpe
