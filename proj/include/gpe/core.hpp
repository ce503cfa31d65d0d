#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gpe/rng.hpp"
#include "gpe/types.hpp"

namespace gpe {

/// n points in ambient dimension D, one row per point. Requires n >= 2 and
/// finite entries.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(RowMatrix points);

  const RowMatrix& points() const { return points_; }
  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }
  auto row(Eigen::Index i) const { return points_.row(i); }

 private:
  RowMatrix points_;
};

/// Symmetric n x n matrix of squared Euclidean distances with zero diagonal.
class PairwiseSqDists {
 public:
  PairwiseSqDists() = default;
  explicit PairwiseSqDists(RowMatrix values) : values_(std::move(values)) {}

  const RowMatrix& values() const { return values_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
  Eigen::Index size() const { return values_.rows(); }

 private:
  RowMatrix values_;
};

/// Squared distances computed from explicit coordinate differences, so the
/// result is exactly symmetric, exactly zero on the diagonal, and nonnegative.
PairwiseSqDists pairwise_sq_dists(const PointCloud& cloud);
PairwiseSqDists pairwise_sq_dists(const RowMatrix& points);

enum class ManifoldKind { GaussianMixture, Circle, SwissRoll };

std::string to_string(ManifoldKind kind);
ManifoldKind manifold_kind_from_string(const std::string& name);

struct DensityBounds {
  double rho_min = 0.0;
  double rho_max = 0.0;
};

/// A known test manifold. Circle and swiss roll carry exact chart evaluators
/// mapping intrinsic parameters to ambient points (and the chart differential).
class SyntheticManifold {
 public:
  SyntheticManifold(ManifoldKind kind, int ambient_dim);

  ManifoldKind kind() const { return kind_; }
  int intrinsic_dim() const { return intrinsic_dim_; }
  int ambient_dim() const { return ambient_dim_; }
  const std::optional<DensityBounds>& density_bounds() const { return density_; }
  bool has_chart() const { return kind_ != ManifoldKind::GaussianMixture; }

  /// Parameter box; the circle parameter is an angle and wraps around.
  const Vector& param_lower() const { return lower_; }
  const Vector& param_upper() const { return upper_; }

  Vector chart(const Vector& param) const;
  /// D x m analytic differential of the chart at param.
  Eigen::MatrixXd chart_differential(const Vector& param) const;

 private:
  ManifoldKind kind_;
  int intrinsic_dim_ = 0;
  int ambient_dim_ = 0;
  std::optional<DensityBounds> density_;
  Vector lower_;
  Vector upper_;
};

/// The swiss roll is (t cos t, s, t sin t) scaled by this factor, t in
/// [1.5 pi, 4.5 pi], s in [0, 10].
inline constexpr double kSwissRollScale = 0.1;

struct MixtureSample {
  PointCloud cloud;
  std::vector<int> labels;
  RowMatrix centers;  // k x D
};

/// k x D matrix of centers evenly spaced on the unit circle in the first two
/// coordinates.
RowMatrix mixture_centers(int k, int ambient_dim);

/// Gaussian mixture with centers from mixture_centers. Point i belongs to
/// component i mod k. Each component has diagonal covariance: manifold_sigma^2
/// on the first two axes, noise_sigma^2 on the remaining D - 2.

MixtureSample generate_gaussian_mixture(int k, int ambient_dim, int n, double manifold_sigma,
                                        double noise_sigma, RngSeed seed);

struct ManifoldSample {
  PointCloud cloud;
  SyntheticManifold manifold;
  RowMatrix params;  // n x m intrinsic parameters of the noise-free points
};

ManifoldSample generate_synthetic_manifold(ManifoldKind kind, int ambient_dim, int n,
                                           double noise_sigma, RngSeed seed);

/// Draws n intrinsic parameters uniformly from the manifold's parameter box.
RowMatrix sample_params(const SyntheticManifold& manifold, int n, Rng& rng);

}  // namespace gpe
