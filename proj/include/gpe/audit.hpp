#pragma once

#include <functional>
#include <vector>

#include "gpe/core.hpp"
#include "gpe/gme.hpp"
#include "gpe/mlp.hpp"

namespace gpe {

/// Row-wise map R^D -> R^d applied to a batch of points.
using BatchMap = std::function<RowMatrix(const RowMatrix&)>;

BatchMap as_batch_map(const MlpMap& map);
/// x -> scale * x, used as a reference map with known constants.
BatchMap scaling_map(double scale);

/// Encoder known only on training points, extended off-sample by the code of
/// the nearest training point (lowest index on ties).
class TableEncoder {
 public:
  TableEncoder(PointCloud source, EmbeddingTable codes);

  RowMatrix operator()(const RowMatrix& points) const;
  /// Index of the nearest training point.
  Eigen::Index nearest(const Eigen::Ref<const Vector>& point) const;
  const PointCloud& source() const { return source_; }
  const EmbeddingTable& codes() const { return codes_; }
  BatchMap as_batch_map() const;

 private:
  PointCloud source_;
  EmbeddingTable codes_;
};

struct AlphaRecord {
  double alpha = 0.0;
  double violating_fraction = 0.0;
  /// epsilon_gme / (4 ln^2 alpha)
  double markov_bound = 0.0;
  bool bound_satisfied = true;
};

/// Pairs that are non-violating at `alpha` and separated by
/// |dx|^2 >= (alpha^2 - 1) / gamma must satisfy
/// ((1 - gamma) / alpha^2) |dx|^2 <= |dy|^2 <= (alpha^2 + gamma) |dx|^2.
struct SeparatedPairRecord {
  double alpha = 0.0;
  double gamma = 0.0;
  double threshold = 0.0;
  std::size_t qualifying_pairs = 0;
  /// Extremes of |dy|^2 / |dx|^2 over qualifying pairs (NaN when none qualify).
  double ratio_min = 0.0;
  double ratio_max = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  std::size_t implication_failures = 0;
};

struct BilipAuditReport {
  double epsilon_gme = 0.0;
  std::size_t ordered_pairs = 0;
  std::vector<AlphaRecord> alphas;
  std::vector<SeparatedPairRecord> separated;

  bool all_bounds_satisfied() const;
};

/// A pair is non-violating for alpha iff
///   alpha^-2 |dx|^2 - (1 - alpha^-2) <= |dy|^2 <= alpha^2 |dx|^2 + (alpha^2 - 1).
bool weak_bilip_pair_ok(double sq_dx, double sq_dy, double alpha);

BilipAuditReport weak_bilip_audit(const PointCloud& source, const EmbeddingTable& codes,
                                  const std::vector<double>& alphas, double gamma);

struct DistortionEstimate {
  /// A(x) per sample: mean over unit tangent directions of (|dT_x v|^2 - 1)^2.
  std::vector<double> values;
  int directions = 0;
  double fd_step = 0.0;

  double mean() const;
};

/// Central differences along chart-parameter directions u with |Dphi u| = 1.
/// For m = 1 the directions are the two unit tangents (n_dirs is ignored); for
/// m = 2, `n_dirs` equispaced angles on the tangent circle, which integrate the
/// degree-4 trigonometric integrand exactly for linear maps when n_dirs >= 5.
DistortionEstimate estimate_tangent_distortion(const SyntheticManifold& manifold, const BatchMap& map,
                                               const RowMatrix& params, int n_dirs,
                                               double fd_step = 1e-4);

struct JacobianEstimate {
  std::vector<double> values;
  double fd_step = 0.0;
};

/// sqrt(det(A^T A) / det(B^T B)) with B the finite-difference chart
/// differential and A the differential of map composed with the chart.
JacobianEstimate estimate_jacobian_det(const SyntheticManifold& manifold, const BatchMap& map,
                                       const RowMatrix& params, double fd_step = 1e-4);

/// Draws an n-point sample from the data distribution.
using CloudSampler = std::function<RowMatrix(int n, Rng& rng)>;

CloudSampler manifold_sampler(const SyntheticManifold& manifold, double noise_sigma);
CloudSampler mixture_sampler(int k, int ambient_dim, double manifold_sigma, double noise_sigma);

struct ConcentrationRecord {
  int n = 0;
  double epsilon = 0.0;
  /// Deviation threshold 4 (ln beta_hat)^2 epsilon.
  double threshold = 0.0;
  double exceedance = 0.0;
  /// 2 exp(-n eps^2 / (6 (1 + eps / 3)))
  double bound = 0.0;
  double slack = 0.0;
  bool within_bound = true;
};

struct ConcentrationReport {
  int trials = 0;
  int reference_size = 0;
  double reference_cost = 0.0;
  double beta_hat = 1.0;
  std::vector<ConcentrationRecord> records;
};

double bernstein_bound(int n, double epsilon);

/// GME cost of map applied to points, streamed over pairs without storing
/// the n x n residual matrix.
double streamed_gme_cost(const RowMatrix& points, const RowMatrix& codes);

/// Monte-Carlo exceedance of |C_n - C_ref| > 4 (ln beta_hat)^2 eps over
/// `trials` fresh samples per n. The reference cloud has 20 max(n) points and
/// its cost is streamed, so it is not bound by kMaxPairwisePoints; beta_hat is
/// measured on it.
ConcentrationReport concentration_mc(const CloudSampler& sampler, const BatchMap& map,
                                     const std::vector<int>& sizes,
                                     const std::vector<double>& epsilons, int trials, RngSeed seed);

/// One cell of the chart atlas: a parameter interval along the first
/// intrinsic coordinate, its anchor, and its eroded core.
struct JlChartCell {
  double lower = 0.0;
  double upper = 0.0;
  double eroded_lower = 0.0;
  double eroded_upper = 0.0;
  Vector anchor_param;
  Vector anchor;              // ambient anchor point p_i
  Vector anchor_coords;       // phi_i(p_i)
};

/// Piecewise map T(x) = P p_i + J (phi_i(x) - phi_i(p_i)) on cell i, where
/// phi_i is the arc-length chart and J = [I_m; 0].
class JlChartMap {
 public:
  JlChartMap(SyntheticManifold manifold, std::vector<JlChartCell> cells, RowMatrix projection,
             int attempts);

  const SyntheticManifold& manifold() const { return manifold_; }
  const std::vector<JlChartCell>& cells() const { return cells_; }
  const RowMatrix& projection() const { return projection_; }
  int latent_dim() const { return static_cast<int>(projection_.rows()); }
  /// Projection draws needed to realize the anchor distance event.
  int attempts() const { return attempts_; }

  /// Cell owning a parameter; cells are half-open so the owner is unique.
  int owner(const Vector& param) const;
  bool in_eroded_cell(const Vector& param) const;
  Vector chart_coords(const Vector& param) const;
  Vector map_param(const Vector& param) const;
  /// Maps ambient points on the manifold (parameters recovered by inverting the chart).
  RowMatrix operator()(const RowMatrix& points) const;

 private:
  SyntheticManifold manifold_;
  std::vector<JlChartCell> cells_;
  RowMatrix projection_;
  int attempts_ = 0;
};

/// Recovers intrinsic parameters of noise-free manifold points.
Vector inverse_chart(const SyntheticManifold& manifold, const Vector& point);

/// Gaussian projection scaled by 1/sqrt(d); up to 50 draws until every anchor
/// pair distance is preserved within a factor 1 +- eps_jl.
JlChartMap construct_chart_jl_map(const SyntheticManifold& manifold, int chart_count, double erosion,
                                  int latent_dim, double eps_jl, RngSeed seed);

struct JlChartAudit {
  /// Measured chart distortion: 1 - min over in-chart pairs of min(r, 1/r),
  /// r = |phi(x) - phi(y)| / |x - y|.
  double epsilon_chart = 0.0;
  /// max(epsilon_chart, eps_jl): the charts are also (1 +- eps)-bi-Lipschitz
  /// for this larger eps, and the cross-chart estimate needs eps >= eps_jl.
  double epsilon_band = 0.0;
  double band_lower = 1.0;  // (1 - eps_band)^2
  double band_upper = 1.0;  // (1 - eps_band)^-2
  std::size_t eroded_points = 0;
  std::size_t in_chart_pairs = 0;
  std::size_t cross_chart_pairs = 0;
  /// Extremes of (1 + |dT|^2) / (1 + |dx|^2).
  double in_chart_min = 0.0, in_chart_max = 0.0;
  double cross_chart_min = 0.0, cross_chart_max = 0.0;
  double in_chart_band_fraction = 0.0;
  double cross_chart_band_fraction = 0.0;
  double band_fraction = 0.0;
};

/// Audits unordered pairs of sample points whose parameters lie in eroded cells.
/// Pass eps_jl = 0 to band with the measured chart distortion alone.
JlChartAudit audit_chart_jl_map(const JlChartMap& map, const RowMatrix& params, double eps_jl = 0.0);

}  // namespace gpe
