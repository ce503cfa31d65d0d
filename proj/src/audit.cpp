#include "gpe/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "gpe/parallel.hpp"

namespace gpe {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double sq_dist(const RowMatrix& a, Eigen::Index i, Eigen::Index j) {
  const double* x = a.data() + i * a.cols();
  const double* y = a.data() + j * a.cols();
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double t = x[k] - y[k];
    s += t * t;
  }
  return s;
}

RowMatrix as_row(const Vector& v) { return v.transpose(); }

}  // namespace

BatchMap as_batch_map(const MlpMap& map) {
  return [map](const RowMatrix& points) { return map.forward(points); };
}

BatchMap scaling_map(double scale) {
  return [scale](const RowMatrix& points) -> RowMatrix { return scale * points; };
}

TableEncoder::TableEncoder(PointCloud source, EmbeddingTable codes)
    : source_(std::move(source)), codes_(std::move(codes)) {
  if (source_.size() != codes_.size())
    throw std::invalid_argument("table encoder: codes and cloud size mismatch");
}

Eigen::Index TableEncoder::nearest(const Eigen::Ref<const Vector>& point) const {
  if (point.size() != source_.dim()) throw std::invalid_argument("table encoder: dimension mismatch");
  Eigen::Index best = 0;
  double best_d = kInf;
  for (Eigen::Index i = 0; i < source_.size(); ++i) {
    const double d = (source_.row(i).transpose() - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

RowMatrix TableEncoder::operator()(const RowMatrix& points) const {
  RowMatrix out(points.rows(), codes_.dim());
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    out.row(i) = codes_.codes().row(nearest(points.row(i).transpose()));
  return out;
}

BatchMap TableEncoder::as_batch_map() const {
  return [self = *this](const RowMatrix& points) { return self(points); };
}

bool weak_bilip_pair_ok(double sq_dx, double sq_dy, double alpha) {
  const double a2 = alpha * alpha;
  const double inv = 1.0 / a2;
  return inv * sq_dx - (1.0 - inv) <= sq_dy && sq_dy <= a2 * sq_dx + (a2 - 1.0);
}

bool BilipAuditReport::all_bounds_satisfied() const {
  for (const auto& r : alphas)
    if (!r.bound_satisfied) return false;
  for (const auto& s : separated)
    if (s.implication_failures != 0) return false;
  return true;
}

BilipAuditReport weak_bilip_audit(const PointCloud& source, const EmbeddingTable& codes,
                                  const std::vector<double>& alphas, double gamma) {
  if (codes.size() != source.size()) throw std::invalid_argument("audit: codes and cloud size mismatch");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("audit: gamma must lie in (0, 1)");
  for (double a : alphas)
    if (!(a > 1.0)) throw std::invalid_argument("audit: every alpha must exceed 1");

  const RowMatrix& x = source.points();
  const RowMatrix& y = codes.codes();
  const Eigen::Index n = source.size();

  BilipAuditReport report;
  report.epsilon_gme = gme_cost(source, codes).cost;
  report.ordered_pairs = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1);

  std::vector<std::size_t> violations(alphas.size(), 0);
  for (double a : alphas) {
    SeparatedPairRecord s;
    s.alpha = a;
    s.gamma = gamma;
    s.threshold = (a * a - 1.0) / gamma;
    s.lower_bound = (1.0 - gamma) / (a * a);
    s.upper_bound = a * a + gamma;
    s.ratio_min = kInf;
    s.ratio_max = -kInf;
    report.separated.push_back(s);
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double sx = sq_dist(x, i, j);
      const double sy = sq_dist(y, i, j);
      for (std::size_t a = 0; a < alphas.size(); ++a) {
        const bool ok = weak_bilip_pair_ok(sx, sy, alphas[a]);
        if (!ok) {
          violations[a] += 2;
          continue;
        }
        SeparatedPairRecord& s = report.separated[a];
        if (sx >= s.threshold && sx > 0.0) {
          s.qualifying_pairs += 2;
          const double r = sy / sx;
          s.ratio_min = std::min(s.ratio_min, r);
          s.ratio_max = std::max(s.ratio_max, r);
          if (!(s.lower_bound * sx <= sy && sy <= s.upper_bound * sx)) s.implication_failures += 2;
        }
      }
    }
  }

  for (std::size_t a = 0; a < alphas.size(); ++a) {
    AlphaRecord r;
    r.alpha = alphas[a];
    r.violating_fraction = static_cast<double>(violations[a]) / static_cast<double>(report.ordered_pairs);
    const double la = std::log(alphas[a]);
    r.markov_bound = report.epsilon_gme / (4.0 * la * la);
    r.bound_satisfied = r.violating_fraction <= r.markov_bound + 1e-12;
    report.alphas.push_back(r);
    SeparatedPairRecord& s = report.separated[a];
    if (s.qualifying_pairs == 0) s.ratio_min = s.ratio_max = kNaN;
  }
  return report;
}

double DistortionEstimate::mean() const {
  if (values.empty()) return kNaN;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

namespace {

void check_chart_inputs(const SyntheticManifold& manifold, const RowMatrix& params, double fd_step) {
  if (!manifold.has_chart()) throw std::invalid_argument("manifold has no chart evaluator");
  if (!(fd_step > 0.0)) throw std::invalid_argument("finite-difference step must be > 0");
  if (params.cols() != manifold.intrinsic_dim())
    throw std::invalid_argument("parameter columns must equal the intrinsic dimension");
}

/// Central difference of map(chart(.)) along parameter direction u.
Vector composed_derivative(const SyntheticManifold& manifold, const BatchMap& map, const Vector& p,
                           const Vector& u, double h) {
  RowMatrix pts(2, manifold.ambient_dim());
  pts.row(0) = manifold.chart(p + h * u).transpose();
  pts.row(1) = manifold.chart(p - h * u).transpose();
  const RowMatrix img = map(pts);
  return (img.row(0) - img.row(1)).transpose() / (2.0 * h);
}

}  // namespace

DistortionEstimate estimate_tangent_distortion(const SyntheticManifold& manifold, const BatchMap& map,
                                               const RowMatrix& params, int n_dirs, double fd_step) {
  check_chart_inputs(manifold, params, fd_step);
  const int m = manifold.intrinsic_dim();
  if (m == 2 && n_dirs < 1) throw std::invalid_argument("need at least one tangent direction");

  DistortionEstimate est;
  est.fd_step = fd_step;
  est.directions = m == 1 ? 2 : n_dirs;
  est.values.resize(params.rows());
  for (Eigen::Index s = 0; s < params.rows(); ++s) {
    const Vector p = params.row(s).transpose();
    const Eigen::MatrixXd b = manifold.chart_differential(p);
    // u = (B^T B)^{-1/2} w maps unit w to unit tangent vectors B u.
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram(b.transpose() * b);
    const Eigen::MatrixXd inv_sqrt = gram.operatorInverseSqrt();
    double total = 0.0;
    for (int k = 0; k < est.directions; ++k) {
      Vector w(m);
      if (m == 1) {
        w(0) = k == 0 ? 1.0 : -1.0;
      } else {
        const double theta = 2.0 * std::numbers::pi * k / est.directions;
        w << std::cos(theta), std::sin(theta);
      }
      const Vector dv = composed_derivative(manifold, map, p, inv_sqrt * w, fd_step);
      const double e = dv.squaredNorm() - 1.0;
      total += e * e;
    }
    est.values[s] = total / est.directions;
  }
  return est;
}

JacobianEstimate estimate_jacobian_det(const SyntheticManifold& manifold, const BatchMap& map,
                                       const RowMatrix& params, double fd_step) {
  check_chart_inputs(manifold, params, fd_step);
  const int m = manifold.intrinsic_dim();
  JacobianEstimate est;
  est.fd_step = fd_step;
  est.values.resize(params.rows());
  for (Eigen::Index s = 0; s < params.rows(); ++s) {
    const Vector p = params.row(s).transpose();
    Eigen::MatrixXd b(manifold.ambient_dim(), m);
    Eigen::MatrixXd a;
    for (int k = 0; k < m; ++k) {
      const Vector e = Vector::Unit(m, k);
      b.col(k) = (manifold.chart(p + fd_step * e) - manifold.chart(p - fd_step * e)) / (2.0 * fd_step);
      const Vector dk = composed_derivative(manifold, map, p, e, fd_step);
      if (k == 0) a.resize(dk.size(), m);
      a.col(k) = dk;
    }
    const double det_b = (b.transpose() * b).determinant();
    if (!(det_b > 1e-300)) throw std::runtime_error("singular chart Gram matrix");
    const double det_a = std::max(0.0, (a.transpose() * a).determinant());
    est.values[s] = std::sqrt(det_a / det_b);
  }
  return est;
}

CloudSampler manifold_sampler(const SyntheticManifold& manifold, double noise_sigma) {
  if (!manifold.has_chart()) throw std::invalid_argument("manifold sampler needs a chart");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be nonnegative");
  return [manifold, noise_sigma](int n, Rng& rng) {
    const RowMatrix params = sample_params(manifold, n, rng);
    RowMatrix points(n, manifold.ambient_dim());
    for (int i = 0; i < n; ++i) {
      points.row(i) = manifold.chart(params.row(i).transpose()).transpose();
      for (int j = 0; j < manifold.ambient_dim(); ++j) points(i, j) += noise_sigma * rng.normal();
    }
    return points;
  };
}

CloudSampler mixture_sampler(int k, int ambient_dim, double manifold_sigma, double noise_sigma) {
  if (!(manifold_sigma >= 0.0) || !(noise_sigma >= 0.0))
    throw std::invalid_argument("mixture sigmas must be nonnegative");
  const RowMatrix centers = mixture_centers(k, ambient_dim);
  return [centers, k, ambient_dim, manifold_sigma, noise_sigma](int n, Rng& rng) {
    RowMatrix points(n, ambient_dim);
    std::uniform_int_distribution<int> pick(0, k - 1);
    for (int i = 0; i < n; ++i) {
      const int c = pick(rng.engine());
      for (int j = 0; j < ambient_dim; ++j)
        points(i, j) = centers(c, j) + (j < 2 ? manifold_sigma : noise_sigma) * rng.normal();
    }
    return points;
  };
}

double bernstein_bound(int n, double epsilon) {
  return 2.0 * std::exp(-static_cast<double>(n) * epsilon * epsilon / (6.0 * (1.0 + epsilon / 3.0)));
}

double streamed_gme_cost(const RowMatrix& points, const RowMatrix& codes) {
  if (points.rows() != codes.rows()) throw std::invalid_argument("cost: row count mismatch");
  const Eigen::Index n = points.rows();
  if (n < 2) throw std::invalid_argument("cost: need n >= 2");
  std::vector<double> rows(n, 0.0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t iu) {
    const auto i = static_cast<Eigen::Index>(iu);
    double acc = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double l = std::log1p(sq_dist(codes, i, j)) - std::log1p(sq_dist(points, i, j));
      acc += l * l;
    }
    rows[iu] = acc;
  });
  double total = 0.0;
  for (double r : rows) total += r;
  return 2.0 * total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

namespace {

double streamed_beta(const RowMatrix& points, const RowMatrix& codes) {
  const Eigen::Index n = points.rows();
  double rmin = kInf, rmax = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double sx = sq_dist(points, i, j);
      if (sx < 1e-12) continue;
      const double r = std::sqrt(sq_dist(codes, i, j) / sx);
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }
  }
  if (rmin == kInf) throw std::invalid_argument("all reference pairs coincide");
  return std::max(rmax, rmin > 0.0 ? 1.0 / rmin : kInf);
}

}  // namespace

ConcentrationReport concentration_mc(const CloudSampler& sampler, const BatchMap& map,
                                     const std::vector<int>& sizes,
                                     const std::vector<double>& epsilons, int trials, RngSeed seed) {
  if (trials < 100) throw std::invalid_argument("concentration needs at least 100 trials");
  if (sizes.empty() || epsilons.empty()) throw std::invalid_argument("need sample sizes and epsilons");
  for (int n : sizes)
    if (n < 2) throw std::invalid_argument("sample sizes must be >= 2");
  for (double e : epsilons)
    if (!(e > 0.0)) throw std::invalid_argument("epsilons must be > 0");

  ConcentrationReport report;
  report.trials = trials;
  report.reference_size = 20 * *std::max_element(sizes.begin(), sizes.end());
  Rng ref_rng(seed, 0);
  const RowMatrix ref_points = sampler(report.reference_size, ref_rng);
  const RowMatrix ref_codes = map(ref_points);
  report.reference_cost = streamed_gme_cost(ref_points, ref_codes);
  report.beta_hat = streamed_beta(ref_points, ref_codes);
  const double lb = std::log(report.beta_hat);

  for (std::size_t si = 0; si < sizes.size(); ++si) {
    const int n = sizes[si];
    std::vector<double> deviation(trials);
    parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
      Rng rng(seed, 1 + si * static_cast<std::uint64_t>(trials) + t);
      const RowMatrix pts = sampler(n, rng);
      deviation[t] = std::abs(streamed_gme_cost(pts, map(pts)) - report.reference_cost);
    });
    for (double eps : epsilons) {
      ConcentrationRecord r;
      r.n = n;
      r.epsilon = eps;
      r.threshold = 4.0 * lb * lb * eps;
      int hits = 0;
      for (double d : deviation) hits += d > r.threshold ? 1 : 0;
      r.exceedance = static_cast<double>(hits) / trials;
      r.bound = bernstein_bound(n, eps);
      r.slack = 2.0 / std::sqrt(static_cast<double>(trials));
      r.within_bound = r.exceedance <= r.bound + r.slack;
      report.records.push_back(r);
    }
  }
  return report;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Arc length of the unscaled roll curve (t cos t, t sin t) from 0 to t.
double roll_arclength(double t) { return 0.5 * (t * std::sqrt(1.0 + t * t) + std::asinh(t)); }

/// Inverse of roll_arclength by bisection on a bracket containing the answer.
double roll_param_at(double arc, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (roll_arclength(mid) < arc ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double wrap_angle(double theta) {
  double w = std::fmod(theta, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

/// Arc-length chart: angle on the unit circle, (arc length along t, height)
/// on the roll. Both are intrinsic isometries onto their images.
Vector arc_chart_coords(const SyntheticManifold& manifold, const Vector& param) {
  if (manifold.kind() == ManifoldKind::Circle) return Vector::Constant(1, wrap_angle(param(0)));
  Vector c(2);
  c << kSwissRollScale * roll_arclength(param(0)), kSwissRollScale * param(1);
  return c;
}

}  // namespace

Vector inverse_chart(const SyntheticManifold& manifold, const Vector& point) {
  if (point.size() != manifold.ambient_dim()) throw std::invalid_argument("point dimension mismatch");
  Vector p(manifold.intrinsic_dim());
  switch (manifold.kind()) {
    case ManifoldKind::Circle:
      p(0) = wrap_angle(std::atan2(point(1), point(0)));
      break;
    case ManifoldKind::SwissRoll:
      p(0) = std::hypot(point(0), point(2)) / kSwissRollScale;
      p(1) = point(1) / kSwissRollScale;
      break;
    default:
      throw std::invalid_argument("manifold has no chart");
  }
  return p;
}

JlChartMap::JlChartMap(SyntheticManifold manifold, std::vector<JlChartCell> cells, RowMatrix projection,
                       int attempts)
    : manifold_(std::move(manifold)),
      cells_(std::move(cells)),
      projection_(std::move(projection)),
      attempts_(attempts) {}

int JlChartMap::owner(const Vector& param) const {
  const double t = manifold_.kind() == ManifoldKind::Circle ? wrap_angle(param(0)) : param(0);
  for (std::size_t i = 0; i < cells_.size(); ++i)
    if (t >= cells_[i].lower && t < cells_[i].upper) return static_cast<int>(i);
  // the top end of the parameter box belongs to the last cell
  if (t == cells_.back().upper) return static_cast<int>(cells_.size()) - 1;
  throw std::invalid_argument("parameter outside the chart atlas");
}

bool JlChartMap::in_eroded_cell(const Vector& param) const {
  const JlChartCell& c = cells_[owner(param)];
  const double t = manifold_.kind() == ManifoldKind::Circle ? wrap_angle(param(0)) : param(0);
  return t >= c.eroded_lower && t <= c.eroded_upper;
}

Vector JlChartMap::chart_coords(const Vector& param) const { return arc_chart_coords(manifold_, param); }

Vector JlChartMap::map_param(const Vector& param) const {
  const JlChartCell& c = cells_[owner(param)];
  Vector out = projection_ * c.anchor;
  const Vector local = chart_coords(param) - c.anchor_coords;
  out.head(local.size()) += local;
  return out;
}

RowMatrix JlChartMap::operator()(const RowMatrix& points) const {
  RowMatrix out(points.rows(), latent_dim());
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    out.row(i) = map_param(inverse_chart(manifold_, points.row(i).transpose())).transpose();
  return out;
}

JlChartMap construct_chart_jl_map(const SyntheticManifold& manifold, int chart_count, double erosion,
                                  int latent_dim, double eps_jl, RngSeed seed) {
  if (!manifold.has_chart()) throw std::invalid_argument("chart map needs a circle or swiss roll");
  if (chart_count < 1) throw std::invalid_argument("chart count must be >= 1");
  if (latent_dim < manifold.intrinsic_dim())
    throw std::invalid_argument("latent dimension must be at least the intrinsic dimension");
  if (!(erosion >= 0.0)) throw std::invalid_argument("erosion must be >= 0");
  if (!(eps_jl > 0.0 && eps_jl < 1.0)) throw std::invalid_argument("eps_jl must lie in (0, 1)");

  const bool circle = manifold.kind() == ManifoldKind::Circle;
  const double lo = manifold.param_lower()(0);
  const double hi = manifold.param_upper()(0);
  std::vector<JlChartCell> cells(chart_count);
  for (int i = 0; i < chart_count; ++i) {
    JlChartCell& c = cells[i];
    c.lower = lo + (hi - lo) * i / chart_count;
    c.upper = i + 1 == chart_count ? hi : lo + (hi - lo) * (i + 1) / chart_count;
    if (circle) {
      // unit radius: arc length equals angle
      c.eroded_lower = c.lower + erosion;
      c.eroded_upper = c.upper - erosion;
    } else {
      // erosion is in arc length; only seams between strips are eroded
      const double lo_arc = roll_arclength(c.lower), hi_arc = roll_arclength(c.upper);
      const double e = erosion / kSwissRollScale;
      c.eroded_lower = i == 0 ? c.lower : roll_param_at(lo_arc + e, c.lower, c.upper);
      c.eroded_upper = i + 1 == chart_count ? c.upper : roll_param_at(hi_arc - e, c.lower, c.upper);
    }
    if (!(c.eroded_lower < c.eroded_upper))
      throw std::invalid_argument("erosion leaves an empty chart cell");
    c.anchor_param = Vector(manifold.intrinsic_dim());
    c.anchor_param(0) = 0.5 * (c.lower + c.upper);
    if (!circle) c.anchor_param(1) = 0.5 * (manifold.param_lower()(1) + manifold.param_upper()(1));
    c.anchor = manifold.chart(c.anchor_param);
    c.anchor_coords = arc_chart_coords(manifold, c.anchor_param);
  }

  const int dim = manifold.ambient_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  constexpr int kMaxAttempts = 50;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(seed, static_cast<std::uint64_t>(attempt));
    const RowMatrix proj = scale * rng.normal_matrix(latent_dim, dim);
    bool ok = true;
    for (int i = 0; i < chart_count && ok; ++i) {
      for (int j = i + 1; j < chart_count && ok; ++j) {
        const Vector diff = cells[i].anchor - cells[j].anchor;
        const double r = (proj * diff).norm() / diff.norm();
        ok = r >= 1.0 - eps_jl && r <= 1.0 + eps_jl;
      }
    }
    if (ok) return JlChartMap(manifold, std::move(cells), proj, attempt + 1);
  }
  throw std::runtime_error("no projection preserved the anchor distances within 50 draws");
}

JlChartAudit audit_chart_jl_map(const JlChartMap& map, const RowMatrix& params, double eps_jl) {
  if (!(eps_jl >= 0.0 && eps_jl < 1.0)) throw std::invalid_argument("eps_jl must lie in [0, 1)");
  const SyntheticManifold& manifold = map.manifold();
  if (params.cols() != manifold.intrinsic_dim())
    throw std::invalid_argument("parameter columns must equal the intrinsic dimension");

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < params.rows(); ++i)
    if (map.in_eroded_cell(params.row(i).transpose())) keep.push_back(i);

  const Eigen::Index k = static_cast<Eigen::Index>(keep.size());
  RowMatrix x(k, manifold.ambient_dim()), t(k, map.latent_dim()), phi(k, manifold.intrinsic_dim());
  std::vector<int> owner(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const Vector p = params.row(keep[a]).transpose();
    x.row(a) = manifold.chart(p).transpose();
    t.row(a) = map.map_param(p).transpose();
    phi.row(a) = map.chart_coords(p).transpose();
    owner[a] = map.owner(p);
  }

  JlChartAudit audit;
  audit.eroded_points = keep.size();
  double worst = 1.0;
  std::vector<double> in_ratio, cross_ratio;
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a + 1; b < k; ++b) {
      const double sx = sq_dist(x, a, b);
      const double ratio = (1.0 + sq_dist(t, a, b)) / (1.0 + sx);
      if (owner[a] == owner[b]) {
        in_ratio.push_back(ratio);
        if (sx > 0.0) {
          const double r = std::sqrt(sq_dist(phi, a, b) / sx);
          worst = std::min(worst, std::min(r, 1.0 / r));
        }
      } else {
        cross_ratio.push_back(ratio);
      }
    }
  }
  audit.epsilon_chart = 1.0 - worst;
  audit.epsilon_band = std::max(audit.epsilon_chart, eps_jl);
  const double keep_frac = 1.0 - audit.epsilon_band;
  audit.band_lower = keep_frac * keep_frac;
  audit.band_upper = 1.0 / (keep_frac * keep_frac);
  audit.in_chart_pairs = in_ratio.size();
  audit.cross_chart_pairs = cross_ratio.size();

  const auto summarize = [&](const std::vector<double>& v, double& lo, double& hi) {
    if (v.empty()) {
      lo = hi = kNaN;
      return std::size_t{0};
    }
    lo = *std::min_element(v.begin(), v.end());
    hi = *std::max_element(v.begin(), v.end());
    std::size_t inside = 0;
    for (double r : v) inside += r >= audit.band_lower - 1e-12 && r <= audit.band_upper + 1e-12;
    return inside;
  };
  const std::size_t in_ok = summarize(in_ratio, audit.in_chart_min, audit.in_chart_max);
  const std::size_t cross_ok = summarize(cross_ratio, audit.cross_chart_min, audit.cross_chart_max);
  const auto frac = [](std::size_t num, std::size_t den) {
    return den == 0 ? kNaN : static_cast<double>(num) / static_cast<double>(den);
  };
  audit.in_chart_band_fraction = frac(in_ok, in_ratio.size());
  audit.cross_chart_band_fraction = frac(cross_ok, cross_ratio.size());
  audit.band_fraction = frac(in_ok + cross_ok, in_ratio.size() + cross_ratio.size());
  return audit;
}

}  // namespace gpe
