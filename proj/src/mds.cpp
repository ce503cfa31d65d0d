#include "gpe/mds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "gpe/optim.hpp"

namespace gpe {

namespace {

void check_shapes(const PointCloud& source, const RowMatrix& codes) {
  if (codes.rows() != source.size()) throw std::invalid_argument("embedding row count does not match the cloud");
  if (codes.cols() < 1) throw std::invalid_argument("embedding dimension must be >= 1");
}

double pair_norm(Eigen::Index n) { return static_cast<double>(n) * static_cast<double>(n - 1); }

/// Pair weights of the MDS second form: w_id |dh|^2 + w_uu <u, dh>^2.
struct MdsWeights {
  double id = 2.0;
  double uu = 0.0;
};

MdsWeights mds_weights(double a, double r) {
  if (r == 0.0) return {};
  const double q = (a - r) / r;
  return {-2.0 * q, 2.0 + 2.0 * q};
}

}  // namespace

MdsEvaluation mds_cost_grad(const PointCloud& source, const EmbeddingTable& codes) {
  check_shapes(source, codes.codes());
  const RowMatrix& x = source.points();
  const RowMatrix& y = codes.codes();
  const Eigen::Index n = source.size();
  MdsEvaluation out;
  out.gradient = RowMatrix::Zero(n, y.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double a = (x.row(i) - x.row(j)).norm();
      const auto dy = y.row(i) - y.row(j);
      const double r = dy.norm();
      total += (a - r) * (a - r);
      if (r > 0.0) {
        const double w = (a - r) / r;
        out.gradient.row(i) -= w * dy;
        out.gradient.row(j) += w * dy;
      }
    }
  }
  const double norm = pair_norm(n);
  out.cost = 2.0 * total / norm;
  out.gradient *= 4.0 / norm;
  return out;
}

double mds_second_form(const PointCloud& source, const EmbeddingTable& codes, const Direction& h) {
  check_shapes(source, codes.codes());
  if (h.rows() != codes.size() || h.cols() != codes.dim())
    throw std::invalid_argument("direction shape does not match the embedding");
  const RowMatrix& x = source.points();
  const RowMatrix& y = codes.codes();
  const Eigen::Index n = source.size();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double a = (x.row(i) - x.row(j)).norm();
      const auto dy = y.row(i) - y.row(j);
      const auto dh = h.row(i) - h.row(j);
      const double r = dy.norm();
      const MdsWeights w = mds_weights(a, r);
      const double uh = r > 0.0 ? dy.dot(dh) / r : 0.0;
      total += w.id * dh.squaredNorm() + w.uu * uh * uh;
    }
  }
  return 2.0 * total / pair_norm(n);
}

Direction mds_hessian_vector(const PointCloud& source, const EmbeddingTable& codes, const Direction& h) {
  check_shapes(source, codes.codes());
  if (h.rows() != codes.size() || h.cols() != codes.dim())
    throw std::invalid_argument("direction shape does not match the embedding");
  const RowMatrix& x = source.points();
  const RowMatrix& y = codes.codes();
  const Eigen::Index n = source.size();
  Direction out = Direction::Zero(n, y.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double a = (x.row(i) - x.row(j)).norm();
      const Vector dy = (y.row(i) - y.row(j)).transpose();
      const Vector dh = (h.row(i) - h.row(j)).transpose();
      const double r = dy.norm();
      const MdsWeights w = mds_weights(a, r);
      Vector v = w.id * dh;
      if (r > 0.0) v += (w.uu * dy.dot(dh) / (r * r)) * dy;
      out.row(i) += v.transpose();
      out.row(j) -= v.transpose();
    }
  }
  out *= 2.0 / pair_norm(n);
  return out;
}

std::string to_string(CostKind kind) { return kind == CostKind::Gme ? "gme" : "mds"; }

CostKind cost_kind_from_string(const std::string& name) {
  if (name == "gme") return CostKind::Gme;
  if (name == "mds") return CostKind::Mds;
  throw std::invalid_argument("unknown cost kind: " + name);
}

HessianProbeReport hessian_bound_probe(CostKind kind, const PointCloud& source,
                                       const EmbeddingTable& codes, int n_probes, RngSeed seed,
                                       int power_iterations) {
  if (n_probes < 32) throw std::invalid_argument("hessian probe needs at least 32 probes");
  if (power_iterations < 1) throw std::invalid_argument("power iterations must be >= 1");
  check_shapes(source, codes.codes());

  const Eigen::Index n = source.size();
  const double mass = 2.0 / static_cast<double>(n);
  const GmeObjective gme(source);
  const auto hv = [&](const Direction& h) {
    return kind == CostKind::Gme ? gme.hessian_vector(codes.codes(), h) : mds_hessian_vector(source, codes, h);
  };

  HessianProbeReport rep;
  rep.kind = kind;
  rep.beta_hat = estimate_bilip(source, codes).beta_hat;
  rep.gme_ceiling = std::isfinite(rep.beta_hat) ? hessian_ceiling(rep.beta_hat)
                                                : std::numeric_limits<double>::infinity();
  rep.max_rayleigh = -std::numeric_limits<double>::infinity();
  rep.min_rayleigh = std::numeric_limits<double>::infinity();

  const auto record = [&](const Direction& h, const Direction& hh) {
    const double q = h.cwiseProduct(hh).sum() / (mass * h.squaredNorm());
    rep.max_rayleigh = std::max(rep.max_rayleigh, q);
    rep.min_rayleigh = std::min(rep.min_rayleigh, q);
    if (kind == CostKind::Gme && q > rep.gme_ceiling + 1e-9) ++rep.ceiling_violations;
    return q;
  };

  Rng rng(seed);
  Direction start;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_probes; ++k) {
    Direction h = rng.normal_matrix(n, codes.dim());
    h /= h.norm();
    const double q = record(h, hv(h));
    if (q > best) {
      best = q;
      start = h;
    }
    ++rep.probes;
  }

  // Plain power iteration finds the eigenvalue of largest magnitude; if that is
  // negative, a second pass on H + s I with s = |lambda| targets the top of the spectrum.
  const auto power = [&](Direction h, double shift) {
    double rayleigh = 0.0;
    for (int it = 0; it < power_iterations; ++it) {
      const Direction hh = hv(h);
      rayleigh = record(h, hh) * mass;
      Direction next = hh + shift * h;
      const double norm = next.norm();
      if (!(norm > 0.0)) break;
      h = next / norm;
      ++rep.power_iterations;
    }
    return rayleigh;
  };
  const double lambda = power(start, 0.0);
  if (lambda < 0.0) power(start, -lambda);
  return rep;
}

double normalized_stress(const PointCloud& source, const RowMatrix& codes) {
  check_shapes(source, codes);
  const RowMatrix& x = source.points();
  const Eigen::Index n = source.size();
  double sa2 = 0.0, sar = 0.0, sr2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double a = (x.row(i) - x.row(j)).norm();
      const double r = (codes.row(i) - codes.row(j)).norm();
      sa2 += a * a;
      sar += a * r;
      sr2 += r * r;
    }
  }
  if (!(sa2 > 0.0)) throw std::invalid_argument("stress undefined for a coincident source cloud");
  if (!(sr2 > 0.0)) return 1.0;
  // min_s sum (a - s r)^2 = sum a^2 - (sum a r)^2 / sum r^2
  return std::max(0.0, sa2 - sar * sar / sr2) / sa2;
}

StressComparison stress_compare(const PointCloud& source, const RowMatrix& codes_a, const RowMatrix& codes_b) {
  return {normalized_stress(source, codes_a), normalized_stress(source, codes_b)};
}

double cluster_center_spread(const RowMatrix& codes, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != codes.rows())
    throw std::invalid_argument("one label per code row required");
  std::map<int, std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(static_cast<Eigen::Index>(i));
  if (groups.size() < 2) throw std::invalid_argument("cluster spread needs at least two labels");
  std::vector<Vector> means;
  double within = 0.0;
  for (const auto& [label, rows] : groups) {
    Vector mean = Vector::Zero(codes.cols());
    for (Eigen::Index r : rows) mean += codes.row(r).transpose();
    mean /= static_cast<double>(rows.size());
    double ss = 0.0;
    for (Eigen::Index r : rows) ss += (codes.row(r).transpose() - mean).squaredNorm();
    within += std::sqrt(ss / static_cast<double>(rows.size()));
    means.push_back(std::move(mean));
  }
  within /= static_cast<double>(groups.size());
  double between = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < means.size(); ++a)
    for (std::size_t b = a + 1; b < means.size(); ++b, ++pairs) between += (means[a] - means[b]).norm();
  between /= pairs;
  if (!(within > 0.0)) return std::numeric_limits<double>::infinity();
  return between / within;
}

}  // namespace gpe
