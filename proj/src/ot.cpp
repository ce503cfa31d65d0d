#include "gpe/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gpe/errors.hpp"
#include "gpe/optim.hpp"

namespace gpe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

DiscreteMeasure::DiscreteMeasure(RowMatrix support, Vector weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  if (support_.rows() < 1 || support_.cols() < 1) throw std::invalid_argument("measure needs support");
  if (weights_.size() != support_.rows()) throw std::invalid_argument("measure weight count mismatch");
  if (!support_.allFinite() || !weights_.allFinite()) throw std::invalid_argument("measure has non-finite entries");
  if ((weights_.array() < 0.0).any()) throw std::invalid_argument("measure weights must be nonnegative");
  if (std::abs(weights_.sum() - 1.0) > 1e-12) throw std::invalid_argument("measure weights must sum to 1");
  const double w0 = weights_(0);
  uniform_ = (weights_.array() == w0).all();
}

DiscreteMeasure DiscreteMeasure::uniform(RowMatrix support) {
  const Eigen::Index k = support.rows();
  if (k < 1) throw std::invalid_argument("measure needs support");
  return DiscreteMeasure(std::move(support), Vector::Constant(k, 1.0 / static_cast<double>(k)));
}

RowMatrix ground_cost(const RowMatrix& a, const RowMatrix& b, double p) {
  if (a.cols() != b.cols()) throw std::invalid_argument("support dimension mismatch");
  if (!(p >= 1.0)) throw std::invalid_argument("Wasserstein exponent must be >= 1");
  RowMatrix c(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double s = (a.row(i) - b.row(j)).squaredNorm();
      c(i, j) = p == 2.0 ? s : p == 1.0 ? std::sqrt(s) : std::pow(std::sqrt(s), p);
    }
  }
  return c;
}

namespace {

struct HungarianResult {
  std::vector<int> assignment;
  Vector u, v;  // dual potentials: u_i + v_j <= c_ij, tight on matched edges
};

// Shortest augmenting path with potentials, O(k^3).
HungarianResult hungarian(const RowMatrix& c) {
  const int n = static_cast<int>(c.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);  // match[col] = row (1-based)
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  HungarianResult r;
  r.assignment.assign(n, -1);
  for (int j = 1; j <= n; ++j) r.assignment[match[j] - 1] = j - 1;
  r.u = Eigen::Map<Vector>(u.data() + 1, n);
  r.v = Eigen::Map<Vector>(v.data() + 1, n);
  return r;
}

double assignment_cost(const RowMatrix& c, const std::vector<int>& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += c(static_cast<Eigen::Index>(i), a[i]);
  return s;
}

// Searches for an alternating path in the tight graph, restricted to rows
// > `fixed`, from `row` to a row currently matched to `target`. On success the
// path is rotated so that `row` is rematched along it.
bool rematch(int row, int target, int fixed, const std::vector<std::vector<int>>& tight,
             std::vector<int>& row_of, std::vector<int>& col_of, std::vector<char>& seen) {
  for (int j : tight[row]) {
    if (seen[j]) continue;
    seen[j] = 1;
    const int owner = row_of[j];
    if (owner <= fixed && owner != -1) continue;
    if (j == target || rematch(owner, target, fixed, tight, row_of, col_of, seen)) {
      col_of[row] = j;
      row_of[j] = row;
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<int> optimal_assignment(const RowMatrix& cost) {
  if (cost.rows() != cost.cols()) throw std::invalid_argument("assignment needs a square cost matrix");
  if (cost.rows() == 0) return {};
  if (!cost.allFinite()) throw std::invalid_argument("assignment cost must be finite");
  const int n = static_cast<int>(cost.rows());
  const HungarianResult h = hungarian(cost);
  const double best = assignment_cost(cost, h.assignment);

  // Every perfect matching on tight edges is optimal (complementary slackness).
  const double tol = 1e-12 * std::max(1.0, cost.cwiseAbs().maxCoeff());
  std::vector<std::vector<int>> tight(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (cost(i, j) - h.u(i) - h.v(j) <= tol || h.assignment[i] == j) tight[i].push_back(j);

  std::vector<int> col_of = h.assignment, row_of(n);
  for (int i = 0; i < n; ++i) row_of[col_of[i]] = i;
  std::vector<char> seen(n);
  for (int i = 0; i < n; ++i) {
    for (int j : tight[i]) {
      if (j >= col_of[i]) break;
      if (row_of[j] < i) continue;
      // Free column j by rotating an alternating cycle through rows > i that
      // ends at i's current column.
      const int old_col = col_of[i];
      std::vector<int> save_col = col_of, save_row = row_of;
      std::fill(seen.begin(), seen.end(), 0);
      row_of[old_col] = -1;
      seen[j] = 1;
      const int owner = row_of[j];
      if (rematch(owner, old_col, i, tight, row_of, col_of, seen)) {
        col_of[i] = j;
        row_of[j] = i;
        break;
      }
      col_of = std::move(save_col);
      row_of = std::move(save_row);
    }
  }
  // A loose tolerance could admit a marginally non-tight edge; keep the solver's
  // matching in that case.
  if (assignment_cost(cost, col_of) > best) return h.assignment;
  return col_of;
}

namespace {

// Successive shortest paths with Johnson potentials on the transportation
// network source -> rows -> columns -> sink. Flows are real-valued.
RowMatrix transport_plan(const Vector& a, const Vector& b, const RowMatrix& c) {
  const int k1 = static_cast<int>(a.size()), k2 = static_cast<int>(b.size());
  const int src = 0, sink = k1 + k2 + 1, nodes = k1 + k2 + 2;
  constexpr double kMassEps = 1e-15;
  RowMatrix flow = RowMatrix::Zero(k1, k2);
  Vector supply = a, demand = b;
  std::vector<double> pot(nodes, 0.0), dist(nodes);
  std::vector<int> prev(nodes);
  std::vector<char> done(nodes);

  const auto row_node = [](int i) { return 1 + i; };
  const auto col_node = [k1](int j) { return 1 + k1 + j; };

  auto relax = [&](int from, int to, double w) {
    const double reduced = std::max(0.0, w + pot[from] - pot[to]);
    if (dist[from] + reduced < dist[to]) {
      dist[to] = dist[from] + reduced;
      prev[to] = from;
    }
  };

  while (supply.sum() > kMassEps * k1) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    std::fill(prev.begin(), prev.end(), -1);
    dist[src] = 0.0;
    for (int iter = 0; iter < nodes; ++iter) {
      int u = -1;
      for (int x = 0; x < nodes; ++x)
        if (!done[x] && dist[x] < kInf && (u == -1 || dist[x] < dist[u])) u = x;
      if (u == -1) break;
      done[u] = 1;
      if (u == src) {
        for (int i = 0; i < k1; ++i)
          if (supply(i) > kMassEps) relax(src, row_node(i), 0.0);
      } else if (u <= k1) {
        const int i = u - 1;
        for (int j = 0; j < k2; ++j) relax(u, col_node(j), c(i, j));
      } else if (u < sink) {
        const int j = u - 1 - k1;
        for (int i = 0; i < k1; ++i)
          if (flow(i, j) > kMassEps) relax(u, row_node(i), -c(i, j));
        if (demand(j) > kMassEps) relax(u, sink, 0.0);
      }
    }
    if (dist[sink] == kInf) break;
    for (int x = 0; x < nodes; ++x) pot[x] += std::min(dist[x], dist[sink]);

    // bottleneck along the path
    double push = kInf;
    for (int x = sink; x != src; x = prev[x]) {
      const int y = prev[x];
      if (y == src) push = std::min(push, supply(x - 1));
      else if (x == sink) push = std::min(push, demand(y - 1 - k1));
      else if (y > k1) push = std::min(push, flow(x - 1, y - 1 - k1));
    }
    for (int x = sink; x != src; x = prev[x]) {
      const int y = prev[x];
      if (y == src) supply(x - 1) -= push;
      else if (x == sink) demand(y - 1 - k1) -= push;
      else if (y <= k1) flow(y - 1, x - 1 - k1) += push;
      else flow(x - 1, y - 1 - k1) -= push;
    }
  }
  return flow;
}

}  // namespace

WassersteinResult exact_wasserstein(const DiscreteMeasure& a, const DiscreteMeasure& b, double p,
                                    const OtLimits& limits) {
  if (a.dim() != b.dim()) throw std::invalid_argument("support dimension mismatch");
  const RowMatrix c = ground_cost(a.support(), b.support(), p);
  WassersteinResult out;
  if (a.size() == b.size() && a.is_uniform() && b.is_uniform()) {
    if (a.size() > limits.max_assignment)
      throw std::invalid_argument("assignment size " + std::to_string(a.size()) + " exceeds limit " +
                                  std::to_string(limits.max_assignment));
    out.assignment = optimal_assignment(c);
    const double w = 1.0 / static_cast<double>(a.size());
    out.plan.coupling = RowMatrix::Zero(a.size(), b.size());
    double total = 0.0;
    for (std::size_t i = 0; i < out.assignment.size(); ++i) {
      out.plan.coupling(static_cast<Eigen::Index>(i), out.assignment[i]) = w;
      total += c(static_cast<Eigen::Index>(i), out.assignment[i]);
    }
    out.plan.cost = total * w;
  } else {
    if (a.size() * b.size() > limits.max_transport_cells)
      throw std::invalid_argument("transport problem exceeds the cell limit");
    out.plan.coupling = transport_plan(a.weights(), b.weights(), c);
    out.plan.cost = (out.plan.coupling.array() * c.array()).sum();
  }
  out.distance = std::pow(std::max(0.0, out.plan.cost), 1.0 / p);
  return out;
}

FlowMap::FlowMap(RowMatrix latents, RowMatrix codes, std::vector<int> assignment)
    : latents_(std::move(latents)), codes_(std::move(codes)), assignment_(std::move(assignment)) {
  if (static_cast<Eigen::Index>(assignment_.size()) != latents_.rows())
    throw std::invalid_argument("flow map: one assignment per latent sample");
  for (int a : assignment_)
    if (a < 0 || a >= codes_.rows()) throw std::invalid_argument("flow map: assignment out of range");
}

std::vector<int> FlowMap::code_indices(const RowMatrix& z) const {
  if (z.cols() != latents_.cols()) throw std::invalid_argument("flow map: latent dimension mismatch");
  std::vector<int> out(z.rows());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    Eigen::Index best = 0;
    double best_d = kInf;
    for (Eigen::Index j = 0; j < latents_.rows(); ++j) {
      const double d = (latents_.row(j) - z.row(r)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out[r] = assignment_[best];
  }
  return out;
}

RowMatrix FlowMap::operator()(const RowMatrix& z) const {
  const std::vector<int> idx = code_indices(z);
  RowMatrix out(z.rows(), codes_.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) out.row(r) = codes_.row(idx[r]);
  return out;
}

FlowFit fit_flow_map(const RowMatrix& latents, const RowMatrix& codes, double p, const OtLimits& limits) {
  if (latents.rows() != codes.rows()) throw std::invalid_argument("flow fit: sample count mismatch");
  if (latents.cols() != codes.cols()) throw std::invalid_argument("flow fit: dimension mismatch");
  if (latents.rows() > limits.max_assignment)
    throw std::invalid_argument("flow fit: assignment size exceeds limit");
  std::vector<int> sigma = optimal_assignment(ground_cost(latents, codes, p));
  FlowMap flow(latents, codes, std::move(sigma));
  const RowMatrix pushed = flow(latents);
  const double eps =
      exact_wasserstein(DiscreteMeasure::uniform(codes), DiscreteMeasure::uniform(pushed), p, limits).distance;
  return {std::move(flow), eps};
}

namespace {

double wasserstein_uniform(const RowMatrix& a, const RowMatrix& b, double p, const OtLimits& limits) {
  return exact_wasserstein(DiscreteMeasure::uniform(a), DiscreteMeasure::uniform(b), p, limits).distance;
}

}  // namespace

HoldoutReport holdout_epsilon_dif(const FlowMap& flow, const RowMatrix& fresh_latents, double p,
                                  const OtLimits& limits) {
  HoldoutReport r;
  r.epsilon_dif = wasserstein_uniform(flow.codes(), flow(fresh_latents), p, limits);
  r.prior_gap = wasserstein_uniform(flow.codes(), fresh_latents, p, limits);
  return r;
}

PipelineReport pipeline_eval(const PointCloud& source, const EmbeddingTable& codes,
                             const BatchMap& decoder, const FlowMap& flow,
                             const RowMatrix& fresh_latents, double p, const OtLimits& limits) {
  if (codes.size() != source.size()) throw std::invalid_argument("pipeline: codes and cloud size mismatch");
  if (flow.codes().rows() != codes.size())
    throw std::invalid_argument("pipeline: flow must be fitted on the training codes");
  const std::vector<int> idx = flow.code_indices(fresh_latents);
  const Eigen::Index k = fresh_latents.rows();
  RowMatrix r(k, codes.dim());
  for (Eigen::Index j = 0; j < k; ++j) r.row(j) = codes.codes().row(idx[j]);
  const RowMatrix generated = decoder(r);
  if (generated.cols() != source.dim()) throw std::invalid_argument("pipeline: decoder output dimension");

  PipelineReport rep;
  rep.p = p;
  rep.wasserstein = wasserstein_uniform(source.points(), generated, p, limits);
  rep.epsilon_dif = wasserstein_uniform(codes.codes(), r, p, limits);
  double rec = 0.0;
  for (Eigen::Index j = 0; j < k; ++j)
    rec += std::pow((source.row(idx[j]) - generated.row(j)).norm(), p);
  rep.epsilon_rec = rec / static_cast<double>(k);
  rep.alpha_hat = estimate_bilip(source, codes).alpha_hat;
  rep.decomposition_lhs = std::pow(rep.wasserstein, p);
  rep.decomposition_rhs =
      std::pow(2.0, p - 1.0) * (std::pow(rep.alpha_hat, p) * std::pow(rep.epsilon_dif, p) + rep.epsilon_rec);
  rep.holds = rep.decomposition_lhs <= rep.decomposition_rhs + 1e-9;
  if (!rep.holds)
    throw InvariantViolation("latent model decomposition violated: lhs " +
                             std::to_string(rep.decomposition_lhs) + " > rhs " +
                             std::to_string(rep.decomposition_rhs));
  return rep;
}

}  // namespace gpe
