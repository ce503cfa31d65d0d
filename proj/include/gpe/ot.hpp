#pragma once

#include <vector>

#include "gpe/audit.hpp"
#include "gpe/core.hpp"

namespace gpe {

/// Weighted point set; weights are nonnegative and sum to 1 within 1e-12.
class DiscreteMeasure {
 public:
  DiscreteMeasure(RowMatrix support, Vector weights);
  static DiscreteMeasure uniform(RowMatrix support);

  const RowMatrix& support() const { return support_; }
  const Vector& weights() const { return weights_; }
  Eigen::Index size() const { return support_.rows(); }
  Eigen::Index dim() const { return support_.cols(); }
  bool is_uniform() const { return uniform_; }

 private:
  RowMatrix support_;
  Vector weights_;
  bool uniform_ = false;
};

struct TransportPlan {
  RowMatrix coupling;  // k1 x k2
  /// sum gamma_ij |a_i - b_j|^p
  double cost = 0.0;
};

struct OtLimits {
  /// Largest equal-size uniform problem solved by assignment.
  Eigen::Index max_assignment = 512;
  /// Largest k1 * k2 for the general transportation solve.
  Eigen::Index max_transport_cells = 10000;
};

struct WassersteinResult {
  double distance = 0.0;  // W_p = cost^(1/p)
  TransportPlan plan;
  /// For assignment solves, the matched target index of each source point.
  std::vector<int> assignment;
};

/// Minimizes sum_i cost(i, a[i]) over permutations. Among optimal
/// assignments returns the lexicographically smallest (a[0], a[1], ...).
std::vector<int> optimal_assignment(const RowMatrix& cost);

/// |a_i - b_j|^p for every pair.
RowMatrix ground_cost(const RowMatrix& a, const RowMatrix& b, double p);

/// Exact W_p. Equal-size uniform measures use the assignment solver;
/// otherwise successive shortest paths on the transportation network.
WassersteinResult exact_wasserstein(const DiscreteMeasure& a, const DiscreteMeasure& b, double p,
                                    const OtLimits& limits = {});

/// Latent flow surrogate: prior samples z_j paired with codes y_{sigma(j)}.
/// Off-sample inputs go to the code of their nearest paired z (lowest index on ties).
class FlowMap {
 public:
  FlowMap(RowMatrix latents, RowMatrix codes, std::vector<int> assignment);

  const RowMatrix& latents() const { return latents_; }
  const RowMatrix& codes() const { return codes_; }
  const std::vector<int>& assignment() const { return assignment_; }

  /// Index into the fitted code table for each row of `z`.
  std::vector<int> code_indices(const RowMatrix& z) const;
  RowMatrix operator()(const RowMatrix& z) const;

 private:
  RowMatrix latents_;
  RowMatrix codes_;
  std::vector<int> assignment_;
};

struct FlowFit {
  FlowMap flow;
  /// W_p(uniform codes, R_# uniform latents) on the fitted samples; zero by construction.
  double epsilon_dif = 0.0;
};

FlowFit fit_flow_map(const RowMatrix& latents, const RowMatrix& codes, double p,
                     const OtLimits& limits = {});

struct HoldoutReport {
  /// W_p(uniform codes, R_# uniform fresh latents).
  double epsilon_dif = 0.0;
  /// W_p(uniform codes, uniform fresh latents), the transport gap R has to close.
  double prior_gap = 0.0;
};

HoldoutReport holdout_epsilon_dif(const FlowMap& flow, const RowMatrix& fresh_latents, double p,
                                  const OtLimits& limits = {});

struct PipelineReport {
  double p = 1.0;
  double wasserstein = 0.0;       // W_p(mu_n, (S o R)_# nu_k)
  double epsilon_dif = 0.0;       // W_p(T_# mu_n, R_# nu_k)
  double epsilon_rec = 0.0;       // (1/k) sum |x_idx(j) - S(r_j)|^p
  double alpha_hat = 1.0;
  double decomposition_lhs = 0.0; // W_p^p
  double decomposition_rhs = 0.0; // 2^(p-1) (alpha^p eps_dif^p + eps_rec)
  bool holds = true;
};

/// Evaluates the latent generative model built from training points, their
/// codes, a decoder and a fitted flow on a fresh latent draw. Throws
/// InvariantViolation if lhs exceeds rhs by more than 1e-9.
PipelineReport pipeline_eval(const PointCloud& source, const EmbeddingTable& codes,
                             const BatchMap& decoder, const FlowMap& flow,
                             const RowMatrix& fresh_latents, double p, const OtLimits& limits = {});

}  // namespace gpe
