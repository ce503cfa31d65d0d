#pragma once

#include <string>
#include <vector>

#include "gpe/core.hpp"
#include "gpe/gme.hpp"

namespace gpe {

struct MdsEvaluation {
  /// (1/(n(n-1))) sum_{i != j} (|dx| - |dy|)^2
  double cost = 0.0;
  RowMatrix gradient;
};

/// Pairs with |dy| = 0 contribute no direction term to the gradient.
MdsEvaluation mds_cost_grad(const PointCloud& source, const EmbeddingTable& codes);

/// Second directional derivative of the MDS cost along h (smooth part at |dy| = 0).
double mds_second_form(const PointCloud& source, const EmbeddingTable& codes, const Direction& h);
Direction mds_hessian_vector(const PointCloud& source, const EmbeddingTable& codes, const Direction& h);

enum class CostKind { Gme, Mds };
std::string to_string(CostKind kind);
CostKind cost_kind_from_string(const std::string& name);

struct HessianProbeReport {
  CostKind kind = CostKind::Gme;
  /// Largest and smallest observed Q(h) / ((2/n) sum |h_i|^2).
  double max_rayleigh = 0.0;
  double min_rayleigh = 0.0;
  double beta_hat = 1.0;
  /// 8 (4 ln beta_hat + 1)
  double gme_ceiling = 0.0;
  int probes = 0;
  int power_iterations = 0;
  /// Probes whose quotient exceeded the ceiling by more than 1e-9 (gme only).
  int ceiling_violations = 0;
};

/// Random unit-Frobenius probes followed by shifted power iteration on the
/// Hessian; every evaluated direction contributes its Rayleigh quotient.
HessianProbeReport hessian_bound_probe(CostKind kind, const PointCloud& source,
                                       const EmbeddingTable& codes, int n_probes, RngSeed seed,
                                       int power_iterations = 200);

struct StressComparison {
  double stress_a = 0.0;
  double stress_b = 0.0;
};

/// sum (|dx| - s |dy|)^2 / sum |dx|^2 over pairs, s the optimal global scale.
/// Coincident embeddings give stress 1.
double normalized_stress(const PointCloud& source, const RowMatrix& codes);
StressComparison stress_compare(const PointCloud& source, const RowMatrix& codes_a, const RowMatrix& codes_b);

/// Mean pairwise distance between per-label code means divided by the mean
/// within-label RMS distance to the label mean. Needs at least two labels.
double cluster_center_spread(const RowMatrix& codes, const std::vector<int>& labels);

}  // namespace gpe
