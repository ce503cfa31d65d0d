#pragma once

#include "gpe/core.hpp"

namespace gpe {

/// Latent codes y_i = T(x_i), one row per source point.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(RowMatrix codes);

  const RowMatrix& codes() const { return codes_; }
  RowMatrix& mutable_codes() { return codes_; }
  Eigen::Index size() const { return codes_.rows(); }
  Eigen::Index dim() const { return codes_.cols(); }

 private:
  RowMatrix codes_;
};

/// Perturbation of an embedding table; same shape as the table.
using Direction = RowMatrix;

struct GmeEvaluation {
  double cost = 0.0;
  /// l_ij = log((1 + |y_i - y_j|^2) / (1 + |x_i - x_j|^2)), zero diagonal.
  RowMatrix residuals;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  /// n (n - 1): the ordered-pair count the squared residuals are averaged over.
  double normalizer = 0.0;
};

/// Log-ratio Gromov-Monge cost of a table of codes against fixed source
/// distances. Holds log(1 + |x_i - x_j|^2) so repeated evaluations (training,
/// probing) only touch the codes.
///
/// All sums run over ordered pairs i != j with normalizer n (n - 1), in fixed
/// index order, so evaluations are deterministic.
class GmeObjective {
 public:
  explicit GmeObjective(const PairwiseSqDists& source);
  explicit GmeObjective(const PointCloud& source);

  Eigen::Index size() const { return log_source_.rows(); }

  double cost(const RowMatrix& codes) const;
  GmeEvaluation evaluate(const RowMatrix& codes) const;

  /// Gradient w.r.t. the table entries:
  ///   row i = 8 / (n (n - 1)) * sum_{j != i} l_ij (y_i - y_j) / (1 + |y_i - y_j|^2).
  /// Returns the cost as well, since both share the pair loop.
  double cost_and_gradient(const RowMatrix& codes, RowMatrix& gradient) const;

  /// Second directional derivative of cost() at `codes` along `direction`.
  double second_form(const RowMatrix& codes, const Direction& direction) const;

  /// Hessian of cost() w.r.t. table entries applied to `direction`;
  /// <direction, hessian_vector(codes, direction)> == second_form(codes, direction).
  Direction hessian_vector(const RowMatrix& codes, const Direction& direction) const;

 private:
  void check(const RowMatrix& codes) const;

  RowMatrix log_source_;
};

GmeEvaluation gme_cost(const PointCloud& source, const EmbeddingTable& embedding);
Direction gme_gradient(const PointCloud& source, const EmbeddingTable& embedding);
double gme_second_form(const PointCloud& source, const EmbeddingTable& embedding,
                       const Direction& direction);

}  // namespace gpe
