#pragma once

#include <Eigen/Dense>

namespace gpe {

/// Row-per-point storage used for clouds, codes, and perturbation directions.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Largest point count accepted by the dense O(n^2) pairwise routines.
inline constexpr Eigen::Index kMaxPairwisePoints = 4096;

}  // namespace gpe
