#pragma once

#include <vector>

#include "gpe/rng.hpp"

namespace gpe {

struct QuantileGrid {
  /// Odd, so that 0 is a grid node.
  int points = 20001;
  /// Grid covers [-(m + k sigma), m + k sigma].
  double half_width_sigmas = 8.0;
  double quadrature_tol = 1e-10;
};

/// Monotone transport T = F_Z^-1 o F_X from the symmetric mixture
/// 0.5 N(-m, sigma^2) + 0.5 N(m, sigma^2) to the standard normal, tabulated on
/// a uniform grid and linearly interpolated between nodes.
class QuantileMap1D {
 public:
  QuantileMap1D(double m, double sigma, const QuantileGrid& grid = {});

  double m() const { return m_; }
  double sigma() const { return sigma_; }
  const std::vector<double>& nodes() const { return x_; }
  /// F_X at the nodes.
  const std::vector<double>& cdf() const { return cdf_; }
  const std::vector<double>& values() const { return t_; }
  double step() const { return h_; }

  /// Clamped to the end values outside the grid.
  double operator()(double x) const;
  /// Central difference of the tabulated map at node i (one-sided at the ends).
  double derivative_at_node(std::size_t i) const;
  double density(double x) const;
  bool strictly_increasing() const;

 private:
  double m_, sigma_, h_;
  std::vector<double> x_, cdf_, t_;
};

double standard_normal_pdf(double z);
double standard_normal_cdf(double z);

struct QuantileDiagnostics {
  double t_at_zero = 0.0;
  double t_prime_zero = 0.0;
  /// (1 / sigma) exp(-m^2 / (2 sigma^2))
  double approximation = 0.0;
  double ratio = 0.0;
  double ks_distance = 0.0;
  int samples = 0;
  bool monotone = true;
};

/// Kolmogorov-Smirnov distance between T(mixture samples) and N(0, 1).
double pushforward_ks(const QuantileMap1D& map, int samples, RngSeed seed);

QuantileDiagnostics quantile_diagnostics(const QuantileMap1D& map, int samples, RngSeed seed);

}  // namespace gpe
