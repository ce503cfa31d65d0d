#include "gpe/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

namespace gpe {

double standard_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

QuantileMap1D::QuantileMap1D(double m, double sigma, const QuantileGrid& grid) : m_(m), sigma_(sigma) {
  if (!(m > 0.0)) throw std::invalid_argument("quantile map: m must be > 0");
  if (!(sigma > 0.0)) throw std::invalid_argument("quantile map: sigma must be > 0");
  if (grid.points < 3 || grid.points % 2 == 0)
    throw std::invalid_argument("quantile map: grid needs an odd number of points >= 3");
  if (!(grid.half_width_sigmas > 0.0)) throw std::invalid_argument("quantile map: half width must be > 0");

  const int half = grid.points / 2;
  const double width = m + grid.half_width_sigmas * sigma;
  h_ = width / half;
  const auto f = [this](double x) { return density(x); };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;

  // Mass of each interval on the positive half, then G(x) = int_0^x f from the
  // center outward and Q(x) = int_x^inf f from the far end inward, so both
  // small quantities keep full relative precision.
  std::vector<double> mass(half);
  for (int k = 0; k < half; ++k)
    mass[k] = Quad::integrate(f, k * h_, (k + 1) * h_, 15, grid.quadrature_tol);
  const double beyond = Quad::integrate(f, width, std::numeric_limits<double>::infinity(), 15,
                                        grid.quadrature_tol);
  std::vector<double> g(half + 1, 0.0), q(half + 1, 0.0);
  for (int k = 0; k < half; ++k) g[k + 1] = g[k] + mass[k];
  q[half] = beyond;
  for (int k = half; k-- > 0;) q[k] = q[k + 1] + mass[k];

  std::vector<double> tpos(half + 1);
  for (int k = 0; k <= half; ++k) {
    tpos[k] = g[k] <= 0.25 ? std::numbers::sqrt2 * boost::math::erf_inv(2.0 * g[k])
                           : std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q[k]);
  }

  x_.resize(grid.points);
  cdf_.resize(grid.points);
  t_.resize(grid.points);
  for (int k = -half; k <= half; ++k) {
    const int a = std::abs(k);
    const std::size_t idx = static_cast<std::size_t>(k + half);
    x_[idx] = k * h_;
    cdf_[idx] = k >= 0 ? 0.5 + g[a] : q[a];
    t_[idx] = k >= 0 ? tpos[a] : -tpos[a];
  }
  if (!strictly_increasing()) throw std::runtime_error("quantile map: grid too coarse, map not monotone");
}

double QuantileMap1D::density(double x) const {
  const double s2 = 2.0 * sigma_ * sigma_;
  const double norm = 0.5 / (sigma_ * std::sqrt(2.0 * std::numbers::pi));
  return norm * (std::exp(-(x - m_) * (x - m_) / s2) + std::exp(-(x + m_) * (x + m_) / s2));
}

double QuantileMap1D::operator()(double x) const {
  if (x <= x_.front()) return t_.front();
  if (x >= x_.back()) return t_.back();
  const double pos = (x - x_.front()) / h_;
  const std::size_t i = std::min(static_cast<std::size_t>(pos), x_.size() - 2);
  const double w = pos - static_cast<double>(i);
  return (1.0 - w) * t_[i] + w * t_[i + 1];
}

double QuantileMap1D::derivative_at_node(std::size_t i) const {
  if (i >= x_.size()) throw std::out_of_range("quantile map: node index");
  if (i == 0) return (t_[1] - t_[0]) / h_;
  if (i + 1 == x_.size()) return (t_[i] - t_[i - 1]) / h_;
  return (t_[i + 1] - t_[i - 1]) / (2.0 * h_);
}

bool QuantileMap1D::strictly_increasing() const {
  for (std::size_t i = 1; i < t_.size(); ++i)
    if (!(t_[i] > t_[i - 1])) return false;
  return true;
}

double pushforward_ks(const QuantileMap1D& map, int samples, RngSeed seed) {
  if (samples < 1) throw std::invalid_argument("KS check needs samples");
  Rng rng(seed);
  std::vector<double> t(samples);
  for (int i = 0; i < samples; ++i) {
    const double center = rng.uniform() < 0.5 ? -map.m() : map.m();
    t[i] = map(center + map.sigma() * rng.normal());
  }
  std::sort(t.begin(), t.end());
  double d = 0.0;
  const double n = static_cast<double>(samples);
  for (int i = 0; i < samples; ++i) {
    const double c = standard_normal_cdf(t[i]);
    d = std::max({d, (i + 1) / n - c, c - i / n});
  }
  return d;
}

QuantileDiagnostics quantile_diagnostics(const QuantileMap1D& map, int samples, RngSeed seed) {
  QuantileDiagnostics d;
  const std::size_t center = map.nodes().size() / 2;
  d.t_at_zero = map.values()[center];
  d.t_prime_zero = map.derivative_at_node(center);
  d.approximation = std::exp(-map.m() * map.m() / (2.0 * map.sigma() * map.sigma())) / map.sigma();
  d.ratio = d.t_prime_zero / d.approximation;
  d.samples = samples;
  d.ks_distance = pushforward_ks(map, samples, seed);
  d.monotone = map.strictly_increasing();
  return d;
}

}  // namespace gpe
