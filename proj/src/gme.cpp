#include "gpe/gme.hpp"

#include <cmath>
#include <stdexcept>

namespace gpe {

EmbeddingTable::EmbeddingTable(RowMatrix codes) : codes_(std::move(codes)) {
  if (codes_.cols() < 1) throw std::invalid_argument("embedding dimension must be >= 1");
  if (!codes_.allFinite()) throw std::invalid_argument("embedding has non-finite entries");
}

GmeObjective::GmeObjective(const PairwiseSqDists& source) {
  const Eigen::Index n = source.size();
  if (n < 2) throw std::invalid_argument("GME cost needs n >= 2");
  log_source_ = source.values().unaryExpr([](double s) { return std::log1p(s); });
}

GmeObjective::GmeObjective(const PointCloud& source) : GmeObjective(pairwise_sq_dists(source)) {}

void GmeObjective::check(const RowMatrix& codes) const {
  if (codes.rows() != log_source_.rows())
    throw std::invalid_argument("embedding row count does not match the source cloud");
  if (codes.cols() < 1) throw std::invalid_argument("embedding dimension must be >= 1");
}

namespace {

inline double sq_diff(const double* a, const double* b, Eigen::Index d) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

inline double pair_count(Eigen::Index n) { return static_cast<double>(n) * static_cast<double>(n - 1); }

}  // namespace

double GmeObjective::cost(const RowMatrix& codes) const {
  check(codes);
  const Eigen::Index n = codes.rows();
  const Eigen::Index d = codes.cols();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* yi = codes.data() + i * d;
    double row = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double l = std::log1p(sq_diff(yi, codes.data() + j * d, d)) - log_source_(i, j);
      row += l * l;
    }
    total += row;
  }
  return 2.0 * total / pair_count(n);
}

GmeEvaluation GmeObjective::evaluate(const RowMatrix& codes) const {
  check(codes);
  const Eigen::Index n = codes.rows();
  const Eigen::Index d = codes.cols();
  GmeEvaluation out;
  out.n = n;
  out.d = d;
  out.normalizer = pair_count(n);
  out.residuals = RowMatrix::Zero(n, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* yi = codes.data() + i * d;
    double row = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double l = std::log1p(sq_diff(yi, codes.data() + j * d, d)) - log_source_(i, j);
      out.residuals(i, j) = l;
      out.residuals(j, i) = l;
      row += l * l;
    }
    total += row;
  }
  out.cost = 2.0 * total / out.normalizer;
  return out;
}

double GmeObjective::cost_and_gradient(const RowMatrix& codes, RowMatrix& gradient) const {
  check(codes);
  const Eigen::Index n = codes.rows();
  const Eigen::Index d = codes.cols();
  gradient = RowMatrix::Zero(n, d);
  double* g = gradient.data();
  const double* y = codes.data();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* yi = y + i * d;
    double* gi = g + i * d;
    double row = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double* yj = y + j * d;
      double* gj = g + j * d;
      const double s = sq_diff(yi, yj, d);
      const double l = std::log1p(s) - log_source_(i, j);
      row += l * l;
      const double w = l / (1.0 + s);
      for (Eigen::Index k = 0; k < d; ++k) {
        const double v = w * (yi[k] - yj[k]);
        gi[k] += v;
        gj[k] -= v;
      }
    }
    total += row;
  }
  const double norm = pair_count(n);
  gradient *= 8.0 / norm;
  return 2.0 * total / norm;
}

double GmeObjective::second_form(const RowMatrix& codes, const Direction& direction) const {
  check(codes);
  if (direction.rows() != codes.rows() || direction.cols() != codes.cols())
    throw std::invalid_argument("direction shape does not match the embedding");
  const Eigen::Index n = codes.rows();
  const Eigen::Index d = codes.cols();
  const double* y = codes.data();
  const double* h = direction.data();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double s = 0.0, hh = 0.0, yh = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double dy = y[i * d + k] - y[j * d + k];
        const double dh = h[i * d + k] - h[j * d + k];
        s += dy * dy;
        hh += dh * dh;
        yh += dy * dh;
      }
      const double l = std::log1p(s) - log_source_(i, j);
      const double b = yh / (1.0 + s);
      row += 4.0 * l * (hh / (1.0 + s) - 2.0 * b * b) + 8.0 * b * b;
    }
    total += row;
  }
  return 2.0 * total / pair_count(n);
}

Direction GmeObjective::hessian_vector(const RowMatrix& codes, const Direction& direction) const {
  check(codes);
  if (direction.rows() != codes.rows() || direction.cols() != codes.cols())
    throw std::invalid_argument("direction shape does not match the embedding");
  const Eigen::Index n = codes.rows();
  const Eigen::Index d = codes.cols();
  Direction out = Direction::Zero(n, d);
  const double* y = codes.data();
  const double* h = direction.data();
  double* o = out.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double s = 0.0, yh = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double dy = y[i * d + k] - y[j * d + k];
        s += dy * dy;
        yh += dy * (h[i * d + k] - h[j * d + k]);
      }
      const double l = std::log1p(s) - log_source_(i, j);
      const double w1 = 4.0 * l / (1.0 + s);
      const double w2 = (8.0 - 8.0 * l) / ((1.0 + s) * (1.0 + s));
      for (Eigen::Index k = 0; k < d; ++k) {
        const double v =
            w1 * (h[i * d + k] - h[j * d + k]) + w2 * yh * (y[i * d + k] - y[j * d + k]);
        o[i * d + k] += v;
        o[j * d + k] -= v;
      }
    }
  }
  out *= 2.0 / pair_count(n);
  return out;
}

GmeEvaluation gme_cost(const PointCloud& source, const EmbeddingTable& embedding) {
  return GmeObjective(source).evaluate(embedding.codes());
}

Direction gme_gradient(const PointCloud& source, const EmbeddingTable& embedding) {
  RowMatrix g;
  GmeObjective(source).cost_and_gradient(embedding.codes(), g);
  return g;
}

double gme_second_form(const PointCloud& source, const EmbeddingTable& embedding,
                       const Direction& direction) {
  return GmeObjective(source).second_form(embedding.codes(), direction);
}

}  // namespace gpe
