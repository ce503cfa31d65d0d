#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gpe/audit.hpp"
#include "gpe/optim.hpp"
#include "test_util.hpp"

namespace gpe {
namespace {

RowMatrix two_points(double sq_dist) {
  RowMatrix x(2, 2);
  x << 0, 0, std::sqrt(sq_dist), 0;
  return x;
}

TEST(WeakBilip, BoundaryAndViolation) {
  EXPECT_TRUE(weak_bilip_pair_ok(3.0, 0.0, 2.0));
  EXPECT_FALSE(weak_bilip_pair_ok(4.0, 0.0, 2.0));
  // upper edge: alpha^2 |dx|^2 + alpha^2 - 1
  EXPECT_TRUE(weak_bilip_pair_ok(1.0, 7.0, 2.0));
  EXPECT_FALSE(weak_bilip_pair_ok(1.0, 7.0 + 1e-9, 2.0));

  const auto ok = weak_bilip_audit(PointCloud(two_points(3.0)), EmbeddingTable(RowMatrix::Zero(2, 1)), {2.0}, 0.5);
  EXPECT_EQ(ok.alphas[0].violating_fraction, 0.0);
  const auto bad = weak_bilip_audit(PointCloud(two_points(4.0)), EmbeddingTable(RowMatrix::Zero(2, 1)), {2.0}, 0.5);
  EXPECT_EQ(bad.alphas[0].violating_fraction, 1.0);
  EXPECT_EQ(bad.ordered_pairs, 2u);
  // Markov bound: (ln 5)^2 / (4 ln^2 2) > 1
  EXPECT_TRUE(bad.alphas[0].bound_satisfied);
  EXPECT_NEAR(bad.alphas[0].markov_bound,
              std::pow(std::log(5.0), 2) / (4.0 * std::pow(std::log(2.0), 2)), 1e-14);
}

TEST(WeakBilip, IdentityNeverViolates) {
  Rng rng(RngSeed{1});
  const RowMatrix x = testing::random_matrix(rng, 40, 3);
  const auto r = weak_bilip_audit(PointCloud(x), EmbeddingTable(x), {1.01, 1.5, 3.0}, 0.5);
  EXPECT_EQ(r.epsilon_gme, 0.0);
  for (const auto& a : r.alphas) {
    EXPECT_EQ(a.violating_fraction, 0.0);
    EXPECT_EQ(a.markov_bound, 0.0);
    EXPECT_TRUE(a.bound_satisfied);
  }
  EXPECT_TRUE(r.all_bounds_satisfied());
}

TEST(WeakBilip, MarkovBoundOnRandomInstances) {
  Rng rng(RngSeed{2});
  for (int trial = 0; trial < 100; ++trial) {
    const int n = testing::uniform_int(rng, 2, 20);
    const RowMatrix x = testing::random_matrix(rng, n, testing::uniform_int(rng, 1, 5), rng.uniform(0.1, 3.0));
    const RowMatrix y = testing::random_matrix(rng, n, testing::uniform_int(rng, 1, 4), rng.uniform(0.1, 3.0));
    const auto r = weak_bilip_audit(PointCloud(x), EmbeddingTable(y), {1.05, 1.2, 1.5, 2.0, 4.0}, 0.5);
    EXPECT_NEAR(r.epsilon_gme, testing::brute_gme_cost(x, y), 1e-12);
    for (const auto& a : r.alphas) {
      EXPECT_LE(a.violating_fraction, a.markov_bound + 1e-12);
      EXPECT_GE(a.violating_fraction, 0.0);
      EXPECT_LE(a.violating_fraction, 1.0);
    }
  }
}

TEST(WeakBilip, SeparatedPairImplication) {
  Rng rng(RngSeed{3});
  for (int trial = 0; trial < 50; ++trial) {
    const int n = testing::uniform_int(rng, 5, 25);
    const RowMatrix x = testing::random_matrix(rng, n, 3, 3.0);
    RowMatrix y = x.leftCols(2) + testing::random_matrix(rng, n, 2, 0.3);
    const std::vector<double> alphas{1.05, 1.5, 2.0};
    for (double gamma : {0.1, 0.5, 0.9}) {
      const auto r = weak_bilip_audit(PointCloud(x), EmbeddingTable(y), alphas, gamma);
      ASSERT_EQ(r.separated.size(), alphas.size());
      for (const auto& s : r.separated) {
        EXPECT_EQ(s.implication_failures, 0u);
        EXPECT_NEAR(s.threshold, (s.alpha * s.alpha - 1.0) / gamma, 1e-15);
        // independent per-pair check
        std::size_t qualifying = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double sx = (x.row(i) - x.row(j)).squaredNorm();
            const double sy = (y.row(i) - y.row(j)).squaredNorm();
            if (!weak_bilip_pair_ok(sx, sy, s.alpha) || sx < s.threshold) continue;
            ++qualifying;
            EXPECT_LE((1.0 - gamma) / (s.alpha * s.alpha) * sx, sy * (1 + 1e-12));
            EXPECT_LE(sy, (s.alpha * s.alpha + gamma) * sx * (1 + 1e-12));
          }
        EXPECT_EQ(s.qualifying_pairs, qualifying);
      }
    }
  }
}

TEST(WeakBilip, RejectsBadArguments) {
  const RowMatrix x = two_points(1.0);
  EXPECT_THROW(weak_bilip_audit(PointCloud(x), EmbeddingTable(x), {1.0}, 0.5), std::invalid_argument);
  EXPECT_THROW(weak_bilip_audit(PointCloud(x), EmbeddingTable(x), {2.0}, 1.0), std::invalid_argument);
  EXPECT_THROW(weak_bilip_audit(PointCloud(x), EmbeddingTable(x), {2.0}, 0.0), std::invalid_argument);
  EXPECT_THROW(weak_bilip_audit(PointCloud(x), EmbeddingTable(RowMatrix::Zero(3, 1)), {2.0}, 0.5),
               std::invalid_argument);
}

TEST(TableEncoder, NearestNeighbourWithLowestIndexTies) {
  RowMatrix x(3, 1);
  x << 0, 2, 2;
  RowMatrix y(3, 1);
  y << 10, 20, 30;
  const TableEncoder enc{PointCloud(x), EmbeddingTable(y)};
  RowMatrix q(3, 1);
  q << 1.0, 2.5, -4;
  const RowMatrix out = enc(q);
  EXPECT_EQ(out(0, 0), 10.0);  // equidistant from 0 and 2
  EXPECT_EQ(out(1, 0), 20.0);  // duplicate source, first wins
  EXPECT_EQ(out(2, 0), 10.0);
}

class CircleAudit : public ::testing::Test {
 protected:
  SyntheticManifold circle{ManifoldKind::Circle, 3};
  RowMatrix params = [] {
    Rng rng(RngSeed{4});
    return sample_params(SyntheticManifold(ManifoldKind::Circle, 3), 50, rng);
  }();
};

TEST_F(CircleAudit, DistortionOfScalings) {
  const auto id = estimate_tangent_distortion(circle, scaling_map(1.0), params, 0);
  for (double v : id.values) EXPECT_LE(v, 1e-6);
  const auto twice = estimate_tangent_distortion(circle, scaling_map(2.0), params, 0);
  for (double v : twice.values) EXPECT_NEAR(v, 9.0, 1e-3);
  EXPECT_NEAR(twice.mean(), 9.0, 1e-3);
  EXPECT_EQ(twice.directions, 2);
  EXPECT_THROW(estimate_tangent_distortion(circle, scaling_map(1.0), params, 0, 0.0), std::invalid_argument);
}

TEST_F(CircleAudit, DistortionOfLinearMapMatchesClosedForm) {
  Rng rng(RngSeed{5});
  const Eigen::MatrixXd m = rng.normal_matrix(4, 3);
  const BatchMap map = [m](const RowMatrix& p) { return RowMatrix(p * m.transpose()); };
  const auto est = estimate_tangent_distortion(circle, map, params, 0);
  for (Eigen::Index s = 0; s < params.rows(); ++s) {
    const Vector tangent = circle.chart_differential(params.row(s).transpose()).col(0).normalized();
    const double e = (m * tangent).squaredNorm() - 1.0;
    EXPECT_NEAR(est.values[s], e * e, 1e-6 * std::max(1.0, e * e));
  }
}

TEST(SwissRollAudit, DistortionOfLinearMapMatchesClosedForm) {
  const SyntheticManifold roll(ManifoldKind::SwissRoll, 3);
  Rng rng(RngSeed{6});
  const RowMatrix params = sample_params(roll, 20, rng);
  const Eigen::MatrixXd m = rng.normal_matrix(3, 3);
  const BatchMap map = [m](const RowMatrix& p) { return RowMatrix(p * m.transpose()); };
  const auto est = estimate_tangent_distortion(roll, map, params, 8);
  for (Eigen::Index s = 0; s < params.rows(); ++s) {
    const Eigen::MatrixXd b = roll.chart_differential(params.row(s).transpose());
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(b);
    const Eigen::MatrixXd frame = qr.householderQ() * Eigen::MatrixXd::Identity(3, 2);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(frame.transpose() * m.transpose() * m * frame);
    // mean over the unit tangent circle of (a + b cos 2t - 1)^2
    const double a = 0.5 * es.eigenvalues().sum();
    const double half = 0.5 * (es.eigenvalues()(1) - es.eigenvalues()(0));
    const double expected = (a - 1.0) * (a - 1.0) + 0.5 * half * half;
    EXPECT_NEAR(est.values[s], expected, 1e-6 * std::max(1.0, expected));
  }
}

TEST_F(CircleAudit, JacobianOfScalings) {
  for (double v : estimate_jacobian_det(circle, scaling_map(1.0), params).values) EXPECT_NEAR(v, 1.0, 1e-4);
  for (double v : estimate_jacobian_det(circle, scaling_map(2.0), params).values) EXPECT_NEAR(v, 2.0, 1e-3);
}

TEST(SwissRollAudit, JacobianWithinLemmaBounds) {
  const SyntheticManifold roll(ManifoldKind::SwissRoll, 3);
  Rng rng(RngSeed{7});
  const RowMatrix params = sample_params(roll, 40, rng);
  // linear map diag(1/2, 1, 3/2): alpha = 2 and m = 2
  const BatchMap linear = [](const RowMatrix& p) {
    RowMatrix out = p;
    out.col(0) *= 0.5;
    out.col(2) *= 1.5;
    return out;
  };
  for (double v : estimate_jacobian_det(roll, linear, params).values) {
    EXPECT_GE(v, 0.25 * 0.99);
    EXPECT_LE(v, 4.0 * 1.01);
  }
  for (double v : estimate_jacobian_det(roll, scaling_map(2.0), params).values) EXPECT_NEAR(v, 4.0, 1e-3);

  const MlpMap mlp({3, 16, 3}, 0.2, RngSeed{8});
  const ManifoldSample dense = generate_synthetic_manifold(ManifoldKind::SwissRoll, 3, 1500, 0.0, RngSeed{9});
  const double alpha = estimate_bilip(dense.cloud.points(), mlp.forward(dense.cloud.points())).alpha_hat;
  for (double v : estimate_jacobian_det(roll, as_batch_map(mlp), params).values) {
    EXPECT_GE(v, std::pow(alpha, -2.0) * (1 - 1e-2));
    EXPECT_LE(v, alpha * alpha * (1 + 1e-2));
  }
}

// Encoders snapshotted along one run at decreasing GME cost should bend the
// roll's tangent planes less and less.
TEST(SwissRollAudit, DistortionFallsWithEncoderTolerance) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const ManifoldSample s = generate_synthetic_manifold(ManifoldKind::SwissRoll, 3, 200, 0.0, RngSeed{seed});
    Rng rng(RngSeed{99});
    const RowMatrix params = sample_params(s.manifold, 100, rng);
    const std::vector<double> tols{3e-2, 4e-3, 4e-4};
    std::vector<double> a;
    TrainConfig c;
    c.mode = EncoderMode::Mlp;
    c.step_size = 0.5;
    c.max_iters = 5000;
    c.tol = tols.back();
    c.seed = RngSeed{seed + 7};
    const GmeObjective objective(s.cloud);
    train_encoder(s.cloud, 3, c, [&](int, const EmbeddingTable& e, const std::optional<MlpMap>& m) {
      while (a.size() < tols.size() && objective.cost(e.codes()) <= tols[a.size()])
        a.push_back(estimate_tangent_distortion(s.manifold, as_batch_map(*m), params, 8).mean());
    });
    ASSERT_EQ(a.size(), 3u) << "seed " << seed;
    EXPECT_GT(a[0], a[1]) << "seed " << seed;
    EXPECT_GT(a[1], a[2]) << "seed " << seed;
  }
}

TEST(Concentration, BernsteinArithmetic) {
  EXPECT_NEAR(bernstein_bound(100, 0.5), 2.0 * std::exp(-25.0 / 7.0), 1e-15);
  EXPECT_NEAR(bernstein_bound(100, 0.5), 0.056231, 1e-6);
}

TEST(Concentration, IdentityMapNeverExceeds) {
  const SyntheticManifold circle(ManifoldKind::Circle, 2);
  const ConcentrationReport r =
      concentration_mc(manifold_sampler(circle, 0.0), scaling_map(1.0), {100}, {0.5}, 100, RngSeed{10});
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.reference_size, 2000);
  EXPECT_EQ(r.reference_cost, 0.0);
  EXPECT_NEAR(r.beta_hat, 1.0, 1e-12);
  EXPECT_EQ(r.records[0].exceedance, 0.0);
  EXPECT_TRUE(r.records[0].within_bound);
  EXPECT_NEAR(r.records[0].bound, 0.056231, 1e-6);
  EXPECT_THROW(concentration_mc(manifold_sampler(circle, 0.0), scaling_map(1.0), {100}, {0.5}, 99, RngSeed{1}),
               std::invalid_argument);
}

TEST(Concentration, StreamedCostMatchesDense) {
  Rng rng(RngSeed{11});
  const RowMatrix x = testing::random_matrix(rng, 60, 3);
  const RowMatrix y = testing::random_matrix(rng, 60, 2);
  EXPECT_NEAR(streamed_gme_cost(x, y), testing::brute_gme_cost(x, y), 1e-12);
}

TEST(Concentration, ScaledMapWithinBound) {
  const SyntheticManifold circle(ManifoldKind::Circle, 2);
  const ConcentrationReport r = concentration_mc(manifold_sampler(circle, 0.01), scaling_map(1.5), {50, 100},
                                                 {0.3, 0.5}, 200, RngSeed{12});
  EXPECT_GT(r.beta_hat, 1.0);
  EXPECT_GT(r.reference_cost, 0.0);
  for (const auto& rec : r.records) {
    EXPECT_GE(rec.exceedance, 0.0);
    EXPECT_LE(rec.exceedance, 1.0);
    EXPECT_TRUE(rec.within_bound);
    EXPECT_NEAR(rec.threshold, 4.0 * std::pow(std::log(r.beta_hat), 2) * rec.epsilon, 1e-12);
  }
}

SyntheticManifold unit_circle() { return SyntheticManifold(ManifoldKind::Circle, 3); }

TEST(ChartJl, SingleChartStaysInMeasuredBand) {
  const JlChartMap map = construct_chart_jl_map(unit_circle(), 1, 0.05, 4, 0.3, RngSeed{13});
  Rng rng(RngSeed{14});
  const JlChartAudit a = audit_chart_jl_map(map, sample_params(map.manifold(), 200, rng));
  EXPECT_EQ(a.cross_chart_pairs, 0u);
  EXPECT_GT(a.in_chart_pairs, 0u);
  EXPECT_EQ(a.epsilon_band, a.epsilon_chart);
  EXPECT_GE(a.in_chart_min, a.band_lower - 1e-12);
  EXPECT_LE(a.in_chart_max, a.band_upper + 1e-12);
  EXPECT_EQ(a.band_fraction, 1.0);
}

TEST(ChartJl, EightChartsMostlyInBand) {
  const JlChartMap map = construct_chart_jl_map(unit_circle(), 8, 0.05, 16, 0.3, RngSeed{15});
  Rng rng(RngSeed{16});
  const JlChartAudit a = audit_chart_jl_map(map, sample_params(map.manifold(), 400, rng), 0.3);
  EXPECT_EQ(a.epsilon_band, std::max(a.epsilon_chart, 0.3));
  EXPECT_GE(a.band_fraction, 0.95);
  EXPECT_GT(a.cross_chart_pairs, a.in_chart_pairs);
}

TEST(ChartJl, AnchorDistancesPreserved) {
  const double eps = 0.3;
  const JlChartMap map = construct_chart_jl_map(unit_circle(), 8, 0.05, 16, eps, RngSeed{17});
  EXPECT_GE(map.attempts(), 1);
  EXPECT_LE(map.attempts(), 50);
  const auto& cells = map.cells();
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t j = i + 1; j < cells.size(); ++j) {
      const Vector diff = cells[i].anchor - cells[j].anchor;
      const double r = (map.projection() * diff).norm() / diff.norm();
      EXPECT_GE(r, 1.0 - eps);
      EXPECT_LE(r, 1.0 + eps);
    }
}

TEST(ChartJl, EachParameterHasExactlyOneOwner) {
  const JlChartMap map = construct_chart_jl_map(unit_circle(), 8, 0.05, 16, 0.3, RngSeed{18});
  Rng rng(RngSeed{19});
  const RowMatrix params = sample_params(map.manifold(), 500, rng);
  for (Eigen::Index s = 0; s < params.rows(); ++s) {
    const Vector p = params.row(s).transpose();
    int owners = 0;
    for (const auto& c : map.cells()) owners += p(0) >= c.lower && p(0) < c.upper;
    EXPECT_EQ(owners, 1);
    const JlChartCell& c = map.cells()[map.owner(p)];
    EXPECT_TRUE(p(0) >= c.lower && p(0) < c.upper);
  }
  // cell boundaries belong to the upper cell
  const Vector edge = Vector::Constant(1, map.cells()[3].lower);
  EXPECT_EQ(map.owner(edge), 3);
}

TEST(ChartJl, MapsAmbientPointsLikeParameters) {
  const JlChartMap map = construct_chart_jl_map(unit_circle(), 4, 0.05, 8, 0.3, RngSeed{20});
  Rng rng(RngSeed{21});
  const RowMatrix params = sample_params(map.manifold(), 20, rng);
  RowMatrix pts(20, 3);
  for (Eigen::Index s = 0; s < 20; ++s) pts.row(s) = map.manifold().chart(params.row(s).transpose()).transpose();
  const RowMatrix out = map(pts);
  for (Eigen::Index s = 0; s < 20; ++s)
    EXPECT_LE((out.row(s).transpose() - map.map_param(params.row(s).transpose())).norm(), 1e-12);
}

TEST(ChartJl, RejectsBadConstruction) {
  // 8 arcs of length pi/4 with pi/8 removed from each side are empty
  EXPECT_THROW(construct_chart_jl_map(unit_circle(), 8, std::numbers::pi / 8, 16, 0.3, RngSeed{1}),
               std::invalid_argument);
  EXPECT_THROW(construct_chart_jl_map(unit_circle(), 0, 0.05, 16, 0.3, RngSeed{1}), std::invalid_argument);
  EXPECT_THROW(construct_chart_jl_map(unit_circle(), 4, 0.05, 16, 1.0, RngSeed{1}), std::invalid_argument);
  EXPECT_THROW(construct_chart_jl_map(SyntheticManifold(ManifoldKind::GaussianMixture, 3), 4, 0.05, 16, 0.3, RngSeed{1}),
               std::invalid_argument);
}

}  // namespace
}  // namespace gpe
