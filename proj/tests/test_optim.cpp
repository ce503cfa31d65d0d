#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gpe/mlp.hpp"
#include "gpe/optim.hpp"
#include "test_util.hpp"

namespace gpe {
namespace {

TEST(CorollaryStep, ClosedForms) {
  EXPECT_NEAR(corollary_step_size(std::numbers::e), 0.025, 1e-15);
  EXPECT_EQ(corollary_step_size(1.0), 0.125);
  EXPECT_NEAR(corollary_step_size(std::exp(3.0)), 1.0 / 104.0, 1e-15);
  EXPECT_NEAR(hessian_ceiling(10.0), 81.68272297581117, 1e-10);
  EXPECT_THROW(corollary_step_size(0.99), std::invalid_argument);
}

TEST(EstimateBilip, IdentityAndScaling) {
  Rng rng(RngSeed{1});
  const RowMatrix x = testing::random_matrix(rng, 30, 3);
  EXPECT_NEAR(estimate_bilip(x, x).alpha_hat, 1.0, 1e-15);
  const BilipEstimate b = estimate_bilip(x, RowMatrix(2.0 * x));
  EXPECT_NEAR(b.alpha_hat, 2.0, 1e-14);
  EXPECT_LE(b.ratio_min, b.ratio_max);
  EXPECT_THROW(estimate_bilip(RowMatrix::Zero(4, 2), x.topRows(4)), std::invalid_argument);
}

TEST(EstimateBilip, MatchesBruteForceOnMlp) {
  Rng rng(RngSeed{2});
  const RowMatrix x = testing::random_matrix(rng, 50, 4);
  const MlpMap map({4, 16, 3}, 0.2, RngSeed{3});
  const RowMatrix y = map.forward(x);
  double lo = INFINITY, hi = 0.0;
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) {
      if (i == j) continue;
      const double r = (y.row(i) - y.row(j)).norm() / (x.row(i) - x.row(j)).norm();
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  EXPECT_NEAR(estimate_bilip(x, y).alpha_hat, std::max(hi, 1.0 / lo), 1e-12);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  Rng rng(RngSeed{4});
  MlpMap map({3, 5, 4, 2}, 0.3, RngSeed{5});
  const RowMatrix x = testing::random_matrix(rng, 7, 3);
  const RowMatrix w = testing::random_matrix(rng, 7, 2);
  const auto loss = [&](const MlpMap& m) { return (m.forward(x).array() * w.array()).sum(); };
  MlpMap::Tape tape;
  map.forward(x, tape);
  RowMatrix input_grad;
  const MlpGradient g = map.backward(tape, w, &input_grad);
  const double t = 1e-6;
  for (std::size_t l = 0; l < map.layer_count(); ++l) {
    for (Eigen::Index k = 0; k < map.weights()[l].size(); ++k) {
      double& v = map.mutable_weights()[l].data()[k];
      const double keep = v;
      v = keep + t;
      const double up = loss(map);
      v = keep - t;
      const double down = loss(map);
      v = keep;
      EXPECT_NEAR(g.weights[l].data()[k], (up - down) / (2 * t), 1e-7);
    }
    for (Eigen::Index k = 0; k < map.biases()[l].size(); ++k) {
      double& v = map.mutable_biases()[l](k);
      const double keep = v;
      v = keep + t;
      const double up = loss(map);
      v = keep - t;
      const double down = loss(map);
      v = keep;
      EXPECT_NEAR(g.biases[l](k), (up - down) / (2 * t), 1e-7);
    }
  }
  const RowMatrix fd = testing::fd_gradient(
      [&](const RowMatrix& v) { return (map.forward(v).array() * w.array()).sum(); }, x, t);
  EXPECT_LE((fd - input_grad).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Mlp, RejectsNonPositiveSlope) {
  EXPECT_THROW(MlpMap({2, 3, 1}, 0.0, RngSeed{1}), std::invalid_argument);
}

TEST(TrainEncoder, TwoPointsEmbedExactly) {
  RowMatrix x(2, 2);
  x << 0, 0, 1, std::sqrt(2.0);
  TrainConfig c;
  c.tol = 1e-12;
  const EncoderResult r = train_encoder(PointCloud(x), 1, c);
  EXPECT_LE(r.trace.final_cost(), 1e-10);
}

TEST(TrainEncoder, AutoStepDescends) {
  const MixtureSample s = generate_gaussian_mixture(4, 20, 60, 0.15, 0.01, RngSeed{6});
  TrainConfig c;
  c.max_iters = 300;
  const EncoderResult r = train_encoder(s.cloud, 2, c);
  ASSERT_EQ(r.trace.records.size(), 301u);
  const DescentCheck d = check_descent(r.trace);
  EXPECT_TRUE(d.monotone) << d.max_increase;
  EXPECT_TRUE(d.telescoping_holds) << d.grad_sum << " > " << d.bound;
  EXPECT_LT(r.trace.final_cost(), r.trace.records.front().cost);
  EXPECT_EQ(r.trace.records.back().step, 0.0);
  // the min-gradient form of the corollary
  double min_grad = INFINITY;
  for (std::size_t k = 0; k + 1 < r.trace.records.size(); ++k)
    min_grad = std::min(min_grad, r.trace.records[k].grad_norm_sq);
  const double K = static_cast<double>(r.trace.records.size() - 1);
  EXPECT_LE(min_grad, 2.0 * hessian_ceiling(r.trace.beta_max) / K * (r.trace.records.front().cost - r.trace.final_cost()) + 1e-12);
}

TEST(TrainEncoder, FixedStepDeterministic) {
  const MixtureSample s = generate_gaussian_mixture(3, 10, 40, 0.15, 0.01, RngSeed{7});
  TrainConfig c;
  c.mode = EncoderMode::Mlp;
  c.step_size = 0.5;
  c.max_iters = 50;
  c.hidden = {8};
  c.seed = RngSeed{8};
  const EncoderResult a = train_encoder(s.cloud, 2, c);
  const EncoderResult b = train_encoder(s.cloud, 2, c);
  ASSERT_EQ(a.trace.records.size(), b.trace.records.size());
  for (std::size_t k = 0; k < a.trace.records.size(); ++k) {
    EXPECT_EQ(a.trace.records[k].cost, b.trace.records[k].cost);
    EXPECT_EQ(a.trace.records[k].grad_norm_sq, b.trace.records[k].grad_norm_sq);
  }
  EXPECT_TRUE(a.codes.codes() == b.codes.codes());
  EXPECT_LE(a.codes.codes().colwise().mean().norm(), 1e-12);
  EXPECT_TRUE(a.mlp->forward(s.cloud.points()).isApprox(a.codes.codes(), 1e-12));
}

TEST(TrainDecoder, HugeStepDiverges) {
  const MixtureSample s = generate_gaussian_mixture(3, 5, 30, 0.15, 0.01, RngSeed{9});
  Rng rng(RngSeed{3});
  TrainConfig c;
  c.hidden = {8};
  c.step_size = 5.0;
  c.max_iters = 3000;
  const DecoderResult r = train_decoder(s.cloud, EmbeddingTable(testing::random_matrix(rng, 30, 2)), c);
  EXPECT_EQ(r.trace.status, TrainStatus::Diverged);
  EXPECT_LT(r.trace.records.size(), 100u);
}

// Consecutive increases trip the watch even when every cost stays finite.
TEST(TrainDecoder, SustainedIncreaseDiverges) {
  const MixtureSample s = generate_gaussian_mixture(3, 5, 30, 0.15, 0.01, RngSeed{9});
  Rng rng(RngSeed{3});
  TrainConfig c;
  c.hidden = {8};
  c.step_size = 0.3;
  c.max_iters = 3000;
  c.divergence_window = 3;
  const DecoderResult r = train_decoder(s.cloud, EmbeddingTable(testing::random_matrix(rng, 30, 2)), c);
  EXPECT_EQ(r.trace.status, TrainStatus::Diverged);
  EXPECT_TRUE(std::isfinite(r.trace.final_cost()));
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.tol = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.max_iters = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.step_size = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(TrainDecoder, IdentityEncoder) {
  Rng rng(RngSeed{10});
  const RowMatrix x = testing::random_matrix(rng, 100, 2, 0.5);
  TrainConfig c;
  c.hidden = {16};
  c.step_size = 0.2;
  c.max_iters = 5000;
  c.tol = 1e-4;
  c.seed = RngSeed{11};
  const DecoderResult r = train_decoder(PointCloud(x), EmbeddingTable(x), c);
  EXPECT_LE(r.trace.final_cost(), 1e-4);
  EXPECT_LE(r.trace.records.size(), 5001u);
}

TEST(TrainDecoder, ConstantEncoderPlateausAtTheMean) {
  Rng rng(RngSeed{12});
  const RowMatrix x = testing::random_matrix(rng, 60, 3);
  const double best = (x.rowwise() - x.colwise().mean()).squaredNorm() / 60.0;
  TrainConfig c;
  c.hidden = {8};
  c.step_size = 0.05;
  c.max_iters = 3000;
  const DecoderResult r = train_decoder(PointCloud(x), EmbeddingTable(RowMatrix::Constant(60, 2, 0.7)), c);
  EXPECT_NEAR(r.trace.final_cost(), best, 0.01 * best);
  EXPECT_GE(r.trace.final_cost(), best - 1e-12);
}

TEST(TrainDecoder, RequiresNumericStep) {
  Rng rng(RngSeed{13});
  const RowMatrix x = testing::random_matrix(rng, 10, 2);
  TrainConfig c;
  EXPECT_THROW(train_decoder(PointCloud(x), EmbeddingTable(x), c), std::invalid_argument);
}

// Linear decoders make the loss a convex quadratic whose rate is set by the
// conditioning of the code covariance, which grows with the encoder's alpha.
TEST(TrainDecoder, RateOrderedByAlpha) {
  Rng rng(RngSeed{14});
  RowMatrix x = testing::random_matrix(rng, 100, 2);
  x.rowwise() -= x.colwise().mean();
  std::vector<double> rates, alphas;
  for (double a : {1.0, 2.0, 4.0}) {
    RowMatrix y = x;
    y.col(1) /= a;
    TrainConfig c;
    c.hidden = {};
    c.step_size = 0.1;
    c.max_iters = 40;
    c.seed = RngSeed{15};
    const DecoderResult r = train_decoder(PointCloud(x), EmbeddingTable(y), c);
    const auto& rec = r.trace.records;
    ASSERT_EQ(rec.size(), 41u);
    rates.push_back(std::pow(rec[40].cost / rec[10].cost, 1.0 / 30.0));
    alphas.push_back(estimate_bilip(x, y).alpha_hat);
  }
  EXPECT_LT(alphas[0], alphas[1]);
  EXPECT_LT(alphas[1], alphas[2]);
  EXPECT_LE(rates[0], rates[1]);
  EXPECT_LE(rates[1], rates[2]);
}

// Second variation of L_rec in the decoder outputs, on a table decoder.
TEST(ReconstructionLoss, SecondVariationIsTwiceMeanSquare) {
  Rng rng(RngSeed{16});
  const RowMatrix x = testing::random_matrix(rng, 25, 4);
  const RowMatrix s = testing::random_matrix(rng, 25, 4);
  const RowMatrix h = testing::random_matrix(rng, 25, 4);
  const auto loss = [&](const RowMatrix& out) { return (out - x).squaredNorm() / 25.0; };
  EXPECT_NEAR(testing::second_directional_fd(loss, s, h, 1e-3), 2.0 * testing::mean_sq_norm(h), 1e-8);
}

TEST(ReconstructionLoss, ClosedFormsAndBruteForce) {
  RowMatrix x(2, 2);
  x << 0, 0, 1, std::sqrt(2.0);
  // zero weights: the decoder outputs its bias, set to the midpoint
  MlpMap constant({1, 2}, 0.2, {Eigen::MatrixXd::Zero(2, 1)}, {Vector(x.colwise().mean().transpose())});
  EXPECT_NEAR(reconstruction_loss(PointCloud(x), EmbeddingTable(RowMatrix::Zero(2, 1)), constant, 2.0), 0.75, 1e-15);

  MlpMap identity({2, 2}, 0.2, {Eigen::MatrixXd::Identity(2, 2)}, {Vector::Zero(2)});
  EXPECT_EQ(reconstruction_loss(PointCloud(x), EmbeddingTable(x), identity, 1.0), 0.0);

  Rng rng(RngSeed{17});
  const RowMatrix pts = testing::random_matrix(rng, 30, 3);
  const RowMatrix codes = testing::random_matrix(rng, 30, 2);
  const MlpMap dec({2, 6, 3}, 0.2, RngSeed{18});
  double brute = 0.0;
  for (int i = 0; i < 30; ++i) {
    const Vector out = dec(Vector(codes.row(i).transpose()));
    brute += std::pow((out - pts.row(i).transpose()).norm(), 2.0);
  }
  EXPECT_NEAR(reconstruction_loss(PointCloud(pts), EmbeddingTable(codes), dec, 2.0), brute / 30.0, 1e-12);
  EXPECT_THROW(reconstruction_loss(PointCloud(pts), EmbeddingTable(codes), dec, 0.5), std::invalid_argument);
}

}  // namespace
}  // namespace gpe
