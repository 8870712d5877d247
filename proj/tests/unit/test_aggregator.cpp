#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "edffd/aggregator.hpp"
#include "edffd/checks/oracles.hpp"
#include "edffd/error.hpp"

using namespace edffd;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

void randomize_biases(Head& h, std::uint64_t seed) {
  for (auto& l : h.layers) l.biases = random_vector(l.biases.size(), seed++);
}

}  // namespace

TEST(GroupLinear, SingleGroupEqualsDense) {
  GroupLinear l(6, 4, 1);
  l.weights = random_vector(24, 1);
  l.biases = random_vector(4, 2);
  const auto x = random_vector(6, 3);
  const auto y = gll_forward(x, l);
  for (int r = 0; r < 4; ++r) {
    double s = l.biases[r];
    for (int c = 0; c < 6; ++c) s += l.w(0, r, c) * x[c];
    EXPECT_NEAR(y[r], std::max(s, 0.0), 1e-14);
  }
}

TEST(GroupLinear, ZeroWeightsGiveRectifiedBias) {
  GroupLinear l(8, 4, 2);
  l.biases = {0.5, -1.0, 2.0, 0.0};
  const auto y = gll_forward(random_vector(8, 4), l);
  EXPECT_EQ(y, (std::vector<double>{0.5, 0.0, 2.0, 0.0}));
}

TEST(GroupLinear, MatchesBlockDiagonalDense) {
  GroupLinear l(8, 6, 2);
  l.weights = random_vector(l.weights.size(), 5);
  l.biases = random_vector(6, 6);
  const auto x = random_vector(8, 7);
  const auto dense = oracle::dense_weights(l);
  const auto y = affine_forward(x, l);
  for (int r = 0; r < 6; ++r) {
    double s = l.biases[r];
    for (int c = 0; c < 8; ++c) s += dense[r * 8 + c] * x[c];
    EXPECT_NEAR(y[r], s, 1e-12);
  }
}

TEST(GroupLinear, NotDivisible) {
  try {
    GroupLinear(10, 8, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotDivisible);
  }
}

TEST(GroupLinear, ParamCounts) {
  EXPECT_EQ(param_count(GroupLinear(1024, 512, 8)).weights, 65536u);
  EXPECT_EQ(param_count(GroupLinear(1024, 512, 8)).biases, 512u);
  EXPECT_EQ(param_count(GroupLinear(1024, 512, 1)).weights, 524288u);
}

TEST(AsmaHead, ZeroInputZeroBiasGivesZero) {
  const AsmaHead h = make_asma_head({16, 8, 8, 4}, 4, 1);
  for (double v : asma_forward(std::vector<double>(16, 0.0), h)) EXPECT_EQ(v, 0.0);
}

TEST(AsmaHead, SingleGroupEqualsMlp) {
  AsmaHead a = make_asma_head({12, 6, 6, 3}, 1, 2);
  randomize_biases(a, 3);
  MlpHead m;
  m.layers = a.layers;
  const auto x = random_vector(12, 4);
  EXPECT_EQ(asma_forward(x, a), head_forward(x, m));
}

TEST(AsmaHead, MatchesLayerOracle) {
  AsmaHead a = make_asma_head({32, 16, 16, 6}, 4, 5);
  randomize_biases(a, 6);
  const auto x = random_vector(32, 7);
  const auto y = asma_forward(x, a), ref = oracle::head_forward(x, a);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-9);
}

TEST(AsmaHead, WidthMismatch) {
  const AsmaHead a = make_asma_head({16, 8, 8, 4}, 4, 1);
  try {
    asma_forward(std::vector<double>(15), a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WidthMismatch);
  }
  EXPECT_THROW(asma_backward(std::vector<double>(16), a, std::vector<double>(3)), Error);
}

TEST(AsmaHead, InitialisationBounds) {
  const AsmaHead a = make_asma_head({64, 32, 16, 4}, 8, 9);
  for (const auto& l : a.layers) {
    const double bound = std::sqrt(6.0 / (l.group_in() + l.group_out()));
    for (double w : l.weights) EXPECT_LE(std::abs(w), bound);
    for (double b : l.biases) EXPECT_EQ(b, 0.0);
  }
  EXPECT_EQ(a.layers[2].groups, 1);
}

TEST(AsmaBackward, ZeroUpstreamGivesZeroGrads) {
  const AsmaHead a = make_asma_head({16, 8, 8, 4}, 2, 1);
  const HeadGrad g = asma_backward(random_vector(16, 1), a, std::vector<double>(4, 0.0));
  for (double v : g.input) EXPECT_EQ(v, 0.0);
  for (const auto& l : g.layers)
    for (double v : l.weights) EXPECT_EQ(v, 0.0);
}

TEST(AsmaBackward, DeadUnitBlocksGradient) {
  AsmaHead a = make_asma_head({4, 4, 4, 2}, 2, 2);
  a.layers[0].biases[1] = -1e6;  // unit 1 of the first layer never fires
  const HeadGrad g = asma_backward(random_vector(4, 3), a, std::vector<double>{1.0, -1.0});
  EXPECT_EQ(g.layers[0].biases[1], 0.0);
  for (int c = 0; c < a.layers[0].group_in(); ++c) EXPECT_EQ(g.layers[0].weights[1 * 2 + c], 0.0);
}

TEST(AsmaBackward, MatchesFiniteDifferencesOnInput) {
  AsmaHead a = make_asma_head({24, 12, 12, 6}, 3, 11);
  randomize_biases(a, 12);
  const auto x = random_vector(24, 13), up = random_vector(6, 14);
  auto loss = [&](std::span<const double> in) {
    const auto y = asma_forward(in, a);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
    return s;
  };
  EXPECT_LT(oracle::relative_error(asma_backward(x, a, up).input, oracle::central_difference(loss, x, 1e-6)), 1e-5);
}

TEST(Training, ZeroEpochsLeavesHeadUnchanged) {
  AsmaHead a = make_asma_head({8, 8, 8, 2}, 2, 1);
  const AsmaHead before = a;
  Dataset d;
  d.inputs = {random_vector(8, 1)};
  d.targets = {random_vector(2, 2)};
  TrainOptions o;
  o.epochs = 0;
  train_toy_regressor(a, d, d, o);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a.layers[i].weights, before.layers[i].weights);
}

TEST(Training, RealizableLinearMapIsLearned) {
  // y = A x is representable by a rectifier network; least squares confirms
  // the data are exactly linear before training.
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd A(2, 6);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = 0.3 * n(rng);
  Dataset train, test;
  Eigen::MatrixXd X(800, 6), Y(800, 2);
  for (int s = 0; s < 1000; ++s) {
    Eigen::VectorXd x(6);
    for (auto& v : x) v = n(rng);
    const Eigen::VectorXd y = A * x;
    Dataset& d = s < 800 ? train : test;
    d.inputs.emplace_back(x.data(), x.data() + 6);
    d.targets.emplace_back(y.data(), y.data() + 2);
    if (s < 800) {
      X.row(s) = x.transpose();
      Y.row(s) = y.transpose();
    }
  }
  const Eigen::MatrixXd fit = X.colPivHouseholderQr().solve(Y);
  EXPECT_LT((X * fit - Y).squaredNorm() / 1600.0, 1e-20);

  MlpHead h = make_mlp_head({6, 32, 32, 2}, 3);
  TrainOptions o;
  o.epochs = 400;
  o.learning_rate = 0.01;
  const TrainReport r = train_toy_regressor(h, train, test, o);
  EXPECT_LT(r.heldout_mse, 1e-3);
  EXPECT_EQ(r.epoch_loss.size(), 400u);
}

TEST(Training, DivergenceIsReported) {
  MlpHead h = make_mlp_head({4, 8, 8, 1}, 1);
  Dataset d;
  for (int i = 0; i < 64; ++i) {
    d.inputs.push_back(random_vector(4, i));
    d.targets.push_back({1e200});
  }
  TrainOptions o;
  o.learning_rate = 0.1;
  o.epochs = 50;
  try {
    train_toy_regressor(h, d, d, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Divergence);
  }
}

TEST(HeadJson, RoundTrip) {
  AsmaHead a = make_asma_head({16, 8, 8, 4}, 4, 3);
  randomize_biases(a, 4);
  const AsmaHead b = asma_head_from_json(head_to_json(a));
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(a.layers[i].weights, b.layers[i].weights);
    EXPECT_EQ(a.layers[i].biases, b.layers[i].biases);
  }
  EXPECT_THROW(asma_head_from_json("{\"model\":\"asma\"}"), Error);
}
