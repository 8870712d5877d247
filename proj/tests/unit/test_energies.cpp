#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "edffd/checks/oracles.hpp"
#include "edffd/energies.hpp"
#include "edffd/error.hpp"
#include "edffd/synthetic.hpp"

using namespace edffd;

namespace {

ControlGrid random_grid(int rows, int cols, int w, int h, double amp, std::uint64_t seed) {
  ControlGrid g(rows, cols, w, h);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  for (auto& d : g.displacements()) d = {u(rng), u(rng)};
  return g;
}

}  // namespace

TEST(ContentLoss, IdenticalImagesIdentityWarpsGiveZero) {
  const ImageBuffer img = ProceduralTexture(1).render(32, 24, 3);
  const SamplingMap id = SamplingMap::identity(32, 24);
  EXPECT_EQ(content_loss(img, img, Homography{}, std::span(&id, 1), LossWeights{}), 0.0);
}

TEST(ContentLoss, ConstantImagesClosedForm) {
  const SamplingMap id = SamplingMap::identity(16, 16);
  LossWeights w;
  w.lambda = {1.0};
  EXPECT_DOUBLE_EQ(
      content_loss(ImageBuffer(16, 16, 1, 1.0f), ImageBuffer(16, 16, 1, 0.0f), Homography{}, std::span(&id, 1), w),
      3.0);
}

TEST(ContentLoss, TooFewStageWeights) {
  const std::vector<SamplingMap> maps(3, SamplingMap::identity(8, 8));
  EXPECT_THROW(content_loss(ImageBuffer(8, 8, 1), ImageBuffer(8, 8, 1), Homography{}, maps, LossWeights{}), Error);
}

TEST(IntraGridLoss, UndeformedIsZero) { EXPECT_EQ(intra_grid_loss(ControlGrid(5, 7, 70, 50)), 0.0); }

TEST(IntraGridLoss, OneStretchedEdge) {
  ControlGrid g(4, 4, 64, 64);  // spacing 16
  // Move the right end of the last horizontal edge in row 2 so that edge spans 48.
  g.displacement(2, 4) = {32.0, 0.0};
  const double expect = 16.0 / (5.0 * 4.0);
  EXPECT_NEAR(intra_grid_loss(g), expect, 1e-12);
}

TEST(IntraGridLoss, MatchesOracle) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ControlGrid g = random_grid(6, 5, 60, 48, 15.0, s);
    EXPECT_NEAR(intra_grid_loss(g), oracle::intra_grid_loss(g), 1e-9);
  }
}

TEST(InterGridLoss, UndeformedAndFullOverlapAreZero) {
  EXPECT_EQ(inter_grid_loss(ControlGrid(4, 4, 40, 40), Mask(40, 40, 0.0f)), 0.0);
  EXPECT_EQ(inter_grid_loss(random_grid(4, 4, 40, 40, 5, 1), Mask(40, 40, 1.0f)), 0.0);
}

TEST(InterGridLoss, RightAngleBend) {
  ControlGrid g(2, 2, 20, 20);  // 3x3 points, spacing 10
  // Bend the top row: (0,0) -> (10,0) -> (10,10) instead of (20,0).
  g.displacement(0, 2) = {-10.0, 10.0};
  // Keep the column through (0,2) straight: (10,10), (20,10), (20,20) is not collinear, so
  // restrict the active set to the top row only.
  std::vector<bool> flags(g.point_count(), false);
  flags[g.index(0, 0)] = flags[g.index(0, 1)] = flags[g.index(0, 2)] = true;
  const double edges = 3.0 * 1.0 + 3.0 * 1.0;  // (M+1)(N-1) + (N+1)(M-1)
  EXPECT_NEAR(inter_grid_loss(g, flags), 1.0 / edges, 1e-12);
}

TEST(InterGridLoss, MatchesOracleAndIsScaleInvariant) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ControlGrid g = random_grid(5, 6, 60, 50, 3.0, s);
    Mask m(60, 50, 1.0f);
    for (int y = 0; y < 50; ++y)
      for (int x = 0; x < 30; ++x) m.at(x, y) = 0.0f;
    EXPECT_NEAR(inter_grid_loss(g, m), oracle::inter_grid_loss(g, m), 1e-9);

    ControlGrid big(5, 6, 120, 100);
    for (std::size_t i = 0; i < g.point_count(); ++i) big.displacements()[i] = 2.0 * g.displacements()[i];
    const std::vector<bool> all(g.point_count(), true);
    EXPECT_NEAR(inter_grid_loss(g, all), inter_grid_loss(big, all), 1e-12);
  }
}

TEST(InterGridLoss, ZeroLengthEdge) {
  ControlGrid g(2, 2, 20, 20);
  g.displacement(0, 1) = {-10.0, 0.0};  // lands on (0,0)
  try {
    inter_grid_loss(g, Mask(20, 20, 0.0f));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroLengthEdge);
  }
}

TEST(GridLossGradients, MatchFiniteDifferences) {
  const ControlGrid g = random_grid(4, 4, 64, 64, 12.0, 3);
  const std::vector<bool> all(g.point_count(), true);
  const auto flat = g.flat();
  auto fd = [&](auto&& loss) {
    return oracle::central_difference(
        [&](std::span<const double> p) {
          ControlGrid q = g;
          q.set_flat(p);
          return loss(q);
        },
        flat, 1e-6);
  };
  auto flatten = [](const std::vector<Vec2>& v) {
    std::vector<double> out;
    for (Vec2 p : v) {
      out.push_back(p.x);
      out.push_back(p.y);
    }
    return out;
  };
  EXPECT_LT(oracle::relative_error(flatten(inter_grid_grad(g, all)),
                                   fd([&](const ControlGrid& q) { return inter_grid_loss(q, all); })),
            1e-5);
  EXPECT_LT(oracle::relative_error(flatten(intra_grid_grad(g)), fd([](const ControlGrid& q) { return intra_grid_loss(q); })),
            1e-5);
}

TEST(TotalLoss, Examples) {
  EXPECT_EQ(total_loss(0.0, 0.0, 10.0), 0.0);
  EXPECT_DOUBLE_EQ(total_loss(3.0, 0.2, 10.0), 5.0);
}

TEST(PhotometricGrad, ZeroAtPerfectAlignment) {
  const ImageBuffer img = ProceduralTexture(2, 8.0).render(32, 32, 1);
  for (double v : photometric_grad(img, img, FourPointMotion{}).grad) EXPECT_NEAR(v, 0.0, 1e-12);
  const ControlGrid g(4, 4, 32, 32);
  for (double v : photometric_grad(img, img, g, FfdModel::Edffd, 0.75, SamplingMap::identity(32, 32)).grad)
    EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(PhotometricGrad, ConstantImagesGiveZero) {
  const ImageBuffer a(32, 32, 1, 0.2f), b(32, 32, 1, 0.7f);
  FourPointMotion m;
  m.d[0] = {0.5, 0.5};
  for (double v : photometric_grad(a, b, m).grad) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(PhotometricGrad, BsplineMatchesFiniteDifferences) {
  const ProceduralTexture tex(7, 8.0, 3);
  const ImageBuffer it = tex.render(32, 32, 1);
  SamplingMap shift = SamplingMap::identity(32, 32);
  for (double& x : shift.sx) x += 0.3;
  const ImageBuffer ir = tex.render(shift, 1);
  SamplingMap prior = SamplingMap::identity(32, 32);
  for (std::size_t i = 0; i < prior.sx.size(); ++i) {
    prior.sx[i] = 15.5 + 0.85 * (prior.sx[i] - 15.5);
    prior.sy[i] = 15.5 + 0.85 * (prior.sy[i] - 15.5);
  }
  const ControlGrid g = random_grid(4, 4, 32, 32, 0.3, 1);
  const auto an = photometric_grad(ir, it, g, FfdModel::BSpline, 0.75, prior).grad;
  const auto fd = oracle::central_difference(
      [&](std::span<const double> p) {
        ControlGrid q = g;
        q.set_flat(p);
        return photometric_grad(ir, it, q, FfdModel::BSpline, 0.75, prior).value;
      },
      g.flat(), 1e-3);
  EXPECT_LT(oracle::relative_error(an, fd), 1e-4);
}

TEST(PhotometricEnergy, CharbonnierValue) {
  const ImageBuffer a(16, 16, 1, 0.5f), b(16, 16, 1, 0.25f);
  const double d = 0.25;
  EXPECT_NEAR(photometric_value(a, b, SamplingMap::identity(16, 16)),
              std::sqrt(d * d + kCharbonnierEps * kCharbonnierEps) - kCharbonnierEps, 1e-7);
}

TEST(NonOverlapFlags, RoundsAnchorsIntoTheMask) {
  Mask m(40, 40, 1.0f);
  for (int y = 0; y < 40; ++y) m.at(39, y) = 0.0f;
  const ControlGrid g(2, 2, 40, 40);
  const auto q = non_overlap_flags(g, m);
  EXPECT_FALSE(q[g.index(0, 0)]);
  EXPECT_TRUE(q[g.index(1, 2)]);  // anchor x = 40 clamps to column 39
}
