#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "edffd/checks/oracles.hpp"
#include "edffd/correlation.hpp"
#include "edffd/error.hpp"
#include "edffd/synthetic.hpp"

using namespace edffd;

namespace {

FeatureMap random_unit_map(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMap f(w, h, kFeatureChannels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto v = f.at(x, y);
      double s = 0.0;
      for (double& e : v) {
        e = n(rng);
        s += e * e;
      }
      for (double& e : v) e /= std::sqrt(s);
    }
  return f;
}

// ft(p + shift) = fr(p) wherever both are on the lattice.
FeatureMap shifted(const FeatureMap& fr, int sx, int sy, std::uint64_t seed) {
  FeatureMap ft = random_unit_map(fr.width, fr.height, seed);
  for (int y = 0; y < fr.height; ++y)
    for (int x = 0; x < fr.width; ++x) {
      if (x + sx < 0 || y + sy < 0 || x + sx >= fr.width || y + sy >= fr.height) continue;
      std::copy(fr.at(x, y).begin(), fr.at(x, y).end(), ft.at(x + sx, y + sy).begin());
    }
  return ft;
}

}  // namespace

TEST(Features, ConstantImageGivesZero) {
  const FeatureMap f = extract_features(ImageBuffer(64, 64, 1, 0.4f), 8);
  EXPECT_EQ(f.width, 8);
  EXPECT_EQ(f.channels, kFeatureChannels);
  for (double v : f.data) EXPECT_EQ(v, 0.0);
}

TEST(Features, DeterministicAndUnitNorm) {
  const ImageBuffer img = ProceduralTexture(4, 16.0).render(64, 48, 3);
  const FeatureMap a = extract_features(img, 4), b = extract_features(img, 4);
  EXPECT_EQ(a.data, b.data);
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      double s = 0.0;
      for (double v : a.at(x, y)) s += v * v;
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(Features, ShiftByOneCell) {
  const int d = 8;
  const ImageBuffer big = ProceduralTexture(5, 20.0).render(96 + d, 96, 1);
  ImageBuffer a(96, 96, 1), b(96, 96, 1);
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x) {
      a.at(x, y) = big.at(x + d, y);
      b.at(x, y) = big.at(x, y);
    }
  const FeatureMap fa = extract_features(a, d), fb = extract_features(b, d);
  // a(x) = b(x + d): cell c of a equals cell c + 1 of b wherever the
  // neighbourhood differences (two cells each way) avoid the clamped border.
  for (int y = 2; y < fa.height - 2; ++y)
    for (int x = 2; x < fa.width - 3; ++x)
      for (int c = 0; c < fa.channels; ++c) EXPECT_NEAR(fa.at(x, y)[c], fb.at(x + 1, y)[c], 1e-9);
}

TEST(Features, Errors) {
  EXPECT_THROW(extract_features(ImageBuffer(64, 64, 1), 5), Error);
  try {
    extract_features(ImageBuffer(8, 8, 1), 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooSmall);
  }
}

TEST(GlobalCorrelation, SelfMatchIsRowMaximum) {
  const FeatureMap f = random_unit_map(8, 6, 1);
  const GlobalCorrelationVolume v = global_correlation(f, f, 1);
  for (std::size_t c = 0; c < v.cells(); ++c) {
    const auto row = v.row(c);
    EXPECT_NEAR(row[c], 1.0, 1e-6);
    EXPECT_EQ(std::max_element(row.begin(), row.end()) - row.begin(), static_cast<long>(c));
    for (float s : row) EXPECT_LE(std::abs(s), 1.0f + 1e-6f);
  }
}

TEST(GlobalCorrelation, OrthogonalFeaturesScoreZero) {
  FeatureMap a(4, 4, kFeatureChannels), b(4, 4, kFeatureChannels);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      a.at(x, y)[0] = 1.0;
      b.at(x, y)[1] = 1.0;
    }
  for (float s : global_correlation(a, b, 3).scores) EXPECT_EQ(s, 0.0f);
}

TEST(GlobalCorrelation, MatchesBruteForce) {
  const FeatureMap a = random_unit_map(7, 5, 2), b = random_unit_map(7, 5, 3);
  const GlobalCorrelationVolume v = global_correlation(a, b, 3);
  const auto oracle_scores = oracle::global_scores(a, b, 3);
  for (std::size_t i = 0; i < oracle_scores.size(); ++i) EXPECT_NEAR(v.scores[i], oracle_scores[i], 1e-5);
}

TEST(GlobalCorrelation, ShiftedMapRecoversOffsetAndSelfScore) {
  const FeatureMap fr = random_unit_map(12, 12, 4);
  const FeatureMap ft = shifted(fr, 2, 0, 5);
  const GlobalCorrelationVolume v = global_correlation(fr, ft, 3);
  const GlobalCorrelationVolume self = global_correlation(fr, fr, 3);
  const Flow flow = volume_to_flow(v, 10.0);
  for (int y = 1; y < 11; ++y)
    for (int x = 1; x < 8; ++x) {
      const std::size_t c = flow.cell(x, y);
      EXPECT_EQ(flow.v[c], (Vec2{2, 0}));
      EXPECT_NEAR(v.row(c)[flow.cell(x + 2, y)], self.row(c)[c], 1e-5);
    }
}

TEST(GlobalCorrelation, Errors) {
  const FeatureMap a = random_unit_map(4, 4, 1), b = random_unit_map(5, 4, 1);
  EXPECT_THROW(global_correlation(a, b, 3), Error);
  EXPECT_THROW(global_correlation(a, a, 2), Error);
}

TEST(VolumeToFlow, SelfVolumeGivesZeroFlow) {
  const FeatureMap f = random_unit_map(6, 6, 7);
  const Flow flow = volume_to_flow(global_correlation(f, f, 3), 10.0);
  for (std::size_t c = 0; c < flow.v.size(); ++c) {
    EXPECT_EQ(flow.v[c], (Vec2{0, 0}));
    EXPECT_GT(flow.confidence[c], 1.0 / 36.0);
  }
}

TEST(VolumeToFlow, SmallAlphaApproachesUniform) {
  const FeatureMap f = random_unit_map(5, 5, 8);
  const Flow flow = volume_to_flow(global_correlation(f, f, 3), 1e-9);
  for (double c : flow.confidence) EXPECT_NEAR(c, 1.0 / 25.0, 1e-6);
}

TEST(VolumeToFlow, ArgmaxInvariantToAlpha) {
  const FeatureMap a = random_unit_map(6, 6, 9), b = random_unit_map(6, 6, 10);
  const GlobalCorrelationVolume v = global_correlation(a, b, 3);
  const Flow f1 = volume_to_flow(v, 0.5), f2 = volume_to_flow(v, 50.0);
  EXPECT_EQ(f1.v, f2.v);
}

TEST(LocalCorrelation, CentreScoreIsOne) {
  const FeatureMap f = random_unit_map(8, 8, 11);
  const LocalCorrelationVolume v = local_correlation(f, f, 2);
  for (std::size_t c = 0; c < 64; ++c) {
    const auto row = v.row(c);
    EXPECT_NEAR(row[12], 1.0, 1e-6);
    EXPECT_EQ(std::max_element(row.begin(), row.end()) - row.begin(), 12);
  }
}

TEST(LocalCorrelation, ZeroFeaturesScoreZero) {
  const FeatureMap z(6, 6, kFeatureChannels);
  for (float s : local_correlation(z, random_unit_map(6, 6, 1), 4).scores) EXPECT_EQ(s, 0.0f);
}

TEST(LocalCorrelation, MatchesBruteForceAndRecoversShift) {
  const FeatureMap fr = random_unit_map(10, 10, 12);
  const FeatureMap ft = shifted(fr, 1, 1, 13);
  const LocalCorrelationVolume v = local_correlation(fr, ft, 4);
  const auto oracle_scores = oracle::local_scores(fr, ft, 4);
  for (std::size_t i = 0; i < oracle_scores.size(); ++i) EXPECT_NEAR(v.scores[i], oracle_scores[i], 1e-6);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      const auto row = v.row(static_cast<std::size_t>(y * 10 + x));
      EXPECT_EQ(std::max_element(row.begin(), row.end()) - row.begin(), 5 * 9 + 5);
    }
}

TEST(LocalVolumeToFlow, SymmetricVolumeGivesZero) {
  LocalCorrelationVolume v{1, 1, 1, {0.1f, 0.5f, 0.1f, 0.5f, 0.9f, 0.5f, 0.1f, 0.5f, 0.1f}};
  const Flow f = local_volume_to_flow(v, 10.0);
  EXPECT_NEAR(f.v[0].x, 0.0, 1e-12);
  EXPECT_NEAR(f.v[0].y, 0.0, 1e-12);
}

TEST(LocalVolumeToFlow, OneHotSaturates) {
  LocalCorrelationVolume v{1, 1, 1, std::vector<float>(9, 0.0f)};
  v.scores[1 * 3 + 2] = 1.0f;  // offset (1, 0)
  const Flow f = local_volume_to_flow(v, 200.0);
  EXPECT_NEAR(f.v[0].x, 1.0, 1e-9);
  EXPECT_NEAR(f.v[0].y, 0.0, 1e-9);
}

TEST(LocalVolumeToFlow, MatchesWeightedMean) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  LocalCorrelationVolume v{3, 2, 2, std::vector<float>(6 * 25)};
  for (float& s : v.scores) s = u(rng);
  const Flow f = local_volume_to_flow(v, 10.0);
  for (std::size_t c = 0; c < 6; ++c) {
    double z = 0.0, mx = 0.0, my = 0.0, best = 0.0;
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) {
        const double p = std::exp(10.0 * v.row(c)[(dy + 2) * 5 + dx + 2]);
        z += p;
        mx += p * dx;
        my += p * dy;
        best = std::max(best, p);
      }
    EXPECT_NEAR(f.v[c].x, mx / z, 1e-9);
    EXPECT_NEAR(f.v[c].y, my / z, 1e-9);
    EXPECT_NEAR(f.confidence[c], best / z, 1e-9);
  }
}

TEST(DumpVolume, Header) {
  const FeatureMap f = random_unit_map(3, 2, 1);
  const auto bytes = dump_volume(local_correlation(f, f, 1));
  ASSERT_EQ(bytes.size(), 8u + 16u + 6u * 9u * 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "EDFFDCOR");
  EXPECT_EQ(bytes[8], 1);   // local
  EXPECT_EQ(bytes[12], 3);  // width
  EXPECT_EQ(bytes[16], 2);  // height
  EXPECT_EQ(bytes[20], 9);  // depth
}
