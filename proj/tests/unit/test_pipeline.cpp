#include <gtest/gtest.h>

#include <cmath>

#include "edffd/error.hpp"
#include "edffd/pipeline.hpp"
#include "edffd/synthetic.hpp"

using namespace edffd;

namespace {

double max_corner_error(const Homography& a, const Homography& b, int w, int h) {
  double e = 0.0;
  for (Vec2 c : canvas_corners(w, h)) e = std::max(e, norm(a.apply(c) - b.apply(c)));
  return e;
}

double max_disp(const ControlGrid& g) {
  double m = 0.0;
  for (Vec2 d : g.displacements()) m = std::max({m, std::abs(d.x), std::abs(d.y)});
  return m;
}

ImageBuffer render_through(const ProceduralTexture& tex, const Homography& h, int w, int hgt) {
  return tex.render(compose_sampling_map(h, {}, w, hgt), 3);
}

}  // namespace

TEST(Config, Validation) {
  RegistrationConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.n_stages = 3;
  EXPECT_THROW(validate(cfg), Error);
  cfg = {};
  cfg.model = WarpModelKind::Tps;
  cfg.n_stages = 2;
  EXPECT_THROW(validate(cfg), Error);
  cfg = {};
  cfg.patch_k = 2;
  EXPECT_THROW(validate(cfg), Error);
}

TEST(HomographyStage, IdenticalImagesGiveIdentity) {
  const ImageBuffer img = ProceduralTexture(3).render(256, 256, 3);
  const Homography h = estimate_homography_stage(img, img, RegistrationConfig{});
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(h.matrix()[i], (i % 4 == 0) ? 1.0 : 0.0, 1e-6);
}

TEST(HomographyStage, IntegerTranslation) {
  const ProceduralTexture tex(4);
  const Homography truth = Homography::translation(16, 0);
  const ImageBuffer it = tex.render(256, 256, 3);
  const ImageBuffer ir = render_through(tex, truth, 256, 256);  // ir(x) = it(x + (16, 0))
  const Homography h = estimate_homography_stage(ir, it, RegistrationConfig{});
  EXPECT_LT(max_corner_error(h, truth, 256, 256), 0.5);
}

TEST(HomographyStage, MildProjectiveWarp) {
  const ProceduralTexture tex(5);
  FourPointMotion m;
  m.d = {Vec2{6, -4}, Vec2{-5, 3}, Vec2{4, 7}, Vec2{-8, -2}};
  const Homography truth = four_point_to_homography(m, 256, 256);
  const ImageBuffer ir = render_through(tex, truth, 256, 256);
  const ImageBuffer it = tex.render(256, 256, 3);
  const Homography h = estimate_homography_stage(ir, it, RegistrationConfig{});
  EXPECT_LT(max_corner_error(h, truth, 256, 256), 1.0);
}

TEST(HomographyStage, UnrelatedImagesFailCleanly) {
  const ImageBuffer a = ProceduralTexture(1).render(128, 128, 1);
  const ImageBuffer b(128, 128, 1, 0.5f);  // featureless
  try {
    estimate_homography_stage(a, b, RegistrationConfig{});
    SUCCEED();  // a degenerate but finite estimate is acceptable
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::InsufficientOverlap || e.code() == ErrorCode::DegenerateCorners);
  }
}

TEST(RefineStage, AlignedInputGivesNearZeroGrid) {
  const ImageBuffer img = ProceduralTexture(6).render(192, 192, 3);
  DescentTrace trace;
  const ControlGrid g =
      refine_stage(img, img, SamplingMap::identity(192, 192), {12, 12}, RegistrationConfig{}, 1, &trace);
  EXPECT_LT(max_disp(g), 0.1);
}

TEST(RefineStage, RecoversKnownEdffdField) {
  SyntheticSpec spec;
  spec.seed = 77;
  spec.max_corner_motion = 0.0;
  const SyntheticPair p = make_synthetic_pair(spec);
  RegistrationConfig cfg;
  DescentTrace trace;
  const ControlGrid g =
      refine_stage(p.reference, p.target, SamplingMap::identity(256, 256), {12, 12}, cfg, 1, &trace);
  const SamplingMap map = add_field(SamplingMap::identity(256, 256), stage_field(g, cfg));
  Mask interior(256, 256, 0.0f);
  for (int y = 16; y < 240; ++y)
    for (int x = 16; x < 240; ++x) interior.at(x, y) = 1.0f;
  EXPECT_LT(endpoint_error(map, p.truth, interior).mean, 1.0);

  ASSERT_FALSE(trace.loss.empty());
  for (std::size_t i = 1; i < trace.loss.size(); ++i) EXPECT_LE(trace.loss[i], trace.loss[i - 1]);
}

TEST(RefineStage, RidgeShrinksTheFit) {
  SyntheticSpec spec;
  spec.seed = 78;
  spec.max_corner_motion = 0.0;
  const SyntheticPair p = make_synthetic_pair(spec);
  RegistrationConfig cfg;
  cfg.max_iterations = 0;  // flow fit only
  double prev = std::numeric_limits<double>::infinity();
  for (double ridge : {1e-3, 1e2, 1e5}) {
    cfg.ridge = ridge;
    const ControlGrid g = refine_stage(p.reference, p.target, SamplingMap::identity(256, 256), {12, 12}, cfg, 1);
    double n2 = 0.0;
    for (double v : g.flat()) n2 += v * v;
    EXPECT_LE(n2, prev);
    prev = n2;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(Register, IdenticalImagesStayIdentical) {
  const ImageBuffer img = ProceduralTexture(8).render(128, 128, 3);
  const RegistrationResult r = register_pair(img, img, RegistrationConfig{});
  EXPECT_GT(psnr_masked(r.warped, img, r.mask), 45.0);
  EXPECT_NEAR(r.timing.inference_ms + r.timing.warp_ms, r.timing.total_ms, 1.0);
  EXPECT_GT(r.timing.total_ms, 0.0);
}

TEST(Register, HomographyOnlyPairKeepsGridSmall) {
  SyntheticSpec spec;
  spec.seed = 79;
  spec.max_displacement = 0.0;
  const SyntheticPair p = make_synthetic_pair(spec);
  const RegistrationResult r = register_pair(p.reference, p.target, RegistrationConfig{});
  EXPECT_LT(max_disp(r.grids.at(0)), 1.0);
}

TEST(Register, DeterministicAndReplayable) {
  SyntheticSpec spec;
  spec.seed = 80;
  spec.width = spec.height = 128;
  spec.max_corner_motion = 8.0;
  const SyntheticPair p = make_synthetic_pair(spec);
  const RegistrationResult a = register_pair(p.reference, p.target, RegistrationConfig{});
  const RegistrationResult b = register_pair(p.reference, p.target, RegistrationConfig{});
  EXPECT_EQ(a.map.sx, b.map.sx);
  EXPECT_EQ(a.map.sy, b.map.sy);
  EXPECT_EQ(to_json(a.params), to_json(b.params));
  const SamplingMap replay = sampling_map_from_params(params_from_json(to_json(a.params)));
  EXPECT_EQ(replay.sx, a.map.sx);
  EXPECT_FALSE(trace_csv(a).empty());
}

TEST(Register, SecondStageDoesNotLowerPsnr) {
  SyntheticSpec spec;
  spec.seed = 81;
  const SyntheticPair p = make_synthetic_pair(spec);
  RegistrationConfig cfg;
  const RegistrationResult one = register_pair(p.reference, p.target, cfg);
  cfg.n_stages = 2;
  const RegistrationResult two = register_pair(p.reference, p.target, cfg);
  ASSERT_EQ(two.grids.size(), 2u);
  EXPECT_EQ(two.grids[1].rows(), 18);
  EXPECT_GE(psnr_masked(two.warped, p.reference, two.mask), psnr_masked(one.warped, p.reference, one.mask));
}

TEST(Register, OtherModelsRun) {
  SyntheticSpec spec;
  spec.seed = 82;
  spec.width = spec.height = 128;
  spec.max_corner_motion = 6.0;
  spec.grid_rows = spec.grid_cols = 6;
  const SyntheticPair p = make_synthetic_pair(spec);
  const double before = psnr_masked(p.target, p.reference, Mask(128, 128, 1.0f));
  for (WarpModelKind m : {WarpModelKind::BSpline, WarpModelKind::Tps}) {
    RegistrationConfig cfg;
    cfg.model = m;
    cfg.grids[0] = {6, 6};
    const RegistrationResult r = register_pair(p.reference, p.target, cfg);
    EXPECT_EQ(r.params.model, m);
    EXPECT_GT(psnr_masked(r.warped, p.reference, r.mask), before + 5.0) << to_string(m);
  }
}

TEST(Register, RejectsSmallOrMismatchedImages) {
  EXPECT_THROW(register_pair(ImageBuffer(32, 32, 1), ImageBuffer(32, 32, 1), RegistrationConfig{}), Error);
  EXPECT_THROW(register_pair(ImageBuffer(64, 64, 1), ImageBuffer(64, 72, 1), RegistrationConfig{}), Error);
}
