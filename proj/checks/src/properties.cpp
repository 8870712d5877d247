#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "edffd/aggregator.hpp"
#include "edffd/checks/oracles.hpp"
#include "edffd/checks/suite.hpp"
#include "edffd/correlation.hpp"
#include "edffd/energies.hpp"
#include "edffd/ffd.hpp"
#include "edffd/params_json.hpp"
#include "edffd/synthetic.hpp"
#include "edffd/tps.hpp"

namespace edffd::checks {

namespace {

struct Property {
  const char* id;
  const char* name;
  bool (*run)(const SuiteOptions&, std::string&);
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

bool partition_of_unity(const SuiteOptions& o, std::string& d) {
  double worst = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double u = -2.0 + 4.0 * i / 1000.0;
    double s = 0.0;
    for (int k = -4; k <= 4; ++k) s += o.beta(u - k);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  d = "max |sum_k beta(u-k) - 1| = " + num(worst);
  return worst < 1e-12;
}

bool homography_round_trip(const SuiteOptions& o, std::string& d) {
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> u(-15.0, 15.0);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    FourPointMotion m;
    for (auto& c : m.d) c = {u(rng), u(rng)};
    const Homography h = four_point_to_homography(m, 320, 240);
    const FourPointMotion back = motion_from_homography(h, 320, 240);
    const Homography inv = invert_homography(h);
    for (int k = 0; k < 4; ++k) {
      worst = std::max(worst, norm(back.d[k] - m.d[k]));
      const Vec2 p{u(rng) * 10 + 160, u(rng) * 8 + 120};
      worst = std::max(worst, norm(inv.apply(h.apply(p)) - p));
    }
  }
  d = "max corner / point round-trip error " + num(worst);
  return worst < 1e-8;
}

bool psnr_identical(const SuiteOptions& o, std::string& d) {
  const ImageBuffer img = ProceduralTexture(o.seed).render(48, 40, 3);
  const double p = psnr_masked(img, img, Mask(48, 40, 1.0f));
  d = "psnr(I, I) = " + num(p);
  return std::isinf(p) && p > 0;
}

bool zero_fields(const SuiteOptions&, std::string& d) {
  const ControlGrid g(5, 7, 70, 50);
  double worst = 0.0;
  for (const auto& f : {bspline_ffd_field(g), edffd_field(g, 0.75), bspline_ffd_field(g, {.fast = true})}) {
    for (std::size_t i = 0; i < f.dx.size(); ++i) worst = std::max({worst, std::abs(f.dx[i]), std::abs(f.dy[i])});
  }
  d = "max |D| for zero displacements " + num(worst);
  return worst == 0.0;
}

bool bspline_translation(const SuiteOptions&, std::string& d) {
  ControlGrid g(6, 6, 96, 96);
  for (auto& v : g.displacements()) v = {2.5, -1.25};
  const DisplacementField f = bspline_ffd_field(g);
  double worst = 0.0;
  // Interior pixels have a full 4x4 support inside the lattice.
  for (int y = 16; y < 80; ++y)
    for (int x = 16; x < 80; ++x) worst = std::max(worst, norm(f.at(x, y) - Vec2{2.5, -1.25}));
  d = "interior deviation from constant displacement " + num(worst);
  return worst < 1e-12;
}

bool tps_interpolates(const SuiteOptions& o, std::string& d) {
  std::mt19937_64 rng(o.seed + 3);
  std::uniform_real_distribution<double> pos(0.0, 63.0), off(-3.0, 3.0);
  std::vector<Vec2> a, t;
  for (int i = 0; i < 12; ++i) {
    a.push_back({pos(rng), pos(rng)});
    t.push_back(a.back() + Vec2{off(rng), off(rng)});
  }
  const ThinPlateSpline tps(a, t);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, norm(a[i] + tps.displacement(a[i]) - t[i]));
  d = "max anchor residual " + num(worst);
  return worst < 1e-8;
}

bool flow_confidence(const SuiteOptions& o, std::string& d) {
  std::mt19937_64 rng(o.seed + 4);
  const ImageBuffer a = ProceduralTexture(o.seed, 12.0).render(96, 96, 1);
  const ImageBuffer b = ProceduralTexture(o.seed + 1, 12.0).render(96, 96, 1);
  const FeatureMap fa = extract_features(a, 8), fb = extract_features(b, 8);
  const GlobalCorrelationVolume vol = global_correlation(fa, fb, 3);
  const Flow f10 = volume_to_flow(vol, 10.0), f1 = volume_to_flow(vol, 1.0);
  const LocalCorrelationVolume lv = local_correlation(fa, fb, 3);
  const Flow lf = local_volume_to_flow(lv, 10.0);
  bool ok = f10.v == f1.v;  // argmax does not depend on alpha
  for (std::size_t i = 0; i < f10.v.size(); ++i) {
    ok = ok && f10.confidence[i] > 0.0 && f10.confidence[i] <= 1.0 && f1.confidence[i] <= f10.confidence[i] + 1e-12;
    ok = ok && lf.confidence[i] > 0.0 && lf.confidence[i] <= 1.0 && std::abs(lf.v[i].x) <= 3.0 &&
         std::abs(lf.v[i].y) <= 3.0;
  }
  d = ok ? "argmax alpha-invariant, confidences in (0, 1], soft offsets inside window" : "violated";
  return ok;
}

bool gll_equivalence(const SuiteOptions& o, std::string& d) {
  std::mt19937_64 rng(o.seed + 6);
  std::normal_distribution<double> n(0.0, 1.0);
  AsmaHead head = make_asma_head({24, 12, 12, 6}, 3, o.seed);
  for (auto& l : head.layers)
    for (double& b : l.biases) b = 0.1 * n(rng);
  std::vector<double> x(24);
  for (double& v : x) v = n(rng);
  const auto y = asma_forward(x, head);
  const auto ref = oracle::head_forward(x, head);
  double worst = oracle::relative_error(y, ref);

  // Swapping two groups through the grouped layers, with the matching input
  // columns of the dense output layer, leaves the output unchanged.
  AsmaHead swapped = head;
  for (std::size_t i = 0; i + 1 < swapped.layers.size(); ++i) {
    auto& l = swapped.layers[i];
    const std::size_t block = static_cast<std::size_t>(l.group_in()) * l.group_out();
    std::swap_ranges(l.weights.begin(), l.weights.begin() + block, l.weights.begin() + block);
    std::swap_ranges(l.biases.begin(), l.biases.begin() + l.group_out(), l.biases.begin() + l.group_out());
  }
  auto& last = swapped.layers.back();
  const int slice = head.layers[1].group_out();
  for (int r = 0; r < last.out; ++r)
    for (int c = 0; c < slice; ++c) std::swap(last.w(0, r, c), last.w(0, r, slice + c));
  std::vector<double> xs = x;
  std::swap_ranges(xs.begin(), xs.begin() + 8, xs.begin() + 8);
  const auto ys = asma_forward(xs, swapped);
  worst = std::max(worst, oracle::relative_error(ys, y));
  d = "max relative deviation " + num(worst);
  return worst < 1e-12;
}

bool inter_scale_invariance(const SuiteOptions& o, std::string& d) {
  std::mt19937_64 rng(o.seed + 9);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  ControlGrid g(5, 5, 60, 60), s(5, 5, 120, 120);
  for (int m = 0; m <= 5; ++m)
    for (int n = 0; n <= 5; ++n) {
      g.displacement(m, n) = {u(rng), u(rng)};
      s.displacement(m, n) = 2.0 * g.displacement(m, n);
    }
  const std::vector<bool> all(g.point_count(), true);
  const double a = inter_grid_loss(g, all), b = inter_grid_loss(s, all);
  d = "inter loss " + num(a) + " vs doubled " + num(b);
  return std::abs(a - b) < 1e-12 && a > 0.0;
}

bool content_matches_oracle(const SuiteOptions& o, std::string& d) {
  const int w = 40, h = 32;
  const ImageBuffer ir = ProceduralTexture(o.seed, 10.0).render(w, h, 3);
  const ImageBuffer it = ProceduralTexture(o.seed + 1, 10.0).render(w, h, 3);
  FourPointMotion m;
  m.d = {Vec2{1.5, 0.5}, Vec2{-1.0, 2.0}, Vec2{0.25, -1.0}, Vec2{-2.0, -0.5}};
  const Homography hm = four_point_to_homography(m, w, h);
  ControlGrid g(3, 3, w, h);
  g.displacement(1, 1) = {2.0, -1.0};
  g.displacement(2, 1) = {-0.5, 1.5};
  const DisplacementField f = edffd_field(g, 0.75);
  const SamplingMap stage = compose_sampling_map(hm, std::span(&f, 1), w, h);
  LossWeights lw;
  const double got = content_loss(ir, it, hm, std::span(&stage, 1), lw);
  const Homography inv = invert_homography(hm);
  const double expect =
      lw.lambda0 * oracle::masked_l1(ir, it, [&](int x, int y) { return hm.apply({double(x), double(y)}); }) +
      lw.lambda0 * oracle::masked_l1(it, ir, [&](int x, int y) { return inv.apply({double(x), double(y)}); }) +
      lw.lambda[0] * oracle::masked_l1(ir, it, [&](int x, int y) {
        return hm.apply({double(x), double(y)}) + f.at(x, y);
      });
  d = "content loss " + num(got) + " vs oracle " + num(expect) + ", gap " + num(std::abs(got - expect));
  // Warped images are stored in float, so each term carries up to ~6e-8 of
  // rounding per pixel relative to the double-precision oracle.
  return std::abs(got - expect) < 1e-6;
}

bool params_round_trip(const SuiteOptions& o, std::string& d) {
  std::mt19937_64 rng(o.seed + 12);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  WarpParams p;
  p.model = WarpModelKind::BSpline;
  p.width = 64;
  p.height = 48;
  FourPointMotion m;
  for (auto& c : m.d) c = {u(rng), u(rng)};
  p.h = four_point_to_homography(m, 64, 48);
  p.theta = 0.6;
  for (int s = 0; s < 2; ++s) {
    ControlGrid g(4 + s, 5 + s, 64, 48);
    for (auto& v : g.displacements()) v = {u(rng), u(rng)};
    p.stages.push_back(g);
  }
  const WarpParams q = params_from_json(to_json(p));
  const SamplingMap a = sampling_map_from_params(p), b = sampling_map_from_params(q);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.sx.size(); ++i)
    worst = std::max({worst, std::abs(a.sx[i] - b.sx[i]), std::abs(a.sy[i] - b.sy[i])});
  d = "replayed map deviation " + num(worst);
  return worst < 1e-9 && to_json(q) == to_json(p);
}

bool warp_deterministic(const SuiteOptions& o, std::string& d) {
  const ImageBuffer img = ProceduralTexture(o.seed, 16.0).render(80, 60, 3);
  ControlGrid g(4, 4, 80, 60);
  g.displacement(2, 2) = {3.0, -2.0};
  const DisplacementField f = edffd_field(g, 0.75);
  const SamplingMap map = compose_sampling_map(Homography::translation(0.5, 0.25), std::span(&f, 1), 80, 60);
  const WarpResult a = warp_image(img, map), b = warp_image(img, map);
  const bool same = std::equal(a.image.data().begin(), a.image.data().end(), b.image.data().begin()) &&
                    std::equal(a.mask.data().begin(), a.mask.data().end(), b.mask.data().begin());
  d = same ? "bit-identical on repeat" : "outputs differ";
  return same;
}

constexpr Property kProperties[] = {
    {"P1", "partition of unity", partition_of_unity},
    {"P2", "homography round trip", homography_round_trip},
    {"P3", "psnr of identical images", psnr_identical},
    {"P4", "zero displacements give zero fields", zero_fields},
    {"P5", "b-spline reproduces constant displacement", bspline_translation},
    {"P6", "tps interpolates anchors", tps_interpolates},
    {"P7", "flow argmax and confidence", flow_confidence},
    {"P8", "grouped layer matches dense oracle", gll_equivalence},
    {"P9", "inter-grid loss scale invariance", inter_scale_invariance},
    {"P10", "content loss matches oracle", content_matches_oracle},
    {"P11", "params json replay", params_round_trip},
    {"P12", "warp determinism", warp_deterministic},
};

}  // namespace

std::vector<CheckResult> run_properties(const SuiteOptions& opts) {
  std::vector<CheckResult> out;
  for (const Property& p : kProperties) {
    CheckResult r{p.id, p.name, false, {}, 0.0, 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r.pass = p.run(opts, r.detail);
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace edffd::checks
