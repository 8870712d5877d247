#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "edffd/aggregator.hpp"
#include "edffd/basis.hpp"
#include "edffd/checks/oracles.hpp"
#include "edffd/checks/suite.hpp"
#include "edffd/correlation.hpp"
#include "edffd/energies.hpp"
#include "edffd/error.hpp"
#include "edffd/ffd.hpp"
#include "edffd/image_io.hpp"
#include "edffd/params_json.hpp"
#include "edffd/pipeline.hpp"
#include "edffd/synthetic.hpp"
#include "edffd/tps.hpp"

namespace edffd::checks {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

template <typename Body>
CheckResult timed(std::string id, std::string name, double budget, Body&& body) {
  CheckResult r{std::move(id), std::move(name), false, {}, 0.0, budget};
  const auto t0 = Clock::now();
  try {
    r.pass = body(r.detail);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  if (budget > 0.0 && r.seconds >= budget) {
    r.pass = false;
    r.detail += fmt(" [over runtime budget %.0f s]", budget);
  }
  return r;
}

double max_abs_diff(const DisplacementField& a, const DisplacementField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.dx.size(); ++i) {
    m = std::max({m, std::abs(a.dx[i] - b.dx[i]), std::abs(a.dy[i] - b.dy[i])});
  }
  return m;
}

// One-sided cubic extrapolation of value, slope and curvature at t from
// samples at t + side*h*{1,2,3,4}; exact for a cubic piece.
std::array<double, 3> one_sided(const std::function<double(double)>& f, double t, double h, int side) {
  Eigen::Matrix4d v;
  Eigen::Vector4d y;
  for (int i = 0; i < 4; ++i) {
    const double s = side * (i + 1.0);
    for (int j = 0; j < 4; ++j) v(i, j) = std::pow(s, j);
    y[i] = f(t + s * h);
  }
  const Eigen::Vector4d c = v.fullPivLu().solve(y);
  return {c[0], c[1] / h, 2.0 * c[2] / (h * h)};
}

ImageBuffer crop(const ImageBuffer& img, int border) {
  ImageBuffer out(img.width() - 2 * border, img.height() - 2 * border, img.channels());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(x + border, y + border, c);
  return out;
}

void split(const Dataset& all, std::size_t n_train, Dataset& train, Dataset& test) {
  for (std::size_t i = 0; i < all.size(); ++i) {
    Dataset& d = i < n_train ? train : test;
    d.inputs.push_back(all.inputs[i]);
    d.targets.push_back(all.targets[i]);
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

SuiteOptions default_options() {
  SuiteOptions o;
  o.beta = [](double u) { return cubic_bspline(u); };
  return o;
}

CheckResult criterion_basis(const SuiteOptions& opts) {
  return timed("AC1", "basis correctness", 1.0, [&](std::string& detail) {
    const auto& beta = opts.beta;
    const bool exact = beta(0.0) == 2.0 / 3.0 && beta(1.0) == 1.0 / 6.0;
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    double pu = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double u = dist(rng);
      double s = 0.0;
      for (int k = -6; k <= 6; ++k) s += beta(u - k);
      pu = std::max(pu, std::abs(s - 1.0));
    }
    double jump = 0.0;
    for (double h : {1e-1, 1e-2, 1e-3}) {
      for (double t : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
        const auto l = one_sided(beta, t, h, -1);
        const auto r = one_sided(beta, t, h, +1);
        for (int k = 0; k < 3; ++k) jump = std::max(jump, std::abs(l[k] - r[k]));
      }
    }
    detail = fmt("exact knots %s, partition-of-unity error %.2e (< 1e-12), C2 jump %.2e (< 1e-6)",
                 exact ? "yes" : "no", pu, jump);
    return exact && pu < 1e-12 && jump < 1e-6;
  });
}

CheckResult criterion_field_equivalence(const SuiteOptions& opts) {
  return timed("AC2", "field equivalence vs double-sum oracles", 10.0, [&](std::string& detail) {
    std::mt19937_64 rng(opts.seed + 2);
    std::uniform_int_distribution<int> size(8, 64), cells(1, 8);
    std::uniform_real_distribution<double> disp(-5.0, 5.0), theta(0.5, 1.5);
    double worst = 0.0;
    for (int c = 0; c < 20; ++c) {
      ControlGrid g(cells(rng), cells(rng), size(rng), size(rng));
      for (auto& d : g.displacements()) d = {disp(rng), disp(rng)};
      const double th = theta(rng);
      worst = std::max(worst, max_abs_diff(bspline_ffd_field(g), oracle::bspline_field(g)));
      worst = std::max(worst, max_abs_diff(bspline_ffd_field(g, {.fast = true}), oracle::bspline_field(g)));
      worst = std::max(worst, max_abs_diff(edffd_field(g, th), oracle::edffd_field(g, th)));
    }
    detail = fmt("max |field - oracle| = %.2e over 20 cases (< 1e-6)", worst);
    return worst < 1e-6;
  });
}

CheckResult criterion_identity_warps(const SuiteOptions& opts) {
  return timed("AC3", "identity warps", 5.0, [&](std::string& detail) {
    const double periods[5] = {12.0, 16.0, 24.0, 32.0, 48.0};
    const int sizes[5][2] = {{128, 96}, {96, 128}, {160, 120}, {128, 128}, {200, 150}};
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 5; ++i) {
      const int w = sizes[i][0], h = sizes[i][1];
      const ImageBuffer img =
          ProceduralTexture(opts.seed * 17 + static_cast<std::uint64_t>(i), periods[i], 5).render(w, h, 3);
      const ImageBuffer ref = crop(img, 4);
      const Mask all(w - 8, h - 8, 1.0f);
      auto check = [&](const SamplingMap& map) {
        worst = std::min(worst, psnr_masked(crop(warp_image(img, map).image, 4), ref, all));
      };
      const Homography hz = four_point_to_homography(FourPointMotion{}, w, h);
      check(compose_sampling_map(hz, {}, w, h));
      const ControlGrid g(12, 12, w, h);
      const std::vector<DisplacementField> fields{edffd_field(g, 0.75), bspline_ffd_field(g)};
      for (const auto& f : fields) check(compose_sampling_map(hz, std::span(&f, 1), w, h));
      std::vector<Vec2> anchors;
      for (int m = 0; m <= 4; ++m)
        for (int n = 0; n <= 4; ++n) anchors.push_back(g.anchor(m * 3, n * 3));
      const DisplacementField tf = tps_field(anchors, anchors, w, h);
      check(compose_sampling_map(hz, std::span(&tf, 1), w, h));
    }
    detail = fmt("minimum interior PSNR %.1f dB over 5 images x 4 models (> 50 dB)", worst);
    return worst > 50.0;
  });
}

CheckResult criterion_gradients(const SuiteOptions& opts) {
  return timed("AC4", "gradient checks", 30.0, [&](std::string& detail) {
    double worst_h = 0.0, worst_e = 0.0, worst_a = 0.0;
    for (int s = 0; s < 10; ++s) {
      const std::uint64_t seed = opts.seed * 101 + static_cast<std::uint64_t>(s);
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> mag(0.3, 1.5), small(-0.3, 0.3), shift(-0.5, 0.5);
      const ProceduralTexture tex(seed, 8.0, 3);
      const int n = 32;
      const ImageBuffer it = tex.render(n, n, 1);
      SamplingMap moved = SamplingMap::identity(n, n);
      const double ox = shift(rng), oy = shift(rng);
      for (std::size_t i = 0; i < moved.sx.size(); ++i) {
        moved.sx[i] += ox;
        moved.sy[i] += oy;
      }
      const ImageBuffer ir = tex.render(moved, 1);

      // Corner motions point inwards so every sample stays inside the canvas.
      FourPointMotion m;
      const double sx[4] = {1, -1, 1, -1}, sy[4] = {1, 1, -1, -1};
      for (int k = 0; k < 4; ++k) m.d[k] = {sx[k] * mag(rng), sy[k] * mag(rng)};
      std::vector<double> flat;
      for (const Vec2& d : m.d) {
        flat.push_back(d.x);
        flat.push_back(d.y);
      }
      const auto analytic_h = photometric_grad(ir, it, m).grad;
      const auto fd_h = oracle::central_difference(
          [&](std::span<const double> p) {
            FourPointMotion q;
            for (int k = 0; k < 4; ++k) q.d[k] = {p[2 * k], p[2 * k + 1]};
            return photometric_grad(ir, it, q).value;
          },
          flat, 1e-3);
      worst_h = std::max(worst_h, oracle::relative_error(analytic_h, fd_h));

      // EDFFD control displacements on top of a prior shrunk towards the centre.
      SamplingMap prior = SamplingMap::identity(n, n);
      const double c = (n - 1) / 2.0;
      for (std::size_t i = 0; i < prior.sx.size(); ++i) {
        prior.sx[i] = c + 0.85 * (prior.sx[i] - c);
        prior.sy[i] = c + 0.85 * (prior.sy[i] - c);
      }
      ControlGrid g(4, 4, n, n);
      for (auto& d : g.displacements()) d = {small(rng), small(rng)};
      const auto analytic_e = photometric_grad(ir, it, g, FfdModel::Edffd, 0.75, prior).grad;
      const auto fd_e = oracle::central_difference(
          [&](std::span<const double> p) {
            ControlGrid q = g;
            q.set_flat(p);
            return photometric_grad(ir, it, q, FfdModel::Edffd, 0.75, prior).value;
          },
          g.flat(), 1e-3);
      worst_e = std::max(worst_e, oracle::relative_error(analytic_e, fd_e));

      // ASMA head: all parameters and the input.
      AsmaHead head = make_asma_head({16, 8, 8, 4}, 4, seed);
      std::normal_distribution<double> normal(0.0, 0.5);
      for (auto& l : head.layers)
        for (double& b : l.biases) b = normal(rng);
      std::vector<double> x(16), up(4);
      for (double& v : x) v = normal(rng);
      for (double& v : up) v = normal(rng);
      auto loss = [&](const AsmaHead& hd, std::span<const double> in) {
        const auto y = asma_forward(in, hd);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
        return s;
      };
      const HeadGrad g_a = asma_backward(x, head, up);
      std::vector<double> analytic_a = g_a.input, fd_a = oracle::central_difference(
          [&](std::span<const double> p) { return loss(head, p); }, x, 1e-6);
      for (int li = 0; li < 3; ++li) {
        for (auto member : {&GroupLinear::weights, &GroupLinear::biases}) {
          const auto& params = head.layers[li].*member;
          const auto fd = oracle::central_difference(
              [&](std::span<const double> p) {
                AsmaHead copy = head;
                (copy.layers[li].*member).assign(p.begin(), p.end());
                return loss(copy, x);
              },
              params, 1e-6);
          const auto& an = member == &GroupLinear::weights ? g_a.layers[li].weights : g_a.layers[li].biases;
          analytic_a.insert(analytic_a.end(), an.begin(), an.end());
          fd_a.insert(fd_a.end(), fd.begin(), fd.end());
        }
      }
      worst_a = std::max(worst_a, oracle::relative_error(analytic_a, fd_a));
    }
    detail = fmt("relative error: homography %.2e, edffd %.2e (< 1e-4); asma %.2e (< 1e-5)", worst_h,
                 worst_e, worst_a);
    return worst_h < 1e-4 && worst_e < 1e-4 && worst_a < 1e-5;
  });
}

CheckResult criterion_correlation(const SuiteOptions& opts) {
  return timed("AC5", "correlation shift recovery", 5.0, [&](std::string& detail) {
    std::mt19937_64 rng(opts.seed + 5);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto random_map = [&](int w, int h) {
      FeatureMap f(w, h, kFeatureChannels);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          auto v = f.at(x, y);
          double n2 = 0.0;
          for (double& e : v) {
            e = normal(rng);
            n2 += e * e;
          }
          for (double& e : v) e /= std::sqrt(n2);
        }
      return f;
    };
    int failures = 0, checked = 0;
    for (int sy = -4; sy <= 4; sy += 2) {
      for (int sx = -4; sx <= 4; ++sx) {
        const FeatureMap fr = random_map(16, 16);
        FeatureMap ft = random_map(16, 16);
        // ft(p + s) = fr(p)
        for (int y = 0; y < 16; ++y)
          for (int x = 0; x < 16; ++x) {
            const int tx = x + sx, ty = y + sy;
            if (tx < 0 || ty < 0 || tx >= 16 || ty >= 16) continue;
            std::copy(fr.at(x, y).begin(), fr.at(x, y).end(), ft.at(tx, ty).begin());
          }
        const Flow g = volume_to_flow(global_correlation(fr, ft, 3), 10.0);
        const LocalCorrelationVolume lv = local_correlation(fr, ft, 4);
        const Flow l = local_volume_to_flow(lv, 200.0);
        for (int y = 1; y < 15; ++y)
          for (int x = 1; x < 15; ++x) {
            if (x + sx < 1 || y + sy < 1 || x + sx > 14 || y + sy > 14) continue;
            ++checked;
            const std::size_t c = g.cell(x, y);
            const auto row = lv.row(c);
            const auto best = std::max_element(row.begin(), row.end()) - row.begin();
            const bool ok = g.v[c] == Vec2{static_cast<double>(sx), static_cast<double>(sy)} &&
                            best == (sy + 4) * 9 + (sx + 4) && std::lround(l.v[c].x) == sx &&
                            std::lround(l.v[c].y) == sy;
            if (!ok) ++failures;
          }
      }
    }
    detail = fmt("%d of %d interior cells recovered exactly (shifts up to 4 cells)", checked - failures,
                 checked);
    return failures == 0 && checked > 0;
  });
}

CheckResult criterion_parameter_ratio(const SuiteOptions&) {
  return timed("AC6", "grouped-layer parameter ratio", 1.0, [&](std::string& detail) {
    bool exact = true;
    for (int g : {1, 2, 4, 8, 16}) {
      const ParamCount grouped = param_count(GroupLinear(1024, 512, g));
      const ParamCount dense = param_count(GroupLinear(1024, 512, 1));
      exact = exact && grouped.weights * static_cast<std::size_t>(g) == dense.weights &&
              grouped.biases == dense.biases;
    }
    const ParamCount gll = param_count(GroupLinear(1024, 512, 8));
    exact = exact && gll.weights == 65536 && gll.biases == 512;
    const HeadWidths w{2048, 1024, 512, 2 * 13 * 13};
    const auto asma = param_count(make_asma_head(w, 8, 1));
    const auto mlp = param_count(make_mlp_head(w, 1));
    // Independent arithmetic over the width chain.
    const double expect_asma = 2048.0 * 1024 / 8 + 1024.0 * 512 / 8 + 512.0 * 338;
    const double expect_mlp = 2048.0 * 1024 + 1024.0 * 512 + 512.0 * 338;
    const double ratio = static_cast<double>(asma.weights) / static_cast<double>(mlp.weights);
    detail = fmt("GLL weights = dense/N_g: %s; ASMA %zu vs MLP %zu weights, ratio %.3f (< 0.4)",
                 exact ? "exact" : "MISMATCH", asma.weights, mlp.weights, ratio);
    return exact && asma.weights == expect_asma && mlp.weights == expect_mlp && ratio < 0.4;
  });
}

CheckResult criterion_toy_aggregation(const SuiteOptions& opts) {
  return timed("AC7", "toy aggregation parity", 300.0, [&](std::string& detail) {
    ToySpec spec;
    spec.seed = opts.seed + 7;
    const Dataset all = make_toy_dataset(spec);
    Dataset train, test;
    split(all, 1600, train, test);
    const HeadWidths w{toy_input_width(spec), 128, 64, 8};
    TrainOptions t;
    t.epochs = 60;
    t.learning_rate = 0.01;
    t.seed = opts.seed;
    AsmaHead asma = make_asma_head(w, 8, opts.seed + 70);
    MlpHead mlp = make_mlp_head(w, opts.seed + 70);
    const double base = mean_squared_error(asma, test);
    const TrainReport ra = train_toy_regressor(asma, train, test, t);
    const TrainReport rm = train_toy_regressor(mlp, train, test, t);
    const double weight_ratio = static_cast<double>(param_count(asma).weights) /
                                static_cast<double>(param_count(mlp).weights);
    const double ratio = ra.heldout_mse / rm.heldout_mse;
    detail = fmt("held-out MSE ASMA %.4f vs MLP %.4f (ratio %.3f <= 1.1; untrained %.4f), weight ratio %.3f",
                 ra.heldout_mse, rm.heldout_mse, ratio, base, weight_ratio);
    return ratio <= 1.1 && weight_ratio < 0.4 && ra.heldout_mse < base;
  });
}

CheckResult criterion_efficiency(const SuiteOptions& opts) {
  return timed("AC8", "EDFFD vs B-spline field evaluation speed", 120.0, [&](std::string& detail) {
    ControlGrid g(12, 12, 512, 512);
    std::mt19937_64 rng(opts.seed + 8);
    std::uniform_real_distribution<double> disp(-5.0, 5.0);
    for (auto& d : g.displacements()) d = {disp(rng), disp(rng)};
    auto time_ms = [&](auto&& fn) {
      fn();  // warm-up
      std::vector<double> runs;
      for (int i = 0; i < 5; ++i) {
        const auto t0 = Clock::now();
        fn();
        runs.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
      }
      return median(runs);
    };
    const double te = time_ms([&] { return edffd_field(g, 0.75); });
    const double tb = time_ms([&] { return bspline_ffd_field(g); });
    const double reduction = 1.0 - te / tb;
    detail = fmt("median edffd %.1f ms vs bspline %.1f ms: %.1f%% faster (>= 20%%)", te, tb, 100.0 * reduction);
    return reduction >= 0.2;
  });
}

CheckResult criterion_registration(const SuiteOptions& opts) {
  return timed("AC9", "synthetic end-to-end registration", 600.0, [&](std::string& detail) {
    const int pairs = opts.registration_pairs;
    double worst_epe = 0.0, worst_gain = std::numeric_limits<double>::infinity();
    double psnr1 = 0.0, psnr2 = 0.0;
    for (int i = 0; i < pairs; ++i) {
      SyntheticSpec spec;
      spec.seed = opts.seed * 1000 + static_cast<std::uint64_t>(i);
      const SyntheticPair p = make_synthetic_pair(spec);
      const int w = spec.width, h = spec.height;
      const double before = psnr_masked(p.target, p.reference, Mask(w, h, 1.0f));

      RegistrationConfig cfg;
      cfg.n_stages = 1;
      const RegistrationResult r1 = register_pair(p.reference, p.target, cfg);
      cfg.n_stages = 2;
      const RegistrationResult r2 = register_pair(p.reference, p.target, cfg);

      Mask interior(w, h, 0.0f);
      for (int y = 16; y < h - 16; ++y)
        for (int x = 16; x < w - 16; ++x) interior.at(x, y) = r1.mask.at(x, y);
      const EndpointError epe = endpoint_error(r1.map, p.truth, interior);
      const double after1 = psnr_masked(r1.warped, p.reference, r1.mask);
      const double after2 = psnr_masked(r2.warped, p.reference, r2.mask);
      worst_epe = std::max(worst_epe, epe.mean);
      worst_gain = std::min(worst_gain, after1 - before);
      psnr1 += after1 / pairs;
      psnr2 += after2 / pairs;
    }
    detail = fmt("%d pairs: worst mean EPE %.3f px (< 1), worst PSNR gain %.1f dB (>= 10), "
                 "mean PSNR 1 stage %.2f dB, 2 stages %.2f dB",
                 pairs, worst_epe, worst_gain, psnr1, psnr2);
    return worst_epe < 1.0 && worst_gain >= 10.0 && psnr2 >= psnr1;
  });
}

CheckResult criterion_losses(const SuiteOptions& opts) {
  return timed("AC10", "grid loss sanity", 5.0, [&](std::string& detail) {
    std::mt19937_64 rng(opts.seed + 10);
    std::uniform_int_distribution<int> cells(2, 10), size(32, 128);
    std::uniform_real_distribution<double> unit(-1.0, 1.0), stretch(0.0, 1.5);
    double zero = 0.0, worst = 0.0;
    for (int c = 0; c < 50; ++c) {
      ControlGrid g(cells(rng), cells(rng), size(rng), size(rng));
      Mask mask(g.width(), g.height(), 1.0f);
      const int bx = std::uniform_int_distribution<int>(0, g.width() - 1)(rng);
      for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x)
          if (x >= bx) mask.at(x, y) = 0.0f;
      zero = std::max({zero, intra_grid_loss(g), inter_grid_loss(g, mask)});
      for (auto& d : g.displacements()) {
        d = {unit(rng) * stretch(rng) * g.spacing_x(), unit(rng) * stretch(rng) * g.spacing_y()};
      }
      worst = std::max(worst, std::abs(intra_grid_loss(g) - oracle::intra_grid_loss(g)));
      worst = std::max(worst, std::abs(inter_grid_loss(g, mask) - oracle::inter_grid_loss(g, mask)));
    }

    // Linearity of the total in omega on one random pair.
    const ImageBuffer a = ProceduralTexture(opts.seed, 16.0, 3).render(64, 64, 1);
    const ImageBuffer b = ProceduralTexture(opts.seed + 1, 16.0, 3).render(64, 64, 1);
    const Homography h = Homography::translation(1.5, -0.5);
    ControlGrid g(4, 4, 64, 64);
    for (auto& d : g.displacements()) d = {unit(rng) * 4, unit(rng) * 4};
    const DisplacementField f = edffd_field(g, 0.75);
    const SamplingMap stage = compose_sampling_map(h, std::span(&f, 1), 64, 64);
    const double content = content_loss(a, b, h, std::span(&stage, 1), LossWeights{});
    const double shape = intra_grid_loss(g) + inter_grid_loss(g, Mask(64, 64, 0.0f));
    const double l0 = total_loss(content, shape, 0.0), l1 = total_loss(content, shape, 3.5),
                 l2 = total_loss(content, shape, 10.0);
    const double slope_gap = std::abs((l1 - l0) / 3.5 - (l2 - l0) / 10.0);
    const bool linear = l0 == content && slope_gap < 1e-12 && std::abs((l2 - l0) / 10.0 - shape) < 1e-12;
    detail = fmt("undeformed max %.1e (== 0), max |loss - oracle| %.2e (< 1e-9), omega slope gap %.1e", zero,
                 worst, slope_gap);
    return zero == 0.0 && worst < 1e-9 && linear;
  });
}

const std::vector<Criterion>& acceptance_criteria() {
  static const std::vector<Criterion> all{
      criterion_basis,          criterion_field_equivalence, criterion_identity_warps,
      criterion_gradients,      criterion_correlation,       criterion_parameter_ratio,
      criterion_toy_aggregation, criterion_efficiency,       criterion_registration,
      criterion_losses};
  return all;
}

std::vector<CheckResult> run_acceptance(const SuiteOptions& opts,
                                        const std::function<void(const CheckResult&)>& on_result) {
  std::vector<CheckResult> out;
  for (Criterion c : acceptance_criteria()) {
    out.push_back(c(opts));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_row(const CheckResult& r) {
  std::ostringstream s;
  s << (r.pass ? "PASS" : "FAIL") << "  " << r.id << "  " << r.name << "  ("
    << fmt("%.2f s", r.seconds);
  if (r.budget_seconds > 0.0) s << fmt(" / %.0f s", r.budget_seconds);
  s << ")  " << r.detail;
  return s.str();
}

void emit_fixtures(const std::filesystem::path& dir, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.seed = seed;
  const SyntheticPair p = make_synthetic_pair(spec);
  std::filesystem::create_directories(dir);
  io::write_image(dir / "reference.png", p.reference);
  io::write_image(dir / "target.png", p.target);
  WarpParams truth;
  truth.model = WarpModelKind::Edffd;
  truth.width = spec.width;
  truth.height = spec.height;
  truth.h = p.h;
  truth.theta = spec.theta;
  truth.stages = {p.grid};
  const std::string json = to_json(truth);
  io::write_file_atomic(dir / "truth.json", std::vector<std::uint8_t>(json.begin(), json.end()));
}

}  // namespace edffd::checks
