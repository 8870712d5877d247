#include "edffd/pipeline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "edffd/correlation.hpp"
#include "edffd/error.hpp"
#include "edffd/tps.hpp"

namespace edffd {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kIrlsDelta = 1e-2;  // residual floor of the reweighting

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

Vec2 cell_centre(int cx, int cy, int d) {
  return {static_cast<double>(cx * d + d / 2), static_cast<double>(cy * d + d / 2)};
}

std::string message_of(const Error& e) {
  const std::string_view prefix = to_string(e.code());
  std::string text = e.what();
  if (text.starts_with(prefix)) text.erase(0, prefix.size() + 2);
  return text;
}

// Parabola vertex through three equally spaced scores, clamped to half a cell.
double parabolic_peak(double left, double centre, double right) {
  const double curvature = left - 2.0 * centre + right;
  if (curvature >= 0.0) return 0.0;
  return std::clamp(0.5 * (left - right) / curvature, -0.5, 0.5);
}

// Refines the integer argmax of one reference cell with its four target neighbours.
Vec2 subcell_flow(const GlobalCorrelationVolume& vol, int cx, int cy, Vec2 v) {
  const int tx = cx + static_cast<int>(v.x), ty = cy + static_cast<int>(v.y);
  const auto row = vol.row(static_cast<std::size_t>(cy) * vol.width + cx);
  auto score = [&](int x, int y) { return static_cast<double>(row[static_cast<std::size_t>(y) * vol.width + x]); };
  const double c = score(tx, ty);
  if (tx > 0 && tx + 1 < vol.width) v.x += parabolic_peak(score(tx - 1, ty), c, score(tx + 1, ty));
  if (ty > 0 && ty + 1 < vol.height) v.y += parabolic_peak(score(tx, ty - 1), c, score(tx, ty + 1));
  return v;
}

// Maps level-L pixel coordinates to level-0: x0 = 2^L x + (2^L - 1) / 2.
Homography level_to_base(int level) {
  const double s = std::ldexp(1.0, level);
  const double c = (s - 1.0) / 2.0;
  return Homography({s, 0, c, 0, s, c, 0, 0, 1});
}

Homography to_level(const Homography& h, int level) {
  if (level == 0) return h;
  const Homography a = level_to_base(level);
  return compose(invert_homography(a), compose(h, a));
}

Homography from_level(const Homography& h, int level) {
  if (level == 0) return h;
  const Homography a = level_to_base(level);
  return compose(a, compose(h, invert_homography(a)));
}

double motion_value(const ImageBuffer& ir, const ImageBuffer& it, const FourPointMotion& m) {
  try {
    const Homography h = four_point_to_homography(m, ir.width(), ir.height());
    return photometric_value(ir, it, compose_sampling_map(h, {}, ir.width(), ir.height()));
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

// Gauss-Newton on the corner motions with IRLS weights and backtracking.
FourPointMotion polish_motion(const ImageBuffer& ir, const ImageBuffer& it, FourPointMotion m,
                              int iterations, double min_step, DescentTrace* trace) {
  const int w = ir.width(), h = ir.height();
  double value = motion_value(ir, it, m);
  for (int iter = 0; iter < iterations && std::isfinite(value); ++iter) {
    const Homography hom = four_point_to_homography(m, w, h);
    const SamplingMap s = compose_sampling_map(hom, {}, w, h);
    const PixelEnergy e = photometric_energy(ir, it, s);
    const auto jac = four_point_jacobian(m, w, h);
    Eigen::Matrix<double, 8, 8> hess = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 1> grad = Eigen::Matrix<double, 8, 1>::Zero();
    const double inv_n = 1.0 / static_cast<double>(ir.pixel_count());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = s.index(x, y);
        if (e.ix[i] == 0.0 && e.iy[i] == 0.0) continue;
        const auto jh = homography_point_jacobian(hom, {static_cast<double>(x), static_cast<double>(y)});
        Eigen::Matrix<double, 8, 1> dh, dm;
        for (int k = 0; k < 8; ++k) dh[k] = e.ix[i] * jh[k] + e.iy[i] * jh[8 + k];
        for (int c = 0; c < 8; ++c) {
          double acc = 0.0;
          for (int r = 0; r < 8; ++r) acc += dh[r] * jac[r * 8 + c];
          dm[c] = acc;
        }
        const double r = e.residual[i];
        const double wgt = inv_n / std::sqrt(r * r + kIrlsDelta * kIrlsDelta);
        hess.noalias() += wgt * dm * dm.transpose();
        // dE/dm = rho'(r) / n * dr/dm with dr/dm = -dm.
        const double rho = r / std::sqrt(r * r + kCharbonnierEps * kCharbonnierEps) * inv_n;
        grad -= rho * dm;
      }
    }
    const double mu = 1e-6 * hess.trace() / 8.0 + 1e-15;
    hess.diagonal().array() += mu;
    const Eigen::Matrix<double, 8, 1> d = -hess.ldlt().solve(grad);
    if (!d.allFinite()) break;
    double t = 1.0;
    bool accepted = false;
    for (int tries = 0; tries < 12; ++tries, t *= 0.5) {
      FourPointMotion trial = m;
      for (int k = 0; k < 4; ++k) trial.d[k] += Vec2{t * d[2 * k], t * d[2 * k + 1]};
      const double v = motion_value(ir, it, trial);
      if (v < value) {
        m = trial;
        value = v;
        accepted = true;
        break;
      }
    }
    if (trace) {
      trace->loss.push_back(value);
      trace->step.push_back(accepted ? t * d.cwiseAbs().maxCoeff() : 0.0);
    }
    if (!accepted || t * d.cwiseAbs().maxCoeff() < min_step) break;
  }
  return m;
}

// Per-model weights: cell rows for the flow fit and the dense pixel basis.
struct StageBasis {
  std::vector<double> cells;  // cells x points, row-major
  BasisMatrix pixels;
};

std::vector<Vec2> lattice_anchors(const ControlGrid& g) {
  std::vector<Vec2> a(g.point_count());
  for (int m = 0; m <= g.rows(); ++m) {
    for (int n = 0; n <= g.cols(); ++n) a[g.index(m, n)] = g.anchor(m, n);
  }
  return a;
}

StageBasis make_stage_basis(const ControlGrid& layout, const RegistrationConfig& cfg,
                            std::span<const Vec2> cell_points) {
  const std::size_t k = layout.point_count();
  if (cfg.model == WarpModelKind::Tps) {
    const auto anchors = lattice_anchors(layout);
    std::vector<Vec2> pixels(static_cast<std::size_t>(layout.width()) * layout.height());
    for (int y = 0; y < layout.height(); ++y) {
      for (int x = 0; x < layout.width(); ++x) {
        pixels[static_cast<std::size_t>(y) * layout.width() + x] = {static_cast<double>(x),
                                                                    static_cast<double>(y)};
      }
    }
    return {tps_cardinal_weights(anchors, cell_points),
            BasisMatrix(layout.width(), layout.height(), k,
                        tps_cardinal_weights(anchors, pixels))};
  }
  const FfdModel model = cfg.model == WarpModelKind::BSpline ? FfdModel::BSpline : FfdModel::Edffd;
  std::vector<double> cells(cell_points.size() * k);
  for (std::size_t c = 0; c < cell_points.size(); ++c) {
    for (int m = 0; m <= layout.rows(); ++m) {
      for (int n = 0; n <= layout.cols(); ++n) {
        cells[c * k + layout.index(m, n)] =
            ffd_weight(model, layout, cfg.theta, m, n, cell_points[c].x, cell_points[c].y);
      }
    }
  }
  return {std::move(cells), BasisMatrix(model, layout, cfg.theta)};
}

// Diagonal curvature of the collinearity penalty per lattice point.
std::vector<double> inter_curvature(const ControlGrid& g, const std::vector<bool>& q) {
  std::vector<double> c(g.point_count(), 0.0);
  const std::size_t pairs = static_cast<std::size_t>(g.rows() + 1) * std::max(g.cols() - 1, 0) +
                            static_cast<std::size_t>(g.cols() + 1) * std::max(g.rows() - 1, 0);
  if (pairs == 0) return c;
  const double lx = g.spacing_x(), ly = g.spacing_y();
  const double hx = 2.0 / (static_cast<double>(pairs) * lx * lx);
  const double hy = 2.0 / (static_cast<double>(pairs) * ly * ly);
  for (int m = 0; m <= g.rows(); ++m) {
    for (int n = 0; n + 2 <= g.cols(); ++n) {
      const std::size_t a = g.index(m, n), b = g.index(m, n + 1), d = g.index(m, n + 2);
      if (q[a] && q[b] && q[d]) {
        c[a] += hx;
        c[b] += 2 * hx;
        c[d] += hx;
      }
    }
  }
  for (int n = 0; n <= g.cols(); ++n) {
    for (int m = 0; m + 2 <= g.rows(); ++m) {
      const std::size_t a = g.index(m, n), b = g.index(m + 1, n), d = g.index(m + 2, n);
      if (q[a] && q[b] && q[d]) {
        c[a] += hy;
        c[b] += 2 * hy;
        c[d] += hy;
      }
    }
  }
  return c;
}

void require_pair(const ImageBuffer& ir, const ImageBuffer& it) {
  if (ir.width() != it.width() || ir.height() != it.height()) {
    throw Error(ErrorCode::DimensionMismatch, "reference and target sizes differ");
  }
}

}  // namespace

void validate(const RegistrationConfig& cfg) {
  auto fail = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (cfg.n_stages < 1 || cfg.n_stages > 2) fail("n_stages must be 1 or 2");
  for (int i = 0; i < cfg.n_stages; ++i) {
    if (cfg.grids[i].rows < 1 || cfg.grids[i].cols < 1) fail("grid sizes must be positive");
    const int d = cfg.stage_downsample[i];
    if (d != 4 && d != 8 && d != 16) fail("stage downsample must be 4, 8 or 16");
  }
  if (cfg.model != WarpModelKind::Edffd && cfg.model != WarpModelKind::BSpline &&
      cfg.model != WarpModelKind::Tps) {
    fail("model must be edffd, bspline or tps");
  }
  if (cfg.model == WarpModelKind::Tps && cfg.n_stages != 1) fail("tps supports a single stage");
  if (!(cfg.theta > 0.0)) fail("theta must be positive");
  if (cfg.patch_k < 1 || cfg.patch_k % 2 == 0) fail("patch size K must be odd and positive");
  if (!(cfg.alpha > 0.0)) fail("alpha must be positive");
  if (cfg.radius < 1) fail("radius must be positive");
  if (cfg.pyramid_levels < 1) fail("pyramid_levels must be positive");
  if (cfg.global_downsample != 4 && cfg.global_downsample != 8 && cfg.global_downsample != 16) {
    fail("global downsample must be 4, 8 or 16");
  }
  if (cfg.max_global_cells < 16) fail("max_global_cells too small");
  if (!(cfg.refit_threshold > 0.0)) fail("refit_threshold must be positive");
  if (cfg.homography_iterations < 0 || cfg.max_iterations < 0) fail("iteration budgets must be >= 0");
  if (!(cfg.descent_step > 0.0)) fail("descent_step must be positive");
  if (!(cfg.ridge > 0.0)) fail("ridge must be positive");
  if (cfg.weights.lambda0 < 0.0 || cfg.weights.omega < 0.0) fail("loss weights must be nonnegative");
  if (cfg.weights.lambda.size() < static_cast<std::size_t>(cfg.n_stages)) {
    fail("one lambda weight per refinement stage is required");
  }
  for (double l : cfg.weights.lambda) {
    if (l < 0.0) fail("loss weights must be nonnegative");
  }
}

Homography estimate_homography_stage(const ImageBuffer& ir_in, const ImageBuffer& it_in,
                                     const RegistrationConfig& cfg, DescentTrace* trace) {
  require_pair(ir_in, it_in);
  const ImageBuffer ir = to_luminance(ir_in);
  const ImageBuffer it = to_luminance(it_in);
  const Pyramid pr = build_pyramid(ir, cfg.pyramid_levels);
  const Pyramid pt = build_pyramid(it, cfg.pyramid_levels);

  const int d = cfg.global_downsample;
  int level = 0;
  while (level + 1 < cfg.pyramid_levels &&
         static_cast<long>(pr.levels[level].width() / d) * (pr.levels[level].height() / d) >
             cfg.max_global_cells) {
    ++level;
  }
  const FeatureMap fr = extract_features(pr.levels[level], d);
  const FeatureMap ft = extract_features(pt.levels[level], d);
  const GlobalCorrelationVolume volume = global_correlation(fr, ft, cfg.patch_k);
  const Flow flow = volume_to_flow(volume, cfg.alpha);

  const Homography base = level_to_base(level);
  std::vector<Vec2> src, dst;
  std::vector<double> weights;
  for (int cy = 0; cy < flow.height; ++cy) {
    for (int cx = 0; cx < flow.width; ++cx) {
      const std::size_t c = flow.cell(cx, cy);
      const Vec2 p = cell_centre(cx, cy, d);
      src.push_back(base.apply(p));
      dst.push_back(base.apply(p + static_cast<double>(d) * subcell_flow(volume, cx, cy, flow.v[c])));
      weights.push_back(flow.confidence[c]);
    }
  }
  // Refits with a threshold shrinking towards refit_threshold; mismatched
  // cells far from the consensus would otherwise dominate a single fit.
  const std::vector<double> conf = weights;
  Homography h = fit_homography(src, dst, weights);
  std::vector<double> residual(src.size());
  for (int round = 0; round < 20; ++round) {
    std::vector<double> inlier;
    for (std::size_t i = 0; i < src.size(); ++i) {
      residual[i] = norm(h.apply(src[i]) - dst[i]);
      if (weights[i] > 0.0) inlier.push_back(residual[i]);
    }
    if (inlier.empty()) break;
    std::nth_element(inlier.begin(), inlier.begin() + inlier.size() / 2, inlier.end());
    const double tau = std::max(cfg.refit_threshold, 3.0 * inlier[inlier.size() / 2]);
    bool changed = false;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      const double w = residual[i] > tau ? 0.0 : conf[i];
      changed = changed || w != weights[i];
      weights[i] = w;
      if (w > 0.0) ++kept;
    }
    if (kept < 8) {
      throw Error(ErrorCode::InsufficientOverlap, "fewer than 8 correspondences survive the refit");
    }
    if (!changed && tau == cfg.refit_threshold) break;
    h = fit_homography(src, dst, weights);
  }

  if (trace) trace->stage = 0;
  for (int l = cfg.pyramid_levels - 1; l >= 0; --l) {
    const ImageBuffer& lr = pr.levels[l];
    const Homography hl = to_level(h, l);
    FourPointMotion m = motion_from_homography(hl, lr.width(), lr.height());
    // Coarse levels only need to hand over a good start; the finest level
    // runs to numerical convergence.
    m = polish_motion(lr, pt.levels[l], m, cfg.homography_iterations, l == 0 ? 1e-7 : 1e-3, trace);
    h = from_level(four_point_to_homography(m, lr.width(), lr.height()), l);
  }
  return h;
}

DisplacementField stage_field(const ControlGrid& grid, const RegistrationConfig& cfg) {
  if (cfg.model == WarpModelKind::Tps) {
    const auto anchors = lattice_anchors(grid);
    std::vector<Vec2> targets(anchors.size());
    for (std::size_t k = 0; k < anchors.size(); ++k) targets[k] = anchors[k] + grid.displacements()[k];
    return tps_field(anchors, targets, grid.width(), grid.height());
  }
  const FfdModel model = cfg.model == WarpModelKind::BSpline ? FfdModel::BSpline : FfdModel::Edffd;
  return ffd_field(model, grid, cfg.theta);
}

ControlGrid refine_stage(const ImageBuffer& ir_in, const ImageBuffer& it_in, const SamplingMap& prior,
                         GridSize size, const RegistrationConfig& cfg, int stage, DescentTrace* trace) {
  require_pair(ir_in, it_in);
  if (stage < 1 || static_cast<std::size_t>(stage) > cfg.weights.lambda.size() || stage > 2) {
    throw Error(ErrorCode::InvalidArgument, "refinement stage index out of range");
  }
  const ImageBuffer ir = to_luminance(ir_in);
  const ImageBuffer it = to_luminance(it_in);
  const int w = ir.width(), h = ir.height();
  if (prior.width != w || prior.height != h) {
    throw Error(ErrorCode::DimensionMismatch, "prior map canvas differs from images");
  }
  const int d = cfg.stage_downsample[static_cast<std::size_t>(stage - 1)];

  // Residual flow between the reference and the prior-warped target.
  const WarpResult warped = warp_image(it, prior);
  const FeatureMap fr = extract_features(ir, d);
  const FeatureMap ft = extract_features(warped.image, d);
  const Flow flow = local_volume_to_flow(local_correlation(fr, ft, cfg.radius), cfg.alpha);
  const double min_conf = 2.0 / ((2.0 * cfg.radius + 1) * (2.0 * cfg.radius + 1));
  std::vector<Vec2> points, targets;
  std::vector<double> conf;
  for (int cy = 0; cy < flow.height; ++cy) {
    for (int cx = 0; cx < flow.width; ++cx) {
      const std::size_t c = flow.cell(cx, cy);
      const Vec2 p = cell_centre(cx, cy, d);
      if (flow.confidence[c] < min_conf) continue;
      if (warped.mask.at(static_cast<int>(p.x), static_cast<int>(p.y)) < 0.5f) continue;
      points.push_back(p);
      targets.push_back(static_cast<double>(d) * flow.v[c]);
      conf.push_back(flow.confidence[c]);
    }
  }

  ControlGrid grid(size.rows, size.cols, w, h);
  const auto k = static_cast<Eigen::Index>(grid.point_count());
  StageBasis basis = make_stage_basis(grid, cfg, points);

  // Ridge least squares, shared normal matrix for x and y.
  Eigen::MatrixXd normal = cfg.ridge * Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(k, 2);
  for (std::size_t c = 0; c < points.size(); ++c) {
    const Eigen::Map<const Eigen::VectorXd> a(basis.cells.data() + c * static_cast<std::size_t>(k), k);
    normal.noalias() += conf[c] * a * a.transpose();
    rhs.col(0) += conf[c] * targets[c].x * a;
    rhs.col(1) += conf[c] * targets[c].y * a;
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "flow fit system is singular");
  const Eigen::MatrixXd sol = ldlt.solve(rhs);
  if (!sol.allFinite()) throw Error(ErrorCode::SingularSystem, "flow fit produced non-finite values");
  for (Eigen::Index i = 0; i < k; ++i) grid.displacements()[static_cast<std::size_t>(i)] = {sol(i, 0), sol(i, 1)};

  // Descent on lambda_i * photometric + omega * (intra + inter).
  const double lambda = cfg.weights.lambda[static_cast<std::size_t>(stage - 1)];
  const double omega = cfg.weights.omega;
  const std::vector<bool> q = non_overlap_flags(grid, warp_ones(prior, w, h));
  auto objective = [&](const ControlGrid& g) {
    try {
      const SamplingMap s = add_field(prior, basis.pixels.apply(g));
      return lambda * photometric_value(ir, it, s) + omega * (intra_grid_loss(g) + inter_grid_loss(g, q));
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  auto gradient = [&](const ControlGrid& g, PixelEnergy* energy_out) {
    PixelEnergy e = photometric_energy(ir, it, add_field(prior, basis.pixels.apply(g)));
    const auto adj = basis.pixels.adjoint(e.gx, e.gy);
    const auto intra = intra_grid_grad(g);
    const auto inter = inter_grid_grad(g, q);
    Eigen::VectorXd out(2 * k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto u = static_cast<std::size_t>(i);
      out[2 * i] = lambda * adj[u].x + omega * (intra[u].x + inter[u].x);
      out[2 * i + 1] = lambda * adj[u].y + omega * (intra[u].y + inter[u].y);
    }
    if (energy_out) *energy_out = std::move(e);
    return out;
  };

  if (trace) trace->stage = stage;
  if (cfg.max_iterations == 0) return grid;
  double value = objective(grid);
  {
    // The flow fit only seeds the descent; keep the prior when it scores better.
    const ControlGrid zero(size.rows, size.cols, w, h);
    const double v0 = objective(zero);
    if (!(value <= v0)) {
      grid = zero;
      value = v0;
    }
  }
  if (!std::isfinite(value)) return grid;

  // Gauss-Newton preconditioner from IRLS weights of the current residuals.
  const std::size_t npix = ir.pixel_count();
  const double scale = lambda / static_cast<double>(npix);
  // Subsample pixels for the curvature while keeping ~8 rows per unknown.
  int gram_stride = 4;
  while (gram_stride > 1 && npix / static_cast<std::size_t>(gram_stride * gram_stride) <
                                8 * static_cast<std::size_t>(k)) {
    gram_stride /= 2;
  }
  auto preconditioner = [&](const PixelEnergy& e) {
    std::vector<double> wxx(npix), wxy(npix), wyy(npix);
    for (std::size_t i = 0; i < npix; ++i) {
      const double r = e.residual[i];
      const double wgt = scale / std::sqrt(r * r + kIrlsDelta * kIrlsDelta);
      wxx[i] = wgt * e.ix[i] * e.ix[i];
      wxy[i] = wgt * e.ix[i] * e.iy[i];
      wyy[i] = wgt * e.iy[i] * e.iy[i];
    }
    const auto gxx = basis.pixels.gram(wxx, gram_stride);
    const auto gxy = basis.pixels.gram(wxy, gram_stride);
    const auto gyy = basis.pixels.gram(wyy, gram_stride);
    Eigen::MatrixXd m(2 * k, 2 * k);
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index c = 0; c < k; ++c) {
        const auto idx = static_cast<std::size_t>(r * k + c);
        m(2 * r, 2 * c) = gxx[idx];
        m(2 * r, 2 * c + 1) = gxy[idx];
        m(2 * r + 1, 2 * c) = gxy[idx];
        m(2 * r + 1, 2 * c + 1) = gyy[idx];
      }
    }
    const auto curv = inter_curvature(grid, q);
    const double mu = 1e-6 * m.diagonal().mean() + 1e-15;
    for (Eigen::Index i = 0; i < k; ++i) {
      const double extra = omega * curv[static_cast<std::size_t>(i)] + mu;
      m(2 * i, 2 * i) += extra;
      m(2 * i + 1, 2 * i + 1) += extra;
    }
    return Eigen::LDLT<Eigen::MatrixXd>(m);
  };

  PixelEnergy energy;
  Eigen::VectorXd g = gradient(grid, &energy);
  Eigen::LDLT<Eigen::MatrixXd> pre = preconditioner(energy);
  bool fresh = true;  // preconditioner built at the current grid

  double step = cfg.descent_step;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const Eigen::VectorXd dir = -pre.solve(g);
    const double dmax = dir.cwiseAbs().maxCoeff();
    if (!std::isfinite(dmax) || dmax < 1e-6) break;
    const double t = std::min(1.0, step / dmax);
    ControlGrid trial = grid;
    for (Eigen::Index i = 0; i < k; ++i) {
      trial.displacements()[static_cast<std::size_t>(i)] += Vec2{t * dir[2 * i], t * dir[2 * i + 1]};
    }
    const double v = objective(trial);
    const bool accept = v < value;
    if (accept) {
      grid = std::move(trial);
      value = v;
      step = std::min(2.0 * step, 8.0);
      fresh = false;
    } else if (!fresh) {
      // A failed step after moving: relinearise before shrinking the step.
      g = gradient(grid, &energy);
      pre = preconditioner(energy);
      fresh = true;
    } else {
      step *= 0.5;
    }
    if (accept) g = gradient(grid, nullptr);
    if (trace) {
      trace->loss.push_back(value);
      trace->step.push_back(accept ? t * dmax : 0.0);
    }
    if (accept && t * dmax < 1e-4) break;
    if (!accept && step < 1e-4) break;
  }
  return grid;
}

RegistrationResult register_pair(const ImageBuffer& ir, const ImageBuffer& it,
                                 const RegistrationConfig& cfg) {
  validate(cfg);
  require_pair(ir, it);
  if (ir.width() < 64 || ir.height() < 64) {
    throw Error(ErrorCode::TooSmall, "registration needs images of at least 64x64");
  }
  const int w = ir.width(), h = ir.height();
  RegistrationResult res;
  const auto t0 = Clock::now();
  const ImageBuffer lr = to_luminance(ir);
  const ImageBuffer lt = to_luminance(it);

  DescentTrace trace0;
  try {
    res.h = estimate_homography_stage(lr, lt, cfg, &trace0);
  } catch (const Error& e) {
    throw Error(e.code(), "homography stage: " + message_of(e));
  }
  res.traces.push_back(std::move(trace0));
  SamplingMap prior = compose_sampling_map(res.h, {}, w, h);
  for (int i = 0; i < cfg.n_stages; ++i) {
    DescentTrace trace;
    ControlGrid grid;
    try {
      grid = refine_stage(lr, lt, prior, cfg.grids[static_cast<std::size_t>(i)], cfg, i + 1, &trace);
    } catch (const Error& e) {
      throw Error(e.code(), "refinement stage " + std::to_string(i + 1) + ": " + message_of(e));
    }
    prior = add_field(prior, stage_field(grid, cfg));
    res.grids.push_back(std::move(grid));
    res.traces.push_back(std::move(trace));
  }

  WarpParams& p = res.params;
  p.model = cfg.model;
  p.width = w;
  p.height = h;
  p.h = res.h;
  p.theta = cfg.theta;
  p.composition = Composition::Additive;
  if (cfg.model == WarpModelKind::Tps) {
    const ControlGrid& g = res.grids.front();
    p.tps_anchors = lattice_anchors(g);
    for (std::size_t k = 0; k < p.tps_anchors.size(); ++k) {
      p.tps_targets.push_back(p.tps_anchors[k] + g.displacements()[k]);
    }
  } else {
    p.stages = res.grids;
  }
  const auto t1 = Clock::now();

  res.map = sampling_map_from_params(p);
  WarpResult warped = warp_image(it, res.map);
  res.warped = std::move(warped.image);
  res.mask = std::move(warped.mask);
  const auto t2 = Clock::now();

  res.timing.inference_ms = ms_between(t0, t1);
  res.timing.warp_ms = ms_between(t1, t2);
  res.timing.total_ms = res.timing.inference_ms + res.timing.warp_ms;
  return res;
}

std::string trace_csv(const RegistrationResult& result) {
  std::ostringstream out;
  out.precision(10);
  out << "stage,iteration,loss,step\n";
  for (const auto& t : result.traces) {
    for (std::size_t i = 0; i < t.loss.size(); ++i) {
      out << t.stage << ',' << i << ',' << t.loss[i] << ',' << t.step[i] << '\n';
    }
  }
  return out.str();
}

}  // namespace edffd
