#include "edffd/energies.hpp"

#include <algorithm>
#include <cmath>

#include "edffd/error.hpp"
#include "edffd/parallel.hpp"

namespace edffd {

namespace {

double masked_abs_mean(const ImageBuffer& base, const WarpResult& warped) {
  const int c = base.channels();
  double total = 0.0;
  for (int y = 0; y < base.height(); ++y) {
    double row = 0.0;
    for (int x = 0; x < base.width(); ++x) {
      const double m = warped.mask.at(x, y);
      for (int k = 0; k < c; ++k) row += std::abs(base.at(x, y, k) * m - warped.image.at(x, y, k));
    }
    total += row;
  }
  return total / (static_cast<double>(base.pixel_count()) * c);
}

void require_same(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::DimensionMismatch, "images differ in shape");
}

int horizontal_edges(const ControlGrid& g) { return (g.rows() + 1) * g.cols(); }
int vertical_edges(const ControlGrid& g) { return g.rows() * (g.cols() + 1); }

// Calls f(a, b, c) with lattice indices of every consecutive edge pair.
template <typename F>
void for_each_edge_pair(const ControlGrid& g, F&& f) {
  for (int m = 0; m <= g.rows(); ++m) {
    for (int n = 0; n + 2 <= g.cols(); ++n) f(g.index(m, n), g.index(m, n + 1), g.index(m, n + 2));
  }
  for (int n = 0; n <= g.cols(); ++n) {
    for (int m = 0; m + 2 <= g.rows(); ++m) f(g.index(m, n), g.index(m + 1, n), g.index(m + 2, n));
  }
}

std::vector<Vec2> deformed_points(const ControlGrid& g) {
  std::vector<Vec2> p(g.point_count());
  for (int m = 0; m <= g.rows(); ++m) {
    for (int n = 0; n <= g.cols(); ++n) p[g.index(m, n)] = g.deformed(m, n);
  }
  return p;
}

std::size_t pair_count(const ControlGrid& g) {
  return static_cast<std::size_t>(g.rows() + 1) * std::max(g.cols() - 1, 0) +
         static_cast<std::size_t>(g.cols() + 1) * std::max(g.rows() - 1, 0);
}

void require_single_channel(const ImageBuffer& ir, const ImageBuffer& it) {
  require_same(ir, it);
  if (ir.channels() != 1) {
    throw Error(ErrorCode::InvalidArgument, "photometric terms expect single-channel images");
  }
}

}  // namespace

double content_loss(const ImageBuffer& ir, const ImageBuffer& it, const Homography& h,
                    std::span<const SamplingMap> stage_maps, const LossWeights& w) {
  require_same(ir, it);
  if (stage_maps.size() > w.lambda.size()) {
    throw Error(ErrorCode::InvalidArgument, "fewer stage weights than stage maps");
  }
  const int width = ir.width(), height = ir.height();
  const SamplingMap fwd = compose_sampling_map(h, {}, width, height);
  const SamplingMap inv = compose_sampling_map(invert_homography(h), {}, width, height);
  double loss = w.lambda0 * masked_abs_mean(ir, warp_image(it, fwd));
  loss += w.lambda0 * masked_abs_mean(it, warp_image(ir, inv));
  for (std::size_t i = 0; i < stage_maps.size(); ++i) {
    if (stage_maps[i].width != width || stage_maps[i].height != height) {
      throw Error(ErrorCode::DimensionMismatch, "stage map canvas differs from images");
    }
    loss += w.lambda[i] * masked_abs_mean(ir, warp_image(it, stage_maps[i]));
  }
  return loss;
}

double intra_grid_loss(const ControlGrid& grid) {
  const double limit_x = 2.0 * grid.spacing_x();
  const double limit_y = 2.0 * grid.spacing_y();
  double h_sum = 0.0, v_sum = 0.0;
  for (int m = 0; m <= grid.rows(); ++m) {
    for (int n = 0; n < grid.cols(); ++n) {
      const Vec2 e = grid.deformed(m, n + 1) - grid.deformed(m, n);
      h_sum += std::max(e.x - limit_x, 0.0);
    }
  }
  for (int m = 0; m < grid.rows(); ++m) {
    for (int n = 0; n <= grid.cols(); ++n) {
      const Vec2 e = grid.deformed(m + 1, n) - grid.deformed(m, n);
      v_sum += std::max(e.y - limit_y, 0.0);
    }
  }
  return h_sum / horizontal_edges(grid) + v_sum / vertical_edges(grid);
}

std::vector<Vec2> intra_grid_grad(const ControlGrid& grid) {
  std::vector<Vec2> g(grid.point_count());
  const double limit_x = 2.0 * grid.spacing_x();
  const double limit_y = 2.0 * grid.spacing_y();
  const double wh = 1.0 / horizontal_edges(grid);
  const double wv = 1.0 / vertical_edges(grid);
  for (int m = 0; m <= grid.rows(); ++m) {
    for (int n = 0; n < grid.cols(); ++n) {
      if (grid.deformed(m, n + 1).x - grid.deformed(m, n).x > limit_x) {
        g[grid.index(m, n + 1)].x += wh;
        g[grid.index(m, n)].x -= wh;
      }
    }
  }
  for (int m = 0; m < grid.rows(); ++m) {
    for (int n = 0; n <= grid.cols(); ++n) {
      if (grid.deformed(m + 1, n).y - grid.deformed(m, n).y > limit_y) {
        g[grid.index(m + 1, n)].y += wv;
        g[grid.index(m, n)].y -= wv;
      }
    }
  }
  return g;
}

std::vector<bool> non_overlap_flags(const ControlGrid& grid, const Mask& overlap) {
  std::vector<bool> q(grid.point_count());
  for (int m = 0; m <= grid.rows(); ++m) {
    for (int n = 0; n <= grid.cols(); ++n) {
      const Vec2 a = grid.anchor(m, n);
      const int x = std::clamp(static_cast<int>(std::lround(a.x)), 0, overlap.width() - 1);
      const int y = std::clamp(static_cast<int>(std::lround(a.y)), 0, overlap.height() - 1);
      q[grid.index(m, n)] = overlap.at(x, y) < 0.5f;
    }
  }
  return q;
}

double inter_grid_loss(const ControlGrid& grid, const Mask& overlap) {
  return inter_grid_loss(grid, non_overlap_flags(grid, overlap));
}

double inter_grid_loss(const ControlGrid& grid, const std::vector<bool>& q) {
  const std::size_t pairs = pair_count(grid);
  if (pairs == 0) return 0.0;
  const auto p = deformed_points(grid);
  double sum = 0.0;
  for_each_edge_pair(grid, [&](std::size_t a, std::size_t b, std::size_t c) {
    if (!(q[a] && q[b] && q[c])) return;
    const Vec2 e1 = p[b] - p[a], e2 = p[c] - p[b];
    const double n1 = norm(e1), n2 = norm(e2);
    if (n1 < 1e-9 || n2 < 1e-9) throw Error(ErrorCode::ZeroLengthEdge, "collapsed grid edge");
    sum += 1.0 - dot(e1, e2) / (n1 * n2);
  });
  return sum / static_cast<double>(pairs);
}

std::vector<Vec2> inter_grid_grad(const ControlGrid& grid, const std::vector<bool>& q) {
  std::vector<Vec2> g(grid.point_count());
  const std::size_t pairs = pair_count(grid);
  if (pairs == 0) return g;
  const double scale = 1.0 / static_cast<double>(pairs);
  const auto p = deformed_points(grid);
  for_each_edge_pair(grid, [&](std::size_t a, std::size_t b, std::size_t c) {
    if (!(q[a] && q[b] && q[c])) return;
    const Vec2 e1 = p[b] - p[a], e2 = p[c] - p[b];
    const double n1 = norm(e1), n2 = norm(e2);
    if (n1 < 1e-9 || n2 < 1e-9) throw Error(ErrorCode::ZeroLengthEdge, "collapsed grid edge");
    const double cs = dot(e1, e2) / (n1 * n2);
    const Vec2 d1 = -scale * ((1.0 / (n1 * n2)) * e2 - (cs / (n1 * n1)) * e1);
    const Vec2 d2 = -scale * ((1.0 / (n1 * n2)) * e1 - (cs / (n2 * n2)) * e2);
    g[a] -= d1;
    g[b] += d1 - d2;
    g[c] += d2;
  });
  return g;
}

double total_loss(double content, double shape, double omega) noexcept {
  return content + omega * shape;
}

PixelEnergy photometric_energy(const ImageBuffer& ir, const ImageBuffer& it, const SamplingMap& s,
                               double eps) {
  require_single_channel(ir, it);
  const int w = ir.width(), h = ir.height();
  if (s.width != w || s.height != h) {
    throw Error(ErrorCode::DimensionMismatch, "sampling map canvas differs from images");
  }
  PixelEnergy e;
  const std::size_t n = ir.pixel_count();
  e.gx.assign(n, 0.0);
  e.gy.assign(n, 0.0);
  e.residual.assign(n, 0.0);
  e.ix.assign(n, 0.0);
  e.iy.assign(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> row_sum(static_cast<std::size_t>(h), 0.0);
  std::vector<std::size_t> row_valid(static_cast<std::size_t>(h), 0);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t yy = y0; yy < y1; ++yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < w; ++x) {
        const std::size_t i = s.index(x, y);
        const CubicSample c = sample_cubic(it, s.sx[i], s.sy[i]);
        if (!c.valid) continue;
        const double d = ir.at(x, y) - c.value;
        const double root = std::sqrt(d * d + eps * eps);
        row_sum[yy] += root - eps;
        ++row_valid[yy];
        // d rho / d s = rho'(d) * (-grad It)
        const double dr = d / root * inv_n;
        e.gx[i] = -dr * c.dx;
        e.gy[i] = -dr * c.dy;
        e.residual[i] = d;
        e.ix[i] = c.dx;
        e.iy[i] = c.dy;
      }
    }
  });
  for (int y = 0; y < h; ++y) {
    e.value += row_sum[static_cast<std::size_t>(y)];
    e.valid += row_valid[static_cast<std::size_t>(y)];
  }
  e.value *= inv_n;
  return e;
}

double photometric_value(const ImageBuffer& ir, const ImageBuffer& it, const SamplingMap& s,
                         double eps) {
  require_single_channel(ir, it);
  const int w = ir.width(), h = ir.height();
  if (s.width != w || s.height != h) {
    throw Error(ErrorCode::DimensionMismatch, "sampling map canvas differs from images");
  }
  std::vector<double> row_sum(static_cast<std::size_t>(h), 0.0);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t yy = y0; yy < y1; ++yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < w; ++x) {
        const std::size_t i = s.index(x, y);
        const CubicSample c = sample_cubic(it, s.sx[i], s.sy[i]);
        if (!c.valid) continue;
        const double d = ir.at(x, y) - c.value;
        row_sum[yy] += std::sqrt(d * d + eps * eps) - eps;
      }
    }
  });
  double total = 0.0;
  for (double r : row_sum) total += r;
  return total / static_cast<double>(ir.pixel_count());
}

std::array<double, 16> homography_point_jacobian(const Homography& h, Vec2 p) {
  const auto& m = h.matrix();
  const double w = m[6] * p.x + m[7] * p.y + m[8];
  if (std::abs(w) < 1e-12) throw Error(ErrorCode::AtInfinity, "point maps to infinity");
  const double u = (m[0] * p.x + m[1] * p.y + m[2]) / w;
  const double v = (m[3] * p.x + m[4] * p.y + m[5]) / w;
  const double iw = 1.0 / w;
  return {p.x * iw, p.y * iw, iw, 0, 0, 0, -u * p.x * iw, -u * p.y * iw,
          0, 0, 0, p.x * iw, p.y * iw, iw, -v * p.x * iw, -v * p.y * iw};
}

PhotometricGradient photometric_grad(const ImageBuffer& ir, const ImageBuffer& it,
                                     const FourPointMotion& motion, double eps) {
  const int w = ir.width(), h = ir.height();
  const Homography hom = four_point_to_homography(motion, w, h);
  const SamplingMap s = compose_sampling_map(hom, {}, w, h);
  const PixelEnergy e = photometric_energy(ir, it, s, eps);
  std::array<double, 8> dh{};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = s.index(x, y);
      if (e.gx[i] == 0.0 && e.gy[i] == 0.0) continue;
      const auto j = homography_point_jacobian(hom, {static_cast<double>(x), static_cast<double>(y)});
      for (int k = 0; k < 8; ++k) dh[k] += e.gx[i] * j[k] + e.gy[i] * j[8 + k];
    }
  }
  const auto jac = four_point_jacobian(motion, w, h);
  PhotometricGradient out{e.value, std::vector<double>(8, 0.0)};
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) out.grad[c] += dh[r] * jac[r * 8 + c];
  }
  return out;
}

PhotometricGradient photometric_grad(const ImageBuffer& ir, const ImageBuffer& it,
                                     const ControlGrid& grid, FfdModel model, double theta,
                                     const SamplingMap& prior, double eps) {
  const DisplacementField field = ffd_field(model, grid, theta);
  const SamplingMap s = add_field(prior, field);
  const PixelEnergy e = photometric_energy(ir, it, s, eps);
  PhotometricGradient out{e.value, std::vector<double>(2 * grid.point_count(), 0.0)};
  for (int m = 0; m <= grid.rows(); ++m) {
    for (int n = 0; n <= grid.cols(); ++n) {
      double gx = 0.0, gy = 0.0;
      for (int y = 0; y < s.height; ++y) {
        for (int x = 0; x < s.width; ++x) {
          const std::size_t i = s.index(x, y);
          if (e.gx[i] == 0.0 && e.gy[i] == 0.0) continue;
          const double wgt = ffd_weight(model, grid, theta, m, n, x, y);
          gx += wgt * e.gx[i];
          gy += wgt * e.gy[i];
        }
      }
      const std::size_t k = grid.index(m, n);
      out.grad[2 * k] = gx;
      out.grad[2 * k + 1] = gy;
    }
  }
  return out;
}

}  // namespace edffd
