#include "edffd/ffd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "edffd/basis.hpp"
#include "edffd/error.hpp"
#include "edffd/parallel.hpp"

namespace edffd {

ControlGrid::ControlGrid(int rows, int cols, int width, int height)
    : rows_(rows), cols_(cols), width_(width), height_(height) {
  if (rows < 1 || cols < 1 || width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "control grid needs positive cell counts and canvas");
  }
  disp_.assign(point_count(), Vec2{});
}

std::vector<double> ControlGrid::flat() const {
  std::vector<double> out;
  out.reserve(2 * disp_.size());
  for (const Vec2& d : disp_) {
    out.push_back(d.x);
    out.push_back(d.y);
  }
  return out;
}

void ControlGrid::set_flat(std::span<const double> values) {
  if (values.size() != 2 * disp_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "displacement array does not match (M+1)x(N+1)");
  }
  for (std::size_t i = 0; i < disp_.size(); ++i) disp_[i] = {values[2 * i], values[2 * i + 1]};
}

DisplacementField::DisplacementField(int w, int h)
    : width(w), height(h), dx(static_cast<std::size_t>(w) * h, 0.0), dy(dx.size(), 0.0) {}

DisplacementField DisplacementField::constant(int w, int h, Vec2 v) {
  DisplacementField f(w, h);
  std::fill(f.dx.begin(), f.dx.end(), v.x);
  std::fill(f.dy.begin(), f.dy.end(), v.y);
  return f;
}

double edffd_eta(const ControlGrid& grid) noexcept {
  return std::min(grid.spacing_x(), grid.spacing_y());
}

namespace {

using Array = Eigen::ArrayXd;

constexpr int kChunk = 256;

// Branch-free cubic B-spline over an array, evaluating both polynomial
// pieces and selecting per element.
inline Array bspline_array(const Array& u) {
  const Array a = u.abs();
  const Array t = 2.0 - a;
  return (a < 1.0).select(2.0 / 3.0 + a * a * (0.5 * a - 1.0),
                          (a < 2.0).select(t * t * t * (1.0 / 6.0), 0.0));
}

// Full basis-matrix evaluation: every pixel against every control point in
// a fixed (m, n) order, vectorised over chunks of pixels.
template <class Weight>
DisplacementField full_sum(const ControlGrid& grid, Weight&& weight) {
  DisplacementField out(grid.width(), grid.height());
  const int w = grid.width();
  const auto disp = grid.displacements();
  parallel_for(static_cast<std::size_t>(grid.height()), [&](std::size_t y0, std::size_t y1) {
    Array px(kChunk), py(kChunk), ax(kChunk), ay(kChunk), wt(kChunk);
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x0 = 0; x0 < w; x0 += kChunk) {
        const int len = std::min(kChunk, w - x0);
        if (len != px.size()) {
          px.resize(len);
          py.resize(len);
          ax.resize(len);
          ay.resize(len);
          wt.resize(len);
        }
        for (int i = 0; i < len; ++i) px[i] = x0 + i;
        py.setConstant(static_cast<double>(y));
        ax.setZero();
        ay.setZero();
        for (int m = 0; m <= grid.rows(); ++m) {
          for (int n = 0; n <= grid.cols(); ++n) {
            const Vec2 a = grid.anchor(m, n);
            weight(px, py, a, wt);
            const Vec2 d = disp[grid.index(m, n)];
            ax += wt * d.x;
            ay += wt * d.y;
          }
        }
        const std::size_t base = y * static_cast<std::size_t>(w) + x0;
        for (int i = 0; i < len; ++i) {
          out.dx[base + i] = ax[i];
          out.dy[base + i] = ay[i];
        }
      }
    }
  });
  return out;
}

DisplacementField bspline_fast(const ControlGrid& grid) {
  DisplacementField out(grid.width(), grid.height());
  const double sx = grid.spacing_x();
  const double sy = grid.spacing_y();
  parallel_for(static_cast<std::size_t>(grid.height()), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t yy = y0; yy < y1; ++yy) {
      const double y = static_cast<double>(yy);
      const int ci = static_cast<int>(std::floor(y / sy));
      double by[4];
      for (int k = 0; k < 4; ++k) by[k] = cubic_bspline((y - (ci - 1 + k) * sy) / sy);
      for (int xx = 0; xx < grid.width(); ++xx) {
        const double x = xx;
        const int cj = static_cast<int>(std::floor(x / sx));
        double bx[4];
        for (int k = 0; k < 4; ++k) bx[k] = cubic_bspline((x - (cj - 1 + k) * sx) / sx);
        double fx = 0.0, fy = 0.0;
        for (int a = 0; a < 4; ++a) {
          const int m = ci - 1 + a;
          if (m < 0 || m > grid.rows()) continue;
          for (int b = 0; b < 4; ++b) {
            const int n = cj - 1 + b;
            if (n < 0 || n > grid.cols()) continue;
            const double wgt = by[a] * bx[b];
            const Vec2 d = grid.displacement(m, n);
            fx += wgt * d.x;
            fy += wgt * d.y;
          }
        }
        const std::size_t i = out.index(xx, static_cast<int>(yy));
        out.dx[i] = fx;
        out.dy[i] = fy;
      }
    }
  });
  return out;
}

DisplacementField edffd_cutoff(const ControlGrid& grid, double scale, double cutoff) {
  DisplacementField out(grid.width(), grid.height());
  const int w = grid.width();
  const double radius = -scale * std::log(cutoff);
  const double r2max = radius * radius;
  const double inv = 1.0 / scale;
  const auto disp = grid.displacements();
  parallel_for(static_cast<std::size_t>(grid.height()), [&](std::size_t y0, std::size_t y1) {
    Array px(kChunk), dx2(kChunk), r2(kChunk), ax(kChunk), ay(kChunk), wt(kChunk);
    for (std::size_t yy = y0; yy < y1; ++yy) {
      const double y = static_cast<double>(yy);
      for (int x0 = 0; x0 < w; x0 += kChunk) {
        const int len = std::min(kChunk, w - x0);
        if (len != px.size()) {
          px.resize(len);
          dx2.resize(len);
          r2.resize(len);
          ax.resize(len);
          ay.resize(len);
          wt.resize(len);
        }
        for (int i = 0; i < len; ++i) px[i] = x0 + i;
        const double xlo = x0, xhi = x0 + len - 1;
        ax.setZero();
        ay.setZero();
        for (int m = 0; m <= grid.rows(); ++m) {
          for (int n = 0; n <= grid.cols(); ++n) {
            const Vec2 a = grid.anchor(m, n);
            // Nearest chunk pixel to the anchor bounds every pixel's distance.
            const double gx = a.x < xlo ? xlo - a.x : (a.x > xhi ? a.x - xhi : 0.0);
            const double gy = y - a.y;
            if (gx * gx + gy * gy > r2max) continue;
            dx2 = (px - a.x).square();
            r2 = dx2 + gy * gy;
            wt = (-r2.sqrt() * inv).exp();
            wt = (r2 <= r2max).select(wt, 0.0);
            const Vec2 d = disp[grid.index(m, n)];
            ax += wt * d.x;
            ay += wt * d.y;
          }
        }
        const std::size_t base = yy * static_cast<std::size_t>(w) + x0;
        for (int i = 0; i < len; ++i) {
          out.dx[base + i] = ax[i];
          out.dy[base + i] = ay[i];
        }
      }
    }
  });
  return out;
}

}  // namespace

DisplacementField bspline_ffd_field(const ControlGrid& grid, const FieldOptions& opts) {
  if (opts.fast) return bspline_fast(grid);
  const double inv_x = 1.0 / grid.spacing_x();
  const double inv_y = 1.0 / grid.spacing_y();
  return full_sum(grid, [&](const Array& px, const Array& py, Vec2 a, Array& wt) {
    wt = bspline_array((px - a.x) * inv_x) * bspline_array((py - a.y) * inv_y);
  });
}

DisplacementField edffd_field(const ControlGrid& grid, double theta, const FieldOptions& opts) {
  const KernelConfig cfg{theta, edffd_eta(grid)};
  if (!(cfg.scale() > 0.0)) throw Error(ErrorCode::NonPositiveScale, "theta must be positive");
  if (opts.fast) return edffd_cutoff(grid, cfg.scale(), opts.edffd_cutoff);
  const double inv = 1.0 / cfg.scale();
  return full_sum(grid, [&](const Array& px, const Array& py, Vec2 a, Array& wt) {
    wt = (-((px - a.x).square() + (py - a.y).square()).sqrt() * inv).exp();
  });
}

DisplacementField ffd_field(FfdModel model, const ControlGrid& grid, double theta,
                            const FieldOptions& opts) {
  return model == FfdModel::BSpline ? bspline_ffd_field(grid, opts) : edffd_field(grid, theta, opts);
}

double ffd_weight(FfdModel model, const ControlGrid& grid, double theta, int m, int n, double x,
                  double y) {
  const Vec2 a = grid.anchor(m, n);
  if (model == FfdModel::BSpline) {
    return bspline_basis_product((x - a.x) / grid.spacing_x(), (y - a.y) / grid.spacing_y());
  }
  return exp_decay_weight(std::hypot(x - a.x, y - a.y), KernelConfig{theta, edffd_eta(grid)});
}

struct BasisMatrix::Impl {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> b;
  int width = 0;
  int height = 0;
};

BasisMatrix::BasisMatrix(FfdModel model, const ControlGrid& layout, double theta)
    : impl_(std::make_unique<Impl>()) {
  impl_->width = layout.width();
  impl_->height = layout.height();
  const auto pixels = static_cast<Eigen::Index>(layout.width()) * layout.height();
  const auto points = static_cast<Eigen::Index>(layout.point_count());
  impl_->b.resize(pixels, points);
  // Unit displacement per point, evaluated column by column with the exact
  // kernels, keeps this matrix consistent with ffd_field.
  parallel_for(static_cast<std::size_t>(layout.height()), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < layout.width(); ++x) {
        const auto row = static_cast<Eigen::Index>(y * layout.width() + x);
        for (int m = 0; m <= layout.rows(); ++m) {
          for (int n = 0; n <= layout.cols(); ++n) {
            impl_->b(row, static_cast<Eigen::Index>(layout.index(m, n))) = static_cast<float>(
                ffd_weight(model, layout, theta, m, n, x, static_cast<double>(y)));
          }
        }
      }
    }
  });
}

BasisMatrix::BasisMatrix(int width, int height, std::size_t points, std::span<const double> weights)
    : impl_(std::make_unique<Impl>()) {
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  if (weights.size() != pixels * points) {
    throw Error(ErrorCode::DimensionMismatch, "weight matrix does not match canvas and point count");
  }
  impl_->width = width;
  impl_->height = height;
  impl_->b = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                 weights.data(), static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(points))
                 .cast<float>();
}

BasisMatrix::~BasisMatrix() = default;
BasisMatrix::BasisMatrix(BasisMatrix&&) noexcept = default;
BasisMatrix& BasisMatrix::operator=(BasisMatrix&&) noexcept = default;

std::size_t BasisMatrix::pixels() const noexcept { return static_cast<std::size_t>(impl_->b.rows()); }
std::size_t BasisMatrix::points() const noexcept { return static_cast<std::size_t>(impl_->b.cols()); }

DisplacementField BasisMatrix::apply(const ControlGrid& grid) const {
  if (grid.point_count() != points()) {
    throw Error(ErrorCode::DimensionMismatch, "grid does not match basis layout");
  }
  Eigen::Matrix<float, Eigen::Dynamic, 2> d(static_cast<Eigen::Index>(points()), 2);
  const auto disp = grid.displacements();
  for (std::size_t k = 0; k < disp.size(); ++k) {
    d(static_cast<Eigen::Index>(k), 0) = static_cast<float>(disp[k].x);
    d(static_cast<Eigen::Index>(k), 1) = static_cast<float>(disp[k].y);
  }
  const Eigen::Matrix<float, Eigen::Dynamic, 2> f = impl_->b * d;
  DisplacementField out(impl_->width, impl_->height);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    out.dx[static_cast<std::size_t>(i)] = f(i, 0);
    out.dy[static_cast<std::size_t>(i)] = f(i, 1);
  }
  return out;
}

std::vector<Vec2> BasisMatrix::adjoint(std::span<const double> gx, std::span<const double> gy) const {
  if (gx.size() != pixels() || gy.size() != pixels()) {
    throw Error(ErrorCode::DimensionMismatch, "gradient planes do not match basis layout");
  }
  Eigen::Matrix<float, Eigen::Dynamic, 2> g(static_cast<Eigen::Index>(pixels()), 2);
  for (std::size_t i = 0; i < gx.size(); ++i) {
    g(static_cast<Eigen::Index>(i), 0) = static_cast<float>(gx[i]);
    g(static_cast<Eigen::Index>(i), 1) = static_cast<float>(gy[i]);
  }
  const Eigen::Matrix<float, Eigen::Dynamic, 2> r = impl_->b.transpose() * g;
  std::vector<Vec2> out(points());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = {r(static_cast<Eigen::Index>(k), 0), r(static_cast<Eigen::Index>(k), 1)};
  }
  return out;
}

std::vector<double> BasisMatrix::gram(std::span<const double> w, int stride) const {
  if (w.size() != pixels()) throw Error(ErrorCode::DimensionMismatch, "weights do not match basis rows");
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be positive");
  std::vector<Eigen::Index> rows;
  for (int y = 0; y < impl_->height; y += stride) {
    for (int x = 0; x < impl_->width; x += stride) {
      rows.push_back(static_cast<Eigen::Index>(y) * impl_->width + x);
    }
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> sub(n, impl_->b.cols());
  Eigen::VectorXf wf(n);
  const float scale = static_cast<float>(stride * stride);
  for (Eigen::Index i = 0; i < n; ++i) {
    sub.row(i) = impl_->b.row(rows[static_cast<std::size_t>(i)]);
    wf[i] = scale * static_cast<float>(w[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])]);
  }
  const Eigen::Index k = impl_->b.cols();
  Eigen::MatrixXf g = Eigen::MatrixXf::Zero(k, k);
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> weighted = wf.asDiagonal() * sub;
  g.triangularView<Eigen::Lower>() = sub.transpose() * weighted;
  std::vector<double> out(points() * points());
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c <= r; ++c) {
      out[static_cast<std::size_t>(r * k + c)] = out[static_cast<std::size_t>(c * k + r)] = g(r, c);
    }
  }
  return out;
}

std::vector<double> BasisMatrix::row(std::size_t pixel) const {
  std::vector<double> out(points());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = impl_->b(static_cast<Eigen::Index>(pixel), static_cast<Eigen::Index>(k));
  }
  return out;
}

}  // namespace edffd
