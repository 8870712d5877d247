#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "edffd/geometry.hpp"

namespace edffd {

/// (M+1) x (N+1) control points on a uniform lattice covering the canvas,
/// including its border: anchor(m, n) = (n * W / N, m * H / M).
class ControlGrid {
 public:
  ControlGrid() = default;
  ControlGrid(int rows, int cols, int width, int height);

  int rows() const noexcept { return rows_; }  // M, cells along y
  int cols() const noexcept { return cols_; }  // N, cells along x
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double spacing_x() const noexcept { return static_cast<double>(width_) / cols_; }
  double spacing_y() const noexcept { return static_cast<double>(height_) / rows_; }
  std::size_t point_count() const noexcept {
    return static_cast<std::size_t>(rows_ + 1) * static_cast<std::size_t>(cols_ + 1);
  }
  std::size_t index(int m, int n) const noexcept {
    return static_cast<std::size_t>(m) * (cols_ + 1) + n;
  }

  Vec2 anchor(int m, int n) const noexcept { return {n * spacing_x(), m * spacing_y()}; }
  Vec2& displacement(int m, int n) noexcept { return disp_[index(m, n)]; }
  Vec2 displacement(int m, int n) const noexcept { return disp_[index(m, n)]; }
  Vec2 deformed(int m, int n) const noexcept { return anchor(m, n) + displacement(m, n); }

  std::span<Vec2> displacements() noexcept { return disp_; }
  std::span<const Vec2> displacements() const noexcept { return disp_; }

  /// Row-major (m, n) flattening as (dx, dy) pairs.
  std::vector<double> flat() const;
  void set_flat(std::span<const double> values);

 private:
  int rows_ = 0;
  int cols_ = 0;
  int width_ = 0;
  int height_ = 0;
  std::vector<Vec2> disp_;
};

/// Dense per-pixel displacement planes.
struct DisplacementField {
  int width = 0;
  int height = 0;
  std::vector<double> dx;
  std::vector<double> dy;

  DisplacementField() = default;
  DisplacementField(int w, int h);

  std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width + x; }
  Vec2 at(int x, int y) const noexcept { return {dx[index(x, y)], dy[index(x, y)]}; }
  static DisplacementField constant(int w, int h, Vec2 v);
};

enum class FfdModel { BSpline, Edffd };

struct FieldOptions {
  /// false: full basis-matrix sum over every control point.
  /// true: B-spline uses its 4x4 support, EDFFD skips weights below cutoff.
  bool fast = false;
  double edffd_cutoff = 1e-6;
};

/// Isotropic spacing used by the exponential kernel: min(W/N, H/M).
double edffd_eta(const ControlGrid& grid) noexcept;

DisplacementField bspline_ffd_field(const ControlGrid& grid, const FieldOptions& opts = {});
DisplacementField edffd_field(const ControlGrid& grid, double theta, const FieldOptions& opts = {});
DisplacementField ffd_field(FfdModel model, const ControlGrid& grid, double theta,
                            const FieldOptions& opts = {});

/// Weight of control point k at (x, y) for the given model.
double ffd_weight(FfdModel model, const ControlGrid& grid, double theta, int m, int n, double x,
                  double y);

/// Dense pixels x control-points weight matrix, row-major over pixels of a
/// width x height canvas. Used by the descent loops where the field and its
/// adjoint are evaluated many times for one grid layout.
class BasisMatrix {
 public:
  BasisMatrix(FfdModel model, const ControlGrid& layout, double theta);
  /// Explicit row-major pixels x points weights for a width x height canvas.
  BasisMatrix(int width, int height, std::size_t points, std::span<const double> weights);
  ~BasisMatrix();
  BasisMatrix(BasisMatrix&&) noexcept;
  BasisMatrix& operator=(BasisMatrix&&) noexcept;

  std::size_t pixels() const noexcept;
  std::size_t points() const noexcept;

  /// field = B * displacements
  DisplacementField apply(const ControlGrid& grid) const;
  /// grad_k = sum_pixels B(p, k) * (gx, gy)(p)
  std::vector<Vec2> adjoint(std::span<const double> gx, std::span<const double> gy) const;
  /// B^T diag(w) B, row-major points x points. With stride > 1 only pixels
  /// on the stride lattice contribute, scaled by stride^2.
  std::vector<double> gram(std::span<const double> w, int stride = 1) const;
  /// Weights at a single pixel (row of B).
  std::vector<double> row(std::size_t pixel) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace edffd
