#include "edffd/tps.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "edffd/error.hpp"
#include "edffd/parallel.hpp"

namespace edffd {
namespace {

inline double kernel_r2(double r2) { return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0; }

}  // namespace

ThinPlateSpline::ThinPlateSpline(std::span<const Vec2> anchors, std::span<const Vec2> targets) {
  const std::size_t n = anchors.size();
  if (n != targets.size()) throw Error(ErrorCode::DimensionMismatch, "anchors and targets differ in length");
  if (n < 3) throw Error(ErrorCode::SingularSystem, "thin-plate spline needs at least 3 anchors");
  double extent = 0.0;
  for (const Vec2& a : anchors) extent = std::max({extent, std::fabs(a.x), std::fabs(a.y)});
  scale_ = extent > 0.0 ? 1.0 / extent : 1.0;
  anchors_.reserve(n);
  for (const Vec2& a : anchors) anchors_.push_back(scale_ * a);

  bool any_area = false;
  for (std::size_t j = 1; j < n && !any_area; ++j)
    for (std::size_t k = j + 1; k < n && !any_area; ++k)
      any_area = std::fabs(cross(anchors_[j] - anchors_[0], anchors_[k] - anchors_[0])) > 1e-12;
  if (!any_area) throw Error(ErrorCode::SingularSystem, "thin-plate anchors are collinear");

  const Eigen::Index dim = static_cast<Eigen::Index>(n) + 3;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(dim, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < n; ++j) {
      const Vec2 d = anchors_[i] - anchors_[j];
      a(ii, static_cast<Eigen::Index>(j)) = kernel_r2(dot(d, d));
    }
    const Eigen::Index last = static_cast<Eigen::Index>(n);
    a(ii, last) = 1.0;
    a(ii, last + 1) = anchors_[i].x;
    a(ii, last + 2) = anchors_[i].y;
    a(last, ii) = 1.0;
    a(last + 1, ii) = anchors_[i].x;
    a(last + 2, ii) = anchors_[i].y;
    rhs(ii, 0) = targets[i].x - anchors[i].x;
    rhs(ii, 1) = targets[i].y - anchors[i].y;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularSystem, "thin-plate system is singular");
  const Eigen::MatrixXd sol = lu.solve(rhs);
  if (!sol.allFinite() || (a * sol - rhs).norm() > 1e-6 * (1.0 + rhs.norm())) {
    throw Error(ErrorCode::SingularSystem, "thin-plate system is numerically singular");
  }
  weights_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    weights_[i] = {sol(static_cast<Eigen::Index>(i), 0), sol(static_cast<Eigen::Index>(i), 1)};
  }
  for (int k = 0; k < 3; ++k) {
    const Eigen::Index r = static_cast<Eigen::Index>(n) + k;
    affine_[k] = {sol(r, 0), sol(r, 1)};
  }
}

Vec2 ThinPlateSpline::displacement(Vec2 p) const {
  const Vec2 q = scale_ * p;
  Vec2 out = affine_[0] + q.x * affine_[1] + q.y * affine_[2];
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    const Vec2 d = q - anchors_[i];
    out += kernel_r2(dot(d, d)) * weights_[i];
  }
  return out;
}

DisplacementField ThinPlateSpline::field(int width, int height) const {
  using Array = Eigen::ArrayXd;
  DisplacementField out(width, height);
  parallel_for(static_cast<std::size_t>(height), [&](std::size_t y0, std::size_t y1) {
    Array qx(width), ax(width), ay(width), r2(width), u(width);
    for (int x = 0; x < width; ++x) qx[x] = scale_ * x;
    for (std::size_t y = y0; y < y1; ++y) {
      const double qy = scale_ * static_cast<double>(y);
      ax = affine_[0].x + qx * affine_[1].x + qy * affine_[2].x;
      ay = affine_[0].y + qx * affine_[1].y + qy * affine_[2].y;
      for (std::size_t i = 0; i < anchors_.size(); ++i) {
        const double dy = qy - anchors_[i].y;
        r2 = (qx - anchors_[i].x).square() + dy * dy;
        u = (r2 > 0.0).select(0.5 * r2 * r2.max(1e-300).log(), 0.0);
        ax += u * weights_[i].x;
        ay += u * weights_[i].y;
      }
      const std::size_t base = y * static_cast<std::size_t>(width);
      for (int x = 0; x < width; ++x) {
        out.dx[base + x] = ax[x];
        out.dy[base + x] = ay[x];
      }
    }
  });
  return out;
}

std::vector<double> tps_cardinal_weights(std::span<const Vec2> anchors, std::span<const Vec2> points) {
  const std::size_t n = anchors.size();
  // Constructing a spline validates the anchor layout (count, collinearity).
  (void)ThinPlateSpline(anchors, anchors);
  double extent = 0.0;
  for (const Vec2& a : anchors) extent = std::max({extent, std::fabs(a.x), std::fabs(a.y)});
  const double scale = extent > 0.0 ? 1.0 / extent : 1.0;
  const auto dim = static_cast<Eigen::Index>(n) + 3;
  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < nn; ++i) {
    const Vec2 qi = scale * anchors[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < nn; ++j) {
      const Vec2 d = qi - scale * anchors[static_cast<std::size_t>(j)];
      a(i, j) = kernel_r2(dot(d, d));
    }
    a(i, nn) = a(nn, i) = 1.0;
    a(i, nn + 1) = a(nn + 1, i) = qi.x;
    a(i, nn + 2) = a(nn + 2, i) = qi.y;
  }
  // Columns of the inverse restricted to the displacement rows.
  const Eigen::MatrixXd solve = Eigen::FullPivLU<Eigen::MatrixXd>(a).solve(
      Eigen::MatrixXd::Identity(dim, dim).leftCols(nn));
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::vector<double> out(points.size() * n);
  constexpr std::size_t kBlock = 1024;
  parallel_for((points.size() + kBlock - 1) / kBlock, [&](std::size_t b0, std::size_t b1) {
    RowMat k(static_cast<Eigen::Index>(kBlock), dim);
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t p0 = b * kBlock;
      const std::size_t count = std::min(kBlock, points.size() - p0);
      for (std::size_t r = 0; r < count; ++r) {
        const Vec2 q = scale * points[p0 + r];
        const auto rr = static_cast<Eigen::Index>(r);
        for (Eigen::Index j = 0; j < nn; ++j) {
          const Vec2 d = q - scale * anchors[static_cast<std::size_t>(j)];
          k(rr, j) = kernel_r2(dot(d, d));
        }
        k(rr, nn) = 1.0;
        k(rr, nn + 1) = q.x;
        k(rr, nn + 2) = q.y;
      }
      Eigen::Map<RowMat> dst(out.data() + p0 * n, static_cast<Eigen::Index>(count), nn);
      dst.noalias() = k.topRows(static_cast<Eigen::Index>(count)) * solve;
    }
  });
  return out;
}

DisplacementField tps_field(std::span<const Vec2> anchors, std::span<const Vec2> targets, int width,
                            int height) {
  return ThinPlateSpline(anchors, targets).field(width, height);
}

}  // namespace edffd
