#include "edffd/homography.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "edffd/error.hpp"

namespace edffd {
namespace {

using Mat3 = Eigen::Matrix3d;

Mat3 to_eigen(const std::array<double, 9>& h) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = h[r * 3 + c];
  return m;
}

std::array<double, 9> from_eigen(const Mat3& m) {
  std::array<double, 9> h{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) h[r * 3 + c] = m(r, c);
  return h;
}

// Similarity taking the points to zero mean and RMS distance sqrt(2).
Mat3 hartley(std::span<const Vec2> pts, std::span<const double> w) {
  double sw = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (w[i] <= 0.0) continue;
    sw += 1.0;
    cx += pts[i].x;
    cy += pts[i].y;
  }
  cx /= sw;
  cy /= sw;
  double rms = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (w[i] <= 0.0) continue;
    rms += (pts[i].x - cx) * (pts[i].x - cx) + (pts[i].y - cy) * (pts[i].y - cy);
  }
  rms = std::sqrt(rms / sw);
  const double s = rms > 0.0 ? std::sqrt(2.0) / rms : 1.0;
  Mat3 t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

bool collinear(Vec2 a, Vec2 b, Vec2 c, double scale2) {
  return std::fabs(cross(b - a, c - a)) < 1e-9 * scale2;
}

void check_general_position(const std::array<Vec2, 4>& p) {
  double scale2 = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) scale2 = std::max(scale2, dot(p[i] - p[j], p[i] - p[j]));
  if (!(scale2 > 0.0)) throw Error(ErrorCode::DegenerateCorners, "corners coincide");
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k)
        if (collinear(p[i], p[j], p[k], scale2)) {
          throw Error(ErrorCode::DegenerateCorners, "three displaced corners are collinear");
        }
}

Homography solve_dlt(std::span<const Vec2> src, std::span<const Vec2> dst, std::span<const double> w,
                     ErrorCode on_degenerate) {
  const Mat3 ts = hartley(src, w);
  const Mat3 td = hartley(dst, w);
  std::size_t used = 0;
  for (double wi : w) used += wi > 0.0 ? 1 : 0;
  Eigen::MatrixXd a(2 * used, 9);
  std::size_t row = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (w[i] <= 0.0) continue;
    const Eigen::Vector3d p = ts * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
    const Eigen::Vector3d q = td * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
    const double sw = std::sqrt(w[i]);
    a.row(row++) << 0, 0, 0, -p.x(), -p.y(), -1, q.y() * p.x(), q.y() * p.y(), q.y();
    a.row(row++) << p.x(), p.y(), 1, 0, 0, 0, -q.x() * p.x(), -q.x() * p.y(), -q.x();
    a.row(row - 2) *= sw;
    a.row(row - 1) *= sw;
  }
  // Pad to at least 9 rows so the nullspace vector is the last right singular vector.
  if (a.rows() < 9) {
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(9, 9);
    padded.topRows(a.rows()) = a;
    a = padded;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(7) / sv(0) < 1e-9) {
    throw Error(on_degenerate, "DLT system is rank deficient");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 full = td.inverse() * hn * ts;
  return Homography(from_eigen(full));
}

}  // namespace

Homography::Homography(const std::array<double, 9>& h) : h_(h) {
  for (double v : h_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite homography entry");
  }
  if (std::fabs(h_[8]) > 1e-300) {
    const double s = h_[8];
    for (double& v : h_) v /= s;
  }
  if (std::fabs(determinant()) < 1e-12) throw Error(ErrorCode::Singular, "homography is singular");
}

Homography Homography::translation(double tx, double ty) {
  return Homography({1, 0, tx, 0, 1, ty, 0, 0, 1});
}

double Homography::determinant() const noexcept {
  const auto& m = h_;
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Vec2 Homography::apply(Vec2 p) const {
  const auto& m = h_;
  const double w = m[6] * p.x + m[7] * p.y + m[8];
  if (std::fabs(w) < 1e-12) throw Error(ErrorCode::AtInfinity, "point maps to infinity");
  return {(m[0] * p.x + m[1] * p.y + m[2]) / w, (m[3] * p.x + m[4] * p.y + m[5]) / w};
}

std::array<Vec2, 4> canvas_corners(int width, int height) {
  const double r = width - 1;
  const double b = height - 1;
  return {Vec2{0, 0}, Vec2{r, 0}, Vec2{0, b}, Vec2{r, b}};
}

Homography four_point_to_homography(const FourPointMotion& motion, int width, int height) {
  const auto src = canvas_corners(width, height);
  std::array<Vec2, 4> dst;
  for (int i = 0; i < 4; ++i) {
    if (!std::isfinite(motion.d[i].x) || !std::isfinite(motion.d[i].y)) {
      throw Error(ErrorCode::InvalidArgument, "non-finite corner motion");
    }
    dst[i] = src[i] + motion.d[i];
  }
  check_general_position(src);
  check_general_position(dst);
  const std::array<double, 4> w{1, 1, 1, 1};
  return solve_dlt(src, dst, w, ErrorCode::DegenerateCorners);
}

FourPointMotion motion_from_homography(const Homography& h, int width, int height) {
  FourPointMotion m;
  const auto src = canvas_corners(width, height);
  for (int i = 0; i < 4; ++i) m.d[i] = h.apply(src[i]) - src[i];
  return m;
}

std::vector<Vec2> apply_homography(const Homography& h, std::span<const Vec2> pts) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const Vec2& p : pts) out.push_back(h.apply(p));
  return out;
}

Homography invert_homography(const Homography& h) {
  const Mat3 m = to_eigen(h.matrix());
  Eigen::FullPivLU<Mat3> lu(m);
  if (!lu.isInvertible() || std::fabs(h.determinant()) < 1e-12) {
    throw Error(ErrorCode::Singular, "homography is not invertible");
  }
  return Homography(from_eigen(lu.inverse()));
}

Homography compose(const Homography& a, const Homography& b) {
  return Homography(from_eigen(to_eigen(a.matrix()) * to_eigen(b.matrix())));
}

Homography fit_homography(std::span<const Vec2> src, std::span<const Vec2> dst,
                          std::span<const double> weights) {
  if (src.size() != dst.size() || src.size() != weights.size()) {
    throw Error(ErrorCode::DimensionMismatch, "correspondence arrays differ in length");
  }
  std::size_t used = 0;
  for (double w : weights) used += w > 0.0 ? 1 : 0;
  if (used < 4) throw Error(ErrorCode::InsufficientOverlap, "fewer than 4 weighted correspondences");
  return solve_dlt(src, dst, weights, ErrorCode::DegenerateCorners);
}

std::array<double, 64> four_point_jacobian(const FourPointMotion& motion, int width, int height) {
  const Homography h = four_point_to_homography(motion, width, height);
  const auto src = canvas_corners(width, height);
  const auto& m = h.matrix();
  // Exact 4-point system M h = b with h[8] = 1; differentiating gives
  // M dh/du_i = e_{2i} * w_i, where w_i is the projective depth of corner i.
  Eigen::Matrix<double, 8, 8> sys;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i].x, y = src[i].y;
    const Vec2 t = src[i] + motion.d[i];
    sys.row(2 * i) << x, y, 1, 0, 0, 0, -x * t.x, -y * t.x;
    sys.row(2 * i + 1) << 0, 0, 0, x, y, 1, -x * t.y, -y * t.y;
  }
  Eigen::PartialPivLU<Eigen::Matrix<double, 8, 8>> lu(sys);
  const Eigen::Matrix<double, 8, 8> inv = lu.inverse();
  std::array<double, 64> jac{};
  for (int i = 0; i < 4; ++i) {
    const double w = m[6] * src[i].x + m[7] * src[i].y + 1.0;
    for (int k = 0; k < 2; ++k) {
      const int col = 2 * i + k;
      for (int r = 0; r < 8; ++r) jac[r * 8 + col] = inv(r, col) * w;
    }
  }
  return jac;
}

}  // namespace edffd
