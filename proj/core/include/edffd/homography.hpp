#pragma once

#include <array>
#include <span>
#include <vector>

#include "edffd/geometry.hpp"

namespace edffd {

/// 3x3 projective transform, row-major, normalised so h[8] == 1 when nonzero.
class Homography {
 public:
  Homography() : h_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}
  /// Normalises and validates; throws Singular when |det| < 1e-12.
  explicit Homography(const std::array<double, 9>& h);

  static Homography identity() { return {}; }
  static Homography translation(double tx, double ty);

  const std::array<double, 9>& matrix() const noexcept { return h_; }
  double operator()(int r, int c) const noexcept { return h_[r * 3 + c]; }
  double determinant() const noexcept;

  /// Throws AtInfinity when |w| < 1e-12.
  Vec2 apply(Vec2 p) const;

 private:
  std::array<double, 9> h_;
};

/// Corner displacements ordered TL, TR, BL, BR; corners are the centres of the
/// outermost pixels, (0,0), (w-1,0), (0,h-1), (w-1,h-1).
struct FourPointMotion {
  std::array<Vec2, 4> d{};
};

std::array<Vec2, 4> canvas_corners(int width, int height);

/// Normalised DLT: H maps every canvas corner onto corner + motion.
/// Throws DegenerateCorners for collinear/rank-deficient configurations.
Homography four_point_to_homography(const FourPointMotion& motion, int width, int height);

/// Corner motion that reproduces H on the given canvas.
FourPointMotion motion_from_homography(const Homography& h, int width, int height);

std::vector<Vec2> apply_homography(const Homography& h, std::span<const Vec2> pts);

/// Throws Singular.
Homography invert_homography(const Homography& h);

Homography compose(const Homography& a, const Homography& b);  // a after b

/// Weighted, Hartley-normalised DLT over N >= 4 correspondences (src -> dst).
/// Weights <= 0 drop a correspondence.
Homography fit_homography(std::span<const Vec2> src, std::span<const Vec2> dst,
                          std::span<const double> weights);

/// d h / d motion: 8 x 8 row-major Jacobian of the first eight normalised
/// entries (h[0..7]) with respect to (dx0, dy0, dx1, dy1, ..., dy3).
std::array<double, 64> four_point_jacobian(const FourPointMotion& motion, int width, int height);

}  // namespace edffd
