#pragma once

#include <span>
#include <vector>

#include "edffd/ffd.hpp"
#include "edffd/geometry.hpp"

namespace edffd {

/// Interpolating thin-plate spline of the displacement target - anchor,
/// using the radial kernel r^2 log r plus an affine part.
class ThinPlateSpline {
 public:
  /// Throws SingularSystem for fewer than 3 anchors, collinear anchors, or a
  /// numerically singular system.
  ThinPlateSpline(std::span<const Vec2> anchors, std::span<const Vec2> targets);

  Vec2 displacement(Vec2 p) const;
  DisplacementField field(int width, int height) const;

  std::span<const Vec2> anchors() const noexcept { return anchors_; }

 private:
  std::vector<Vec2> anchors_;  // in normalised coordinates
  std::vector<Vec2> weights_;
  Vec2 affine_[3];  // constant, x, y coefficients
  double scale_ = 1.0;
};

/// Weights c_k(p) with displacement(p) = sum_k c_k(p) * (target_k - anchor_k),
/// row-major points x anchors. The spline is linear in its targets, so these
/// depend on the anchors alone.
std::vector<double> tps_cardinal_weights(std::span<const Vec2> anchors, std::span<const Vec2> points);

DisplacementField tps_field(std::span<const Vec2> anchors, std::span<const Vec2> targets, int width,
                            int height);

}  // namespace edffd
