#pragma once

#include <span>
#include <vector>

#include "edffd/ffd.hpp"
#include "edffd/homography.hpp"
#include "edffd/image.hpp"
#include "edffd/sampling.hpp"

namespace edffd {

struct LossWeights {
  double lambda0 = 1.0;
  std::vector<double> lambda{1.3, 1.7};  // one per refinement stage
  double omega = 10.0;
};

/// Bidirectional homography terms plus one target->reference term per stage
/// map, each a per-pixel mean absolute difference over all channels.
/// Throws DimensionMismatch, InvalidArgument (too few stage weights), Singular.
double content_loss(const ImageBuffer& ir, const ImageBuffer& it, const Homography& h,
                    std::span<const SamplingMap> stage_maps, const LossWeights& w);

/// Penalty on deformed edges longer than twice the nominal spacing, with
/// horizontal and vertical sums normalised by their own edge counts.
double intra_grid_loss(const ControlGrid& grid);

/// Lattice-point flags: true where the overlap mask, read at the clamped
/// anchor pixel, is below 0.5.
std::vector<bool> non_overlap_flags(const ControlGrid& grid, const Mask& overlap);

/// Mean of (1 - cos) over consecutive same-direction edge pairs whose three
/// points are all outside the overlap. Throws ZeroLengthEdge.
double inter_grid_loss(const ControlGrid& grid, const Mask& overlap);
double inter_grid_loss(const ControlGrid& grid, const std::vector<bool>& non_overlap);

/// Gradients with respect to the displacements, same ordering as the grid.
std::vector<Vec2> intra_grid_grad(const ControlGrid& grid);
std::vector<Vec2> inter_grid_grad(const ControlGrid& grid, const std::vector<bool>& non_overlap);

double total_loss(double content, double shape, double omega) noexcept;

inline constexpr double kCharbonnierEps = 1e-3;

/// Mean over all reference pixels of rho(Ir(x) - It(s(x))), counting pixels
/// whose sample lands on the target canvas, with rho(d) = sqrt(d^2 + eps^2) - eps
/// and Catmull-Rom sampling of channel 0 (pass luminance images). gx/gy hold
/// dE/ds per pixel. Images must be single channel and equally sized.
struct PixelEnergy {
  double value = 0.0;
  std::vector<double> gx;
  std::vector<double> gy;
  std::vector<double> residual;  // Ir - It(s), 0 where invalid
  std::vector<double> ix;        // target gradient at s, 0 where invalid
  std::vector<double> iy;
  std::size_t valid = 0;
};
PixelEnergy photometric_energy(const ImageBuffer& ir, const ImageBuffer& it, const SamplingMap& s,
                               double eps = kCharbonnierEps);
/// Value only; skips the per-pixel gradient planes.
double photometric_value(const ImageBuffer& ir, const ImageBuffer& it, const SamplingMap& s,
                         double eps = kCharbonnierEps);

struct PhotometricGradient {
  double value = 0.0;
  std::vector<double> grad;  // flattened like the parameters
};

/// s(x) = H(motion)(x); gradient over (dx0, dy0, ..., dx3, dy3).
PhotometricGradient photometric_grad(const ImageBuffer& ir, const ImageBuffer& it,
                                     const FourPointMotion& motion, double eps = kCharbonnierEps);

/// s(x) = prior(x) + FFD(grid)(x); gradient over grid.flat() ordering.
/// Double precision throughout.
PhotometricGradient photometric_grad(const ImageBuffer& ir, const ImageBuffer& it,
                                     const ControlGrid& grid, FfdModel model, double theta,
                                     const SamplingMap& prior, double eps = kCharbonnierEps);

/// d s / d h for the first eight normalised entries of H at pixel p.
std::array<double, 16> homography_point_jacobian(const Homography& h, Vec2 p);

}  // namespace edffd
