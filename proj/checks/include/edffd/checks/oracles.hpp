#pragma once

// Slow, direct reference implementations used to cross-check the library.
// They deliberately avoid the library's kernels and helpers.

#include <functional>
#include <span>
#include <vector>

#include "edffd/aggregator.hpp"
#include "edffd/correlation.hpp"
#include "edffd/ffd.hpp"
#include "edffd/homography.hpp"
#include "edffd/image.hpp"
#include "edffd/sampling.hpp"

namespace edffd::oracle {

/// Piecewise definition (4 - 6u^2 + 3|u|^3)/6 and (2 - |u|)^3/6.
double bspline(double u);

/// Double sum over every control point, per pixel.
DisplacementField bspline_field(const ControlGrid& grid);
DisplacementField edffd_field(const ControlGrid& grid, double theta);

/// Mean absolute difference term of one warp, pixel by pixel with an
/// independent bilinear sampler; `map` gives target coordinates.
double masked_l1(const ImageBuffer& base, const ImageBuffer& other,
                 const std::function<Vec2(int, int)>& map);

double intra_grid_loss(const ControlGrid& grid);
double inter_grid_loss(const ControlGrid& grid, const Mask& overlap);

/// Brute-force Eq.-style patch cosine sums and windowed dot products.
std::vector<double> global_scores(const FeatureMap& fr, const FeatureMap& ft, int k);
std::vector<double> local_scores(const FeatureMap& fr, const FeatureMap& ft, int r);

/// Expands a grouped layer into its block-diagonal dense matrix (row-major).
std::vector<double> dense_weights(const GroupLinear& layer);
/// Layer-by-layer forward using dense block-diagonal matrices.
std::vector<double> head_forward(std::span<const double> x, const Head& head);

/// Central differences of f at x with step h.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double h);

/// max|a - b| / max|b| (absolute when b is all zero).
double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace edffd::oracle
