#pragma once

#include <span>
#include <vector>

#include "edffd/ffd.hpp"
#include "edffd/homography.hpp"
#include "edffd/image.hpp"

namespace edffd {

/// Source coordinates in the target image for every output (reference) pixel.
struct SamplingMap {
  int width = 0;
  int height = 0;
  std::vector<double> sx;
  std::vector<double> sy;

  SamplingMap() = default;
  SamplingMap(int w, int h);
  static SamplingMap identity(int w, int h);

  std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width + x; }
  Vec2 at(int x, int y) const noexcept { return {sx[index(x, y)], sy[index(x, y)]}; }
};

enum class Composition {
  Additive,       // H(x) + sum_i D_i(x)
  Compositional,  // s_i(x) = s_{i-1}(x + D_i(x)), s_0 = H
};

/// Throws DimensionMismatch when a field's canvas differs, AtInfinity from H.
SamplingMap compose_sampling_map(const Homography& h, std::span<const DisplacementField> fields,
                                 int width, int height, Composition mode = Composition::Additive);

/// prior + field, element-wise.
SamplingMap add_field(const SamplingMap& prior, const DisplacementField& field);

struct WarpResult {
  ImageBuffer image;
  Mask mask;
};

/// Backward warp via bilinear sampling; mask holds the per-pixel valid flag.
WarpResult warp_image(const ImageBuffer& src, const SamplingMap& map);

/// Warp of the all-ones canvas, i.e. the validity mask alone.
Mask warp_ones(const SamplingMap& map, int src_width, int src_height);

/// Endpoint error statistics of `map` against `truth` over pixels where
/// `region` is >= 0.5.
struct EndpointError {
  double mean = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};
EndpointError endpoint_error(const SamplingMap& map, const SamplingMap& truth, const Mask& region);

}  // namespace edffd
