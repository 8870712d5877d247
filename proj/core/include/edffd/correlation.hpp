#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "edffd/geometry.hpp"
#include "edffd/image.hpp"

namespace edffd {

struct FeatureMap {
  int width = 0;   // cells
  int height = 0;  // cells
  int channels = 0;
  std::vector<double> data;  // row-major cells, channels contiguous

  FeatureMap() = default;
  FeatureMap(int w, int h, int c);

  std::size_t cell(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width + x; }
  std::span<double> at(int x, int y) noexcept {
    return {data.data() + cell(x, y) * channels, static_cast<std::size_t>(channels)};
  }
  std::span<const double> at(int x, int y) const noexcept {
    return {data.data() + cell(x, y) * channels, static_cast<std::size_t>(channels)};
  }
};

inline constexpr int kFeatureChannels = 27;

/// Deterministic patch descriptor per cell of the `downsample` lattice
/// (4, 8 or 16). The image is reduced to per-cell mean luminance; each cell
/// takes the 3x3 neighbourhood of cell means (borders clamped) and their x/y
/// central differences. Intensities are zero-mean and the 27-vector is
/// L2-normalised (zero vectors stay zero). Throws TooSmall / InvalidArgument.
FeatureMap extract_features(const ImageBuffer& img, int downsample);

/// Scores of each reference cell against every target cell, summing
/// per-offset cosines over a K x K window (out-of-bounds terms are 0).
struct GlobalCorrelationVolume {
  int width = 0;
  int height = 0;
  std::vector<float> scores;  // [ref cell][target cell]

  std::size_t cells() const noexcept { return static_cast<std::size_t>(width) * height; }
  std::span<const float> row(std::size_t ref) const noexcept {
    return {scores.data() + ref * cells(), cells()};
  }
};

struct LocalCorrelationVolume {
  int width = 0;
  int height = 0;
  int radius = 0;
  std::vector<float> scores;  // [cell][(dy + r) * (2r + 1) + (dx + r)]

  int window() const noexcept { return 2 * radius + 1; }
  std::size_t depth() const noexcept { return static_cast<std::size_t>(window()) * window(); }
  std::span<const float> row(std::size_t cell) const noexcept {
    return {scores.data() + cell * depth(), depth()};
  }
};

/// Per-cell displacement in cells (matched target position - own position)
/// and the winning softmax probability.
struct Flow {
  int width = 0;
  int height = 0;
  std::vector<Vec2> v;
  std::vector<double> confidence;

  std::size_t cell(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width + x; }
};

/// Throws DimensionMismatch (shape) / InvalidArgument (even K).
GlobalCorrelationVolume global_correlation(const FeatureMap& fr, const FeatureMap& ft, int k);

/// Softmax of alpha * scores per reference cell; flow to the arg-max
/// (ties -> smallest row-major target index).
Flow volume_to_flow(const GlobalCorrelationVolume& vol, double alpha);

/// Dot products of fr(p) against ft(p + o) for |o|_inf <= r.
LocalCorrelationVolume local_correlation(const FeatureMap& fr, const FeatureMap& ft_warped, int r);

/// Soft-argmax: probability-weighted mean offset under softmax(alpha * s).
Flow local_volume_to_flow(const LocalCorrelationVolume& vol, double alpha);

/// Debug dump: "EDFFDCOR", u32 kind (0 global, 1 local), u32 width,
/// u32 height, u32 depth, then width*height*depth little-endian float32.
std::vector<std::uint8_t> dump_volume(const GlobalCorrelationVolume& vol);
std::vector<std::uint8_t> dump_volume(const LocalCorrelationVolume& vol);

}  // namespace edffd
