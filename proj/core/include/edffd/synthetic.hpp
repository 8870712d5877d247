#pragma once

#include <cstdint>

#include "edffd/aggregator.hpp"
#include "edffd/ffd.hpp"
#include "edffd/homography.hpp"
#include "edffd/image.hpp"
#include "edffd/sampling.hpp"

namespace edffd {

/// Seeded multi-octave value noise, defined and smooth (C2) on the whole
/// plane, so it can be rendered at arbitrary real coordinates.
class ProceduralTexture {
 public:
  explicit ProceduralTexture(std::uint64_t seed, double base_period = 24.0, int octaves = 4);
  /// Value in [0, 1] for colour channel c (0..2).
  double value(double x, double y, int c = 0) const noexcept;
  ImageBuffer render(int width, int height, int channels) const;
  /// Renders T(map(x)) for every pixel of the map canvas.
  ImageBuffer render(const SamplingMap& map, int channels) const;

 private:
  double noise(double x, double y, std::uint64_t salt) const noexcept;
  std::uint64_t seed_;
  double base_period_;
  int octaves_;
};

struct SyntheticSpec {
  int width = 256;
  int height = 256;
  int channels = 3;
  double max_corner_motion = 20.0;
  int grid_rows = 12;
  int grid_cols = 12;
  double max_displacement = 5.0;
  double theta = 0.75;
  std::uint64_t seed = 1;
};

/// Reference and target related by s(x) = H(x) + EDFFD(x): the target is the
/// texture on the canvas, the reference its resampling through s, so the
/// warped target matches the reference wherever s lands on the canvas.
struct SyntheticPair {
  ImageBuffer reference;
  ImageBuffer target;
  FourPointMotion motion;
  Homography h;
  ControlGrid grid;
  SamplingMap truth;
};
SyntheticPair make_synthetic_pair(const SyntheticSpec& spec);

struct ToySpec {
  std::size_t samples = 2000;
  int patch = 32;
  int downsample = 4;
  int radius = 2;
  double max_corner_motion = 3.0;
  std::uint64_t seed = 11;
};

/// Inputs: flattened local correlation volume between the features of a
/// reference patch and its target; outputs: the eight corner motions divided
/// by max_corner_motion.
Dataset make_toy_dataset(const ToySpec& spec);
int toy_input_width(const ToySpec& spec) noexcept;

}  // namespace edffd
