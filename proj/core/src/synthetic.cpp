#include "edffd/synthetic.hpp"

#include <cmath>
#include <random>

#include "edffd/correlation.hpp"
#include "edffd/error.hpp"
#include "edffd/parallel.hpp"

namespace edffd {

namespace {

std::uint64_t mix(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double lattice(std::int64_t i, std::int64_t j, std::uint64_t salt) noexcept {
  const std::uint64_t h = mix(salt ^ mix(static_cast<std::uint64_t>(i) * 0x632be59bd9b4e019ULL +
                                         static_cast<std::uint64_t>(j)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Quintic fade: zero first and second derivatives at the lattice.
double fade(double t) noexcept { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

}  // namespace

ProceduralTexture::ProceduralTexture(std::uint64_t seed, double base_period, int octaves)
    : seed_(seed), base_period_(base_period), octaves_(octaves) {}

double ProceduralTexture::noise(double x, double y, std::uint64_t salt) const noexcept {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto i = static_cast<std::int64_t>(fx);
  const auto j = static_cast<std::int64_t>(fy);
  const double u = fade(x - fx), v = fade(y - fy);
  const double a = lattice(i, j, salt), b = lattice(i + 1, j, salt);
  const double c = lattice(i, j + 1, salt), d = lattice(i + 1, j + 1, salt);
  return (a + (b - a) * u) * (1 - v) + (c + (d - c) * u) * v;
}

double ProceduralTexture::value(double x, double y, int c) const noexcept {
  double sum = 0.0, amp = 1.0, total = 0.0, period = base_period_;
  for (int o = 0; o < octaves_; ++o) {
    const std::uint64_t salt = mix(seed_ * 131 + static_cast<std::uint64_t>(o * 3 + c));
    sum += amp * noise(x / period, y / period, salt);
    total += amp;
    amp *= 0.5;
    period *= 0.5;
  }
  return sum / total;
}

ImageBuffer ProceduralTexture::render(int width, int height, int channels) const {
  ImageBuffer img(width, height, channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) img.at(x, y, c) = static_cast<float>(value(x, y, c));
    }
  }
  return img;
}

ImageBuffer ProceduralTexture::render(const SamplingMap& map, int channels) const {
  ImageBuffer img(map.width, map.height, channels);
  parallel_for(static_cast<std::size_t>(map.height), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < map.width; ++x) {
        const Vec2 s = map.at(x, static_cast<int>(y));
        for (int c = 0; c < channels; ++c) {
          img.at(x, static_cast<int>(y), c) = static_cast<float>(value(s.x, s.y, c));
        }
      }
    }
  });
  return img;
}

SyntheticPair make_synthetic_pair(const SyntheticSpec& spec) {
  std::mt19937_64 rng(mix(spec.seed));
  std::uniform_real_distribution<double> corner(-spec.max_corner_motion, spec.max_corner_motion);
  std::uniform_real_distribution<double> disp(-spec.max_displacement, spec.max_displacement);

  SyntheticPair p;
  for (auto& d : p.motion.d) d = {corner(rng), corner(rng)};
  p.h = four_point_to_homography(p.motion, spec.width, spec.height);
  p.grid = ControlGrid(spec.grid_rows, spec.grid_cols, spec.width, spec.height);
  for (auto& d : p.grid.displacements()) d = {disp(rng), disp(rng)};
  const DisplacementField field = edffd_field(p.grid, spec.theta);
  p.truth = compose_sampling_map(p.h, std::span(&field, 1), spec.width, spec.height);

  const ProceduralTexture tex(mix(spec.seed + 1));
  p.target = tex.render(spec.width, spec.height, spec.channels);
  p.reference = tex.render(p.truth, spec.channels);
  return p;
}

int toy_input_width(const ToySpec& spec) noexcept {
  const int cells = spec.patch / spec.downsample;
  const int win = 2 * spec.radius + 1;
  return cells * cells * win * win;
}

Dataset make_toy_dataset(const ToySpec& spec) {
  Dataset data;
  data.inputs.resize(spec.samples);
  data.targets.resize(spec.samples);
  std::mt19937_64 rng(mix(spec.seed));
  std::uniform_real_distribution<double> corner(-spec.max_corner_motion, spec.max_corner_motion);
  std::uniform_real_distribution<double> offset(0.0, 4096.0);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    FourPointMotion m;
    for (auto& d : m.d) d = {corner(rng), corner(rng)};
    const double ox = offset(rng), oy = offset(rng);
    const Homography h = four_point_to_homography(m, spec.patch, spec.patch);
    SamplingMap map = compose_sampling_map(h, {}, spec.patch, spec.patch);
    SamplingMap canvas = SamplingMap::identity(spec.patch, spec.patch);
    for (std::size_t k = 0; k < map.sx.size(); ++k) {
      map.sx[k] += ox;
      map.sy[k] += oy;
      canvas.sx[k] += ox;
      canvas.sy[k] += oy;
    }
    const ProceduralTexture tex(spec.seed, 16.0, 3);
    const FeatureMap fr = extract_features(tex.render(map, 1), spec.downsample);
    const FeatureMap ft = extract_features(tex.render(canvas, 1), spec.downsample);
    const LocalCorrelationVolume vol = local_correlation(fr, ft, spec.radius);
    data.inputs[i].assign(vol.scores.begin(), vol.scores.end());
    auto& t = data.targets[i];
    for (const Vec2& d : m.d) {
      t.push_back(d.x / spec.max_corner_motion);
      t.push_back(d.y / spec.max_corner_motion);
    }
  }
  return data;
}

}  // namespace edffd
