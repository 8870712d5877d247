#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace edffd {

/// Row-major float image with 1 or 3 interleaved channels, values in [0,1].
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, float fill = 0.0f);
  ImageBuffer(int width, int height, int channels, std::vector<float> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int x, int y, int c = 0) noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int x, int y, int c = 0) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const ImageBuffer& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<float> data_;
};

/// Per-pixel weights in [0,1]; the overlap/validity companion of an image.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, float fill = 1.0f);
  Mask(int width, int height, std::vector<float> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  float& at(int x, int y) noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  double sum() const noexcept;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

struct Pyramid {
  std::vector<ImageBuffer> levels;  // levels[0] is full resolution
};

struct Sample {
  std::array<float, 3> value{};
  bool valid = false;
};

/// Bilinear interpolation of the four enclosing pixels. Points outside
/// [0,w-1]x[0,h-1] give value 0 with valid=false.
Sample sample_bilinear(const ImageBuffer& img, double x, double y);

/// Single-channel variant in double precision; returns 0 outside the canvas.
double sample_bilinear(const ImageBuffer& img, double x, double y, int channel, bool* valid);

/// Catmull-Rom sample of channel 0 with its spatial gradient. Same validity
/// rule as sample_bilinear; neighbours beyond the border are clamped.
struct CubicSample {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  bool valid = false;
};
CubicSample sample_cubic(const ImageBuffer& img, double x, double y);

/// Level k is a 2x2 box-filtered, 2-subsampled copy of level k-1. Throws
/// TooCoarse if any level would be smaller than 8x8.
Pyramid build_pyramid(const ImageBuffer& img, int levels);

/// 2x2 box reduction used by build_pyramid.
ImageBuffer downsample2(const ImageBuffer& img);

/// 10*log10(1/MSE) over mask-weighted pixels (all channels). Returns +inf for
/// identical inputs. Throws EmptyMask / DimensionMismatch.
double psnr_masked(const ImageBuffer& a, const ImageBuffer& b, const Mask& mask);

/// 0.299R + 0.587G + 0.114B; single-channel images are returned unchanged.
ImageBuffer to_luminance(const ImageBuffer& img);

/// Clamps to [0,1] and replaces non-finite values with 0.
void sanitize(ImageBuffer& img);

}  // namespace edffd
