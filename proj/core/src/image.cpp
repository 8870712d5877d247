#include "edffd/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "edffd/error.hpp"

namespace edffd {

ImageBuffer::ImageBuffer(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0 || (channels != 1 && channels != 3)) {
    throw Error(ErrorCode::InvalidArgument, "image must be non-empty with 1 or 3 channels");
  }
  data_.assign(pixel_count() * channels, fill);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width <= 0 || height <= 0 || (channels != 1 && channels != 3)) {
    throw Error(ErrorCode::InvalidArgument, "image must be non-empty with 1 or 3 channels");
  }
  if (data_.size() != pixel_count() * channels) {
    throw Error(ErrorCode::DimensionMismatch, "image data length does not match dimensions");
  }
}

Mask::Mask(int width, int height, float fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "mask must be non-empty");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

Mask::Mask(int width, int height, std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "mask must be non-empty");
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::DimensionMismatch, "mask data length does not match dimensions");
  }
}

double Mask::sum() const noexcept {
  double s = 0.0;
  for (float v : data_) s += v;
  return s;
}

namespace {

// Cell origin and fraction along one axis; x must already be inside [0, n-1].
inline void locate(double x, int n, int& i0, double& f) {
  if (n == 1) {
    i0 = 0;
    f = 0.0;
    return;
  }
  i0 = std::min(static_cast<int>(std::floor(x)), n - 2);
  f = x - i0;
}

inline bool inside(double x, double y, int w, int h) {
  return x >= 0.0 && y >= 0.0 && x <= static_cast<double>(w - 1) && y <= static_cast<double>(h - 1);
}

}  // namespace

double sample_bilinear(const ImageBuffer& img, double x, double y, int channel, bool* valid) {
  const int w = img.width();
  const int h = img.height();
  if (!inside(x, y, w, h)) {
    if (valid) *valid = false;
    return 0.0;
  }
  if (valid) *valid = true;
  int x0, y0;
  double fx, fy;
  locate(x, w, x0, fx);
  locate(y, h, y0, fy);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double v00 = img.at(x0, y0, channel);
  const double v10 = img.at(x1, y0, channel);
  const double v01 = img.at(x0, y1, channel);
  const double v11 = img.at(x1, y1, channel);
  const double top = v00 * (1.0 - fx) + v10 * fx;
  const double bottom = v01 * (1.0 - fx) + v11 * fx;
  return top * (1.0 - fy) + bottom * fy;
}

Sample sample_bilinear(const ImageBuffer& img, double x, double y) {
  Sample s;
  if (!inside(x, y, img.width(), img.height())) return s;
  s.valid = true;
  for (int c = 0; c < img.channels(); ++c) {
    s.value[c] = static_cast<float>(sample_bilinear(img, x, y, c, nullptr));
  }
  return s;
}

namespace {

// Catmull-Rom weights and their derivatives for fraction t in [0,1].
inline void catmull_rom(double t, double w[4], double dw[4]) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
  w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
  w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
  dw[0] = 0.5 * (-3.0 * t2 + 4.0 * t - 1.0);
  dw[1] = 0.5 * (9.0 * t2 - 10.0 * t);
  dw[2] = 0.5 * (-9.0 * t2 + 8.0 * t + 1.0);
  dw[3] = 0.5 * (3.0 * t2 - 2.0 * t);
}

}  // namespace

CubicSample sample_cubic(const ImageBuffer& img, double x, double y) {
  CubicSample s;
  const int w = img.width();
  const int h = img.height();
  if (!inside(x, y, w, h)) return s;
  s.valid = true;
  int x0, y0;
  double fx, fy;
  locate(x, w, x0, fx);
  locate(y, h, y0, fy);
  double wx[4], dwx[4], wy[4], dwy[4];
  catmull_rom(fx, wx, dwx);
  catmull_rom(fy, wy, dwy);
  int xs[4], ys[4];
  for (int k = 0; k < 4; ++k) {
    xs[k] = std::clamp(x0 - 1 + k, 0, w - 1);
    ys[k] = std::clamp(y0 - 1 + k, 0, h - 1);
  }
  double v = 0.0, gx = 0.0, gy = 0.0;
  for (int j = 0; j < 4; ++j) {
    double row = 0.0, drow = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double p = img.at(xs[i], ys[j], 0);
      row += wx[i] * p;
      drow += dwx[i] * p;
    }
    v += wy[j] * row;
    gx += wy[j] * drow;
    gy += dwy[j] * row;
  }
  s.value = v;
  s.dx = gx;
  s.dy = gy;
  return s;
}

ImageBuffer downsample2(const ImageBuffer& img) {
  const int w = img.width() / 2;
  const int h = img.height() / 2;
  if (w < 1 || h < 1) throw Error(ErrorCode::TooCoarse, "cannot halve an image below 1 pixel");
  ImageBuffer out(w, h, img.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        const float a = img.at(2 * x, 2 * y, c);
        const float b = img.at(2 * x + 1, 2 * y, c);
        const float d = img.at(2 * x, 2 * y + 1, c);
        const float e = img.at(2 * x + 1, 2 * y + 1, c);
        // Pairwise order keeps constant images exact.
        out.at(x, y, c) = ((a + b) + (d + e)) * 0.25f;
      }
    }
  }
  return out;
}

Pyramid build_pyramid(const ImageBuffer& img, int levels) {
  if (levels < 1) throw Error(ErrorCode::InvalidArgument, "pyramid needs at least one level");
  const int shift = levels - 1;
  if ((img.width() >> shift) < 8 || (img.height() >> shift) < 8) {
    throw Error(ErrorCode::TooCoarse, "coarsest pyramid level would be smaller than 8x8");
  }
  Pyramid p;
  p.levels.reserve(levels);
  p.levels.push_back(img);
  for (int k = 1; k < levels; ++k) p.levels.push_back(downsample2(p.levels.back()));
  return p;
}

double psnr_masked(const ImageBuffer& a, const ImageBuffer& b, const Mask& mask) {
  if (!a.same_shape(b) || mask.width() != a.width() || mask.height() != a.height()) {
    throw Error(ErrorCode::DimensionMismatch, "psnr inputs must share dimensions");
  }
  double weight = 0.0;
  double err = 0.0;
  const int ch = a.channels();
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const double m = mask.at(x, y);
      if (m <= 0.0) continue;
      double e = 0.0;
      for (int c = 0; c < ch; ++c) {
        const double d = static_cast<double>(a.at(x, y, c)) - static_cast<double>(b.at(x, y, c));
        e += d * d;
      }
      err += m * e;
      weight += m * ch;
    }
  }
  if (weight <= 0.0) throw Error(ErrorCode::EmptyMask, "mask has zero total weight");
  const double mse = err / weight;
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

ImageBuffer to_luminance(const ImageBuffer& img) {
  if (img.channels() == 1) return img;
  ImageBuffer out(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(x, y) = static_cast<float>(0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) +
                                        0.114 * img.at(x, y, 2));
    }
  }
  return out;
}

void sanitize(ImageBuffer& img) {
  for (float& v : img.data()) {
    if (!std::isfinite(v)) v = 0.0f;
    v = std::clamp(v, 0.0f, 1.0f);
  }
}

}  // namespace edffd
