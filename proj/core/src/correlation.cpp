#include "edffd/correlation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "edffd/error.hpp"
#include "edffd/parallel.hpp"

namespace edffd {

FeatureMap::FeatureMap(int w, int h, int c)
    : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, 0.0) {}

namespace {

// Mean luminance of every d x d cell of the lattice.
std::vector<double> cell_means(const ImageBuffer& lum, int d, int cw, int ch) {
  std::vector<double> out(static_cast<std::size_t>(cw) * ch, 0.0);
  const double norm = 1.0 / (static_cast<double>(d) * d);
  for (int cy = 0; cy < ch; ++cy) {
    for (int cx = 0; cx < cw; ++cx) {
      double s = 0.0;
      for (int y = cy * d; y < (cy + 1) * d; ++y) {
        for (int x = cx * d; x < (cx + 1) * d; ++x) s += lum.at(x, y);
      }
      out[static_cast<std::size_t>(cy) * cw + cx] = s * norm;
    }
  }
  return out;
}

void check_same_shape(const FeatureMap& a, const FeatureMap& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw Error(ErrorCode::DimensionMismatch, "feature maps differ in shape");
  }
}

std::vector<std::uint8_t> dump(std::uint32_t kind, std::uint32_t w, std::uint32_t h, std::uint32_t d,
                               std::span<const float> values) {
  std::vector<std::uint8_t> out(8 + 16 + values.size() * 4);
  std::memcpy(out.data(), "EDFFDCOR", 8);
  const std::uint32_t header[4] = {kind, w, h, d};
  std::size_t pos = 8;
  auto put32 = [&](std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out[pos++] = static_cast<std::uint8_t>((v >> (8 * b)) & 0xFF);
  };
  for (std::uint32_t v : header) put32(v);
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put32(bits);
  }
  return out;
}

}  // namespace

FeatureMap extract_features(const ImageBuffer& img, int downsample) {
  if (downsample != 4 && downsample != 8 && downsample != 16) {
    throw Error(ErrorCode::InvalidArgument, "downsample must be 4, 8 or 16");
  }
  if (img.width() < downsample || img.height() < downsample) {
    throw Error(ErrorCode::TooSmall, "image smaller than the feature cell");
  }
  const ImageBuffer lum = to_luminance(img);
  FeatureMap f(lum.width() / downsample, lum.height() / downsample, kFeatureChannels);
  const std::vector<double> cells = cell_means(lum, downsample, f.width, f.height);
  auto value = [&](int x, int y) {
    return cells[static_cast<std::size_t>(std::clamp(y, 0, f.height - 1)) * f.width +
                 std::clamp(x, 0, f.width - 1)];
  };
  for (int cy = 0; cy < f.height; ++cy) {
    for (int cx = 0; cx < f.width; ++cx) {
      auto v = f.at(cx, cy);
      int k = 0;
      double mean = 0.0;
      for (int j = -1; j <= 1; ++j) {
        for (int i = -1; i <= 1; ++i) {
          const int x = cx + i, y = cy + j;
          v[k] = value(x, y);
          v[9 + 2 * k] = 0.5 * (value(x + 1, y) - value(x - 1, y));
          v[10 + 2 * k] = 0.5 * (value(x, y + 1) - value(x, y - 1));
          mean += v[k];
          ++k;
        }
      }
      mean /= 9.0;
      for (int i = 0; i < 9; ++i) v[i] -= mean;
      double n2 = 0.0;
      for (double e : v) n2 += e * e;
      const double n = std::sqrt(n2);
      if (n > 1e-12) {
        for (double& e : v) e /= n;
      } else {
        std::fill(v.begin(), v.end(), 0.0);
      }
    }
  }
  return f;
}

GlobalCorrelationVolume global_correlation(const FeatureMap& fr, const FeatureMap& ft, int k) {
  check_same_shape(fr, ft);
  if (k < 1 || k % 2 == 0) throw Error(ErrorCode::InvalidArgument, "patch size K must be odd");
  const int w = fr.width, h = fr.height;
  const auto cells = static_cast<Eigen::Index>(w) * h;
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  // Unit-normalised copies; vectors with norm < 1e-12 become zero so their
  // cosine terms vanish.
  auto normalised = [&](const FeatureMap& f) {
    RowMat m(cells, f.channels);
    for (Eigen::Index c = 0; c < cells; ++c) {
      double n2 = 0.0;
      for (int i = 0; i < f.channels; ++i) n2 += f.data[c * f.channels + i] * f.data[c * f.channels + i];
      const double n = std::sqrt(n2);
      for (int i = 0; i < f.channels; ++i) {
        m(c, i) = n < 1e-12 ? 0.0 : f.data[c * f.channels + i] / n;
      }
    }
    return m;
  };
  const RowMat a = normalised(fr);
  const RowMat b = normalised(ft);
  const RowMat cos = a * b.transpose();

  GlobalCorrelationVolume vol;
  vol.width = w;
  vol.height = h;
  vol.scores.assign(static_cast<std::size_t>(cells) * cells, 0.0f);
  const int half = k / 2;
  parallel_for(static_cast<std::size_t>(cells), [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r) {
      const int xr = static_cast<int>(r) % w, yr = static_cast<int>(r) / w;
      float* out = vol.scores.data() + r * cells;
      for (int yt = 0; yt < h; ++yt) {
        for (int xt = 0; xt < w; ++xt) {
          double s = 0.0;
          for (int j = -half; j <= half; ++j) {
            const int ya = yr + j, yb = yt + j;
            if (ya < 0 || ya >= h || yb < 0 || yb >= h) continue;
            for (int i = -half; i <= half; ++i) {
              const int xa = xr + i, xb = xt + i;
              if (xa < 0 || xa >= w || xb < 0 || xb >= w) continue;
              s += cos(static_cast<Eigen::Index>(ya) * w + xa, static_cast<Eigen::Index>(yb) * w + xb);
            }
          }
          out[static_cast<std::size_t>(yt) * w + xt] = static_cast<float>(s);
        }
      }
    }
  });
  return vol;
}

Flow volume_to_flow(const GlobalCorrelationVolume& vol, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
  Flow f{vol.width, vol.height, {}, {}};
  const std::size_t cells = vol.cells();
  f.v.resize(cells);
  f.confidence.resize(cells);
  for (std::size_t r = 0; r < cells; ++r) {
    const auto row = vol.row(r);
    std::size_t best = 0;
    for (std::size_t t = 1; t < cells; ++t) {
      if (row[t] > row[best]) best = t;
    }
    const double top = alpha * row[best];
    double z = 0.0;
    for (float s : row) z += std::exp(alpha * s - top);
    const int xr = static_cast<int>(r % vol.width), yr = static_cast<int>(r / vol.width);
    const int xt = static_cast<int>(best % vol.width), yt = static_cast<int>(best / vol.width);
    f.v[r] = {static_cast<double>(xt - xr), static_cast<double>(yt - yr)};
    f.confidence[r] = 1.0 / z;
  }
  return f;
}

LocalCorrelationVolume local_correlation(const FeatureMap& fr, const FeatureMap& ft, int r) {
  check_same_shape(fr, ft);
  if (r < 1) throw Error(ErrorCode::InvalidArgument, "local radius must be >= 1");
  LocalCorrelationVolume vol;
  vol.width = fr.width;
  vol.height = fr.height;
  vol.radius = r;
  const std::size_t depth = vol.depth();
  vol.scores.assign(static_cast<std::size_t>(fr.width) * fr.height * depth, 0.0f);
  parallel_for(static_cast<std::size_t>(fr.height), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t yy = y0; yy < y1; ++yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < fr.width; ++x) {
        const auto a = fr.at(x, y);
        float* out = vol.scores.data() + fr.cell(x, y) * depth;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const int xt = x + dx, yt = y + dy;
            if (xt < 0 || yt < 0 || xt >= fr.width || yt >= fr.height) continue;
            const auto b = ft.at(xt, yt);
            double s = 0.0;
            for (int c = 0; c < fr.channels; ++c) s += a[c] * b[c];
            out[(dy + r) * vol.window() + (dx + r)] = static_cast<float>(s);
          }
        }
      }
    }
  });
  return vol;
}

Flow local_volume_to_flow(const LocalCorrelationVolume& vol, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
  Flow f{vol.width, vol.height, {}, {}};
  const std::size_t cells = static_cast<std::size_t>(vol.width) * vol.height;
  f.v.resize(cells);
  f.confidence.resize(cells);
  const int win = vol.window();
  for (std::size_t c = 0; c < cells; ++c) {
    const auto row = vol.row(c);
    const double top = alpha * *std::max_element(row.begin(), row.end());
    double z = 0.0, mx = 0.0, my = 0.0, pmax = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double e = std::exp(alpha * row[k] - top);
      z += e;
      mx += e * (static_cast<int>(k % win) - vol.radius);
      my += e * (static_cast<int>(k / win) - vol.radius);
      pmax = std::max(pmax, e);
    }
    f.v[c] = {mx / z, my / z};
    f.confidence[c] = pmax / z;
  }
  return f;
}

std::vector<std::uint8_t> dump_volume(const GlobalCorrelationVolume& vol) {
  return dump(0, vol.width, vol.height, static_cast<std::uint32_t>(vol.cells()), vol.scores);
}

std::vector<std::uint8_t> dump_volume(const LocalCorrelationVolume& vol) {
  return dump(1, vol.width, vol.height, static_cast<std::uint32_t>(vol.depth()), vol.scores);
}

}  // namespace edffd
