#include "edffd/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "edffd/error.hpp"
#include "edffd/parallel.hpp"

namespace edffd {

SamplingMap::SamplingMap(int w, int h)
    : width(w), height(h), sx(static_cast<std::size_t>(w) * h, 0.0), sy(sx.size(), 0.0) {}

SamplingMap SamplingMap::identity(int w, int h) {
  SamplingMap m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      m.sx[m.index(x, y)] = x;
      m.sy[m.index(x, y)] = y;
    }
  }
  return m;
}

namespace {

// Clamped bilinear lookup of a displacement field at a real position.
Vec2 field_at(const DisplacementField& f, Vec2 p) {
  const double x = std::clamp(p.x, 0.0, static_cast<double>(f.width - 1));
  const double y = std::clamp(p.y, 0.0, static_cast<double>(f.height - 1));
  const int x0 = std::min(static_cast<int>(x), std::max(f.width - 2, 0));
  const int y0 = std::min(static_cast<int>(y), std::max(f.height - 2, 0));
  const int x1 = std::min(x0 + 1, f.width - 1);
  const int y1 = std::min(y0 + 1, f.height - 1);
  const double fx = x - x0, fy = y - y0;
  auto lerp2 = [&](const std::vector<double>& v) {
    const double top = v[f.index(x0, y0)] * (1 - fx) + v[f.index(x1, y0)] * fx;
    const double bot = v[f.index(x0, y1)] * (1 - fx) + v[f.index(x1, y1)] * fx;
    return top * (1 - fy) + bot * fy;
  };
  return {lerp2(f.dx), lerp2(f.dy)};
}

}  // namespace

SamplingMap compose_sampling_map(const Homography& h, std::span<const DisplacementField> fields,
                                 int width, int height, Composition mode) {
  for (const auto& f : fields) {
    if (f.width != width || f.height != height) {
      throw Error(ErrorCode::DimensionMismatch, "displacement field canvas differs from map canvas");
    }
  }
  SamplingMap map(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = map.index(x, y);
      Vec2 s;
      if (mode == Composition::Additive) {
        s = h.apply(Vec2{static_cast<double>(x), static_cast<double>(y)});
        for (const auto& f : fields) s += Vec2{f.dx[i], f.dy[i]};
      } else {
        Vec2 q{static_cast<double>(x), static_cast<double>(y)};
        for (std::size_t k = fields.size(); k-- > 0;) {
          q += k + 1 == fields.size() ? Vec2{fields[k].dx[i], fields[k].dy[i]} : field_at(fields[k], q);
        }
        s = h.apply(q);
      }
      map.sx[i] = s.x;
      map.sy[i] = s.y;
    }
  }
  return map;
}

SamplingMap add_field(const SamplingMap& prior, const DisplacementField& field) {
  if (field.width != prior.width || field.height != prior.height) {
    throw Error(ErrorCode::DimensionMismatch, "field and map canvases differ");
  }
  SamplingMap out = prior;
  for (std::size_t i = 0; i < out.sx.size(); ++i) {
    out.sx[i] += field.dx[i];
    out.sy[i] += field.dy[i];
  }
  return out;
}

WarpResult warp_image(const ImageBuffer& src, const SamplingMap& map) {
  WarpResult r{ImageBuffer(map.width, map.height, src.channels()), Mask(map.width, map.height, 0.0f)};
  parallel_for(static_cast<std::size_t>(map.height), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < map.width; ++x) {
        const std::size_t i = map.index(x, static_cast<int>(y));
        const Sample s = sample_bilinear(src, map.sx[i], map.sy[i]);
        for (int c = 0; c < src.channels(); ++c) r.image.at(x, static_cast<int>(y), c) = s.value[c];
        r.mask.at(x, static_cast<int>(y)) = s.valid ? 1.0f : 0.0f;
      }
    }
  });
  return r;
}

Mask warp_ones(const SamplingMap& map, int src_width, int src_height) {
  Mask m(map.width, map.height, 0.0f);
  const double xmax = src_width - 1;
  const double ymax = src_height - 1;
  for (std::size_t i = 0; i < map.sx.size(); ++i) {
    const double x = map.sx[i], y = map.sy[i];
    m.data()[i] = (x >= 0.0 && y >= 0.0 && x <= xmax && y <= ymax) ? 1.0f : 0.0f;
  }
  return m;
}

EndpointError endpoint_error(const SamplingMap& map, const SamplingMap& truth, const Mask& region) {
  if (map.width != truth.width || map.height != truth.height || region.width() != map.width ||
      region.height() != map.height) {
    throw Error(ErrorCode::DimensionMismatch, "endpoint error inputs differ in size");
  }
  EndpointError e;
  double sum = 0.0;
  for (std::size_t i = 0; i < map.sx.size(); ++i) {
    if (region.data()[i] < 0.5f) continue;
    const double d = std::hypot(map.sx[i] - truth.sx[i], map.sy[i] - truth.sy[i]);
    sum += d;
    e.max = std::max(e.max, d);
    ++e.count;
  }
  if (e.count > 0) e.mean = sum / static_cast<double>(e.count);
  return e;
}

}  // namespace edffd
