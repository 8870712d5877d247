#include "edffd/checks/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace edffd::oracle {

double bspline(double u) {
  const double a = std::abs(u);
  if (a >= 2.0) return 0.0;
  if (a >= 1.0) return (2.0 - a) * (2.0 - a) * (2.0 - a) / 6.0;
  return (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0;
}

namespace {

template <typename Weight>
DisplacementField lattice_sum(const ControlGrid& g, Weight&& weight) {
  DisplacementField f(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      double sx = 0.0, sy = 0.0;
      for (int m = 0; m <= g.rows(); ++m) {
        for (int n = 0; n <= g.cols(); ++n) {
          const double px = static_cast<double>(n) * g.width() / g.cols();
          const double py = static_cast<double>(m) * g.height() / g.rows();
          const double w = weight(x - px, y - py);
          sx += w * g.displacement(m, n).x;
          sy += w * g.displacement(m, n).y;
        }
      }
      f.dx[f.index(x, y)] = sx;
      f.dy[f.index(x, y)] = sy;
    }
  }
  return f;
}

double bilinear(const ImageBuffer& img, double x, double y, int c, bool& valid) {
  valid = x >= 0.0 && y >= 0.0 && x <= img.width() - 1 && y <= img.height() - 1;
  if (!valid) return 0.0;
  const int x0 = std::min(static_cast<int>(std::floor(x)), std::max(img.width() - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(y)), std::max(img.height() - 2, 0));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0, fy = y - y0;
  return (1 - fy) * ((1 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c)) +
         fy * ((1 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c));
}

Vec2 point(const ControlGrid& g, int m, int n) {
  return {static_cast<double>(n) * g.width() / g.cols() + g.displacement(m, n).x,
          static_cast<double>(m) * g.height() / g.rows() + g.displacement(m, n).y};
}

}  // namespace

DisplacementField bspline_field(const ControlGrid& g) {
  const double hx = static_cast<double>(g.width()) / g.cols();
  const double hy = static_cast<double>(g.height()) / g.rows();
  return lattice_sum(g, [&](double dx, double dy) { return bspline(dx / hx) * bspline(dy / hy); });
}

DisplacementField edffd_field(const ControlGrid& g, double theta) {
  const double eta = std::min(static_cast<double>(g.width()) / g.cols(),
                              static_cast<double>(g.height()) / g.rows());
  return lattice_sum(g, [&](double dx, double dy) {
    return std::exp(-std::sqrt(dx * dx + dy * dy) / (theta * eta));
  });
}

double masked_l1(const ImageBuffer& base, const ImageBuffer& other,
                 const std::function<Vec2(int, int)>& map) {
  double sum = 0.0;
  for (int y = 0; y < base.height(); ++y) {
    for (int x = 0; x < base.width(); ++x) {
      const Vec2 s = map(x, y);
      for (int c = 0; c < base.channels(); ++c) {
        bool valid = false;
        const double v = bilinear(other, s.x, s.y, c, valid);
        sum += std::abs((valid ? base.at(x, y, c) : 0.0) - v);
      }
    }
  }
  return sum / (static_cast<double>(base.width()) * base.height() * base.channels());
}

double intra_grid_loss(const ControlGrid& g) {
  double h = 0.0, v = 0.0;
  for (int m = 0; m <= g.rows(); ++m) {
    for (int n = 0; n < g.cols(); ++n) {
      const double len = point(g, m, n + 1).x - point(g, m, n).x;
      if (len > 2.0 * g.width() / g.cols()) h += len - 2.0 * g.width() / g.cols();
    }
  }
  for (int n = 0; n <= g.cols(); ++n) {
    for (int m = 0; m < g.rows(); ++m) {
      const double len = point(g, m + 1, n).y - point(g, m, n).y;
      if (len > 2.0 * g.height() / g.rows()) v += len - 2.0 * g.height() / g.rows();
    }
  }
  return h / ((g.rows() + 1.0) * g.cols()) + v / (g.rows() * (g.cols() + 1.0));
}

double inter_grid_loss(const ControlGrid& g, const Mask& overlap) {
  auto outside = [&](int m, int n) {
    const double ax = static_cast<double>(n) * g.width() / g.cols();
    const double ay = static_cast<double>(m) * g.height() / g.rows();
    const int x = std::clamp(static_cast<int>(std::lround(ax)), 0, overlap.width() - 1);
    const int y = std::clamp(static_cast<int>(std::lround(ay)), 0, overlap.height() - 1);
    return overlap.at(x, y) < 0.5f;
  };
  auto term = [&](Vec2 a, Vec2 b, Vec2 c) {
    const double ux = b.x - a.x, uy = b.y - a.y, vx = c.x - b.x, vy = c.y - b.y;
    return 1.0 - (ux * vx + uy * vy) / (std::sqrt(ux * ux + uy * uy) * std::sqrt(vx * vx + vy * vy));
  };
  double sum = 0.0;
  long pairs = 0;
  for (int m = 0; m <= g.rows(); ++m) {
    for (int n = 1; n < g.cols(); ++n) {
      ++pairs;
      if (outside(m, n - 1) && outside(m, n) && outside(m, n + 1)) {
        sum += term(point(g, m, n - 1), point(g, m, n), point(g, m, n + 1));
      }
    }
  }
  for (int n = 0; n <= g.cols(); ++n) {
    for (int m = 1; m < g.rows(); ++m) {
      ++pairs;
      if (outside(m - 1, n) && outside(m, n) && outside(m + 1, n)) {
        sum += term(point(g, m - 1, n), point(g, m, n), point(g, m + 1, n));
      }
    }
  }
  return pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
}

std::vector<double> global_scores(const FeatureMap& fr, const FeatureMap& ft, int k) {
  const int w = fr.width, h = fr.height, half = k / 2;
  auto cosine = [&](int xa, int ya, int xb, int yb) {
    const auto a = fr.at(xa, ya);
    const auto b = ft.at(xb, yb);
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (int c = 0; c < fr.channels; ++c) {
      ab += a[c] * b[c];
      aa += a[c] * a[c];
      bb += b[c] * b[c];
    }
    if (std::sqrt(aa) < 1e-12 || std::sqrt(bb) < 1e-12) return 0.0;
    return ab / (std::sqrt(aa) * std::sqrt(bb));
  };
  std::vector<double> out(static_cast<std::size_t>(w * h) * (w * h), 0.0);
  for (int yr = 0; yr < h; ++yr)
    for (int xr = 0; xr < w; ++xr)
      for (int yt = 0; yt < h; ++yt)
        for (int xt = 0; xt < w; ++xt) {
          double s = 0.0;
          for (int j = -half; j <= half; ++j)
            for (int i = -half; i <= half; ++i) {
              const int xa = xr + i, ya = yr + j, xb = xt + i, yb = yt + j;
              if (xa < 0 || ya < 0 || xa >= w || ya >= h) continue;
              if (xb < 0 || yb < 0 || xb >= w || yb >= h) continue;
              s += cosine(xa, ya, xb, yb);
            }
          out[static_cast<std::size_t>(yr * w + xr) * (w * h) + (yt * w + xt)] = s;
        }
  return out;
}

std::vector<double> local_scores(const FeatureMap& fr, const FeatureMap& ft, int r) {
  const int win = 2 * r + 1;
  std::vector<double> out(static_cast<std::size_t>(fr.width * fr.height) * win * win, 0.0);
  for (int y = 0; y < fr.height; ++y)
    for (int x = 0; x < fr.width; ++x)
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (x + dx < 0 || y + dy < 0 || x + dx >= fr.width || y + dy >= fr.height) continue;
          double s = 0.0;
          for (int c = 0; c < fr.channels; ++c) s += fr.at(x, y)[c] * ft.at(x + dx, y + dy)[c];
          out[static_cast<std::size_t>(y * fr.width + x) * win * win + (dy + r) * win + (dx + r)] = s;
        }
  return out;
}

std::vector<double> dense_weights(const GroupLinear& l) {
  std::vector<double> w(static_cast<std::size_t>(l.in) * l.out, 0.0);
  const int gi = l.in / l.groups, go = l.out / l.groups;
  for (int g = 0; g < l.groups; ++g)
    for (int r = 0; r < go; ++r)
      for (int c = 0; c < gi; ++c) {
        w[static_cast<std::size_t>(g * go + r) * l.in + (g * gi + c)] = l.w(g, r, c);
      }
  return w;
}

std::vector<double> head_forward(std::span<const double> x, const Head& head) {
  std::vector<double> a(x.begin(), x.end());
  for (int i = 0; i < 3; ++i) {
    const GroupLinear& l = head.layers[i];
    const auto w = dense_weights(l);
    std::vector<double> y(static_cast<std::size_t>(l.out));
    for (int r = 0; r < l.out; ++r) {
      double s = l.biases[static_cast<std::size_t>(r)];
      for (int c = 0; c < l.in; ++c) s += w[static_cast<std::size_t>(r) * l.in + c] * a[static_cast<std::size_t>(c)];
      y[static_cast<std::size_t>(r)] = i < 2 ? std::max(s, 0.0) : s;
    }
    a = std::move(y);
  }
  return a;
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double h) {
  std::vector<double> p(x.begin(), x.end()), g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = x[i] + h;
    const double up = f(p);
    p[i] = x[i] - h;
    const double down = f(p);
    p[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace edffd::oracle
