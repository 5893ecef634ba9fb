#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "image.hpp"

namespace msos::plot {

using Rgb = std::array<unsigned char, 3>;

struct Canvas {
  int w, h;
  std::vector<unsigned char> px;
  Canvas(int w_, int h_) : w(w_), h(h_), px(static_cast<size_t>(w_) * h_ * 3, 255) {}
  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    std::copy(c.begin(), c.end(), px.begin() + 3 * (static_cast<size_t>(y) * w + x));
  }
  void line(double x0, double y0, double x1, double y1, Rgb c) {
    const int n = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
    for (int i = 0; i <= n; ++i) {
      const double s = static_cast<double>(i) / n;
      set(static_cast<int>(std::lround(x0 + s * (x1 - x0))), static_cast<int>(std::lround(y0 + s * (y1 - y0))), c);
    }
  }
  void save(const std::string& path) const { io::write_png_rgb(path, w, h, px); }
};

struct Series {
  std::vector<double> x, y;
  Rgb color{0, 0, 0};
};

inline const std::vector<Rgb>& palette() {
  static const std::vector<Rgb> p{{31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40},
                                  {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127}};
  return p;
}

/// Line plot with a frame, a dotted reference line at y = ref (if finite) and fixed y range.
inline void line_plot(const std::string& path, const std::vector<Series>& series, double ymin, double ymax,
                      double ref = NAN, int w = 640, int h = 400) {
  Canvas c(w, h);
  const int ml = 40, mr = 10, mt = 10, mb = 30;
  double xmin = 1e300, xmax = -1e300;
  for (const auto& s : series)
    for (double v : s.x) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
  if (!(xmax > xmin)) xmax = xmin + 1;
  auto X = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto Y = [&](double v) { return h - mb - (v - ymin) / (ymax - ymin) * (h - mt - mb); };
  const Rgb k{0, 0, 0}, g{170, 170, 170};
  c.line(ml, mt, ml, h - mb, k);
  c.line(ml, h - mb, w - mr, h - mb, k);
  c.line(w - mr, mt, w - mr, h - mb, k);
  c.line(ml, mt, w - mr, mt, k);
  if (std::isfinite(ref))
    for (int x = ml; x < w - mr; x += 4) c.set(x, static_cast<int>(std::lround(Y(ref))), g);
  for (const auto& s : series)
    for (size_t i = 1; i < s.x.size(); ++i) c.line(X(s.x[i - 1]), Y(s.y[i - 1]), X(s.x[i]), Y(s.y[i]), s.color);
  c.save(path);
}

/// Nonnegative field as a heatmap (black-red-yellow-white), each pixel scaled up by `zoom`.
inline void heatmap(const std::string& path, const std::vector<double>& v, int w, int h, int zoom = 8,
                    double vmax = 0) {
  if (vmax <= 0) vmax = *std::max_element(v.begin(), v.end());
  Canvas c(w * zoom, h * zoom);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double s = vmax > 0 ? std::clamp(v[static_cast<size_t>(y) * w + x] / vmax, 0.0, 1.0) : 0.0;
      const Rgb col{static_cast<unsigned char>(255 * std::min(1.0, 3 * s)),
                    static_cast<unsigned char>(255 * std::clamp(3 * s - 1, 0.0, 1.0)),
                    static_cast<unsigned char>(255 * std::clamp(3 * s - 2, 0.0, 1.0))};
      for (int dy = 0; dy < zoom; ++dy)
        for (int dx = 0; dx < zoom; ++dx) c.set(x * zoom + dx, (h - 1 - y) * zoom + dy, col);
    }
  c.save(path);
}

}  // namespace msos::plot
