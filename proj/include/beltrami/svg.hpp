#pragma once

// Static SVG figures: a heatmap of a chart field (with optional level
// contours) and a line plot of residual histories. All numbers are printed
// with fixed precision, so identical input gives identical bytes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "beltrami/errors.hpp"
#include "beltrami/grid.hpp"

namespace beltrami {

namespace detail {

inline std::string fmt(double x, int prec = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}

inline std::string fmt_g(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// Viridis sampled at nine stops.
inline std::string colour(double s) {
  static constexpr std::array<std::array<int, 3>, 9> stops{{{68, 1, 84},
                                                             {71, 44, 122},
                                                             {59, 81, 139},
                                                             {44, 113, 142},
                                                             {33, 144, 141},
                                                             {39, 173, 129},
                                                             {92, 200, 99},
                                                             {170, 220, 50},
                                                             {253, 231, 37}}};
  s = std::clamp(std::isfinite(s) ? s : 0.0, 0.0, 1.0) * 8.0;
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(s), 7);
  const double t = s - static_cast<double>(k);
  char buf[8];
  int c[3];
  for (int i = 0; i < 3; ++i) c[i] = static_cast<int>(std::lround(stops[k][i] + t * (stops[k + 1][i] - stops[k][i])));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

inline void svg_open(std::ostream& os, int w, int h) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << ' '
     << h << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
}

}  // namespace detail

struct HeatmapOptions {
  std::string title{};
  std::size_t max_cells = 256;        // per axis; larger grids are strided
  std::vector<double> contours{};     // level lines drawn over the map
};

/// One rectangle per (strided) node, colour by value; level lines by marching squares.
inline void render_heatmap(std::ostream& os, const ScalarChartField& f, const HeatmapOptions& opt = {}) {
  const Grid2& g = f.grid();
  detail::require(g.size() > 0, "cannot render an empty field");
  const auto vals = f.values();
  const auto [lo_it, hi_it] = std::minmax_element(vals.begin(), vals.end());
  const double lo = *lo_it, hi = *hi_it, span = hi > lo ? hi - lo : 1.0;
  const std::size_t s0 = (g.shape[0] + opt.max_cells - 1) / opt.max_cells, s1 = (g.shape[1] + opt.max_cells - 1) / opt.max_cells;
  const std::size_t m0 = (g.shape[0] + s0 - 1) / s0, m1 = (g.shape[1] + s1 - 1) / s1;
  const double plot = 480.0;
  const double cw = plot / static_cast<double>(std::max(m0, m1)), ch = cw;
  const double W = cw * static_cast<double>(m0), H = ch * static_cast<double>(m1);
  const double left = 60, top = 40;
  detail::svg_open(os, static_cast<int>(left + W + 120), static_cast<int>(top + H + 60));
  if (!opt.title.empty()) os << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << opt.title << "</text>\n";
  os << "<g shape-rendering=\"crispEdges\">\n";
  for (std::size_t a = 0; a < m0; ++a)
    for (std::size_t b = 0; b < m1; ++b) {
      const double v = f(a * s0, b * s1);
      // Axis 1 points up.
      os << "<rect x=\"" << detail::fmt(left + cw * static_cast<double>(a)) << "\" y=\""
         << detail::fmt(top + H - ch * static_cast<double>(b + 1)) << "\" width=\"" << detail::fmt(cw) << "\" height=\""
         << detail::fmt(ch) << "\" fill=\"" << detail::colour((v - lo) / span) << "\"/>\n";
    }
  os << "</g>\n";
  // Node (a, b) sits at the centre of its rectangle.
  auto px = [&](double ia) { return left + cw * (ia + 0.5); };
  auto py = [&](double ib) { return top + H - ch * (ib + 0.5); };
  for (double c : opt.contours) {
    os << "<path fill=\"none\" stroke=\"#ffffff\" stroke-width=\"1.5\" d=\"";
    for (std::size_t a = 0; a + 1 < m0; ++a)
      for (std::size_t b = 0; b + 1 < m1; ++b) {
        const double q[4] = {f(a * s0, b * s1) - c, f((a + 1) * s0, b * s1) - c, f((a + 1) * s0, (b + 1) * s1) - c,
                             f(a * s0, (b + 1) * s1) - c};
        const double cx[4] = {0, 1, 1, 0}, cy[4] = {0, 0, 1, 1};
        std::vector<std::array<double, 2>> cut;
        for (int e = 0; e < 4; ++e) {
          const int e1 = (e + 1) % 4;
          if ((q[e] < 0) != (q[e1] < 0)) {
            const double t = q[e] / (q[e] - q[e1]);
            cut.push_back({cx[e] + t * (cx[e1] - cx[e]), cy[e] + t * (cy[e1] - cy[e])});
          }
        }
        for (std::size_t k = 0; k + 1 < cut.size(); k += 2)
          os << 'M' << detail::fmt(px(static_cast<double>(a) + cut[k][0])) << ',' << detail::fmt(py(static_cast<double>(b) + cut[k][1]))
             << 'L' << detail::fmt(px(static_cast<double>(a) + cut[k + 1][0])) << ','
             << detail::fmt(py(static_cast<double>(b) + cut[k + 1][1]));
      }
    os << "\"/>\n";
  }
  // Colour bar.
  const double bx = left + W + 20;
  for (int k = 0; k < 64; ++k)
    os << "<rect x=\"" << detail::fmt(bx) << "\" y=\"" << detail::fmt(top + H - H * (k + 1) / 64.0) << "\" width=\"16\" height=\""
       << detail::fmt(H / 64.0 + 0.5) << "\" fill=\"" << detail::colour(k / 63.0) << "\"/>\n";
  os << "<text x=\"" << detail::fmt(bx + 22) << "\" y=\"" << detail::fmt(top + 10) << "\" font-family=\"sans-serif\" font-size=\"11\">"
     << detail::fmt_g(hi) << "</text>\n";
  os << "<text x=\"" << detail::fmt(bx + 22) << "\" y=\"" << detail::fmt(top + H) << "\" font-family=\"sans-serif\" font-size=\"11\">"
     << detail::fmt_g(lo) << "</text>\n";
  os << "<text x=\"" << left << "\" y=\"" << detail::fmt(top + H + 20) << "\" font-family=\"sans-serif\" font-size=\"11\">"
     << detail::fmt_g(g.origin[0]) << " .. " << detail::fmt_g(g.upper(0)) << " x " << detail::fmt_g(g.origin[1]) << " .. "
     << detail::fmt_g(g.upper(1)) << "</text>\n</svg>\n";
}

struct Series {
  std::string name;
  std::vector<double> x, y;
};

struct LinePlotOptions {
  std::string title{}, xlabel = "iteration";
  bool log_y = true;  // non-positive values are dropped on a log axis
};

inline void render_lines(std::ostream& os, const std::vector<Series>& series, const LinePlotOptions& opt = {}) {
  static const std::array<const char*, 6> pal{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  auto ty = [&](double y) { return opt.log_y ? std::log10(y) : y; };
  auto keep = [&](double y) { return std::isfinite(y) && (!opt.log_y || y > 0.0); };
  std::size_t points = 0;
  for (const auto& s : series) {
    detail::require(s.x.size() == s.y.size(), "series '" + s.name + "' has mismatched x and y");
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!keep(s.y[k]) || !std::isfinite(s.x[k])) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, ty(s.y[k]));
      y1 = std::max(y1, ty(s.y[k]));
      ++points;
    }
  }
  detail::require(points > 0, "nothing to plot: every series is empty");
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double left = 70, top = 40, W = 480, H = 300;
  auto px = [&](double x) { return left + W * (x - x0) / (x1 - x0); };
  auto py = [&](double y) { return top + H - H * (ty(y) - y0) / (y1 - y0); };
  detail::svg_open(os, static_cast<int>(left + W + 160), static_cast<int>(top + H + 60));
  if (!opt.title.empty()) os << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << opt.title << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << W << "\" height=\"" << H
     << "\" fill=\"none\" stroke=\"#000000\"/>\n";
  for (std::size_t n = 0; n < series.size(); ++n) {
    const auto& s = series[n];
    os << "<polyline fill=\"none\" stroke=\"" << pal[n % pal.size()] << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!keep(s.y[k]) || !std::isfinite(s.x[k])) continue;
      os << (first ? "" : " ") << detail::fmt(px(s.x[k])) << ',' << detail::fmt(py(s.y[k]));
      first = false;
    }
    os << "\"/>\n<text x=\"" << detail::fmt(left + W + 10) << "\" y=\"" << detail::fmt(top + 14 + 16.0 * static_cast<double>(n))
       << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << pal[n % pal.size()] << "\">" << s.name << "</text>\n";
  }
  auto label_y = [&](double v) { return opt.log_y ? "1e" + detail::fmt(v, 1) : detail::fmt_g(v); };
  os << "<text x=\"4\" y=\"" << detail::fmt(top + 10) << "\" font-family=\"sans-serif\" font-size=\"11\">" << label_y(y1) << "</text>\n";
  os << "<text x=\"4\" y=\"" << detail::fmt(top + H) << "\" font-family=\"sans-serif\" font-size=\"11\">" << label_y(y0) << "</text>\n";
  os << "<text x=\"" << left << "\" y=\"" << detail::fmt(top + H + 20) << "\" font-family=\"sans-serif\" font-size=\"11\">"
     << detail::fmt_g(x0) << "</text>\n";
  os << "<text x=\"" << detail::fmt(left + W - 30) << "\" y=\"" << detail::fmt(top + H + 20)
     << "\" font-family=\"sans-serif\" font-size=\"11\">" << detail::fmt_g(x1) << "</text>\n";
  os << "<text x=\"" << detail::fmt(left + W / 2 - 20) << "\" y=\"" << detail::fmt(top + H + 40)
     << "\" font-family=\"sans-serif\" font-size=\"12\">" << opt.xlabel << "</text>\n</svg>\n";
}

}  // namespace beltrami
