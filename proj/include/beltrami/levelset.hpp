#pragma once

// Level curves of a factor f in its symmetry plane and the surface charts swept
// by the gradient flow X = grad f / |grad f|^2.
//
// Curves are stored in chart-plane coordinates (a, b) of the source grid:
//   cyl    (case i):   (x, y) on a cartesian-xy chart, symmetry coordinates (r, theta)
//   rev    (case ii):  (r, z) on a meridional chart
//   conoid (case iii): (theta, z) on a theta-z chart; the sweep direction xi2 = r
// The level surface is Phi(xi1, xi2, t) with xi2 = z, theta and r respectively.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beltrami/errors.hpp"
#include "beltrami/field_io.hpp"
#include "beltrami/grid.hpp"
#include "beltrami/interp.hpp"

namespace beltrami {

enum class ChartCase { cyl, rev, conoid };

inline std::string_view to_string(ChartCase c) {
  switch (c) {
    case ChartCase::cyl: return "cyl";
    case ChartCase::rev: return "rev";
    case ChartCase::conoid: return "conoid";
  }
  return "?";
}

inline ChartCase chart_case_from_string(std::string_view s) {
  if (s == "cyl") return ChartCase::cyl;
  if (s == "rev") return ChartCase::rev;
  if (s == "conoid") return ChartCase::conoid;
  throw PreconditionError("unknown chart case '" + std::string(s) + "'");
}

inline ChartCase chart_case_of(Chart c) {
  switch (c) {
    case Chart::cartesian_xy: return ChartCase::cyl;
    case Chart::meridional_rz: return ChartCase::rev;
    case Chart::theta_z: return ChartCase::conoid;
    default: break;
  }
  throw PreconditionError("level curves need a 2D symmetry-plane chart");
}

inline constexpr double kRegularityFloor = 1e-8;

/// f and its chart-plane gradient.
struct LevelFunction {
  std::function<ValueGrad(double, double)> eval;

  static LevelFunction analytic(std::function<double(double, double)> value,
                                std::function<std::array<double, 2>(double, double)> gradient) {
    return {[value = std::move(value), gradient = std::move(gradient)](double a, double b) {
      return ValueGrad{value(a, b), gradient(a, b)};
    }};
  }

  /// Bicubic interpolant of grid samples. Its gradient is the exact gradient of
  /// the interpolant, so the flow preserves the interpolated levels.
  static LevelFunction from_field(const ScalarChartField& f) {
    return {[f](double a, double b) { return cubic(f, a, b); }};
  }

  [[nodiscard]] ValueGrad operator()(double a, double b) const { return eval(a, b); }
};

struct LevelCurve {
  ChartCase kase = ChartCase::rev;
  bool closed = true;
  double level = 0.0;
  std::vector<double> xi1;                     // uniform on [0, 2 pi) or [0, length]
  std::vector<std::array<double, 2>> points;  // chart-plane coordinates
  double min_grad = 0.0;

  [[nodiscard]] std::size_t size() const { return points.size(); }

  /// Symmetry coordinates of sample i: (r, theta), (r, z) or (theta, z).
  [[nodiscard]] std::array<double, 2> coords(std::size_t i) const {
    const auto& p = points[i];
    if (kase == ChartCase::cyl) return {std::hypot(p[0], p[1]), std::atan2(p[1], p[0])};
    return p;
  }
};

struct ExtractOptions {
  std::size_t samples = 0;  // 0: about one sample per grid spacing of arc length, at least 32
  double eps = kRegularityFloor;
  int projection_steps = 4;
};

namespace detail {

struct Segment {
  std::size_t e0, e1;
  std::array<double, 2> p0, p1;
};

inline double polyline_length(const std::vector<std::array<double, 2>>& pts, bool closed) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) len += std::hypot(pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1]);
  if (closed && pts.size() > 1) len += std::hypot(pts.front()[0] - pts.back()[0], pts.front()[1] - pts.back()[1]);
  return len;
}

// Arc-length resampling of a polyline to n points; closed curves exclude the endpoint.
inline std::vector<std::array<double, 2>> resample(const std::vector<std::array<double, 2>>& pts, bool closed, std::size_t n) {
  std::vector<std::array<double, 2>> v = pts;
  if (closed) v.push_back(pts.front());
  std::vector<double> s(v.size(), 0.0);
  for (std::size_t i = 1; i < v.size(); ++i) s[i] = s[i - 1] + std::hypot(v[i][0] - v[i - 1][0], v[i][1] - v[i - 1][1]);
  const double L = s.back();
  std::vector<std::array<double, 2>> out(n);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double target = closed ? L * static_cast<double>(k) / static_cast<double>(n) : L * static_cast<double>(k) / static_cast<double>(n - 1);
    while (seg + 2 < v.size() && s[seg + 1] < target) ++seg;
    const double ds = s[seg + 1] - s[seg];
    const double t = ds > 0.0 ? std::clamp((target - s[seg]) / ds, 0.0, 1.0) : 0.0;
    out[k] = {v[seg][0] + t * (v[seg + 1][0] - v[seg][0]), v[seg][1] + t * (v[seg + 1][1] - v[seg][1])};
  }
  return out;
}

inline double signed_area(const std::vector<std::array<double, 2>>& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& u = p[i];
    const auto& v = p[(i + 1) % p.size()];
    a += u[0] * v[1] - v[0] * u[1];
  }
  return 0.5 * a;
}

inline bool segments_cross(const std::array<double, 2>& a, const std::array<double, 2>& b, const std::array<double, 2>& c,
                           const std::array<double, 2>& d) {
  auto orient = [](const std::array<double, 2>& p, const std::array<double, 2>& q, const std::array<double, 2>& r) {
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
  };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

// True when two non-adjacent segments of the polyline cross.
inline bool self_intersects(const std::vector<std::array<double, 2>>& p, bool closed) {
  const std::size_t n = p.size();
  const std::size_t m = closed ? n : n - 1;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 2; j < m; ++j) {
      if (closed && i == 0 && j == n - 1) continue;
      if (segments_cross(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n])) return true;
    }
  return false;
}

}  // namespace detail

/// Marching-squares contours of f at level c, one LevelCurve per component, each
/// resampled uniformly in arc length and projected onto the level of the bicubic
/// interpolant. Closed curves run counter-clockwise in the chart plane and start
/// at their sample of largest first coordinate.
inline std::vector<LevelCurve> extract_level_curve(const ScalarChartField& f, double c, ExtractOptions opt = {}) {
  const Grid2& g = f.grid();
  const ChartCase kase = chart_case_of(g.chart);
  detail::require(g.shape[0] >= 4 && g.shape[1] >= 4, "level extraction needs at least 4x4 nodes");
  detail::require(std::isfinite(c), "level must be finite");
  const auto v = f.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (!(c > *lo && c < *hi)) throw PreconditionError("level " + std::to_string(c) + " is outside the range of f");

  auto above = [&](std::size_t i, std::size_t j) { return v[g.index(i, j)] >= c; };
  // Edge ids: 2 * node for the edge to (i+1, j), 2 * node + 1 for the edge to (i, j+1).
  auto crossing = [&](std::size_t i0, std::size_t j0, std::size_t i1, std::size_t j1) {
    const double f0 = v[g.index(i0, j0)], f1 = v[g.index(i1, j1)];
    const double t = (c - f0) / (f1 - f0);
    return std::array<double, 2>{g.coord(0, i0) + t * (g.coord(0, i1) - g.coord(0, i0)),
                                 g.coord(1, j0) + t * (g.coord(1, j1) - g.coord(1, j0))};
  };
  std::vector<detail::Segment> segs;
  for (std::size_t i = 0; i + 1 < g.shape[0]; ++i)
    for (std::size_t j = 0; j + 1 < g.shape[1]; ++j) {
      // Corners 0..3 counter-clockwise from (i, j); edge k joins corner k and k + 1.
      const std::array<std::array<std::size_t, 2>, 4> cn{{{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}}};
      const std::array<std::size_t, 4> eid{2 * g.index(i, j), 2 * g.index(i + 1, j) + 1, 2 * g.index(i, j + 1),
                                           2 * g.index(i, j) + 1};
      std::array<bool, 4> up{};
      for (int k = 0; k < 4; ++k) up[k] = above(cn[k][0], cn[k][1]);
      std::vector<int> cut;
      for (int k = 0; k < 4; ++k)
        if (up[k] != up[(k + 1) % 4]) cut.push_back(k);
      auto point = [&](int k) { return crossing(cn[k][0], cn[k][1], cn[(k + 1) % 4][0], cn[(k + 1) % 4][1]); };
      if (cut.size() == 2) {
        segs.push_back({eid[cut[0]], eid[cut[1]], point(cut[0]), point(cut[1])});
      } else if (cut.size() == 4) {
        // Saddle: the cell-centre value decides which pair of corners is joined.
        double centre = 0.0;
        for (const auto& q : cn) centre += 0.25 * v[g.index(q[0], q[1])];
        const bool centre_up = centre >= c;
        for (int k = 0; k < 4; ++k) {
          if (up[k] == centre_up) continue;
          const int ea = (k + 3) % 4, eb = k;  // the two edges meeting at corner k
          segs.push_back({eid[ea], eid[eb], point(ea), point(eb)});
        }
      }
    }
  if (segs.empty()) throw PreconditionError("no contour at level " + std::to_string(c));

  std::map<std::size_t, std::vector<std::size_t>> at_edge;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    at_edge[segs[s].e0].push_back(s);
    at_edge[segs[s].e1].push_back(s);
  }
  std::vector<char> used(segs.size(), 0);
  struct Chain {
    std::vector<std::array<double, 2>> pts;
    bool closed;
  };
  std::vector<Chain> chains;
  auto walk = [&](std::size_t s, std::size_t from_edge, std::vector<std::array<double, 2>>& pts) {
    std::size_t edge = from_edge;
    while (true) {
      used[s] = 1;
      const auto& sg = segs[s];
      const bool forward = sg.e0 == edge;
      const std::size_t next_edge = forward ? sg.e1 : sg.e0;
      pts.push_back(forward ? sg.p1 : sg.p0);
      std::size_t next = segs.size();
      for (std::size_t t : at_edge[next_edge])
        if (!used[t]) next = t;
      if (next == segs.size()) return next_edge;
      s = next;
      edge = next_edge;
    }
  };
  // Open chains first (start from edges touched by a single segment), then loops.
  for (const auto& [edge, list] : at_edge) {
    if (list.size() != 1 || used[list[0]]) continue;
    const auto& sg = segs[list[0]];
    std::vector<std::array<double, 2>> pts{sg.e0 == edge ? sg.p0 : sg.p1};
    walk(list[0], edge, pts);
    chains.push_back({std::move(pts), false});
  }
  for (std::size_t s = 0; s < segs.size(); ++s) {
    if (used[s]) continue;
    std::vector<std::array<double, 2>> pts{segs[s].p0};
    walk(s, segs[s].e0, pts);
    pts.pop_back();  // back at the start
    chains.push_back({std::move(pts), true});
  }

  const auto fn = LevelFunction::from_field(f);
  std::vector<LevelCurve> out;
  for (auto& ch : chains) {
    if (ch.pts.size() < 3) continue;
    auto& pts = ch.pts;
    if (ch.closed) {
      if (detail::signed_area(pts) < 0.0) std::reverse(pts.begin(), pts.end());
      const auto start = std::max_element(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
      });
      std::rotate(pts.begin(), start, pts.end());
    }
    const double length = detail::polyline_length(pts, ch.closed);
    std::size_t n = opt.samples;
    if (n == 0) n = std::max<std::size_t>(32, static_cast<std::size_t>(std::ceil(length / g.min_spacing())));
    LevelCurve lc;
    lc.kase = kase;
    lc.closed = ch.closed;
    lc.level = c;
    lc.points = detail::resample(pts, ch.closed, n);
    lc.min_grad = std::numeric_limits<double>::infinity();
    for (auto& p : lc.points) {
      for (int it = 0; it < opt.projection_steps; ++it) {
        const auto vg = fn(p[0], p[1]);
        const double g2 = vg.grad[0] * vg.grad[0] + vg.grad[1] * vg.grad[1];
        if (g2 < opt.eps * opt.eps) break;
        const double step = (vg.value - c) / g2;
        p[0] -= step * vg.grad[0];
        p[1] -= step * vg.grad[1];
      }
      const auto vg = fn(p[0], p[1]);
      lc.min_grad = std::min(lc.min_grad, std::hypot(vg.grad[0], vg.grad[1]));
    }
    if (lc.min_grad < opt.eps)
      throw PreconditionError("level " + std::to_string(c) + " is not regular: |grad f| = " +
                              std::to_string(lc.min_grad) + " on the contour");
    lc.xi1.resize(n);
    const double span = ch.closed ? 2.0 * std::numbers::pi : length;
    for (std::size_t k = 0; k < n; ++k)
      lc.xi1[k] = span * static_cast<double>(k) / static_cast<double>(ch.closed ? n : n - 1);
    out.push_back(std::move(lc));
  }
  if (out.empty()) throw PreconditionError("no contour at level " + std::to_string(c));
  return out;
}

/// The chart Phi(xi1, xi2, t) on samples of xi1, t_k = k t0 / steps and, for the
/// conoid case, the listed xi2 = r slices (other cases carry one slice).
/// Arrays are indexed by idx(s, k, i).
struct SurfaceChart {
  ChartCase kase = ChartCase::rev;
  bool closed = true;
  double level = 0.0;
  double t0 = 0.0;
  std::vector<double> xi1, t, xi2;
  std::vector<std::array<double, 2>> phi, d1, dt;  // chart-plane coordinates
  std::vector<double> grad_norm;                   // |grad f| at Phi
  std::vector<double> chi, nu, p, q;               // filled by chart_coefficients
  std::vector<double> level_defect;                // max_i |f(Phi) - (c + t_k)| per step, max over slices

  [[nodiscard]] std::size_t n1() const { return xi1.size(); }
  [[nodiscard]] std::size_t nt() const { return t.size(); }
  [[nodiscard]] std::size_t ns() const { return kase == ChartCase::conoid ? xi2.size() : 1; }
  [[nodiscard]] std::size_t idx(std::size_t s, std::size_t k, std::size_t i) const { return (s * nt() + k) * n1() + i; }
  [[nodiscard]] bool has_coefficients() const { return chi.size() == phi.size() && !chi.empty(); }
  [[nodiscard]] double xi1_step() const { return closed ? 2.0 * std::numbers::pi / static_cast<double>(n1()) : xi1[1] - xi1[0]; }
  /// Length |d2 Phi| of the sweep direction: 1 (cyl, conoid) or r (rev).
  [[nodiscard]] double d2_norm(std::size_t s, std::size_t k, std::size_t i) const {
    (void)s;
    return kase == ChartCase::rev ? phi[idx(s, k, i)][0] : 1.0;
  }
};

namespace detail {

// Flow velocity dPhi/dt in chart-plane coordinates. For the conoid the sweep
// coordinate r enters through |grad f|^2 = (d_theta f)^2 / r^2 + (d_z f)^2.
inline std::array<double, 2> flow(const LevelFunction& f, ChartCase kase, double r, double a, double b, double eps,
                                  double* gnorm = nullptr) {
  const auto vg = f(a, b);
  if (kase == ChartCase::conoid) {
    const double ga = vg.grad[0] / r, gb = vg.grad[1];
    const double g2 = ga * ga + gb * gb;
    if (gnorm) *gnorm = std::sqrt(g2);
    if (!(std::sqrt(g2) > eps)) throw NumericalError("|grad f| fell below the regularity floor along the flow");
    return {vg.grad[0] / (r * r * g2), gb / g2};
  }
  const double g2 = vg.grad[0] * vg.grad[0] + vg.grad[1] * vg.grad[1];
  if (gnorm) *gnorm = std::sqrt(g2);
  if (!(std::sqrt(g2) > eps)) throw NumericalError("|grad f| fell below the regularity floor along the flow");
  return {vg.grad[0] / g2, vg.grad[1] / g2};
}

// d/dxi1 of chart-plane points: centred with periodic wrap (closed) or second-order one-sided ends (open).
inline std::vector<std::array<double, 2>> d_xi1(const std::array<double, 2>* pts, std::size_t n, double h, bool closed,
                                                 bool periodic_theta = false) {
  std::vector<std::array<double, 2>> d(n);
  auto diffp = [&](std::size_t a, std::size_t b, int c) {
    double v = pts[a][c] - pts[b][c];
    if (periodic_theta && c == 0) v = std::remainder(v, 2.0 * std::numbers::pi);
    return v;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c) {
      if (closed) {
        d[i][c] = diffp((i + 1) % n, (i + n - 1) % n, c) / (2.0 * h);
      } else if (i == 0) {
        d[i][c] = (-3.0 * pts[0][c] + 4.0 * pts[1][c] - pts[2][c]) / (2.0 * h);
      } else if (i + 1 == n) {
        d[i][c] = (3.0 * pts[n - 1][c] - 4.0 * pts[n - 2][c] + pts[n - 3][c]) / (2.0 * h);
      } else {
        d[i][c] = diffp(i + 1, i - 1, c) / (2.0 * h);
      }
    }
  return d;
}

}  // namespace detail

/// RK4 advection of every sample of `curve` along X = grad f / |grad f|^2 for
/// t in [0, t0] in `steps` steps. `xi2` lists the r slices for a conoid chart.
/// Throws NumericalError when |grad f| drops below eps or the level defect
/// exceeds tol_flow (the flow has left the level family).
struct EvolveOptions {
  double eps = kRegularityFloor;
  double tol_flow = 1e-6;  // bound on |f(Phi) - (c + t)|
};

inline SurfaceChart evolve_chart(const LevelCurve& curve, const LevelFunction& f, double t0, std::size_t steps,
                                 std::vector<double> xi2 = {}, EvolveOptions opt = {}) {
  detail::require(t0 > 0.0 && std::isfinite(t0), "t0 must be positive");
  detail::require(steps >= 1, "need at least one step");
  detail::require(curve.size() >= 4, "curve needs at least 4 samples");
  if (curve.kase == ChartCase::conoid) {
    detail::require(!xi2.empty(), "conoid charts need xi2 = r slices");
    for (double r : xi2) detail::require(r > 0.0, "conoid slices need r > 0");
  } else {
    xi2.clear();
  }
  SurfaceChart ch;
  ch.kase = curve.kase;
  ch.closed = curve.closed;
  ch.level = curve.level;
  ch.t0 = t0;
  ch.xi1 = curve.xi1;
  ch.xi2 = xi2;
  const double dt = t0 / static_cast<double>(steps);
  for (std::size_t k = 0; k <= steps; ++k) ch.t.push_back(t0 * static_cast<double>(k) / static_cast<double>(steps));
  const std::size_t n = curve.size(), ns = ch.ns(), nt = ch.nt();
  ch.phi.resize(ns * nt * n);
  ch.dt.resize(ns * nt * n);
  ch.grad_norm.resize(ns * nt * n);
  ch.level_defect.assign(nt, 0.0);
  for (std::size_t s = 0; s < ns; ++s) {
    const double r = curve.kase == ChartCase::conoid ? xi2[s] : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto y = curve.points[i];
      auto X = [&](const std::array<double, 2>& p, double* gn = nullptr) { return detail::flow(f, ch.kase, r, p[0], p[1], opt.eps, gn); };
      for (std::size_t k = 0; k < nt; ++k) {
        const std::size_t at = ch.idx(s, k, i);
        ch.phi[at] = y;
        ch.dt[at] = X(y, &ch.grad_norm[at]);
        const double defect = std::abs(f(y[0], y[1]).value - (curve.level + ch.t[k]));
        if (!(defect <= opt.tol_flow))
          throw NumericalError("level defect " + format_double(defect) + " exceeds tol_flow " + format_double(opt.tol_flow) +
                               " at t = " + format_double(ch.t[k]));
        ch.level_defect[k] = std::max(ch.level_defect[k], defect);
        if (k + 1 == nt) break;
        const auto k1 = ch.dt[at];
        const auto k2 = X({y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]});
        const auto k3 = X({y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]});
        const auto k4 = X({y[0] + dt * k3[0], y[1] + dt * k3[1]});
        for (int c = 0; c < 2; ++c) y[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        if (!std::isfinite(y[0]) || !std::isfinite(y[1])) throw NumericalError("chart flow produced non-finite points");
      }
    }
    for (std::size_t k = 0; k < nt; ++k) {
      const auto* row = &ch.phi[ch.idx(s, k, 0)];
      std::vector<std::array<double, 2>> pts(row, row + n);
      if (detail::self_intersects(pts, ch.closed))
        throw NumericalError("chart degenerates: the evolved curve self-intersects at t = " + std::to_string(ch.t[k]));
    }
  }
  ch.d1.resize(ch.phi.size());
  const double h1 = ch.xi1_step();
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t k = 0; k < nt; ++k) {
      const auto d = detail::d_xi1(&ch.phi[ch.idx(s, k, 0)], n, h1, ch.closed);
      std::copy(d.begin(), d.end(), ch.d1.begin() + static_cast<std::ptrdiff_t>(ch.idx(s, k, 0)));
    }
  return ch;
}

/// chi, nu, p = chi / nu, q = chi nu from the case formulas:
///   cyl:    chi = sqrt(dt r^2 + r^2 dt theta^2),  nu = sqrt(d1 r^2 + r^2 d1 theta^2)
///   rev:    chi = sqrt(dt r^2 + dt z^2),          nu = sqrt(d1 r^2 + d1 z^2) / r
///   conoid: chi = sqrt(r^2 dt theta^2 + dt z^2),  nu = sqrt(r^2 d1 theta^2 + d1 z^2)
/// In each case nu = |d1 Phi| / |d2 Phi| and chi = |dt Phi|.
inline SurfaceChart chart_coefficients(SurfaceChart ch, double eps = kRegularityFloor) {
  const std::size_t N = ch.phi.size();
  ch.chi.resize(N);
  ch.nu.resize(N);
  ch.p.resize(N);
  ch.q.resize(N);
  for (std::size_t s = 0; s < ch.ns(); ++s)
    for (std::size_t k = 0; k < ch.nt(); ++k)
      for (std::size_t i = 0; i < ch.n1(); ++i) {
        const std::size_t at = ch.idx(s, k, i);
        const auto& d1 = ch.d1[at];
        const auto& dt = ch.dt[at];
        double chi = 0.0, nu = 0.0;
        switch (ch.kase) {
          case ChartCase::cyl:
            // (x, y) plane: the polar formulas reduce to Euclidean lengths.
            chi = std::hypot(dt[0], dt[1]);
            nu = std::hypot(d1[0], d1[1]);
            break;
          case ChartCase::rev:
            chi = std::hypot(dt[0], dt[1]);
            nu = std::hypot(d1[0], d1[1]) / ch.phi[at][0];
            break;
          case ChartCase::conoid: {
            const double r = ch.xi2[s];
            chi = std::hypot(r * dt[0], dt[1]);
            nu = std::hypot(r * d1[0], d1[1]);
            break;
          }
        }
        if (!(chi > eps) || !(nu > eps))
          throw NumericalError("degenerate chart: chi or nu below the regularity floor");
        ch.chi[at] = chi;
        ch.nu[at] = nu;
        ch.p[at] = chi / nu;
        ch.q[at] = chi * nu;
      }
  return ch;
}

/// Max over the chart of |chi - 1/|grad f|| for a reference gradient norm.
inline double chi_consistency(const SurfaceChart& ch, const std::function<double(double, double, double)>& grad_norm) {
  detail::require(ch.has_coefficients(), "chart coefficients not computed");
  double err = 0.0;
  for (std::size_t s = 0; s < ch.ns(); ++s)
    for (std::size_t k = 0; k < ch.nt(); ++k)
      for (std::size_t i = 0; i < ch.n1(); ++i) {
        const std::size_t at = ch.idx(s, k, i);
        const double r = ch.kase == ChartCase::conoid ? ch.xi2[s] : 0.0;
        err = std::max(err, std::abs(ch.chi[at] - 1.0 / grad_norm(ch.phi[at][0], ch.phi[at][1], r)));
      }
  return err;
}

/// Per-step min and max of p and q: the bounds 0 < lambda(t) <= p, q <= Lambda(t).
inline nlohmann::json coefficient_bounds(const SurfaceChart& ch) {
  detail::require(ch.has_coefficients(), "chart coefficients not computed");
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < ch.nt(); ++k) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t s = 0; s < ch.ns(); ++s)
      for (std::size_t i = 0; i < ch.n1(); ++i) {
        const std::size_t at = ch.idx(s, k, i);
        lo = std::min({lo, ch.p[at], ch.q[at]});
        hi = std::max({hi, ch.p[at], ch.q[at]});
      }
    rows.push_back({{"t", ch.t[k]}, {"min", lo}, {"max", hi}});
  }
  return rows;
}

/// CSV dump: xi1, xi2, t, both symmetry coordinates, chi, nu, p, q.
inline void write_chart_csv(std::ostream& os, const SurfaceChart& ch) {
  detail::require(ch.has_coefficients(), "chart coefficients not computed");
  static constexpr const char* names[3][2] = {{"r", "theta"}, {"r", "z"}, {"theta", "z"}};
  const auto& nm = names[static_cast<int>(ch.kase)];
  os << "xi1,xi2,t," << nm[0] << ',' << nm[1] << ",chi,nu,p,q\n";
  for (std::size_t s = 0; s < ch.ns(); ++s)
    for (std::size_t k = 0; k < ch.nt(); ++k)
      for (std::size_t i = 0; i < ch.n1(); ++i) {
        const std::size_t at = ch.idx(s, k, i);
        auto a = ch.phi[at];
        if (ch.kase == ChartCase::cyl) a = {std::hypot(a[0], a[1]), std::atan2(a[1], a[0])};
        const double x2 = ch.kase == ChartCase::conoid ? ch.xi2[s] : 0.0;
        os << format_double(ch.xi1[i]) << ',' << format_double(x2) << ',' << format_double(ch.t[k]) << ','
           << format_double(a[0]) << ',' << format_double(a[1]) << ',' << format_double(ch.chi[at]) << ','
           << format_double(ch.nu[at]) << ',' << format_double(ch.p[at]) << ',' << format_double(ch.q[at]) << '\n';
      }
}

inline nlohmann::json chart_metadata(const SurfaceChart& ch) {
  return {{"case", std::string(to_string(ch.kase))},
          {"closed", ch.closed},
          {"c", ch.level},
          {"t0", ch.t0},
          {"steps", ch.nt() - 1},
          {"samples", ch.n1()},
          {"xi2", ch.xi2},
          {"regularity_floor", kRegularityFloor},
          {"level_defect", ch.level_defect}};
}

}  // namespace beltrami
