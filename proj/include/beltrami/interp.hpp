#pragma once

// Off-node evaluation of grid data.
//
// Chart fields use a C^2 cubic B-spline interpolant (second derivatives are
// O(h^2), which the pulled-back elliptic operators need). Raw grid data goes
// through cubic convolution (Keys, a = -1/2). Bilinear and trilinear variants
// are kept for cheap lookups.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>

#include "beltrami/grid.hpp"

namespace beltrami {

struct ValueGrad {
  double value = 0.0;
  std::array<double, 2> grad{0.0, 0.0};
};

namespace detail {

// Locates x in cell [i, i+1] of an n-node axis; t in [0, 1]. Points outside are
// clamped to the first/last cell.
inline void locate(double x, double origin, double h, std::size_t n, std::size_t& i, double& t) {
  double s = (x - origin) / h;
  if (s <= 0.0) {
    i = 0;
    t = s;
  } else if (s >= static_cast<double>(n - 1)) {
    i = n - 2;
    t = s - static_cast<double>(i);
  } else {
    i = static_cast<std::size_t>(s);
    if (i > n - 2) i = n - 2;
    t = s - static_cast<double>(i);
  }
}

inline std::array<double, 4> keys_weights(double t) {
  const double t2 = t * t, t3 = t2 * t;
  return {-0.5 * t3 + t2 - 0.5 * t, 1.5 * t3 - 2.5 * t2 + 1.0, -1.5 * t3 + 2.0 * t2 + 0.5 * t, 0.5 * t3 - 0.5 * t2};
}

inline std::array<double, 4> keys_dweights(double t) {
  const double t2 = t * t;
  return {-1.5 * t2 + 2.0 * t - 0.5, 4.5 * t2 - 5.0 * t, -4.5 * t2 + 4.0 * t + 0.5, 1.5 * t2 - t};
}

inline std::size_t clamp_index(std::ptrdiff_t k, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

}  // namespace detail

inline double bilinear(const Grid2& g, std::span<const double> v, double a, double b) {
  std::size_t i, j;
  double s, t;
  detail::locate(a, g.origin[0], g.spacing[0], g.shape[0], i, s);
  detail::locate(b, g.origin[1], g.spacing[1], g.shape[1], j, t);
  return (1 - s) * (1 - t) * v[g.index(i, j)] + s * (1 - t) * v[g.index(i + 1, j)] +
         (1 - s) * t * v[g.index(i, j + 1)] + s * t * v[g.index(i + 1, j + 1)];
}

inline double bilinear(const ScalarChartField& f, double a, double b) {
  return bilinear(f.grid(), f.values(), a, b);
}

/// Bicubic convolution value and gradient in chart coordinates.
inline ValueGrad cubic(const Grid2& g, std::span<const double> v, double a, double b) {
  std::size_t i, j;
  double s, t;
  detail::locate(a, g.origin[0], g.spacing[0], g.shape[0], i, s);
  detail::locate(b, g.origin[1], g.spacing[1], g.shape[1], j, t);
  const auto wa = detail::keys_weights(s), da = detail::keys_dweights(s);
  const auto wb = detail::keys_weights(t), db = detail::keys_dweights(t);
  ValueGrad out;
  for (int p = 0; p < 4; ++p) {
    const std::size_t ip = detail::clamp_index(static_cast<std::ptrdiff_t>(i) + p - 1, g.shape[0]);
    double row = 0.0, drow = 0.0;
    for (int q = 0; q < 4; ++q) {
      const std::size_t jq = detail::clamp_index(static_cast<std::ptrdiff_t>(j) + q - 1, g.shape[1]);
      const double x = v[g.index(ip, jq)];
      row += wb[q] * x;
      drow += db[q] * x;
    }
    out.value += wa[p] * row;
    out.grad[0] += da[p] * row;
    out.grad[1] += wa[p] * drow;
  }
  out.grad[0] /= g.spacing[0];
  out.grad[1] /= g.spacing[1];
  return out;
}

namespace detail {

inline std::array<double, 4> bspline_weights(double t) {
  const double u = 1 - t, t2 = t * t, t3 = t2 * t;
  return {u * u * u / 6, (3 * t3 - 6 * t2 + 4) / 6, (-3 * t3 + 3 * t2 + 3 * t + 1) / 6, t3 / 6};
}

inline std::array<double, 4> bspline_dweights(double t) {
  const double u = 1 - t, t2 = t * t;
  return {-u * u / 2, 1.5 * t2 - 2 * t, -1.5 * t2 + t + 0.5, t2 / 2};
}

}  // namespace detail

/// Spline value and gradient; falls back to cubic convolution on grids with fewer than 3 nodes per axis.
inline ValueGrad cubic(const ScalarChartField& f, double a, double b) {
  const Grid2& g = f.grid();
  if (g.shape[0] < 3 || g.shape[1] < 3) return cubic(g, f.values(), a, b);
  const auto& c = f.spline();
  const std::size_t m = g.shape[1] + 2;
  std::size_t i, j;
  double s, t;
  detail::locate(a, g.origin[0], g.spacing[0], g.shape[0], i, s);
  detail::locate(b, g.origin[1], g.spacing[1], g.shape[1], j, t);
  const auto wa = detail::bspline_weights(s), da = detail::bspline_dweights(s);
  const auto wb = detail::bspline_weights(t), db = detail::bspline_dweights(t);
  ValueGrad out;
  for (int p = 0; p < 4; ++p) {
    const double* row_c = c.data() + (i + p) * m + j;
    double row = 0.0, drow = 0.0;
    for (int q = 0; q < 4; ++q) {
      row += wb[q] * row_c[q];
      drow += db[q] * row_c[q];
    }
    out.value += wa[p] * row;
    out.grad[0] += da[p] * row;
    out.grad[1] += wa[p] * drow;
  }
  out.grad[0] /= g.spacing[0];
  out.grad[1] /= g.spacing[1];
  return out;
}

inline double trilinear(const Grid3& g, std::span<const double> v, const Vec3& x) {
  std::array<std::size_t, 3> i{};
  std::array<double, 3> t{};
  for (int a = 0; a < 3; ++a) detail::locate(x[a], g.origin[a], g.spacing[a], g.shape[a], i[a], t[a]);
  double acc = 0.0;
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dk = 0; dk < 2; ++dk) {
        const double w = (di ? t[0] : 1 - t[0]) * (dj ? t[1] : 1 - t[1]) * (dk ? t[2] : 1 - t[2]);
        acc += w * v[g.index(i[0] + di, i[1] + dj, i[2] + dk)];
      }
  return acc;
}

inline bool inside(const Grid3& g, const Vec3& x, double slack = 1e-12) {
  for (int a = 0; a < 3; ++a) {
    const double tol = slack * g.spacing[a];
    if (x[a] < g.origin[a] - tol || x[a] > g.upper(a) + tol) return false;
  }
  return true;
}

}  // namespace beltrami
