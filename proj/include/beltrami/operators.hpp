#pragma once

// Finite-difference operators on uniform grids: centred second-order stencils
// in the interior, one-sided second-order stencils on boundary nodes.

#include <utility>
#include <variant>
#include <vector>

#include "beltrami/errors.hpp"
#include "beltrami/grid.hpp"
#include "beltrami/vector_field.hpp"

namespace beltrami {

namespace detail {

// Derivative of a strided 1D line of n samples. With `ghost` the boundary nodes
// use the centred stencil on a cubically extrapolated ghost node (needs n >= 4):
// its error expansion matches the interior one to O(h^3), so differentiating
// the result again keeps second order next to the boundary.
inline void diff_line(const double* in, double* out, std::size_t n, std::size_t stride, double h,
                      bool ghost = false) {
  const double inv = 1.0 / (2.0 * h);
  for (std::size_t i = 1; i + 1 < n; ++i) out[i * stride] = (in[(i + 1) * stride] - in[(i - 1) * stride]) * inv;
  const std::size_t l = (n - 1) * stride;
  if (ghost && n >= 4) {
    out[0] = (-4.0 * in[0] + 7.0 * in[stride] - 4.0 * in[2 * stride] + in[3 * stride]) * inv;
    out[l] = (4.0 * in[l] - 7.0 * in[l - stride] + 4.0 * in[l - 2 * stride] - in[l - 3 * stride]) * inv;
    return;
  }
  out[0] = (-3.0 * in[0] + 4.0 * in[stride] - in[2 * stride]) * inv;
  out[l] = (3.0 * in[l] - 4.0 * in[l - stride] + in[l - 2 * stride]) * inv;
}

}  // namespace detail

/// Chart derivative along `axis`. `ghost` selects the ghost-node boundary
/// stencil, used when the result is differentiated again (stream-function
/// reconstruction).
inline std::vector<double> diff(const Grid2& g, std::span<const double> v, int axis, bool ghost = false) {
  detail::require(g.shape[0] >= 3 && g.shape[1] >= 3, "grid too small: need at least 3x3 nodes");
  std::vector<double> out(v.size());
  if (axis == 0) {
    for (std::size_t j = 0; j < g.shape[1]; ++j)
      detail::diff_line(v.data() + j, out.data() + j, g.shape[0], g.shape[1], g.spacing[0], ghost);
  } else {
    for (std::size_t i = 0; i < g.shape[0]; ++i)
      detail::diff_line(v.data() + i * g.shape[1], out.data() + i * g.shape[1], g.shape[1], 1, g.spacing[1], ghost);
  }
  return out;
}

inline std::vector<double> diff(const Grid3& g, std::span<const double> v, int axis) {
  detail::require(g.shape[0] >= 3 && g.shape[1] >= 3 && g.shape[2] >= 3, "grid too small: need at least 3x3x3 nodes");
  std::vector<double> out(v.size());
  const std::size_t n0 = g.shape[0], n1 = g.shape[1], n2 = g.shape[2];
  if (axis == 0) {
    for (std::size_t j = 0; j < n1; ++j)
      for (std::size_t k = 0; k < n2; ++k)
        detail::diff_line(v.data() + j * n2 + k, out.data() + j * n2 + k, n0, n1 * n2, g.spacing[0]);
  } else if (axis == 1) {
    for (std::size_t i = 0; i < n0; ++i)
      for (std::size_t k = 0; k < n2; ++k)
        detail::diff_line(v.data() + i * n1 * n2 + k, out.data() + i * n1 * n2 + k, n1, n2, g.spacing[1]);
  } else {
    for (std::size_t i = 0; i < n0; ++i)
      for (std::size_t j = 0; j < n1; ++j)
        detail::diff_line(v.data() + (i * n1 + j) * n2, out.data() + (i * n1 + j) * n2, n2, 1, g.spacing[2]);
  }
  return out;
}

/// Gradient in chart coordinates (not the metric gradient: for theta-z charts the
/// first component is d/dtheta).
inline std::pair<ScalarChartField, ScalarChartField> grad(const ScalarChartField& s) {
  const Grid2& g = s.grid();
  return {ScalarChartField(g, diff(g, s.values(), 0), "d1 " + s.name()),
          ScalarChartField(g, diff(g, s.values(), 1), "d2 " + s.name())};
}

/// 5-point Laplacian at interior nodes; boundary nodes are left at zero.
inline std::vector<double> laplacian(const Grid2& g, std::span<const double> v) {
  detail::require(g.shape[0] >= 3 && g.shape[1] >= 3, "grid too small for the 5-point Laplacian");
  std::vector<double> out(v.size(), 0.0);
  const double ia = 1.0 / (g.spacing[0] * g.spacing[0]), ib = 1.0 / (g.spacing[1] * g.spacing[1]);
  for (std::size_t i = 1; i + 1 < g.shape[0]; ++i)
    for (std::size_t j = 1; j + 1 < g.shape[1]; ++j) {
      const std::size_t n = g.index(i, j);
      out[n] = (v[g.index(i + 1, j)] - 2.0 * v[n] + v[g.index(i - 1, j)]) * ia +
               (v[g.index(i, j + 1)] - 2.0 * v[n] + v[g.index(i, j - 1)]) * ib;
    }
  return out;
}

/// 7-point Laplacian at interior nodes; boundary nodes are left at zero.
inline std::vector<double> laplacian(const Grid3& g, std::span<const double> v) {
  detail::require(g.shape[0] >= 3 && g.shape[1] >= 3 && g.shape[2] >= 3, "grid too small for the 7-point Laplacian");
  std::vector<double> out(v.size(), 0.0);
  std::array<double, 3> ih{};
  for (int a = 0; a < 3; ++a) ih[a] = 1.0 / (g.spacing[a] * g.spacing[a]);
  const std::size_t s0 = g.shape[1] * g.shape[2], s1 = g.shape[2];
  for (std::size_t i = 1; i + 1 < g.shape[0]; ++i)
    for (std::size_t j = 1; j + 1 < g.shape[1]; ++j)
      for (std::size_t k = 1; k + 1 < g.shape[2]; ++k) {
        const std::size_t n = g.index(i, j, k);
        out[n] = (v[n + s0] - 2.0 * v[n] + v[n - s0]) * ih[0] + (v[n + s1] - 2.0 * v[n] + v[n - s1]) * ih[1] +
                 (v[n + 1] - 2.0 * v[n] + v[n - 1]) * ih[2];
      }
  return out;
}

inline GridVectorField curl3(const GridVectorField& u) {
  const Grid3& g = u.grid;
  // dA_uB: derivative along axis A (1-based) of component B.
  const auto d2_u3 = diff(g, u.c[2], 1), d1_u3 = diff(g, u.c[2], 0);
  const auto d3_u2 = diff(g, u.c[1], 2), d1_u2 = diff(g, u.c[1], 0);
  const auto d3_u1 = diff(g, u.c[0], 2), d2_u1 = diff(g, u.c[0], 1);
  GridVectorField w{g, {}};
  for (auto& c : w.c) c.resize(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    w.c[0][n] = d2_u3[n] - d3_u2[n];
    w.c[1][n] = d3_u1[n] - d1_u3[n];
    w.c[2][n] = d1_u2[n] - d2_u1[n];
  }
  return w;
}

inline std::vector<double> div3(const GridVectorField& u) {
  const auto a = diff(u.grid, u.c[0], 0), b = diff(u.grid, u.c[1], 1), c = diff(u.grid, u.c[2], 2);
  std::vector<double> out(a.size());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = a[n] + b[n] + c[n];
  return out;
}

/// Curl of a translational field: (d2 u3, -d1 u3, d1 u2 - d2 u1).
inline TranslationalField curl3(const TranslationalField& u) {
  const Grid2& g = u.c[0].grid();
  const auto d2u3 = diff(g, u.c[2].values(), 1), d1u3 = diff(g, u.c[2].values(), 0);
  const auto d1u2 = diff(g, u.c[1].values(), 0), d2u1 = diff(g, u.c[0].values(), 1);
  std::vector<double> w1(g.size()), w2(g.size()), w3(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    w1[n] = d2u3[n];
    w2[n] = -d1u3[n];
    w3[n] = d1u2[n] - d2u1[n];
  }
  return {{ScalarChartField(g, std::move(w1), "curl_1"), ScalarChartField(g, std::move(w2), "curl_2"),
           ScalarChartField(g, std::move(w3), "curl_3")}};
}

/// Curl of an axisymmetric field in (r, theta, z) components:
/// (-dz u_theta, dz u_r - dr u_z, dr u_theta + u_theta / r).
inline RotationalField curl3(const RotationalField& u) {
  const Grid2& g = u.c[0].grid();
  const auto dz_ut = diff(g, u.c[1].values(), 1), dz_ur = diff(g, u.c[0].values(), 1);
  const auto dr_uz = diff(g, u.c[2].values(), 0), dr_ut = diff(g, u.c[1].values(), 0);
  std::vector<double> wr(g.size()), wt(g.size()), wz(g.size());
  for (std::size_t i = 0; i < g.shape[0]; ++i) {
    const double r = g.coord(0, i);
    for (std::size_t j = 0; j < g.shape[1]; ++j) {
      const std::size_t n = g.index(i, j);
      wr[n] = -dz_ut[n];
      wt[n] = dz_ur[n] - dr_uz[n];
      wz[n] = dr_ut[n] + u.c[1].values()[n] / r;
    }
  }
  return {{ScalarChartField(g, std::move(wr), "curl_r"), ScalarChartField(g, std::move(wt), "curl_theta"),
           ScalarChartField(g, std::move(wz), "curl_z")}};
}

inline SymmetricVectorField curl3(const SymmetricVectorField& u) {
  return std::visit(
      [](const auto& f) -> SymmetricVectorField {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ZPlanarField>)
          throw PreconditionError("curl3 rejects z-planar fields; sample them with to_grid3 first");
        else
          return curl3(f);
      },
      u);
}

/// Divergence in the representation's own coordinates.
inline std::vector<double> divergence(const TranslationalField& u) {
  const Grid2& g = u.c[0].grid();
  auto a = diff(g, u.c[0].values(), 0);
  const auto b = diff(g, u.c[1].values(), 1);
  for (std::size_t n = 0; n < a.size(); ++n) a[n] += b[n];
  return a;
}

inline std::vector<double> divergence(const RotationalField& u) {
  const Grid2& g = u.c[0].grid();
  auto a = diff(g, u.c[0].values(), 0);
  const auto b = diff(g, u.c[2].values(), 1);
  for (std::size_t i = 0; i < g.shape[0]; ++i)
    for (std::size_t j = 0; j < g.shape[1]; ++j) {
      const std::size_t n = g.index(i, j);
      a[n] += u.c[0].values()[n] / g.coord(0, i) + b[n];
    }
  return a;
}

/// Values of v at interior nodes (boundary rows excluded).
inline std::vector<double> interior(const Grid2& g, std::span<const double> v) {
  std::vector<double> out;
  if (g.shape[0] < 3 || g.shape[1] < 3) return out;
  out.reserve((g.shape[0] - 2) * (g.shape[1] - 2));
  for (std::size_t i = 1; i + 1 < g.shape[0]; ++i)
    for (std::size_t j = 1; j + 1 < g.shape[1]; ++j) out.push_back(v[g.index(i, j)]);
  return out;
}

inline std::vector<double> interior(const Grid3& g, std::span<const double> v) {
  std::vector<double> out;
  if (g.shape[0] < 3 || g.shape[1] < 3 || g.shape[2] < 3) return out;
  out.reserve((g.shape[0] - 2) * (g.shape[1] - 2) * (g.shape[2] - 2));
  for (std::size_t i = 1; i + 1 < g.shape[0]; ++i)
    for (std::size_t j = 1; j + 1 < g.shape[1]; ++j)
      for (std::size_t k = 1; k + 1 < g.shape[2]; ++k) out.push_back(v[g.index(i, j, k)]);
  return out;
}

}  // namespace beltrami
