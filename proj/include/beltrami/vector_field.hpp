#pragma once

#include <cmath>
#include <variant>

#include "beltrami/grid.hpp"
#include "beltrami/interp.hpp"
#include "beltrami/profile.hpp"

namespace beltrami {

/// u = (R(-F(x3)) v0(x1, x2), 0) with F(x3) = integral of f from 0 to x3.
/// v1, v2 hold the planar field v0; `z` is the sampling of the x3 axis.
struct ZPlanarField {
  ScalarChartField v1, v2;
  RadialProfile factor;
  Grid1 z;

  [[nodiscard]] Vec3 rotate(double a, double b, double x3) const {
    const double phase = factor.integral(x3);
    const double c = std::cos(phase), s = std::sin(phase);
    return {c * a + s * b, -s * a + c * b, 0.0};
  }
};

using SymmetricVectorField = std::variant<TranslationalField, RotationalField, ZPlanarField, GridVectorField>;

inline Symmetry symmetry_of(const SymmetricVectorField& u) {
  return std::visit(
      [](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, TranslationalField>) return Symmetry::translational;
        else if constexpr (std::is_same_v<T, RotationalField>) return Symmetry::rotational;
        else if constexpr (std::is_same_v<T, ZPlanarField>) return Symmetry::z_planar;
        else return Symmetry::none;
      },
      u);
}

/// Unit vectors of the cylindrical frame at angle theta.
inline Vec3 e_r(double th) { return {std::cos(th), std::sin(th), 0.0}; }
inline Vec3 e_theta(double th) { return {-std::sin(th), std::cos(th), 0.0}; }

/// Cartesian components of u at a Cartesian point, interpolating the
/// representation's samples (cubic on 2D charts, trilinear on 3D grids).
inline Vec3 evaluate(const SymmetricVectorField& field, const Vec3& x) {
  return std::visit(
      [&](const auto& u) -> Vec3 {
        using T = std::decay_t<decltype(u)>;
        if constexpr (std::is_same_v<T, TranslationalField>) {
          return {cubic(u.c[0], x[0], x[1]).value, cubic(u.c[1], x[0], x[1]).value,
                  cubic(u.c[2], x[0], x[1]).value};
        } else if constexpr (std::is_same_v<T, RotationalField>) {
          const double r = std::hypot(x[0], x[1]);
          const double th = std::atan2(x[1], x[0]);
          const double ur = cubic(u.c[0], r, x[2]).value;
          const double ut = cubic(u.c[1], r, x[2]).value;
          const double uz = cubic(u.c[2], r, x[2]).value;
          const Vec3 er = e_r(th), et = e_theta(th);
          return {ur * er[0] + ut * et[0], ur * er[1] + ut * et[1], uz};
        } else if constexpr (std::is_same_v<T, ZPlanarField>) {
          return u.rotate(cubic(u.v1, x[0], x[1]).value, cubic(u.v2, x[0], x[1]).value, x[2]);
        } else {
          return {trilinear(u.grid, u.c[0], x), trilinear(u.grid, u.c[1], x), trilinear(u.grid, u.c[2], x)};
        }
      },
      field);
}

/// Nodal samples of a z-planar field on the 3D grid spanned by its planar chart
/// and its x3 axis.
inline GridVectorField to_grid3(const ZPlanarField& u) {
  const Grid2& g = u.v1.grid();
  Grid3 g3;
  g3.origin = {g.origin[0], g.origin[1], u.z.origin};
  g3.spacing = {g.spacing[0], g.spacing[1], u.z.spacing};
  g3.shape = {g.shape[0], g.shape[1], u.z.size};
  GridVectorField out{g3, {}};
  for (auto& c : out.c) c.resize(g3.size());
  for (std::size_t k = 0; k < u.z.size; ++k) {
    const double phase = u.factor.integral(u.z.coord(k));
    const double c = std::cos(phase), s = std::sin(phase);
    for (std::size_t i = 0; i < g.shape[0]; ++i)
      for (std::size_t j = 0; j < g.shape[1]; ++j) {
        const double a = u.v1(i, j), b = u.v2(i, j);
        const std::size_t n = g3.index(i, j, k);
        out.c[0][n] = c * a + s * b;
        out.c[1][n] = -s * a + c * b;
        out.c[2][n] = 0.0;
      }
  }
  return out;
}

/// Samples any representation onto a given 3D grid.
inline GridVectorField resample(const SymmetricVectorField& u, const Grid3& g) {
  return GridVectorField::sample(g, [&](double x, double y, double z) { return evaluate(u, {x, y, z}); });
}

}  // namespace beltrami
