#pragma once

// Residual functionals that decide numerically whether (u, f) is a Beltrami
// pair: curl u = f u, div u = 0, the first integral u . grad f = 0 and the
// elliptic identity -Lap u = grad f x u + f^2 u. All norms are taken over
// interior nodes.

#include <variant>

#include "beltrami/operators.hpp"
#include "beltrami/report.hpp"
#include "beltrami/vector_field.hpp"

namespace beltrami {

/// The proportionality factor as sampled on the field's own grid, or a profile
/// in x3 for z-planar and full-3D fields.
using FactorField = std::variant<ScalarChartField, ScalarField3, RadialProfile>;

namespace detail {

inline void require_same(const Grid2& a, const Grid2& b) {
  require(a == b, "incompatible grids: field and factor must share chart, origin, spacing and shape");
}

inline ScalarField3 factor_on(const Grid3& g, const FactorField& f) {
  if (const auto* s = std::get_if<ScalarField3>(&f)) {
    require(s->grid == g, "incompatible grids: 3D factor must share the field's grid");
    return *s;
  }
  if (const auto* p = std::get_if<RadialProfile>(&f))
    return ScalarField3::sample(g, [&](double, double, double z) { return p->value(z); });
  throw PreconditionError("incompatible factor: a 3D field needs a 3D factor or an x3 profile");
}

inline const ScalarChartField& factor_on(const Grid2& g, const FactorField& f) {
  const auto* s = std::get_if<ScalarChartField>(&f);
  require(s != nullptr, "incompatible factor: a 2D representation needs a factor on the same chart");
  require_same(g, s->grid());
  return *s;
}

inline std::vector<double> magnitude(const std::vector<double>& a, const std::vector<double>& b,
                                     const std::vector<double>& c) {
  std::vector<double> m(a.size());
  for (std::size_t n = 0; n < m.size(); ++n) m[n] = std::sqrt(a[n] * a[n] + b[n] * b[n] + c[n] * c[n]);
  return m;
}

// Chart-independent pieces of the residual computations, given component
// arrays and derivative arrays.
struct Residual3 {
  std::vector<double> x, y, z;
  explicit Residual3(std::size_t n) : x(n), y(n), z(n) {}
};

inline DiagnosticReport beltrami_grid3(const GridVectorField& u, const ScalarField3& f) {
  const auto w = curl3(u);
  const auto dv = div3(u);
  Residual3 r(u.grid.size());
  for (std::size_t n = 0; n < r.x.size(); ++n) {
    r.x[n] = w.c[0][n] - f.values[n] * u.c[0][n];
    r.y[n] = w.c[1][n] - f.values[n] * u.c[1][n];
    r.z[n] = w.c[2][n] - f.values[n] * u.c[2][n];
  }
  DiagnosticReport rep;
  const double h = u.grid.max_spacing();
  rep.add("curl_minus_fu", interior(u.grid, magnitude(r.x, r.y, r.z)), h);
  rep.add("divergence", interior(u.grid, dv), h);
  rep.metadata["symmetry"] = "none";
  rep.metadata["shape"] = {u.grid.shape[0], u.grid.shape[1], u.grid.shape[2]};
  return rep;
}

}  // namespace detail

inline DiagnosticReport beltrami_residual(const TranslationalField& u, const ScalarChartField& f) {
  const Grid2& g = u.c[0].grid();
  detail::require_same(g, f.grid());
  const auto w = curl3(u);
  const auto dv = divergence(u);
  detail::Residual3 r(g.size());
  const auto fv = f.values();
  for (std::size_t n = 0; n < g.size(); ++n) {
    r.x[n] = w.c[0].values()[n] - fv[n] * u.c[0].values()[n];
    r.y[n] = w.c[1].values()[n] - fv[n] * u.c[1].values()[n];
    r.z[n] = w.c[2].values()[n] - fv[n] * u.c[2].values()[n];
  }
  DiagnosticReport rep;
  rep.add("curl_minus_fu", interior(g, detail::magnitude(r.x, r.y, r.z)), g.max_spacing());
  rep.add("divergence", interior(g, dv), g.max_spacing());
  rep.metadata["symmetry"] = "translational";
  rep.metadata["shape"] = {g.shape[0], g.shape[1]};
  return rep;
}

inline DiagnosticReport beltrami_residual(const RotationalField& u, const ScalarChartField& f) {
  const Grid2& g = u.c[0].grid();
  detail::require_same(g, f.grid());
  const auto w = curl3(u);
  const auto dv = divergence(u);
  detail::Residual3 r(g.size());
  const auto fv = f.values();
  for (std::size_t n = 0; n < g.size(); ++n) {
    r.x[n] = w.c[0].values()[n] - fv[n] * u.c[0].values()[n];
    r.y[n] = w.c[1].values()[n] - fv[n] * u.c[1].values()[n];
    r.z[n] = w.c[2].values()[n] - fv[n] * u.c[2].values()[n];
  }
  DiagnosticReport rep;
  rep.add("curl_minus_fu", interior(g, detail::magnitude(r.x, r.y, r.z)), g.max_spacing());
  rep.add("divergence", interior(g, dv), g.max_spacing());
  rep.metadata["symmetry"] = "rotational";
  rep.metadata["shape"] = {g.shape[0], g.shape[1]};
  return rep;
}

/// Reports |curl u - f u| and |div u| (max and RMS over interior nodes).
inline DiagnosticReport beltrami_residual(const SymmetricVectorField& u, const FactorField& f) {
  return std::visit(
      [&](const auto& v) -> DiagnosticReport {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, TranslationalField> || std::is_same_v<T, RotationalField>) {
          return beltrami_residual(v, detail::factor_on(v.c[0].grid(), f));
        } else if constexpr (std::is_same_v<T, ZPlanarField>) {
          const auto g3 = to_grid3(v);
          auto rep = detail::beltrami_grid3(g3, detail::factor_on(g3.grid, f));
          rep.metadata["symmetry"] = "z-planar";
          return rep;
        } else {
          return detail::beltrami_grid3(v, detail::factor_on(v.grid, f));
        }
      },
      u);
}

/// Reports |u . grad f| over interior nodes.
inline DiagnosticReport first_integral_defect(const SymmetricVectorField& u, const FactorField& f) {
  DiagnosticReport rep;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, TranslationalField> || std::is_same_v<T, RotationalField>) {
          const Grid2& g = v.c[0].grid();
          const auto& fs = detail::factor_on(g, f);
          const auto d1 = diff(g, fs.values(), 0), d2 = diff(g, fs.values(), 1);
          // translational: u1 d1f + u2 d2f; rotational: u_r dr f + u_z dz f.
          const auto& a = v.c[0].values();
          const auto& b = std::is_same_v<T, TranslationalField> ? v.c[1].values() : v.c[2].values();
          std::vector<double> d(g.size());
          for (std::size_t n = 0; n < d.size(); ++n) d[n] = a[n] * d1[n] + b[n] * d2[n];
          rep.add("u_dot_grad_f", interior(g, d), g.max_spacing());
        } else {
          GridVectorField g3;
          if constexpr (std::is_same_v<T, ZPlanarField>) g3 = to_grid3(v);
          else g3 = v;
          const auto fs = detail::factor_on(g3.grid, f);
          std::array<std::vector<double>, 3> df;
          for (int a = 0; a < 3; ++a) df[a] = diff(g3.grid, fs.values, a);
          std::vector<double> d(g3.grid.size());
          for (std::size_t n = 0; n < d.size(); ++n)
            d[n] = g3.c[0][n] * df[0][n] + g3.c[1][n] * df[1][n] + g3.c[2][n] * df[2][n];
          rep.add("u_dot_grad_f", interior(g3.grid, d), g3.grid.max_spacing());
        }
      },
      u);
  rep.metadata["symmetry"] = std::string(to_string(symmetry_of(u)));
  return rep;
}

/// Reports |Lap u + grad f x u + f^2 u| over interior nodes.
inline DiagnosticReport elliptic_identity_residual(const SymmetricVectorField& u, const FactorField& f) {
  DiagnosticReport rep;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, TranslationalField> || std::is_same_v<T, RotationalField>) {
          constexpr bool rot = std::is_same_v<T, RotationalField>;
          const Grid2& g = v.c[0].grid();
          const auto& fs = detail::factor_on(g, f);
          const auto fv = fs.values();
          const auto d1f = diff(g, fv, 0), d2f = diff(g, fv, 1);
          std::array<std::vector<double>, 3> lap;
          for (int a = 0; a < 3; ++a) {
            lap[a] = laplacian(g, v.c[a].values());
            if constexpr (rot) {
              // Cylindrical scalar Laplacian adds (1/r) dr; the r and theta
              // components of the vector Laplacian subtract u / r^2.
              const auto dr = diff(g, v.c[a].values(), 0);
              for (std::size_t i = 0; i < g.shape[0]; ++i) {
                const double r = g.coord(0, i);
                for (std::size_t j = 0; j < g.shape[1]; ++j) {
                  const std::size_t n = g.index(i, j);
                  lap[a][n] += dr[n] / r;
                  if (a < 2) lap[a][n] -= v.c[a].values()[n] / (r * r);
                }
              }
            }
          }
          detail::Residual3 r(g.size());
          for (std::size_t n = 0; n < g.size(); ++n) {
            // grad f = (d1 f, 0, d2 f) in (r, theta, z); (d1 f, d2 f, 0) in (x1, x2, x3).
            const Vec3 gf = rot ? Vec3{d1f[n], 0.0, d2f[n]} : Vec3{d1f[n], d2f[n], 0.0};
            const Vec3 uu{v.c[0].values()[n], v.c[1].values()[n], v.c[2].values()[n]};
            const Vec3 gxu = cross(gf, uu);
            const double f2 = fv[n] * fv[n];
            r.x[n] = lap[0][n] + gxu[0] + f2 * uu[0];
            r.y[n] = lap[1][n] + gxu[1] + f2 * uu[1];
            r.z[n] = lap[2][n] + gxu[2] + f2 * uu[2];
          }
          rep.add("elliptic_identity", interior(g, detail::magnitude(r.x, r.y, r.z)), g.max_spacing());
        } else {
          GridVectorField g3;
          if constexpr (std::is_same_v<T, ZPlanarField>) g3 = to_grid3(v);
          else g3 = v;
          const Grid3& g = g3.grid;
          const auto fs = detail::factor_on(g, f);
          std::array<std::vector<double>, 3> df, lap;
          for (int a = 0; a < 3; ++a) {
            df[a] = diff(g, fs.values, a);
            lap[a] = laplacian(g, g3.c[a]);
          }
          detail::Residual3 r(g.size());
          for (std::size_t n = 0; n < g.size(); ++n) {
            const Vec3 uu{g3.c[0][n], g3.c[1][n], g3.c[2][n]};
            const Vec3 gxu = cross({df[0][n], df[1][n], df[2][n]}, uu);
            const double f2 = fs.values[n] * fs.values[n];
            r.x[n] = lap[0][n] + gxu[0] + f2 * uu[0];
            r.y[n] = lap[1][n] + gxu[1] + f2 * uu[1];
            r.z[n] = lap[2][n] + gxu[2] + f2 * uu[2];
          }
          rep.add("elliptic_identity", interior(g, detail::magnitude(r.x, r.y, r.z)), g.max_spacing());
        }
      },
      u);
  rep.metadata["symmetry"] = std::string(to_string(symmetry_of(u)));
  return rep;
}

}  // namespace beltrami
