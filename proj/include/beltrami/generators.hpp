#pragma once

// Ground-truth Beltrami families: ABC flows, radial-factor fields f = f(r),
// rotated harmonic fields f = f(z), and reconstruction of u from a stream
// function under translational or rotational symmetry.

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "beltrami/errors.hpp"
#include "beltrami/operators.hpp"
#include "beltrami/profile.hpp"
#include "beltrami/residuals.hpp"
#include "beltrami/vector_field.hpp"

namespace beltrami {

/// A generated field together with its proportionality factor.
struct BeltramiPair {
  SymmetricVectorField u;
  FactorField f;
};

/// u = (A sin x3 + C cos x2, B sin x1 + A cos x3, C sin x2 + B cos x1); curl u = u.
inline BeltramiPair abc_field(double A, double B, double C, const Grid3& g) {
  auto u = GridVectorField::sample(g, [&](double x1, double x2, double x3) -> Vec3 {
    return {A * std::sin(x3) + C * std::cos(x2), B * std::sin(x1) + A * std::cos(x3),
            C * std::sin(x2) + B * std::cos(x1)};
  });
  return {std::move(u), RadialProfile::constant(1.0)};
}

struct RadialSolution {
  std::vector<double> r, u_theta, u_z;
};

/// RK4 integration of d(u_z)/dr = -f u_theta, d(u_theta)/dr = f u_z - u_theta / r
/// from (u_theta, u_z)(r0) = init with fixed step.
inline RadialSolution integrate_radial(const RadialProfile& f, double r0, double r1, double step,
                                       std::pair<double, double> init) {
  detail::require(r0 > 0.0 && r1 > r0, "radial range must satisfy 0 < r0 < r1");
  detail::require(step > 0.0, "radial step must be positive");
  const auto n = static_cast<std::size_t>(std::llround((r1 - r0) / step));
  detail::require(n >= 1, "radial range shorter than one step");
  const double h = (r1 - r0) / static_cast<double>(n);
  auto rhs = [&](double r, double ut, double uz) -> std::pair<double, double> {
    const double fr = f.value(r);
    return {fr * uz - ut / r, -fr * ut};
  };
  RadialSolution s;
  s.r.resize(n + 1);
  s.u_theta.resize(n + 1);
  s.u_z.resize(n + 1);
  double ut = init.first, uz = init.second;
  for (std::size_t i = 0; i <= n; ++i) {
    const double r = r0 + static_cast<double>(i) * h;
    s.r[i] = r;
    s.u_theta[i] = ut;
    s.u_z[i] = uz;
    if (i == n) break;
    const auto [a1, b1] = rhs(r, ut, uz);
    const auto [a2, b2] = rhs(r + 0.5 * h, ut + 0.5 * h * a1, uz + 0.5 * h * b1);
    const auto [a3, b3] = rhs(r + 0.5 * h, ut + 0.5 * h * a2, uz + 0.5 * h * b2);
    const auto [a4, b4] = rhs(r + h, ut + h * a3, uz + h * b3);
    ut += h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4);
    uz += h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4);
    if (!std::isfinite(ut) || !std::isfinite(uz)) throw NumericalError("radial ODE produced non-finite values");
  }
  return s;
}

/// Axisymmetric field u = u_theta(r) e_theta + u_z(r) e_z with f = f(r). The
/// meridional grid uses the RK4 nodes in r and `nz` copies along z.
inline BeltramiPair radial_beltrami(const RadialProfile& f, double r0, double r1, double step,
                                    std::pair<double, double> init, std::size_t nz = 5) {
  const auto sol = integrate_radial(f, r0, r1, step, init);
  const std::size_t nr = sol.r.size();
  detail::require(nr >= 3 && nz >= 3, "radial field needs at least 3 nodes per axis");
  Grid2 g;
  g.chart = Chart::meridional_rz;
  g.origin = {r0, 0.0};
  g.spacing = {sol.r[1] - sol.r[0], sol.r[1] - sol.r[0]};
  g.shape = {nr, nz};
  std::vector<double> ur(g.size(), 0.0), ut(g.size()), uz(g.size()), fv(g.size());
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nz; ++j) {
      ut[g.index(i, j)] = sol.u_theta[i];
      uz[g.index(i, j)] = sol.u_z[i];
      fv[g.index(i, j)] = f.value(g.coord(0, i));
    }
  RotationalField u{{ScalarChartField(g, std::move(ur), "u_r"), ScalarChartField(g, std::move(ut), "u_theta"),
                     ScalarChartField(g, std::move(uz), "u_z")}};
  return {std::move(u), ScalarChartField(g, std::move(fv), "f")};
}

/// u(x) = R(-F(x3)) v0(x1, x2) with F the primitive of the factor profile f(x3).
/// v0 must be divergence- and curl-free; the check uses interior max norms
/// against `harmonic_tol` (default: 10 h^2 (1 + max|v0|)).
inline BeltramiPair rotated_harmonic_field(const ScalarChartField& v1, const ScalarChartField& v2,
                                           const RadialProfile& f, Grid1 z, double harmonic_tol = -1.0) {
  const Grid2& g = v1.grid();
  detail::require(g.chart == Chart::cartesian_xy, "rotated harmonic field needs a cartesian-xy chart");
  detail::require_same(g, v2.grid());
  detail::require(z.size >= 3 && z.spacing > 0.0, "z axis needs at least 3 nodes");
  double vmax = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) vmax = std::max(vmax, std::hypot(v1.values()[n], v2.values()[n]));
  if (harmonic_tol < 0.0) harmonic_tol = 10.0 * g.max_spacing() * g.max_spacing() * (1.0 + vmax);
  auto d = diff(g, v1.values(), 0);
  auto c = diff(g, v2.values(), 0);
  const auto d2v2 = diff(g, v2.values(), 1), d2v1 = diff(g, v1.values(), 1);
  for (std::size_t n = 0; n < g.size(); ++n) {
    d[n] += d2v2[n];   // div v0
    c[n] -= d2v1[n];   // d1 v2 - d2 v1
  }
  const auto nd = norms_of(interior(g, d)), nc = norms_of(interior(g, c));
  if (nd.inf > harmonic_tol || nc.inf > harmonic_tol)
    throw PreconditionError("v0 is not harmonic: |div| = " + std::to_string(nd.inf) +
                            ", |curl| = " + std::to_string(nc.inf) + " exceed " + std::to_string(harmonic_tol));
  return {ZPlanarField{v1, v2, f, z}, f};
}

/// u = d2 Psi e1 - d1 Psi e2 + u3(Psi) e3, f = u3'(Psi).
inline BeltramiPair reconstruct_translational(const ScalarChartField& psi, const RadialProfile& u3) {
  const Grid2& g = psi.grid();
  detail::require(g.chart == Chart::cartesian_xy, "translational reconstruction needs a cartesian-xy chart");
  for (double s : psi.values())
    if (!u3.in_domain(s)) throw PreconditionError("range of Psi exits the u3 profile domain");
  const auto d1 = diff(g, psi.values(), 0, true), d2 = diff(g, psi.values(), 1, true);
  std::vector<double> a(g.size()), b(g.size()), c(g.size()), fv(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double s = psi.values()[n];
    a[n] = d2[n];
    b[n] = -d1[n];
    c[n] = u3.value(s);
    fv[n] = u3.derivative(s);
  }
  TranslationalField u{{ScalarChartField(g, std::move(a), "u1"), ScalarChartField(g, std::move(b), "u2"),
                        ScalarChartField(g, std::move(c), "u3")}};
  return {std::move(u), ScalarChartField(g, std::move(fv), "f")};
}

/// u = -r^-1 dz Psi e_r + r^-1 Gamma(Psi) e_theta + r^-1 dr Psi e_z, f = Gamma'(Psi).
inline BeltramiPair reconstruct_rotational(const ScalarChartField& psi, const RadialProfile& gamma) {
  const Grid2& g = psi.grid();
  detail::require(g.chart == Chart::meridional_rz, "rotational reconstruction needs a meridional chart");
  for (double s : psi.values())
    if (!gamma.in_domain(s)) throw PreconditionError("range of Psi exits the Gamma profile domain");
  const auto dr = diff(g, psi.values(), 0, true), dz = diff(g, psi.values(), 1, true);
  std::vector<double> ur(g.size()), ut(g.size()), uz(g.size()), fv(g.size());
  for (std::size_t i = 0; i < g.shape[0]; ++i) {
    const double r = g.coord(0, i);
    for (std::size_t j = 0; j < g.shape[1]; ++j) {
      const std::size_t n = g.index(i, j);
      const double s = psi.values()[n];
      ur[n] = -dz[n] / r;
      ut[n] = gamma.value(s) / r;
      uz[n] = dr[n] / r;
      fv[n] = gamma.derivative(s);
    }
  }
  RotationalField u{{ScalarChartField(g, std::move(ur), "u_r"), ScalarChartField(g, std::move(ut), "u_theta"),
                     ScalarChartField(g, std::move(uz), "u_z")}};
  return {std::move(u), ScalarChartField(g, std::move(fv), "f")};
}

/// First positive zero of the spherical Bessel function j1.
inline constexpr double kJ1FirstZero = 4.4934094579090641753;

/// Classical swirling spherical vortex of radius a moving with speed W (frame of
/// the vortex, axis on r = 0): Psi = A r^2 j1(lambda R) / (lambda R) inside,
/// -(W / 2) r^2 (1 - a^3 / R^3) outside, lambda a = first zero of j1,
/// A = -3 W / (2 j1'(lambda a)). Solves -(Lap_zr - r^-1 dr) Psi = lambda^2 Psi_+.
inline double spherical_vortex_stream(double r, double z, double W, double a) {
  const double R = std::hypot(r, z);
  const double lambda = kJ1FirstZero / a;
  if (R >= a) return -0.5 * W * r * r * (1.0 - a * a * a / (R * R * R));
  // j1'(x0) = j0(x0) at a zero of j1.
  const double j1p = std::sin(kJ1FirstZero) / kJ1FirstZero;
  const double A = -1.5 * W / j1p;
  const double x = lambda * R;
  const double j1_over_x = x < 1e-4 ? 1.0 / 3.0 - x * x / 30.0 : std::sph_bessel(1, x) / x;
  return A * r * r * j1_over_x;
}

}  // namespace beltrami
