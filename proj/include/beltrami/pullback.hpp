#pragma once

// Pullback beta = beta1 dxi1 + beta2 dxi2 of a field u onto a surface chart,
// the constrained evolution v_t = A v with v = (beta1, beta2), and the elliptic
// residuals of the surface system on (xi1, xi2) slices.
//
// The sweep coordinate xi2 is z (cyl), theta (rev) or r (conoid). Forms are
// indexed (k, j, i) = (t, xi2, xi1) with xi1 fastest.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beltrami/errors.hpp"
#include "beltrami/field_io.hpp"
#include "beltrami/grid.hpp"
#include "beltrami/levelset.hpp"
#include "beltrami/report.hpp"
#include "beltrami/vector_field.hpp"

namespace beltrami {

struct PullbackForm {
  ChartCase kase = ChartCase::rev;
  bool closed = true;      // xi1 periodic on [0, 2 pi)
  bool periodic2 = false;  // xi2 periodic with period `period2`
  bool collapsed = false;  // a single xi2 slice stands for every xi2
  double level = 0.0;
  double period2 = 0.0;
  std::vector<double> xi1, xi2, t;
  std::vector<double> beta1, beta2;
  double tangency = 0.0;  // max |u . dt Phi| / max |u| |dt Phi|

  [[nodiscard]] std::size_t n1() const { return xi1.size(); }
  [[nodiscard]] std::size_t n2() const { return xi2.size(); }
  [[nodiscard]] std::size_t nt() const { return t.size(); }
  [[nodiscard]] std::size_t slice_size() const { return n1() * n2(); }
  [[nodiscard]] std::size_t idx(std::size_t k, std::size_t j, std::size_t i) const { return (k * n2() + j) * n1() + i; }
  [[nodiscard]] double h1() const {
    return closed ? 2.0 * std::numbers::pi / static_cast<double>(n1()) : xi1[1] - xi1[0];
  }
  [[nodiscard]] double h2() const {
    if (collapsed || n2() < 2) return 0.0;
    return periodic2 ? period2 / static_cast<double>(n2()) : xi2[1] - xi2[0];
  }
  [[nodiscard]] std::span<const double> slice1(std::size_t k) const { return {beta1.data() + idx(k, 0, 0), slice_size()}; }
  [[nodiscard]] std::span<const double> slice2(std::size_t k) const { return {beta2.data() + idx(k, 0, 0), slice_size()}; }
};

/// Zero form on the chart's xi1 samples with the given xi2 samples and the first `nt` chart times.
inline PullbackForm blank_form(const SurfaceChart& ch, std::vector<double> xi2, bool periodic2, double period2,
                               std::size_t nt) {
  detail::require(!xi2.empty(), "form needs at least one xi2 sample");
  detail::require(nt >= 1 && nt <= ch.nt(), "form times must be a prefix of the chart times");
  if (ch.kase == ChartCase::conoid) detail::require(xi2 == ch.xi2, "conoid forms use the chart's r slices");
  PullbackForm f;
  f.kase = ch.kase;
  f.closed = ch.closed;
  f.level = ch.level;
  f.periodic2 = periodic2;
  f.period2 = period2;
  f.collapsed = xi2.size() == 1 && ch.kase != ChartCase::conoid;
  f.xi1 = ch.xi1;
  f.xi2 = std::move(xi2);
  f.t.assign(ch.t.begin(), ch.t.begin() + static_cast<std::ptrdiff_t>(nt));
  f.beta1.assign(nt * f.slice_size(), 0.0);
  f.beta2.assign(nt * f.slice_size(), 0.0);
  return f;
}

/// Position and tangent frame of Phi in R^3 at chart sample (s, k, i) and sweep value xi2.
struct ChartFrame {
  Vec3 x, d1, d2, dt;
};

inline ChartFrame chart_frame(const SurfaceChart& ch, std::size_t s, std::size_t k, std::size_t i, double xi2) {
  const std::size_t at = ch.idx(s, k, i);
  const auto& p = ch.phi[at];
  const auto& a = ch.d1[at];
  const auto& b = ch.dt[at];
  ChartFrame f;
  switch (ch.kase) {
    case ChartCase::cyl:
      f.x = {p[0], p[1], xi2};
      f.d1 = {a[0], a[1], 0.0};
      f.d2 = {0.0, 0.0, 1.0};
      f.dt = {b[0], b[1], 0.0};
      break;
    case ChartCase::rev: {
      const Vec3 er = e_r(xi2), et = e_theta(xi2);
      f.x = {p[0] * er[0], p[0] * er[1], p[1]};
      f.d1 = {a[0] * er[0], a[0] * er[1], a[1]};
      f.d2 = {p[0] * et[0], p[0] * et[1], 0.0};
      f.dt = {b[0] * er[0], b[0] * er[1], b[1]};
      break;
    }
    case ChartCase::conoid: {
      const double r = ch.xi2[s];
      const Vec3 er = e_r(p[0]), et = e_theta(p[0]);
      f.x = {r * er[0], r * er[1], p[1]};
      f.d1 = {r * a[0] * et[0], r * a[0] * et[1], a[1]};
      f.d2 = er;
      f.dt = {r * b[0] * et[0], r * b[0] * et[1], b[1]};
      break;
    }
  }
  return f;
}

struct PullbackOptions {
  std::size_t n2 = 16;          // xi2 samples when the field cannot be collapsed (cyl, rev)
  double z0 = 0.0;              // cyl: xi2 = z0 + j z_period / n2
  double z_period = 2.0 * std::numbers::pi;
  bool collapse = true;         // one xi2 slice when the field carries the chart's symmetry
  double tangency_tol = 1e-2;   // relative bound on u . dt Phi
};

/// beta_a = u(Phi) . d_a Phi on every chart sample and xi2 slice.
/// Throws PreconditionError when u is not tangent to the level surfaces.
inline PullbackForm pullback_form(const SymmetricVectorField& u, const SurfaceChart& ch, PullbackOptions opt = {}) {
  detail::require(ch.n1() >= 3 && !ch.phi.empty(), "chart is empty");
  const Symmetry sym = symmetry_of(u);
  std::vector<double> xi2;
  bool periodic2 = false;
  double period2 = 0.0;
  const bool collapse = opt.collapse && ((ch.kase == ChartCase::cyl && sym == Symmetry::translational) ||
                                         (ch.kase == ChartCase::rev && sym == Symmetry::rotational));
  if (ch.kase == ChartCase::conoid) {
    xi2 = ch.xi2;
  } else if (collapse) {
    xi2 = {ch.kase == ChartCase::cyl ? opt.z0 : 0.0};
    periodic2 = true;
    period2 = ch.kase == ChartCase::cyl ? opt.z_period : 2.0 * std::numbers::pi;
  } else {
    detail::require(opt.n2 >= 1, "need at least one xi2 sample");
    period2 = ch.kase == ChartCase::cyl ? opt.z_period : 2.0 * std::numbers::pi;
    detail::require(period2 > 0.0, "z_period must be positive");
    periodic2 = true;
    const double base = ch.kase == ChartCase::cyl ? opt.z0 : 0.0;
    for (std::size_t j = 0; j < opt.n2; ++j)
      xi2.push_back(base + period2 * static_cast<double>(j) / static_cast<double>(opt.n2));
  }
  PullbackForm f = blank_form(ch, std::move(xi2), periodic2, period2, ch.nt());
  f.collapsed = collapse;
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < f.nt(); ++k)
    for (std::size_t j = 0; j < f.n2(); ++j) {
      const std::size_t s = ch.kase == ChartCase::conoid ? j : 0;
      for (std::size_t i = 0; i < f.n1(); ++i) {
        const ChartFrame fr = chart_frame(ch, s, k, i, f.xi2[j]);
        const Vec3 v = evaluate(u, fr.x);
        f.beta1[f.idx(k, j, i)] = dot(v, fr.d1);
        f.beta2[f.idx(k, j, i)] = dot(v, fr.d2);
        worst = std::max(worst, std::abs(dot(v, fr.dt)));
        scale = std::max(scale, norm(v) * norm(fr.dt));
      }
    }
  for (double b : f.beta1)
    if (!std::isfinite(b)) throw NumericalError("pullback produced non-finite values");
  f.tangency = scale > 0.0 ? worst / scale : 0.0;
  if (f.tangency > opt.tangency_tol)
    throw PreconditionError("u is not tangent to the level surfaces: relative |u . dt Phi| = " +
                            std::to_string(f.tangency) + " exceeds " + std::to_string(opt.tangency_tol));
  return f;
}

namespace detail {

// Centred first difference along xi1 (a = 0) or xi2 (a = 1) of an n1 x n2 slice;
// periodic wrap or second-order one-sided ends. A collapsed axis has zero derivative.
inline std::vector<double> slice_diff(std::span<const double> v, std::size_t n1, std::size_t n2, int axis, double h,
                                      bool periodic) {
  std::vector<double> out(v.size(), 0.0);
  const std::size_t n = axis == 0 ? n1 : n2;
  if (n < 2 || h == 0.0) return out;
  detail::require(periodic || n >= 3, "open direction needs at least 3 samples");
  auto at = [&](std::size_t line, std::size_t m) { return axis == 0 ? line * n1 + m : m * n1 + line; };
  const std::size_t lines = axis == 0 ? n2 : n1;
  for (std::size_t l = 0; l < lines; ++l)
    for (std::size_t m = 0; m < n; ++m) {
      double d;
      if (periodic) d = v[at(l, (m + 1) % n)] - v[at(l, (m + n - 1) % n)];
      else if (m == 0) d = -3.0 * v[at(l, 0)] + 4.0 * v[at(l, 1)] - v[at(l, 2)];
      else if (m + 1 == n) d = 3.0 * v[at(l, n - 1)] - 4.0 * v[at(l, n - 2)] + v[at(l, n - 3)];
      else d = v[at(l, m + 1)] - v[at(l, m - 1)];
      out[at(l, m)] = d / (2.0 * h);
    }
  return out;
}

// Compact flux form d_a(w d_a v) with face-averaged weight; zero on open ends.
inline std::vector<double> slice_flux(std::span<const double> v, std::span<const double> w, std::size_t n1,
                                      std::size_t n2, int axis, double h, bool periodic) {
  std::vector<double> out(v.size(), 0.0);
  const std::size_t n = axis == 0 ? n1 : n2;
  if (n < 3 || h == 0.0) return out;
  auto at = [&](std::size_t line, std::size_t m) { return axis == 0 ? line * n1 + m : m * n1 + line; };
  const std::size_t lines = axis == 0 ? n2 : n1;
  for (std::size_t l = 0; l < lines; ++l)
    for (std::size_t m = 0; m < n; ++m) {
      if (!periodic && (m == 0 || m + 1 == n)) continue;
      const std::size_t a = at(l, (m + n - 1) % n), b = at(l, m), c = at(l, (m + 1) % n);
      const double wp = 0.5 * (w[b] + w[c]), wm = 0.5 * (w[a] + w[b]);
      out[b] = (wp * (v[c] - v[b]) - wm * (v[b] - v[a])) / (h * h);
    }
  return out;
}

// Samples whose stencils stay inside the slice: all of them in periodic directions.
inline std::vector<double> slice_interior(std::span<const double> v, std::size_t n1, std::size_t n2, bool per1,
                                          bool per2, bool collapsed2) {
  std::vector<double> out;
  for (std::size_t j = 0; j < n2; ++j) {
    if (!per2 && !collapsed2 && (j == 0 || j + 1 == n2)) continue;
    for (std::size_t i = 0; i < n1; ++i) {
      if (!per1 && (i == 0 || i + 1 == n1)) continue;
      out.push_back(v[j * n1 + i]);
    }
  }
  return out;
}

// Periodic data check: the jump across the wrap must be comparable with interior steps.
inline void require_periodic(std::span<const double> v, std::size_t n1, std::size_t n2, int axis,
                             const std::string& name) {
  const std::size_t n = axis == 0 ? n1 : n2;
  if (n < 3) return;
  auto at = [&](std::size_t line, std::size_t m) { return axis == 0 ? line * n1 + m : m * n1 + line; };
  const std::size_t lines = axis == 0 ? n2 : n1;
  double step = 0.0, wrap = 0.0, scale = 0.0;
  for (std::size_t l = 0; l < lines; ++l) {
    for (std::size_t m = 0; m + 1 < n; ++m) step = std::max(step, std::abs(v[at(l, m + 1)] - v[at(l, m)]));
    wrap = std::max(wrap, std::abs(v[at(l, 0)] - v[at(l, n - 1)]));
    for (std::size_t m = 0; m < n; ++m) scale = std::max(scale, std::abs(v[at(l, m)]));
  }
  if (wrap > 10.0 * step + 1e-12 * scale)
    throw PreconditionError(name + " is not periodic along xi" + std::to_string(axis + 1) + ": wrap jump " +
                            std::to_string(wrap) + " vs interior step " + std::to_string(step));
}

inline std::size_t chart_slice(const PullbackForm& f, std::size_t j) { return f.kase == ChartCase::conoid ? j : 0; }

// Chart time index matching form time k (forms share the chart's time grid).
inline void require_compatible(const PullbackForm& f, const SurfaceChart& ch) {
  detail::require(ch.has_coefficients(), "chart coefficients not computed");
  detail::require(f.kase == ch.kase && f.n1() == ch.n1() && f.closed == ch.closed, "form and chart do not match");
  detail::require(f.nt() <= ch.nt(), "form has more times than the chart");
  for (std::size_t k = 0; k < f.nt(); ++k)
    detail::require(f.t[k] == ch.t[k], "form times must coincide with chart times");
  if (f.kase == ChartCase::conoid) detail::require(f.xi2 == ch.xi2, "conoid form slices differ from the chart");
}

// Coefficient slice (p or q) of chart time k laid out like a form slice.
inline std::vector<double> coefficient_slice(const PullbackForm& f, const SurfaceChart& ch, const std::vector<double>& c,
                                             std::size_t k) {
  std::vector<double> out(f.slice_size());
  for (std::size_t j = 0; j < f.n2(); ++j)
    for (std::size_t i = 0; i < f.n1(); ++i) out[j * f.n1() + i] = c[ch.idx(chart_slice(f, j), k, i)];
  return out;
}

}  // namespace detail

/// grad-perp . v = d2 v1 - d1 v2 on slice k.
inline std::vector<double> constraint_slice(const PullbackForm& f, std::size_t k) {
  const auto d2v1 = detail::slice_diff(f.slice1(k), f.n1(), f.n2(), 1, f.h2(), f.periodic2);
  const auto d1v2 = detail::slice_diff(f.slice2(k), f.n1(), f.n2(), 0, f.h1(), f.closed);
  std::vector<double> c(d2v1.size());
  for (std::size_t n = 0; n < c.size(); ++n) c[n] = d2v1[n] - d1v2[n];
  return c;
}

/// Residuals of div(B v) = 0, grad-perp . v = 0 and div(B grad v2) = 0 on the
/// slice at chart time k, B = diag(p, q). The last one needs B independent of
/// xi2 and is refused for the conoid.
inline DiagnosticReport elliptic_residuals(const PullbackForm& f, const SurfaceChart& ch, std::size_t k,
                                           bool with_v2_equation = true) {
  detail::require_compatible(f, ch);
  detail::require(k < f.nt(), "time index out of range");
  if (with_v2_equation && f.kase == ChartCase::conoid)
    throw PreconditionError(
        "div(B grad v2) = 0 needs B independent of xi2; on a conoid chart p and q vary with xi2 = r");
  const std::size_t n1 = f.n1(), n2 = f.n2();
  const auto v1 = f.slice1(k), v2 = f.slice2(k);
  if (f.closed) {
    detail::require_periodic(v1, n1, n2, 0, "v1");
    detail::require_periodic(v2, n1, n2, 0, "v2");
  }
  if (f.periodic2 && !f.collapsed) {
    detail::require_periodic(v1, n1, n2, 1, "v1");
    detail::require_periodic(v2, n1, n2, 1, "v2");
  }
  const auto p = detail::coefficient_slice(f, ch, ch.p, k), q = detail::coefficient_slice(f, ch, ch.q, k);
  std::vector<double> pv(v1.size()), qv(v1.size());
  for (std::size_t n = 0; n < v1.size(); ++n) {
    pv[n] = p[n] * v1[n];
    qv[n] = q[n] * v2[n];
  }
  auto div = detail::slice_diff(pv, n1, n2, 0, f.h1(), f.closed);
  const auto div2 = detail::slice_diff(qv, n1, n2, 1, f.h2(), f.periodic2);
  for (std::size_t n = 0; n < div.size(); ++n) div[n] += div2[n];
  const auto cons = constraint_slice(f, k);
  auto keep = [&](const std::vector<double>& v) {
    return detail::slice_interior(v, n1, n2, f.closed, f.periodic2, f.collapsed);
  };
  DiagnosticReport r;
  const double h = std::max(f.h1(), f.h2());
  r.add("div_Bv", keep(div), h);
  r.add("constraint", keep(cons), h);
  if (with_v2_equation) {
    auto e = detail::slice_flux(v2, p, n1, n2, 0, f.h1(), f.closed);
    const auto e2 = detail::slice_flux(v2, q, n1, n2, 1, f.h2(), f.periodic2);
    for (std::size_t n = 0; n < e.size(); ++n) e[n] += e2[n];
    r.add("div_BgradV2", keep(e), h);
  }
  r.metadata["t"] = f.t[k];
  r.metadata["case"] = std::string(to_string(f.kase));
  return r;
}

/// Weighted Dirichlet energy sum (p (d1 v)^2 + q (d2 v)^2) h1 h2 over a doubly
/// periodic n1 x n2 slice with centred differences. A slice of n2 = 1 is
/// constant in xi2 and integrates over a period `period2`.
inline double dirichlet_energy(std::span<const double> v2, std::span<const double> p, std::span<const double> q,
                               std::size_t n1, std::size_t n2, double period1, double period2, bool closed = true) {
  if (!closed) throw PreconditionError("Dirichlet energy needs a closed chart (both directions periodic)");
  detail::require(v2.size() == n1 * n2 && p.size() == v2.size() && q.size() == v2.size(), "slice sizes differ");
  detail::require(n1 >= 3 && period1 > 0.0 && period2 > 0.0, "bad periodic slice");
  const double h1 = period1 / static_cast<double>(n1), h2 = period2 / static_cast<double>(n2);
  detail::require_periodic(v2, n1, n2, 0, "v2");
  if (n2 >= 3) detail::require_periodic(v2, n1, n2, 1, "v2");
  const auto d1 = detail::slice_diff(v2, n1, n2, 0, h1, true);
  const auto d2 = n2 >= 3 ? detail::slice_diff(v2, n1, n2, 1, h2, true) : std::vector<double>(v2.size(), 0.0);
  std::vector<double> e(v2.size());
  for (std::size_t n = 0; n < e.size(); ++n) e[n] = p[n] * d1[n] * d1[n] + q[n] * d2[n] * d2[n];
  return pairwise_sum(e) * h1 * h2;
}

/// Energy of v2 = beta2 of form slice k with B from the chart.
inline double dirichlet_energy(const PullbackForm& f, const SurfaceChart& ch, std::size_t k) {
  detail::require_compatible(f, ch);
  if (!f.closed || !(f.periodic2 || f.collapsed))
    throw PreconditionError("Dirichlet energy needs a closed chart (both directions periodic)");
  const auto p = detail::coefficient_slice(f, ch, ch.p, k), q = detail::coefficient_slice(f, ch, ch.q, k);
  return dirichlet_energy(f.slice2(k), p, q, f.n1(), f.n2(), 2.0 * std::numbers::pi, f.period2);
}

// ---------------------------------------------------------------------------
// Constrained evolution.

/// The 2 x 2 matrix of v_t = A v at a chart sample, row-major.
using Mat2 = std::array<double, 4>;

/// Case form: A = (c + t) chi (0, nu; -1/nu, 0).
inline Mat2 matrix_case(const SurfaceChart& ch, std::size_t s, std::size_t k, std::size_t i) {
  const std::size_t at = ch.idx(s, k, i);
  const double a = (ch.level + ch.t[k]) * ch.chi[at];
  return {0.0, a * ch.nu[at], -a / ch.nu[at], 0.0};
}

/// Generic form: A = (c + t) chi |G|^(1/2) (g12, g22; -g11, -g21) with G the
/// metric of (d1 Phi, d2 Phi) and chi = |dt Phi|.
inline Mat2 matrix_generic(const ChartFrame& fr, double c_plus_t) {
  const double g11 = dot(fr.d1, fr.d1), g12 = dot(fr.d1, fr.d2), g22 = dot(fr.d2, fr.d2);
  const double det = g11 * g22 - g12 * g12;
  if (!(det > 0.0)) throw NumericalError("degenerate metric on the chart");
  const double ginv11 = g22 / det, ginv12 = -g12 / det, ginv22 = g11 / det;
  const double a = c_plus_t * norm(fr.dt) * std::sqrt(det);
  return {a * ginv12, a * ginv22, -a * ginv11, -a * ginv12};
}

struct ConstrainedOptions {
  bool generic_metric = false;  // assemble A from the full metric instead of chi, nu
  double tol = 1e-8;            // integrator tolerance checked by step doubling
};

struct ConstrainedResult {
  PullbackForm v;
  std::vector<double> constraint;                  // max |grad-perp . v| per step
  std::vector<double> div_bv, div_bgrad_v2;        // max residual per step (second empty for the conoid)
  double integrator_error = 0.0;                   // step-doubling estimate at t0
  DiagnosticReport report;
};

namespace detail {

// Lagrange weights at x for the nodes xs.
inline std::vector<double> lagrange(std::span<const double> xs, double x) {
  std::vector<double> w(xs.size(), 1.0);
  for (std::size_t a = 0; a < xs.size(); ++a)
    for (std::size_t b = 0; b < xs.size(); ++b)
      if (a != b) w[a] *= (x - xs[b]) / (xs[a] - xs[b]);
  return w;
}

// RK4 over chart times with coefficients at nodes; midpoint coefficients come
// from four-point Lagrange interpolation in t (exact nodes when stride = 2).
inline std::vector<double> integrate_pointwise(const std::vector<Mat2>& A, std::size_t nt, std::size_t stride,
                                               const std::vector<double>& t, std::array<double, 2> v,
                                               std::vector<std::array<double, 2>>* trace) {
  auto mv = [](const Mat2& m, const std::array<double, 2>& x) {
    return std::array<double, 2>{m[0] * x[0] + m[1] * x[1], m[2] * x[0] + m[3] * x[1]};
  };
  auto mid = [&](std::size_t k) -> Mat2 {
    if (stride == 2) return A[k + 1];
    const std::size_t m = std::min<std::size_t>(4, nt);
    std::size_t lo = k >= 1 ? k - 1 : 0;
    if (lo + m > nt) lo = nt - m;
    const double tm = 0.5 * (t[k] + t[k + 1]);
    const auto w = lagrange(std::span<const double>(t.data() + lo, m), tm);
    Mat2 out{0, 0, 0, 0};
    for (std::size_t a = 0; a < m; ++a)
      for (int e = 0; e < 4; ++e) out[e] += w[a] * A[lo + a][e];
    return out;
  };
  if (trace) trace->push_back(v);
  for (std::size_t k = 0; k + stride < nt; k += stride) {
    const double dt = t[k + stride] - t[k];
    const Mat2 a0 = A[k], am = mid(k), a1 = A[k + stride];
    const auto k1 = mv(a0, v);
    const auto k2 = mv(am, {v[0] + 0.5 * dt * k1[0], v[1] + 0.5 * dt * k1[1]});
    const auto k3 = mv(am, {v[0] + 0.5 * dt * k2[0], v[1] + 0.5 * dt * k2[1]});
    const auto k4 = mv(a1, {v[0] + dt * k3[0], v[1] + dt * k3[1]});
    for (int c = 0; c < 2; ++c) v[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    if (!std::isfinite(v[0]) || !std::isfinite(v[1])) throw NumericalError("constrained evolution produced non-finite values");
    if (trace) trace->push_back(v);
  }
  return {v[0], v[1]};
}

}  // namespace detail

/// RK4 of v_t = A(xi, t) v pointwise in xi from the t = 0 slice of `v0` over
/// every chart time. The constraint grad-perp . v is measured at every step and
/// never projected out.
inline ConstrainedResult evolve_constrained(const PullbackForm& v0, const SurfaceChart& ch, ConstrainedOptions opt = {}) {
  detail::require_compatible(v0, ch);
  detail::require(ch.nt() >= 2, "chart needs at least two times");
  ConstrainedResult res;
  res.v = blank_form(ch, v0.xi2, v0.periodic2, v0.period2, ch.nt());
  res.v.collapsed = v0.collapsed;
  PullbackForm& v = res.v;
  const std::size_t nt = ch.nt();
  const bool doubling = (nt - 1) % 2 == 0;
  std::vector<Mat2> A(nt);
  std::vector<std::array<double, 2>> trace;
  double err = 0.0, vmax = 0.0;
  for (std::size_t j = 0; j < v.n2(); ++j) {
    const std::size_t s = detail::chart_slice(v, j);
    for (std::size_t i = 0; i < v.n1(); ++i) {
      for (std::size_t k = 0; k < nt; ++k)
        A[k] = opt.generic_metric ? matrix_generic(chart_frame(ch, s, k, i, v.xi2[j]), ch.level + ch.t[k])
                                  : matrix_case(ch, s, k, i);
      const std::array<double, 2> init{v0.beta1[v0.idx(0, j, i)], v0.beta2[v0.idx(0, j, i)]};
      trace.clear();
      const auto fine = detail::integrate_pointwise(A, nt, 1, ch.t, init, &trace);
      for (std::size_t k = 0; k < nt; ++k) {
        v.beta1[v.idx(k, j, i)] = trace[k][0];
        v.beta2[v.idx(k, j, i)] = trace[k][1];
      }
      if (doubling) {
        const auto coarse = detail::integrate_pointwise(A, nt, 2, ch.t, init, nullptr);
        err = std::max({err, std::abs(fine[0] - coarse[0]) / 15.0, std::abs(fine[1] - coarse[1]) / 15.0});
      }
      vmax = std::max({vmax, std::abs(fine[0]), std::abs(fine[1])});
    }
  }
  res.integrator_error = err;
  const bool v2_eq = ch.kase != ChartCase::conoid;
  std::vector<double> cons_all;
  for (std::size_t k = 0; k < nt; ++k) {
    const auto c = constraint_slice(v, k);
    const auto ci = detail::slice_interior(c, v.n1(), v.n2(), v.closed, v.periodic2, v.collapsed);
    res.constraint.push_back(norms_of(ci).inf);
    cons_all.insert(cons_all.end(), ci.begin(), ci.end());
    std::vector<double> pv(v.slice_size()), qv(v.slice_size());
    const auto p = detail::coefficient_slice(v, ch, ch.p, k), q = detail::coefficient_slice(v, ch, ch.q, k);
    const auto v1 = v.slice1(k), v2 = v.slice2(k);
    for (std::size_t n = 0; n < pv.size(); ++n) {
      pv[n] = p[n] * v1[n];
      qv[n] = q[n] * v2[n];
    }
    auto div = detail::slice_diff(pv, v.n1(), v.n2(), 0, v.h1(), v.closed);
    const auto div2 = detail::slice_diff(qv, v.n1(), v.n2(), 1, v.h2(), v.periodic2);
    for (std::size_t n = 0; n < div.size(); ++n) div[n] += div2[n];
    res.div_bv.push_back(norms_of(detail::slice_interior(div, v.n1(), v.n2(), v.closed, v.periodic2, v.collapsed)).inf);
    if (v2_eq) {
      auto e = detail::slice_flux(v2, p, v.n1(), v.n2(), 0, v.h1(), v.closed);
      const auto e2 = detail::slice_flux(v2, q, v.n1(), v.n2(), 1, v.h2(), v.periodic2);
      for (std::size_t n = 0; n < e.size(); ++n) e[n] += e2[n];
      res.div_bgrad_v2.push_back(
          norms_of(detail::slice_interior(e, v.n1(), v.n2(), v.closed, v.periodic2, v.collapsed)).inf);
    }
  }
  const double h = std::max(v.h1(), v.h2());
  res.report.add("constraint", cons_all, h);
  res.report.metadata["constraint_history"] = res.constraint;
  res.report.metadata["constraint_initial"] = res.constraint.front();
  res.report.metadata["constraint_final"] = res.constraint.back();
  res.report.metadata["constraint_growth"] =
      res.constraint.front() > 0.0 ? res.constraint.back() / res.constraint.front() : 0.0;
  res.report.metadata["integrator_error"] = doubling ? nlohmann::json(err) : nlohmann::json(nullptr);
  res.report.metadata["integrator_tol"] = opt.tol;
  res.report.metadata["integrator_within_tol"] = !doubling || err <= opt.tol * std::max(1.0, vmax);
  res.report.metadata["generic_metric"] = opt.generic_metric;
  res.report.metadata["steps"] = nt - 1;
  res.report.metadata["case"] = std::string(to_string(ch.kase));
  return res;
}

/// Residuals of the four surface equations over all interior times:
///   closedness   d1 beta2 - d2 beta1
///   evolution_1  dt beta1 - (c+t) chi |G|^(1/2) (beta1 g12 + beta2 g22)
///   evolution_2  dt beta2 + (c+t) chi |G|^(1/2) (beta1 g11 + beta2 g21)
///   divergence   d1(chi |G|^(1/2)(beta1 g11 + beta2 g21)) + d2(chi |G|^(1/2)(beta1 g12 + beta2 g22))
/// with centred t differences and the generic metric.
inline DiagnosticReport system_residuals(const PullbackForm& f, const SurfaceChart& ch) {
  detail::require_compatible(f, ch);
  detail::require(f.nt() >= 3, "need at least three times for centred t differences");
  const std::size_t n1 = f.n1(), n2 = f.n2();
  std::vector<double> closedness, ev1, ev2, divergence;
  std::vector<double> flux1(f.slice_size()), flux2(f.slice_size());
  for (std::size_t k = 1; k + 1 < f.nt(); ++k) {
    const double dt2 = f.t[k + 1] - f.t[k - 1];
    for (std::size_t j = 0; j < n2; ++j)
      for (std::size_t i = 0; i < n1; ++i) {
        const ChartFrame fr = chart_frame(ch, detail::chart_slice(f, j), k, i, f.xi2[j]);
        const Mat2 A = matrix_generic(fr, ch.level + ch.t[k]);
        const double b1 = f.beta1[f.idx(k, j, i)], b2 = f.beta2[f.idx(k, j, i)];
        const double db1 = (f.beta1[f.idx(k + 1, j, i)] - f.beta1[f.idx(k - 1, j, i)]) / dt2;
        const double db2 = (f.beta2[f.idx(k + 1, j, i)] - f.beta2[f.idx(k - 1, j, i)]) / dt2;
        ev1.push_back(db1 - (A[0] * b1 + A[1] * b2));
        ev2.push_back(db2 - (A[2] * b1 + A[3] * b2));
        // chi |G|^(1/2) (b1 g^11 + b2 g^21) = -(A row 2) / (c + t), likewise row 1.
        const double ct = ch.level + ch.t[k];
        flux1[j * n1 + i] = -(A[2] * b1 + A[3] * b2) / ct;
        flux2[j * n1 + i] = (A[0] * b1 + A[1] * b2) / ct;
      }
    const auto c = constraint_slice(f, k);
    auto d = detail::slice_diff(flux1, n1, n2, 0, f.h1(), f.closed);
    const auto d2 = detail::slice_diff(flux2, n1, n2, 1, f.h2(), f.periodic2);
    for (std::size_t n = 0; n < d.size(); ++n) d[n] += d2[n];
    for (double x : detail::slice_interior(c, n1, n2, f.closed, f.periodic2, f.collapsed)) closedness.push_back(-x);
    for (double x : detail::slice_interior(d, n1, n2, f.closed, f.periodic2, f.collapsed)) divergence.push_back(x);
  }
  DiagnosticReport r;
  const double h = std::max(f.h1(), f.h2());
  r.add("closedness", closedness, h);
  r.add("evolution_1", ev1, h);
  r.add("evolution_2", ev2, h);
  r.add("divergence", divergence, h);
  r.metadata["dt"] = f.t[1] - f.t[0];
  return r;
}

/// CSV: xi1, xi2, t, beta1, beta2.
inline void write_form_csv(std::ostream& os, const PullbackForm& f) {
  os << "xi1,xi2,t,beta1,beta2\n";
  for (std::size_t k = 0; k < f.nt(); ++k)
    for (std::size_t j = 0; j < f.n2(); ++j)
      for (std::size_t i = 0; i < f.n1(); ++i) {
        const std::size_t at = f.idx(k, j, i);
        os << format_double(f.xi1[i]) << ',' << format_double(f.xi2[j]) << ',' << format_double(f.t[k]) << ','
           << format_double(f.beta1[at]) << ',' << format_double(f.beta2[at]) << '\n';
      }
}

/// CSV: t, constraint, div_Bv, div_BgradV2 (last column empty for the conoid).
inline void write_history_csv(std::ostream& os, const ConstrainedResult& r) {
  os << "t,constraint,div_Bv,div_BgradV2\n";
  for (std::size_t k = 0; k < r.constraint.size(); ++k) {
    os << format_double(r.v.t[k]) << ',' << format_double(r.constraint[k]) << ',' << format_double(r.div_bv[k]) << ',';
    if (k < r.div_bgrad_v2.size()) os << format_double(r.div_bgrad_v2[k]);
    os << '\n';
  }
}

inline nlohmann::json form_metadata(const PullbackForm& f) {
  return {{"case", std::string(to_string(f.kase))}, {"closed", f.closed},   {"periodic2", f.periodic2},
          {"collapsed", f.collapsed},                {"n1", f.n1()},         {"n2", f.n2()},
          {"nt", f.nt()},                            {"tangency", f.tangency}, {"period2", f.period2}};
}

}  // namespace beltrami
