#pragma once

// Rigidity diagnostics: constancy of the pullback form across the chart,
// reconstruction of u from (beta1, beta2), the compatibility rank of the
// constraint systems for f = f(r) and f = f(theta), and symmetry-defect fields.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "beltrami/errors.hpp"
#include "beltrami/field_io.hpp"
#include "beltrami/pullback.hpp"
#include "beltrami/report.hpp"
#include "beltrami/vector_field.hpp"

namespace beltrami {

namespace detail {

inline double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = pairwise_sum(v) / static_cast<double>(v.size());
  std::vector<double> d(v.size());
  for (std::size_t n = 0; n < v.size(); ++n) d[n] = (v[n] - m) * (v[n] - m);
  return std::sqrt(pairwise_sum(d) / static_cast<double>(v.size()));
}

}  // namespace detail

/// Per time: (a) range and standard deviation of beta2 over the whole (xi1, xi2)
/// slice, (b) the largest range and standard deviation of beta1 along xi2.
/// Each is divided by max |beta_a| on the slice (raw when that is zero).
inline DiagnosticReport constancy_diagnostic(const PullbackForm& f) {
  if (f.kase == ChartCase::conoid)
    throw PreconditionError("the constancy diagnostic applies to cylinder and revolution charts only");
  std::vector<double> b2_range, b2_std, b1_range, b1_std;
  for (std::size_t k = 0; k < f.nt(); ++k) {
    const auto s1 = f.slice1(k), s2 = f.slice2(k);
    const std::vector<double> v2(s2.begin(), s2.end());
    const auto [lo, hi] = std::minmax_element(v2.begin(), v2.end());
    double m2 = 0.0, m1 = 0.0;
    for (double x : s2) m2 = std::max(m2, std::abs(x));
    for (double x : s1) m1 = std::max(m1, std::abs(x));
    const double n2 = m2 > 0.0 ? m2 : 1.0, n1 = m1 > 0.0 ? m1 : 1.0;
    b2_range.push_back((*hi - *lo) / n2);
    b2_std.push_back(detail::stddev(v2) / n2);
    double r1 = 0.0, sd1 = 0.0;
    for (std::size_t i = 0; i < f.n1(); ++i) {
      std::vector<double> col(f.n2());
      for (std::size_t j = 0; j < f.n2(); ++j) col[j] = s1[j * f.n1() + i];
      const auto [a, b] = std::minmax_element(col.begin(), col.end());
      r1 = std::max(r1, *b - *a);
      sd1 = std::max(sd1, detail::stddev(col));
    }
    b1_range.push_back(r1 / n1);
    b1_std.push_back(sd1 / n1);
  }
  DiagnosticReport r;
  const double h = f.h1();
  r.add("beta2_range", b2_range, h);
  r.add("beta2_std", b2_std, h);
  r.add("beta1_xi2_range", b1_range, h);
  r.add("beta1_xi2_std", b1_std, h);
  r.metadata["t"] = f.t;
  r.metadata["beta2_range"] = b2_range;
  r.metadata["beta2_std"] = b2_std;
  r.metadata["beta1_xi2_range"] = b1_range;
  r.metadata["beta1_xi2_std"] = b1_std;
  r.metadata["case"] = std::string(to_string(f.kase));
  r.metadata["n1"] = f.n1();
  r.metadata["n2"] = f.n2();
  return r;
}

/// Points Phi and vectors u(Phi) = beta1 d1 Phi / |d1 Phi|^2 + beta2 d2 Phi / |d2 Phi|^2,
/// laid out like the form.
struct ChartSamples {
  std::vector<Vec3> x, u;
};

inline ChartSamples reconstruct_from_beta(const PullbackForm& f, const SurfaceChart& ch, double eps = kRegularityFloor) {
  if (f.kase == ChartCase::conoid)
    throw PreconditionError("reconstruction needs an orthogonal chart (cylinder or revolution)");
  detail::require(f.kase == ch.kase && f.n1() == ch.n1() && f.nt() <= ch.nt(), "form and chart do not match");
  ChartSamples out;
  out.x.resize(f.beta1.size());
  out.u.resize(f.beta1.size());
  for (std::size_t k = 0; k < f.nt(); ++k)
    for (std::size_t j = 0; j < f.n2(); ++j)
      for (std::size_t i = 0; i < f.n1(); ++i) {
        const ChartFrame fr = chart_frame(ch, 0, k, i, f.xi2[j]);
        const double a = dot(fr.d1, fr.d1), b = dot(fr.d2, fr.d2);
        if (!(std::sqrt(a) > eps) || !(std::sqrt(b) > eps))
          throw NumericalError("|d1 Phi| or |d2 Phi| below the regularity floor");
        const std::size_t at = f.idx(k, j, i);
        const double c1 = f.beta1[at] / a, c2 = f.beta2[at] / b;
        out.x[at] = fr.x;
        out.u[at] = {c1 * fr.d1[0] + c2 * fr.d2[0], c1 * fr.d1[1] + c2 * fr.d2[1], c1 * fr.d1[2] + c2 * fr.d2[2]};
      }
  return out;
}

/// |u_reconstructed - u(Phi)| over the chart, divided by max |u(Phi)|.
inline DiagnosticReport round_trip_error(const SymmetricVectorField& u, const PullbackForm& f, const SurfaceChart& ch) {
  const auto rec = reconstruct_from_beta(f, ch);
  std::vector<double> err(rec.x.size());
  double scale = 0.0;
  for (std::size_t n = 0; n < rec.x.size(); ++n) {
    const Vec3 v = evaluate(u, rec.x[n]);
    scale = std::max(scale, norm(v));
    err[n] = norm({rec.u[n][0] - v[0], rec.u[n][1] - v[1], rec.u[n][2] - v[2]});
  }
  if (scale > 0.0)
    for (double& e : err) e /= scale;
  DiagnosticReport r;
  r.add("round_trip", err, f.h1());
  r.metadata["field_scale"] = scale;
  return r;
}

// ---------------------------------------------------------------------------
// Compatibility rank.

enum class CompatibilityCase { f_r, f_theta, perp_only };

inline std::string_view to_string(CompatibilityCase c) {
  switch (c) {
    case CompatibilityCase::f_r: return "f(r)";
    case CompatibilityCase::f_theta: return "f(theta)";
    case CompatibilityCase::perp_only: return "perp";
  }
  return "?";
}

inline CompatibilityCase compatibility_from_string(std::string_view s) {
  if (s == "f(r)" || s == "f_r") return CompatibilityCase::f_r;
  if (s == "f(theta)" || s == "f_theta") return CompatibilityCase::f_theta;
  if (s == "perp") return CompatibilityCase::perp_only;
  throw PreconditionError("unknown compatibility case '" + std::string(s) + "'");
}

struct CompatibilityOptions {
  std::size_t n = 24;        // n x n doubly periodic grid of period 2 pi
  double C = 0.05;           // null threshold C h^2 on row-normalised blocks
  bool p_one = false;        // f(r): f = ln r so that p = 1, otherwise f = r
  double r0 = 1.0;           // f(r): radius of the level; f(theta): xi2 = r starts at r0
  bool second_t_derivative = true;  // f(theta): include div(xi2^3 v) = 0
};

struct CompatibilityResult {
  std::size_t nullity = 0;
  double threshold = 0.0;
  double h = 0.0;
  std::size_t rows = 0, cols = 0;
  std::vector<double> sigma;  // ascending
  Eigen::MatrixXd null_basis; // columns span the numerical nullspace (empty unless requested)
};

namespace detail {

// Staggered periodic grid: v1 on xi1-faces (i + 1/2, j), v2 on xi2-faces (i, j + 1/2).
struct MacAssembler {
  std::size_t n;
  double h;
  std::vector<Eigen::Triplet<double>> trip;
  std::size_t row = 0;

  [[nodiscard]] std::size_t v1(std::size_t i, std::size_t j) const { return (i % n) + n * (j % n); }
  [[nodiscard]] std::size_t v2(std::size_t i, std::size_t j) const { return n * n + (i % n) + n * (j % n); }

  // Rows at cell centres: d1(a(j) v1) + d2(b(j + 1/2) v2) with weights from ab(j) = {a_j, b_{j+1/2}}.
  template <class W>
  void divergence(W&& weights) {
    double scale = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto [a, b] = weights(j);
      scale = std::max({scale, std::abs(a), std::abs(b)});
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i, ++row) {
        const auto [a, b] = weights(j);
        const double bm = weights((j + n - 1) % n)[1];
        if (a != 0.0) {
          trip.emplace_back(row, v1(i, j), a / (h * scale));
          trip.emplace_back(row, v1(i + n - 1, j), -a / (h * scale));
        }
        if (b != 0.0 || bm != 0.0) {
          trip.emplace_back(row, v2(i, j), b / (h * scale));
          trip.emplace_back(row, v2(i, j + n - 1), -bm / (h * scale));
        }
      }
  }

  // Rows at nodes (i + 1/2, j + 1/2): d2(a v1) - d1(b v2) with a on v1 faces, b on v2 faces.
  template <class W>
  void curl(W&& weights) {
    double scale = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto [a, b] = weights(j);
      scale = std::max({scale, std::abs(a), std::abs(b)});
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i, ++row) {
        const double a0 = weights(j)[0], a1 = weights((j + 1) % n)[0], b = weights(j)[1];
        trip.emplace_back(row, v1(i, j + 1), a1 / (h * scale));
        trip.emplace_back(row, v1(i, j), -a0 / (h * scale));
        trip.emplace_back(row, v2(i + 1, j), -b / (h * scale));
        trip.emplace_back(row, v2(i, j), b / (h * scale));
      }
  }

  [[nodiscard]] Eigen::SparseMatrix<double> matrix() const {
    Eigen::SparseMatrix<double> M(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(2 * n * n));
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
  }
};

}  // namespace detail

/// Assembles the discrete constraint system on an n x n periodic staggered grid.
///   f(r):     p d1 v1 + q d2 v2 = 0, dp d1 v1 + dq d2 v2 = 0, grad-perp . v = 0
///             (constant p, q and their t-derivatives on the cylinder r = r0)
///   f(theta): div(xi2 v) = 0, div(xi2^2 v-perp) = 0, grad-perp . v = 0, div(xi2^3 v) = 0
///             (the last is the second t-derivative; without it v = (0, C / xi2) survives)
///   perp:     grad-perp . v = 0 alone (kernel: gradients and the two constants)
/// Each block is scaled by its largest weight.
inline Eigen::SparseMatrix<double> compatibility_system(CompatibilityCase c, const CompatibilityOptions& opt) {
  detail::require(opt.n >= 4, "compatibility grid needs n >= 4");
  detail::require(opt.r0 > 0.0, "r0 must be positive");
  const double h = 2.0 * std::numbers::pi / static_cast<double>(opt.n);
  detail::MacAssembler m{opt.n, h, {}, 0};
  auto unit = [](std::size_t) { return std::array<double, 2>{1.0, 1.0}; };
  switch (c) {
    case CompatibilityCase::perp_only:
      m.curl(unit);
      break;
    case CompatibilityCase::f_r: {
      // f = r: chi = 1, nu = r, dr/dt = 1.  f = ln r: chi = r, nu = r, dr/dt = r.
      const double r = opt.r0;
      double p, q, dp, dq;
      if (opt.p_one) {
        p = 1.0, q = r * r, dp = 0.0, dq = 2.0 * r * r;
      } else {
        p = 1.0 / r, q = r, dp = -1.0 / (r * r), dq = 1.0;
      }
      m.divergence([&](std::size_t) { return std::array<double, 2>{p, q}; });
      m.divergence([&](std::size_t) { return std::array<double, 2>{dp, dq}; });
      m.curl(unit);
      break;
    }
    case CompatibilityCase::f_theta: {
      auto xi2 = [&](double j) { return opt.r0 + h * j; };
      auto pw = [&](int e) {
        return [&, e](std::size_t j) {
          const double jj = static_cast<double>(j);
          return std::array<double, 2>{std::pow(xi2(jj), e), std::pow(xi2(jj + 0.5), e)};
        };
      };
      m.divergence(pw(1));
      m.curl(pw(2));
      m.curl(unit);
      if (opt.second_t_derivative) m.divergence(pw(3));
      break;
    }
  }
  return m.matrix();
}

/// Numerical nullspace of the constraint system: singular values below C h^2.
/// The SVD runs on the triangular factor of a Householder QR (same singular values).
inline CompatibilityResult compatibility_rank(CompatibilityCase c, const CompatibilityOptions& opt = {},
                                              bool want_basis = false) {
  const Eigen::MatrixXd M = Eigen::MatrixXd(compatibility_system(c, opt));
  CompatibilityResult res;
  res.rows = static_cast<std::size_t>(M.rows());
  res.cols = static_cast<std::size_t>(M.cols());
  res.h = 2.0 * std::numbers::pi / static_cast<double>(opt.n);
  res.threshold = opt.C * res.h * res.h;
  Eigen::MatrixXd R;
  if (M.rows() > M.cols()) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    R = qr.matrixQR().topRows(M.cols()).triangularView<Eigen::Upper>();
  } else {
    R = M;
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(R, want_basis ? Eigen::ComputeFullV : 0);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD failed");
  const auto& s = svd.singularValues();
  res.sigma.assign(s.data(), s.data() + s.size());
  // Rank-deficient wide systems have extra zero singular values beyond min(rows, cols).
  const std::size_t missing = res.cols > res.sigma.size() ? res.cols - res.sigma.size() : 0;
  for (std::size_t k = 0; k < missing; ++k) res.sigma.push_back(0.0);
  std::sort(res.sigma.begin(), res.sigma.end());
  for (double x : res.sigma)
    if (!std::isfinite(x)) throw NumericalError("SVD produced non-finite singular values");
  res.nullity = static_cast<std::size_t>(
      std::count_if(res.sigma.begin(), res.sigma.end(), [&](double x) { return x < res.threshold; }));
  if (want_basis && res.nullity > 0) {
    const auto& V = svd.matrixV();
    res.null_basis = V.rightCols(static_cast<Eigen::Index>(std::min<std::size_t>(res.nullity, V.cols())));
  }
  return res;
}

/// CSV: index, sigma (ascending).
inline void write_spectrum_csv(std::ostream& os, const CompatibilityResult& r) {
  os << "index,sigma\n";
  for (std::size_t k = 0; k < r.sigma.size(); ++k) os << k << ',' << format_double(r.sigma[k]) << '\n';
}

// ---------------------------------------------------------------------------
// Symmetry defects.

enum class DefectKind { translation, rotation };

inline std::string_view to_string(DefectKind k) { return k == DefectKind::translation ? "translation" : "rotation"; }

inline DefectKind defect_from_string(std::string_view s) {
  if (s == "translation") return DefectKind::translation;
  if (s == "rotation") return DefectKind::rotation;
  throw PreconditionError("unknown defect kind '" + std::string(s) + "'");
}

struct SymmetryDefect {
  DefectKind kind = DefectKind::translation;
  double tau = 0.0;
  std::vector<Vec3> points, w;
  Norms norms;  // of |w|
};

/// w(x) = u(x) - u(x + tau e_z) or w(x) = R_tau^T u(R_tau x), R_tau = (e_r(tau), e_theta(tau), e_z),
/// at the grid nodes whose image stays inside the grid (trilinear values there).
inline SymmetryDefect symmetry_defect(const GridVectorField& u, DefectKind kind, double tau) {
  const Grid3& g = u.grid;
  SymmetryDefect d;
  d.kind = kind;
  d.tau = tau;
  const double c = std::cos(tau), s = std::sin(tau);
  std::vector<double> mag;
  for (std::size_t i = 0; i < g.shape[0]; ++i)
    for (std::size_t j = 0; j < g.shape[1]; ++j)
      for (std::size_t k = 0; k < g.shape[2]; ++k) {
        const Vec3 x{g.coord(0, i), g.coord(1, j), g.coord(2, k)};
        const Vec3 y = kind == DefectKind::translation ? Vec3{x[0], x[1], x[2] + tau}
                                                       : Vec3{c * x[0] - s * x[1], s * x[0] + c * x[1], x[2]};
        if (!inside(g, y)) continue;
        const std::size_t n = g.index(i, j, k);
        const Vec3 ux{u.c[0][n], u.c[1][n], u.c[2][n]};
        Vec3 uy{trilinear(g, u.c[0], y), trilinear(g, u.c[1], y), trilinear(g, u.c[2], y)};
        if (kind == DefectKind::rotation) uy = {c * uy[0] + s * uy[1], -s * uy[0] + c * uy[1], uy[2]};
        const Vec3 w{ux[0] - uy[0], ux[1] - uy[1], ux[2] - uy[2]};
        d.points.push_back(x);
        d.w.push_back(w);
        mag.push_back(norm(w));
      }
  if (d.points.empty())
    throw PreconditionError("tau moves every grid node outside the grid; no interior samples remain");
  d.norms = norms_of(mag);
  return d;
}

inline DiagnosticReport defect_report(const SymmetryDefect& d, double h) {
  DiagnosticReport r;
  r.add("defect", d.norms, h);
  r.metadata["kind"] = std::string(to_string(d.kind));
  r.metadata["tau"] = d.tau;
  r.metadata["samples"] = d.points.size();
  return r;
}

}  // namespace beltrami
