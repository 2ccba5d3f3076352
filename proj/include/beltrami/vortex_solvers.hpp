#pragma once

// Free-boundary vortex problems on a truncated half-plane:
//   ring: -(Lap_zr - r^-1 dr) Psi = g(Psi), Psi -> -gamma - W r^2 / 2
//   pair: -Lap Psi = g(Psi),                Psi -> -gamma - W x2
// with g = Gamma' Gamma for Gamma(s) = kappa s_+^l. We write Psi = background + psi
// and solve for psi with psi = 0 on the grid frame.
//
// The nontrivial branch is a saddle of the Picard map, so plain Picard drifts to
// the trivial solution or blows up. Instead psi is iterated at fixed amplitude M,
//   phi = (-L)^-1 g(background + psi_k),  psi_{k+1} = (1 - w) psi_k + w M phi / max(phi),
// and M is chosen by a bracketing root find so that max(phi) = M, at which point
// psi = phi solves the original equation.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/toms748_solve.hpp>

#include "beltrami/generators.hpp"
#include "beltrami/gs_solvers.hpp"

namespace beltrami {

enum class VortexKind { pair, ring };

inline std::string_view to_string(VortexKind k) { return k == VortexKind::pair ? "vortex-pair" : "vortex-ring"; }

inline VortexKind vortex_from_string(std::string_view s) {
  if (s == "vortex-pair") return VortexKind::pair;
  if (s == "vortex-ring") return VortexKind::ring;
  throw PreconditionError("unknown vortex kind '" + std::string(s) + "'");
}

struct CoreSeed {
  bool trivial = true;
  std::array<double, 2> center{0.0, 0.0};
  double radius = 1.0;
  double amplitude = 1.0;
};

struct FreeBoundaryProblem {
  VortexKind kind = VortexKind::ring;
  double W = 1.0;
  double gamma = 0.0;
  double l = 2.0;
  double kappa = 1.0;  // Gamma(s) = kappa s_+^l
  Grid2 grid;          // ring: meridional, axis half a cell below row 0; pair: x2 >= 0 with x2 = 0 on row j = 0
  SolverOptions solver{.max_iter = 2000, .tol = 1e-8};
  CoreSeed seed;
  double amplitude_rtol = 1e-12;  // fixed-amplitude iteration: sup-norm change relative to M

  [[nodiscard]] RadialProfile profile() const { return RadialProfile::power(kappa, l); }

  [[nodiscard]] double background(double a, double b) const {
    return kind == VortexKind::ring ? -gamma - 0.5 * W * a * a : -gamma - W * b;
  }

  [[nodiscard]] OperatorKind op() const {
    return kind == VortexKind::ring ? OperatorKind::grad_shafranov_rz : OperatorKind::laplacian_xy;
  }

  void validate() const {
    detail::require(W > 0.0, "W must be positive");
    detail::require(gamma >= 0.0, "gamma must be non-negative");
    detail::require(l >= 1.0, "exponent l must be >= 1 (l = 1 is the validation case)");
    detail::require(kappa > 0.0, "kappa must be positive");
    if (kind == VortexKind::ring) {
      detail::require(grid.chart == Chart::meridional_rz, "vortex-ring needs a meridional grid");
      detail::require(grid.origin[0] > 0.0, "vortex-ring grid must exclude the axis");
    } else {
      detail::require(grid.chart == Chart::cartesian_xy, "vortex-pair needs a cartesian-xy grid");
      detail::require(std::abs(grid.origin[1]) <= 1e-14, "vortex-pair grid must start on the wall x2 = 0");
    }
    detail::require(grid.shape[0] >= 5 && grid.shape[1] >= 5, "grid too small");
    solver.validate();
    if (!seed.trivial) detail::require(seed.radius > 0.0 && seed.amplitude > 0.0, "core seed needs positive radius and amplitude");
  }
};

struct VortexResult {
  ScalarChartField psi;
  ScalarChartField core_mask;
  DiagnosticReport report;
  bool trivial = true;
  bool converged = false;
  double amplitude = 0.0;  // max of the perturbation psi
};

namespace detail {

inline std::vector<double> background_field(const FreeBoundaryProblem& p) {
  const Grid2& g = p.grid;
  std::vector<double> bg(g.size());
  for (std::size_t i = 0; i < g.shape[0]; ++i)
    for (std::size_t j = 0; j < g.shape[1]; ++j) bg[g.index(i, j)] = p.background(g.coord(0, i), g.coord(1, j));
  return bg;
}

// Area of {s > 0} for s linear on a triangle with vertex values a, b, c and area t.
inline double positive_area(double a, double b, double c, double t) {
  const int n = (a > 0.0) + (b > 0.0) + (c > 0.0);
  if (n == 0) return 0.0;
  if (n == 3) return t;
  // Sort so that the odd vertex (sign differing from the other two) is a.
  if ((b > 0.0) != (a > 0.0) && (b > 0.0) != (c > 0.0)) std::swap(a, b);
  else if ((c > 0.0) != (a > 0.0) && (c > 0.0) != (b > 0.0)) std::swap(a, c);
  const double corner = t * (a / (a - b)) * (a / (a - c));
  return a > 0.0 ? corner : t - corner;
}

// Area of {psi > 0} for the piecewise-linear interpolant on the split-cell triangulation.
inline double core_area(const Grid2& g, std::span<const double> psi) {
  const double t = 0.5 * g.spacing[0] * g.spacing[1];
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < g.shape[0]; ++i)
    for (std::size_t j = 0; j + 1 < g.shape[1]; ++j) {
      const double p00 = psi[g.index(i, j)], p10 = psi[g.index(i + 1, j)], p01 = psi[g.index(i, j + 1)],
                   p11 = psi[g.index(i + 1, j + 1)];
      area += positive_area(p00, p10, p11, t) + positive_area(p00, p11, p01, t);
    }
  return area;
}

inline std::size_t count_components(const Grid2& g, const std::vector<char>& mask) {
  std::vector<char> seen(mask.size(), 0);
  std::size_t count = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < mask.size(); ++s) {
    if (!mask[s] || seen[s]) continue;
    ++count;
    stack.push_back(s);
    seen[s] = 1;
    while (!stack.empty()) {
      const std::size_t n = stack.back();
      stack.pop_back();
      const std::size_t i = n / g.shape[1], j = n % g.shape[1];
      auto visit = [&](std::size_t a, std::size_t b) {
        const std::size_t m = g.index(a, b);
        if (mask[m] && !seen[m]) {
          seen[m] = 1;
          stack.push_back(m);
        }
      };
      if (i > 0) visit(i - 1, j);
      if (i + 1 < g.shape[0]) visit(i + 1, j);
      if (j > 0) visit(i, j - 1);
      if (j + 1 < g.shape[1]) visit(i, j + 1);
    }
  }
  return count;
}

// Fixed-amplitude iteration state, shared across root-finder evaluations so each
// evaluation warm-starts from the closest amplitude seen so far.
struct AmplitudeIteration {
  static constexpr std::size_t kAndersonDepth = 5;
  static constexpr double kAndersonStart = 1e-3;
  const FreeBoundaryProblem& p;
  const LinearSystem& sys;
  std::vector<double> bg;
  std::vector<double> zero;
  std::vector<std::pair<double, std::vector<double>>> cache;  // (M, psi)
  std::size_t solves = 0;
  std::vector<double> last_psi;
  double last_max_phi = 0.0;

  AmplitudeIteration(const FreeBoundaryProblem& prob, const LinearSystem& s, std::vector<double> seed_psi)
      : p(prob), sys(s), bg(background_field(prob)), zero(prob.grid.size(), 0.0) {
    double m = 0.0;
    for (double v : seed_psi) m = std::max(m, v);
    cache.emplace_back(m, std::move(seed_psi));
  }

  // Returns max(phi) / M - 1 at the fixed point for amplitude M.
  double operator()(double M) {
    const Grid2& g = p.grid;
    const auto near = std::min_element(cache.begin(), cache.end(), [&](const auto& a, const auto& b) {
      return std::abs(std::log(a.first / M)) < std::abs(std::log(b.first / M));
    });
    const std::size_t N = g.size();
    Eigen::VectorXd psi = Eigen::Map<const Eigen::VectorXd>(near->second.data(), static_cast<Eigen::Index>(N)) * (M / near->first);
    std::vector<double> rhs(N);
    const auto prof = p.profile();
    const double w = p.solver.omega;
    double max_phi = 0.0;
    // Anderson mixing on the fixed-amplitude map: plain damping stalls on a slowly
    // contracting shape mode at fine grids.
    std::deque<Eigen::VectorXd> dx, df;
    Eigen::VectorXd prev_x, prev_f;
    for (std::size_t k = 0;; ++k) {
      for (std::size_t n = 0; n < N; ++n) rhs[n] = prof.gs_nonlinearity(bg[n] + psi[static_cast<Eigen::Index>(n)]);
      const auto phi = sys.solve(rhs, zero);
      ++solves;
      max_phi = *std::max_element(phi.begin(), phi.end());
      if (!(max_phi > 0.0)) {
        last_psi.assign(N, 0.0);
        last_max_phi = 0.0;
        return -1.0;  // the core vanished
      }
      const Eigen::VectorXd next = Eigen::Map<const Eigen::VectorXd>(phi.data(), static_cast<Eigen::Index>(N)) * (M / max_phi);
      const Eigen::VectorXd f = next - psi;
      if (f.lpNorm<Eigen::Infinity>() <= p.amplitude_rtol * M) {
        psi = next;
        break;
      }
      if (k + 1 >= p.solver.max_iter)
        throw NumericalError("fixed-amplitude iteration did not settle at M = " + std::to_string(M));
      // Mixing starts only once the damped iteration is near its fixed point: the map has
      // several fixed points at large M and early mixing can hop between them.
      const bool mixing = f.lpNorm<Eigen::Infinity>() < kAndersonStart * M;
      if (!mixing) {
        dx.clear();
        df.clear();
      } else if (k > 0 && prev_f.size() > 0) {
        dx.push_back(psi - prev_x);
        df.push_back(f - prev_f);
        if (dx.size() > kAndersonDepth) {
          dx.pop_front();
          df.pop_front();
        }
      }
      prev_x = psi;
      prev_f = f;
      if (!mixing || df.empty()) {
        psi += w * f;
        continue;
      }
      Eigen::MatrixXd F(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(df.size())), X(F.rows(), F.cols());
      for (std::size_t c = 0; c < df.size(); ++c) {
        F.col(static_cast<Eigen::Index>(c)) = df[c];
        X.col(static_cast<Eigen::Index>(c)) = dx[c];
      }
      const Eigen::VectorXd gam = F.colPivHouseholderQr().solve(f);
      psi += w * f - (X + w * F) * gam;
    }
    std::vector<double> out(psi.data(), psi.data() + N);
    last_psi = out;
    last_max_phi = max_phi;
    cache.emplace_back(M, std::move(out));
    return max_phi / M - 1.0;
  }
};
}  // namespace detail

/// Solves the free-boundary problem. The trivial seed runs plain damped Picard
/// from the background (an exact fixed point); a core seed runs the
/// fixed-amplitude scheme above.
inline VortexResult solve_free_boundary(const FreeBoundaryProblem& p) {
  p.validate();
  const Grid2& g = p.grid;
  const auto bg = detail::background_field(p);
  const auto prof = p.profile();
  const Nonlinearity gfun = [prof](double s) { return prof.gs_nonlinearity(s); };
  const LinearSystem sys(p.op(), g);

  std::vector<double> psi_total;
  DiagnosticReport rep;
  std::vector<double> history;
  bool converged = false;
  double amplitude = 0.0;
  if (p.seed.trivial) {
    SemilinearProblem sp{p.op(), gfun, ScalarChartField(g, bg, "background"), p.solver};
    const auto res = solve_semilinear(sp, sp.dirichlet, &sys);
    psi_total.assign(res.psi.values().begin(), res.psi.values().end());
    history = res.history;
    converged = res.converged;
    rep.metadata["iterations"] = res.iterations;
  } else {
    std::vector<double> seed(g.size(), 0.0);
    for (std::size_t i = 1; i + 1 < g.shape[0]; ++i)
      for (std::size_t j = 1; j + 1 < g.shape[1]; ++j) {
        const double da = g.coord(0, i) - p.seed.center[0], db = g.coord(1, j) - p.seed.center[1];
        seed[g.index(i, j)] = p.seed.amplitude * std::exp(-(da * da + db * db) / (p.seed.radius * p.seed.radius));
      }
    detail::AmplitudeIteration it(p, sys, seed);
    std::vector<std::pair<double, double>> mu_history;
    auto F = [&](double M) {
      const double v = it(M);
      mu_history.emplace_back(M, v);
      return v;
    };
    // Bracket the root of max(phi) / M - 1 by geometric stepping from the seed amplitude.
    double lo = p.seed.amplitude, flo = F(lo);
    double hi = lo, fhi = flo;
    const double step = 1.5;
    for (int k = 0; k < 60 && (flo > 0.0) == (fhi > 0.0); ++k) {
      if (fhi < 0.0) {
        lo = hi;
        flo = fhi;
        hi *= step;
        fhi = F(hi);
      } else {
        hi = lo;
        fhi = flo;
        lo /= step;
        flo = F(lo);
      }
    }
    if ((flo > 0.0) == (fhi > 0.0)) throw NumericalError("could not bracket the vortex amplitude");
    if (lo > hi) {
      std::swap(lo, hi);
      std::swap(flo, fhi);
    }
    std::uintmax_t max_it = 100;
    const double root_tol = 10.0 * p.amplitude_rtol;
    const auto bracket = boost::math::tools::toms748_solve(
        F, lo, hi, flo, fhi, [&](double a, double b) { return std::abs(b - a) <= root_tol * std::max(a, b); }, max_it);
    amplitude = 0.5 * (bracket.first + bracket.second);
    const double final_mu = F(amplitude);
    psi_total.resize(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) psi_total[n] = bg[n] + it.last_psi[n];
    rep.metadata["root_evaluations"] = mu_history.size();
    rep.metadata["linear_solves"] = it.solves;
    rep.metadata["amplitude_mismatch"] = final_mu;
    std::vector<double> ms, fs;
    for (const auto& [m, f] : mu_history) {
      ms.push_back(m);
      fs.push_back(f);
    }
    rep.metadata["amplitude_history"] = ms;
    rep.metadata["mismatch_history"] = fs;
  }

  ScalarChartField psi(g, psi_total, "psi");
  const auto res = nonlinear_residual(p.op(), psi, gfun);
  if (!p.seed.trivial) converged = res.inf < p.solver.tol;
  rep.add("nonlinear_residual", res, g.max_spacing());
  rep.metadata["residual_history"] = history;

  // Core mask, connectivity, truncation check.
  std::vector<char> mask(g.size(), 0);
  std::vector<double> maskv(g.size(), 0.0);
  double peak = 0.0;
  bool touches = false;
  for (std::size_t i = 0; i < g.shape[0]; ++i)
    for (std::size_t j = 0; j < g.shape[1]; ++j) {
      const std::size_t n = g.index(i, j);
      peak = std::max(peak, psi_total[n] - bg[n]);
      if (psi_total[n] <= 0.0) continue;
      mask[n] = 1;
      maskv[n] = 1.0;
      // The symmetry edge (axis row i = 0 for the ring, wall column j = 0 for the pair) may carry core.
      const bool outer = p.kind == VortexKind::ring ? (i + 2 >= g.shape[0] || j <= 1 || j + 2 >= g.shape[1])
                                                    : (i <= 1 || i + 2 >= g.shape[0] || j + 2 >= g.shape[1]);
      if (outer) touches = true;
    }
  if (!p.seed.trivial) amplitude = peak;
  const std::size_t components = detail::count_components(g, mask);
  const double area = detail::core_area(g, psi_total);
  rep.metadata["kind"] = std::string(to_string(p.kind));
  rep.metadata["W"] = p.W;
  rep.metadata["gamma"] = p.gamma;
  rep.metadata["l"] = p.l;
  rep.metadata["kappa"] = p.kappa;
  rep.metadata["core_area"] = area;
  rep.metadata["core_components"] = components;
  rep.metadata["amplitude"] = amplitude;
  rep.metadata["converged"] = converged;
  rep.metadata["tol"] = p.solver.tol;
  rep.metadata["omega"] = p.solver.omega;
  rep.metadata["shape"] = {g.shape[0], g.shape[1]};

  // Far field: r^-1 dr Psi + W on the outer r edge (ring), d2 Psi + W on the top edge (pair).
  {
    const auto d = diff(g, psi.values(), p.kind == VortexKind::ring ? 0 : 1);
    std::vector<double> ff;
    if (p.kind == VortexKind::ring) {
      const std::size_t i = g.shape[0] - 1;
      for (std::size_t j = 1; j + 1 < g.shape[1]; ++j) ff.push_back(d[g.index(i, j)] / g.coord(0, i) + p.W);
    } else {
      const std::size_t j = g.shape[1] - 1;
      for (std::size_t i = 1; i + 1 < g.shape[0]; ++i) ff.push_back(d[g.index(i, j)] + p.W);
    }
    rep.add("far_field", ff, g.max_spacing());
  }
  if (touches) throw NumericalError("vortex core touches the outer boundary; enlarge the truncated domain");
  return {std::move(psi), ScalarChartField(g, std::move(maskv), "core_mask"), std::move(rep), area == 0.0, converged,
          amplitude};
}

/// u and f = Gamma'(Psi) from a vortex solution. A trivial Psi gives the swirl-free
/// background field and f = 0, flagged in `trivial`.
struct VortexField {
  BeltramiPair pair;
  bool trivial = false;
};

inline VortexField field_from_vortex(const ScalarChartField& psi, const FreeBoundaryProblem& p) {
  const auto prof = p.profile();
  bool trivial = true;
  for (double v : psi.values())
    if (v > 0.0) trivial = false;
  if (p.kind == VortexKind::ring) return {reconstruct_rotational(psi, prof), trivial};
  return {reconstruct_translational(psi, prof), trivial};
}

}  // namespace beltrami
