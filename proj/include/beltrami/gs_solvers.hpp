#pragma once

// Semilinear elliptic solvers for the two symmetric reductions
//   -Lap Psi = g(Psi)                 (laplacian-xy)
//   -(Lap_zr - r^-1 dr) Psi = g(Psi)  (grad-shafranov-rz)
// on rectangles with Dirichlet data on the grid frame, by damped Picard
// iteration with a preconditioned CG inner solve.
//
// The Grad-Shafranov operator is discretised in conservation form,
//   -(Lap_zr - r^-1 dr) Psi = r [ -dr (r^-1 dr Psi) - r^-1 dz^2 Psi ],
// with r^-1 taken at the face midpoints. This is second order, annihilates r^2
// and z exactly, and after division by r gives a symmetric positive-definite
// matrix.

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "beltrami/errors.hpp"
#include "beltrami/grid.hpp"
#include "beltrami/profile.hpp"
#include "beltrami/report.hpp"

namespace beltrami {

enum class OperatorKind { laplacian_xy, grad_shafranov_rz };

inline std::string_view to_string(OperatorKind k) {
  return k == OperatorKind::laplacian_xy ? "laplacian-xy" : "grad-shafranov-rz";
}

inline OperatorKind operator_from_string(std::string_view s) {
  if (s == "laplacian-xy") return OperatorKind::laplacian_xy;
  if (s == "grad-shafranov-rz") return OperatorKind::grad_shafranov_rz;
  throw PreconditionError("unknown operator '" + std::string(s) + "'");
}

struct SolverOptions {
  std::size_t max_iter = 500;
  double tol = 1e-10;    // nonlinear residual, max norm over interior nodes
  double omega = 0.8;    // Picard relaxation
  std::size_t stagnation_window = 50;

  void validate() const {
    detail::require(tol > 0.0, "solver tol must be positive");
    detail::require(omega > 0.0 && omega <= 1.0, "relaxation must lie in (0, 1]");
    detail::require(max_iter >= 1, "iteration limit must be positive");
  }
};

using Nonlinearity = std::function<double(double)>;

struct SemilinearProblem {
  OperatorKind op = OperatorKind::laplacian_xy;
  Nonlinearity g;              // g(s), e.g. u3'(s) u3(s) or Gamma'(s) Gamma(s)
  ScalarChartField dirichlet;  // grid of the rectangle; frame values are the data
  SolverOptions solver;

  static Nonlinearity from_profile(const RadialProfile& p) {
    return [p](double s) { return p.gs_nonlinearity(s); };
  }

  void validate() const {
    detail::require(static_cast<bool>(g), "problem needs a nonlinearity");
    const Grid2& gr = dirichlet.grid();
    detail::require(gr.shape[0] >= 3 && gr.shape[1] >= 3, "grid too small: need at least 3x3 nodes");
    if (op == OperatorKind::grad_shafranov_rz)
      detail::require(gr.chart == Chart::meridional_rz, "grad-shafranov-rz needs a meridional chart");
    else
      detail::require(gr.chart == Chart::cartesian_xy, "laplacian-xy needs a cartesian-xy chart");
    solver.validate();
  }
};

namespace detail {

inline bool on_frame(const Grid2& g, std::size_t i, std::size_t j) {
  return i == 0 || j == 0 || i + 1 == g.shape[0] || j + 1 == g.shape[1];
}

// Stencil weights at interior node (i, j) for the symmetrised operator
// A = w(i) * (-L): A Psi = c Psi_ij - sum_k a_k Psi_k, and w(i) itself.
struct Stencil {
  double west, east, south, north, centre, weight;
};

inline Stencil stencil(OperatorKind op, const Grid2& g, std::size_t i) {
  const double hr = g.spacing[0], hz = g.spacing[1];
  if (op == OperatorKind::laplacian_xy) {
    const double a = 1.0 / (hr * hr), b = 1.0 / (hz * hz);
    return {a, a, b, b, 2 * a + 2 * b, 1.0};
  }
  const double r = g.coord(0, i);
  const double rm = r - 0.5 * hr, rp = r + 0.5 * hr;
  const double w = 1.0 / (hr * hr * rm), e = 1.0 / (hr * hr * rp), b = 1.0 / (hz * hz * r);
  return {w, e, b, b, w + e + 2 * b, 1.0 / r};
}

}  // namespace detail

/// Discrete -L Psi at interior nodes; boundary nodes are zero.
inline ScalarChartField operator_apply(OperatorKind op, const ScalarChartField& psi) {
  const Grid2& g = psi.grid();
  detail::require(g.shape[0] >= 3 && g.shape[1] >= 3, "grid too small: need at least 3x3 nodes");
  if (op == OperatorKind::grad_shafranov_rz)
    detail::require(g.chart == Chart::meridional_rz, "grad-shafranov-rz needs a meridional chart");
  const auto v = psi.values();
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t i = 1; i + 1 < g.shape[0]; ++i) {
    const auto s = detail::stencil(op, g, i);
    for (std::size_t j = 1; j + 1 < g.shape[1]; ++j) {
      const std::size_t n = g.index(i, j);
      const double a = s.centre * v[n] - s.west * v[g.index(i - 1, j)] - s.east * v[g.index(i + 1, j)] -
                       s.south * v[g.index(i, j - 1)] - s.north * v[g.index(i, j + 1)];
      out[n] = a / s.weight;
    }
  }
  return {g, std::move(out), "minus_L_" + psi.name()};
}

/// The Dirichlet problem -L Psi = rhs with Psi fixed on the frame, assembled once
/// for a grid and operator; the sparse Cholesky factor is reused across solves.
class LinearSystem {
 public:
  using Matrix = Eigen::SparseMatrix<double>;
  using Solver = Eigen::SimplicialLDLT<Matrix>;

  LinearSystem(OperatorKind op, const Grid2& g) : op_(op), grid_(g) {
    detail::require(g.shape[0] >= 3 && g.shape[1] >= 3, "grid too small: need at least 3x3 nodes");
    const std::size_t ni = g.shape[0] - 2, nj = g.shape[1] - 2;
    unknowns_ = ni * nj;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(5 * unknowns_);
    for (std::size_t i = 1; i + 1 < g.shape[0]; ++i) {
      const auto s = detail::stencil(op, g, i);
      for (std::size_t j = 1; j + 1 < g.shape[1]; ++j) {
        const auto row = static_cast<Eigen::Index>(unknown(i, j));
        t.emplace_back(row, row, s.centre);
        if (i > 1) t.emplace_back(row, static_cast<Eigen::Index>(unknown(i - 1, j)), -s.west);
        if (i + 2 < g.shape[0]) t.emplace_back(row, static_cast<Eigen::Index>(unknown(i + 1, j)), -s.east);
        if (j > 1) t.emplace_back(row, static_cast<Eigen::Index>(unknown(i, j - 1)), -s.south);
        if (j + 2 < g.shape[1]) t.emplace_back(row, static_cast<Eigen::Index>(unknown(i, j + 1)), -s.north);
      }
    }
    matrix_.resize(static_cast<Eigen::Index>(unknowns_), static_cast<Eigen::Index>(unknowns_));
    matrix_.setFromTriplets(t.begin(), t.end());
    solver_ = std::make_unique<Solver>();
    solver_->compute(matrix_);
    if (solver_->info() != Eigen::Success) throw NumericalError("sparse factorisation failed");
  }

  [[nodiscard]] const Matrix& matrix() const { return matrix_; }
  [[nodiscard]] const Grid2& grid() const { return grid_; }
  [[nodiscard]] std::size_t unknown(std::size_t i, std::size_t j) const { return (i - 1) * (grid_.shape[1] - 2) + (j - 1); }

  /// Symmetrised right-hand side: w * rhs plus the frame couplings of `frame`.
  [[nodiscard]] Eigen::VectorXd assemble_rhs(std::span<const double> rhs, std::span<const double> frame) const {
    const Grid2& g = grid_;
    Eigen::VectorXd b(static_cast<Eigen::Index>(unknowns_));
    for (std::size_t i = 1; i + 1 < g.shape[0]; ++i) {
      const auto s = detail::stencil(op_, g, i);
      for (std::size_t j = 1; j + 1 < g.shape[1]; ++j) {
        double v = s.weight * rhs[g.index(i, j)];
        if (i == 1) v += s.west * frame[g.index(0, j)];
        if (i + 2 == g.shape[0]) v += s.east * frame[g.index(i + 1, j)];
        if (j == 1) v += s.south * frame[g.index(i, 0)];
        if (j + 2 == g.shape[1]) v += s.north * frame[g.index(i, j + 1)];
        b[static_cast<Eigen::Index>(unknown(i, j))] = v;
      }
    }
    return b;
  }

  /// Solves -L Psi = rhs with frame values taken from `frame`. Returns the full nodal field.
  std::vector<double> solve(std::span<const double> rhs, std::span<const double> frame) const {
    const Grid2& g = grid_;
    const Eigen::VectorXd x = solver_->solve(assemble_rhs(rhs, frame));
    if (solver_->info() != Eigen::Success || !x.allFinite()) throw NumericalError("sparse triangular solve failed");
    std::vector<double> out(frame.begin(), frame.end());
    for (std::size_t i = 1; i + 1 < g.shape[0]; ++i)
      for (std::size_t j = 1; j + 1 < g.shape[1]; ++j) out[g.index(i, j)] = x[static_cast<Eigen::Index>(unknown(i, j))];
    return out;
  }

 private:
  OperatorKind op_;
  Grid2 grid_;
  std::size_t unknowns_ = 0;
  Matrix matrix_;
  std::unique_ptr<Solver> solver_;
};

/// Max and RMS over interior nodes of -L Psi - g(Psi).
inline Norms nonlinear_residual(OperatorKind op, const ScalarChartField& psi, const Nonlinearity& g) {
  const auto lp = operator_apply(op, psi);
  const Grid2& gr = psi.grid();
  std::vector<double> r;
  r.reserve(gr.size());
  for (std::size_t i = 1; i + 1 < gr.shape[0]; ++i)
    for (std::size_t j = 1; j + 1 < gr.shape[1]; ++j) {
      const std::size_t n = gr.index(i, j);
      r.push_back(lp.values()[n] - g(psi.values()[n]));
    }
  return norms_of(r);
}

struct SolveResult {
  ScalarChartField psi;
  DiagnosticReport report;
  std::vector<double> history;  // nonlinear residual (max norm) per iteration, starting at iteration 0
  bool converged = false;
  std::size_t iterations = 0;
};

/// Thrown when the nonlinear residual makes no new minimum for
/// `stagnation_window` iterations; carries the full history.
class StagnationError : public NumericalError {
 public:
  StagnationError(const std::string& what, DiagnosticReport report)
      : NumericalError(what), report_(std::move(report)) {}
  [[nodiscard]] const DiagnosticReport& report() const { return report_; }

 private:
  DiagnosticReport report_;
};

namespace detail {

inline void check_frame(const ScalarChartField& init, const ScalarChartField& data) {
  const Grid2& g = data.grid();
  require(init.grid() == g, "init must share the problem grid");
  double scale = 0.0;
  for (double v : data.values()) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < g.shape[0]; ++i)
    for (std::size_t j = 0; j < g.shape[1]; ++j)
      if (on_frame(g, i, j) && std::abs(init(i, j) - data(i, j)) > 1e-12 * (1.0 + scale))
        throw PreconditionError("init does not satisfy the Dirichlet data");
}

inline DiagnosticReport solve_report(const SemilinearProblem& p, const ScalarChartField& psi,
                                     const std::vector<double>& history, bool converged, std::size_t iters) {
  DiagnosticReport rep;
  rep.add("nonlinear_residual", nonlinear_residual(p.op, psi, p.g), psi.grid().max_spacing());
  rep.metadata["operator"] = std::string(to_string(p.op));
  rep.metadata["converged"] = converged;
  rep.metadata["iterations"] = iters;
  rep.metadata["residual_history"] = history;
  rep.metadata["tol"] = p.solver.tol;
  rep.metadata["omega"] = p.solver.omega;
  rep.metadata["shape"] = {psi.grid().shape[0], psi.grid().shape[1]};
  return rep;
}

}  // namespace detail

/// Damped Picard: solve -L Phi = g(Psi_k), set Psi_{k+1} = omega Phi + (1 - omega) Psi_k.
/// Stops when the nonlinear residual max norm drops below tol (converged) or
/// max_iter is reached (not converged); throws StagnationError on stagnation.
inline SolveResult solve_semilinear(const SemilinearProblem& p, const ScalarChartField& init,
                                    const LinearSystem* system = nullptr) {
  p.validate();
  detail::check_frame(init, p.dirichlet);
  const Grid2& g = p.dirichlet.grid();
  std::unique_ptr<LinearSystem> own;
  if (!system) {
    own = std::make_unique<LinearSystem>(p.op, g);
    system = own.get();
  }
  std::vector<double> psi(init.values().begin(), init.values().end());
  std::vector<double> rhs(g.size()), history;
  const auto frame = p.dirichlet.values();
  const auto& opt = p.solver;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_at = 0, k = 0;
  bool converged = false;
  for (;; ++k) {
    const ScalarChartField cur(g, psi, "psi");
    const double res = nonlinear_residual(p.op, cur, p.g).inf;
    if (!std::isfinite(res)) throw NumericalError("nonlinear residual is not finite at iteration " + std::to_string(k));
    history.push_back(res);
    if (res < opt.tol) {
      converged = true;
      break;
    }
    if (k >= opt.max_iter) break;
    if (res < best) {
      best = res;
      best_at = k;
    } else if (k - best_at >= opt.stagnation_window) {
      char msg[96];
      std::snprintf(msg, sizeof msg, "nonlinear iteration stagnated at residual %.3e", best);
      throw StagnationError(msg,
                            detail::solve_report(p, cur, history, false, k));
    }
    for (std::size_t n = 0; n < g.size(); ++n) rhs[n] = p.g(psi[n]);
    const auto phi = system->solve(rhs, frame);
    for (std::size_t n = 0; n < g.size(); ++n) psi[n] = opt.omega * phi[n] + (1.0 - opt.omega) * psi[n];
  }
  ScalarChartField out(g, std::move(psi), "psi");
  auto rep = detail::solve_report(p, out, history, converged, k);
  return {std::move(out), std::move(rep), std::move(history), converged, k};
}

}  // namespace beltrami
