#pragma once

// End-to-end rigidity check on a vortex ring: solve the free-boundary problem,
// build the Beltrami pair, flow a chart through the level family of f, pull u
// back to (beta1, beta2) and measure constancy, energy and elliptic residuals.

#include <algorithm>
#include <cmath>
#include <optional>

#include "beltrami/levelset.hpp"
#include "beltrami/pullback.hpp"
#include "beltrami/rigidity.hpp"
#include "beltrami/vector_field.hpp"
#include "beltrami/vortex_solvers.hpp"

namespace beltrami {

struct RingPipelineOptions {
  double h = 0.04;               // meridional grid step, also the 3D resampling step
  double gamma = 0.5;
  double l = 2.0;
  double box = 4.0;              // meridional domain (0, box] x [-box, box]
  double level_fraction = 0.4;   // first level c = level_fraction * max f
  double sweep_fraction = 0.3;   // levels c .. c + sweep_fraction * max f
  std::size_t steps = 100;
  double chart_length = 6.4;     // n1 = round(chart_length / h)
  bool resample3d = true;        // pull back from a Cartesian resampling, not the exact symmetric field
};

struct RingPipelineResult {
  FreeBoundaryProblem problem;
  VortexResult vortex;
  VortexField field;
  SurfaceChart chart;
  PullbackForm form;                     // xi2 collapsed, from the symmetric field
  std::optional<PullbackForm> form3d;    // full xi2 sweep, from the Cartesian resampling
  DiagnosticReport report;
};

inline RingPipelineResult ring_pipeline(const RingPipelineOptions& opt = {}) {
  detail::require(opt.h > 0.0 && opt.box > 0.0, "grid step and box must be positive");
  detail::require(opt.level_fraction > 0.0 && opt.sweep_fraction > 0.0 && opt.level_fraction + opt.sweep_fraction < 1.0,
                  "level window must lie inside (0, max f)");
  RingPipelineResult out;
  auto& p = out.problem;
  p.kind = VortexKind::ring;
  p.gamma = opt.gamma;
  p.l = opt.l;
  const auto n = static_cast<std::size_t>(std::lround(opt.box / opt.h));
  p.grid = Grid2::meridional_half_plane(opt.box, -opt.box, opt.box, n, 2 * n + 1);
  p.seed = {false, {1, 0}, 1, 1};
  out.vortex = solve_free_boundary(p);
  if (out.vortex.trivial) throw NumericalError("free-boundary solve returned the trivial solution");
  out.field = field_from_vortex(out.vortex.psi, p);
  const auto& f = std::get<ScalarChartField>(out.field.pair.f);
  const double fmax = *std::max_element(f.values().begin(), f.values().end());

  const auto n1 = static_cast<std::size_t>(std::lround(opt.chart_length / opt.h));
  const auto curves = extract_level_curve(f, opt.level_fraction * fmax, {.samples = n1});
  if (curves.size() != 1) throw NumericalError("expected one level curve around the core");
  out.chart = chart_coefficients(evolve_chart(curves[0], LevelFunction::from_field(f), opt.sweep_fraction * fmax, opt.steps));
  const auto& ch = out.chart;

  out.form = pullback_form(out.field.pair.u, ch);
  auto& rep = out.report;
  const auto collapsed = constancy_diagnostic(out.form);
  rep.add("beta2_range_collapsed", Norms{collapsed.at("beta2_range").norm_inf, collapsed.at("beta2_range").norm_l2}, opt.h);
  const auto ell = elliptic_residuals(out.form, ch, ch.nt() / 2);
  for (const char* name : {"div_Bv", "constraint", "div_BgradV2"})
    rep.add(name, Norms{ell.at(name).norm_inf, ell.at(name).norm_l2}, opt.h);

  const auto rt = round_trip_error(out.field.pair.u, out.form, ch).at("round_trip");
  rep.add("round_trip", Norms{rt.norm_inf, rt.norm_l2}, opt.h);

  auto energy = [&](const PullbackForm& form) {
    double e = 0.0;
    for (std::size_t k = 0; k < form.nt(); ++k) e = std::max(e, dirichlet_energy(form, ch, k));
    return e;
  };
  rep.add("dirichlet_energy_collapsed", Norms{energy(out.form), energy(out.form)}, opt.h);

  if (opt.resample3d) {
    double R = 0.0, Z = 0.0;
    for (const auto& q : ch.phi) {
      R = std::max(R, q[0]);
      Z = std::max(Z, std::abs(q[1]));
    }
    R += 3 * opt.h;
    Z += 3 * opt.h;
    const auto m = static_cast<std::size_t>(std::lround(2 * R / opt.h)) + 1;
    const auto mz = static_cast<std::size_t>(std::lround(2 * Z / opt.h)) + 1;
    const auto g3 = Grid3::spanning({-R, -R, -Z}, {R, R, Z}, {m, m, mz});
    out.form3d = pullback_form(SymmetricVectorField{resample(out.field.pair.u, g3)}, ch, {.n2 = n1});
    const auto d = constancy_diagnostic(*out.form3d);
    for (const char* name : {"beta2_range", "beta1_xi2_range"})
      rep.add(name, Norms{d.at(name).norm_inf, d.at(name).norm_l2}, opt.h);
    const double e3 = energy(*out.form3d);
    rep.add("dirichlet_energy", Norms{e3, e3}, opt.h);
  }
  rep.metadata["fmax"] = fmax;
  rep.metadata["level"] = ch.level;
  rep.metadata["n1"] = n1;
  rep.metadata["level_defect"] = *std::max_element(ch.level_defect.begin(), ch.level_defect.end());
  rep.metadata["tangency"] = out.form.tangency;
  if (out.form3d) rep.metadata["tangency3d"] = out.form3d->tangency;
  return out;
}

}  // namespace beltrami
