#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "beltrami/generators.hpp"
#include "beltrami/pullback.hpp"
#include "beltrami/vortex_solvers.hpp"
#include "chart_fixtures.hpp"
#include "test_util.hpp"

using namespace beltrami;
using namespace fixtures;
using std::numbers::pi;

namespace {

double max_abs(std::span<const double> v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST(PullbackForm, SwirlOnTorusGivesCirculationFunction) {
  const auto ch = torus_chart(128, 20);
  const SymmetricVectorField u = torus_swirl(0.02);
  const auto f = pullback_form(u, ch);
  EXPECT_TRUE(f.collapsed);
  EXPECT_EQ(f.n2(), 1u);
  EXPECT_LT(f.tangency, 1e-6);
  const double h = f.h1();
  for (std::size_t k = 0; k < f.nt(); ++k) {
    const double rho2 = 0.25 + f.t[k];
    for (std::size_t i = 0; i < f.n1(); ++i) {
      const double r = 2 + std::sqrt(rho2) * std::cos(f.xi1[i]);
      // beta2 = Gamma(Psi) on the level; beta1 = -2 rho^2 / r times the centred-difference factor.
      EXPECT_NEAR(f.beta2[f.idx(k, 0, i)], 1 - rho2, 1e-6);
      EXPECT_NEAR(f.beta1[f.idx(k, 0, i)], -2 * rho2 / r * std::sin(h) / h, 1e-5);
    }
  }
}

TEST(PullbackForm, ZeroFieldGivesZeroForm) {
  const auto ch = torus_chart(32, 4);
  RotationalField z = torus_swirl(0.1);
  for (auto& c : z.c) c = ScalarChartField(c.grid(), std::vector<double>(c.grid().size(), 0.0), c.name());
  const auto f = pullback_form(SymmetricVectorField{z}, ch);
  EXPECT_EQ(max_abs(f.beta1), 0.0);
  EXPECT_EQ(max_abs(f.beta2), 0.0);
  EXPECT_EQ(f.tangency, 0.0);
}

TEST(PullbackForm, NonTangentFieldIsRejected) {
  const auto ch = torus_chart(32, 4);
  RotationalField u = torus_swirl(0.1);
  // Pure radial flow crosses every torus level.
  u.c[0] = ScalarChartField(u.c[0].grid(), std::vector<double>(u.c[0].grid().size(), 1.0), "u_r");
  EXPECT_THROW(pullback_form(SymmetricVectorField{u}, ch), PreconditionError);
}

TEST(PullbackForm, RadialFieldOnCylinderChartIsConstantInXi) {
  const auto prof = RadialProfile::power(1.0, 1.0);  // f = r
  const auto sol = integrate_radial(prof, 0.5, 3.0, 1e-3, {1.0, 0.0});
  const auto pair = radial_beltrami(prof, 0.5, 3.0, 1e-3, {1.0, 0.0});
  const auto ch = cylinder_chart(64, 20);
  const auto f = pullback_form(pair.u, ch, {.n2 = 4, .z_period = 0.004});
  EXPECT_FALSE(f.collapsed);
  const double h = f.h1();
  for (std::size_t k = 0; k < f.nt(); ++k) {
    const double r = 1 + f.t[k];
    const auto node = static_cast<std::size_t>(std::lround((r - 0.5) / 1e-3));
    ASSERT_NEAR(sol.r[node], r, 1e-12);
    for (std::size_t j = 0; j < f.n2(); ++j)
      for (std::size_t i = 0; i < f.n1(); ++i) {
        EXPECT_NEAR(f.beta1[f.idx(k, j, i)], r * sol.u_theta[node] * std::sin(h) / h, 1e-9);
        EXPECT_NEAR(f.beta2[f.idx(k, j, i)], sol.u_z[node], 1e-9);
      }
  }
}

TEST(EvolveConstrained, CylinderOfRadialFactorMatchesRadialOde) {
  // f = r: the chart's (c + t) chi nu = r^2 and (c + t) chi / nu = 1 reproduce
  // d(r u_theta)/dr = r^2 u_z, du_z/dr = -r u_theta.
  const auto prof = RadialProfile::power(1.0, 1.0);
  const auto sol = integrate_radial(prof, 0.5, 3.0, 1e-4, {1.0, 0.0});
  const auto pair = radial_beltrami(prof, 0.5, 3.0, 1e-3, {1.0, 0.0});
  const auto ch = cylinder_chart(32, 80);
  const auto f0 = pullback_form(pair.u, ch, {.n2 = 4, .z_period = 0.004});
  const auto res = evolve_constrained(f0, ch);
  const double h = f0.h1(), s = std::sin(h) / h;
  for (std::size_t k = 0; k < res.v.nt(); ++k) {
    const double r = 1 + res.v.t[k];
    const auto node = static_cast<std::size_t>(std::lround((r - 0.5) / 1e-4));
    for (std::size_t i = 0; i < res.v.n1(); i += 7) {
      EXPECT_NEAR(res.v.beta1[res.v.idx(k, 0, i)], r * sol.u_theta[node] * s, 1e-7);
      EXPECT_NEAR(res.v.beta2[res.v.idx(k, 0, i)], sol.u_z[node], 1e-7);
    }
    EXPECT_LT(res.constraint[k], 1e-9);
  }
  EXPECT_TRUE(res.report.metadata.at("integrator_within_tol").get<bool>());
}

TEST(EvolveConstrained, GenericMetricAgreesWithCaseForm) {
  for (auto ch : {torus_chart(48, 16), cylinder_chart(48, 16)}) {
    auto v0 = blank_form(ch, {0.0}, true, 2 * pi, 1);
    testutil::SplitMix rng(11);
    const auto a = testutil::TrigPoly2::random(rng), b = testutil::TrigPoly2::random(rng);
    for (std::size_t i = 0; i < v0.n1(); ++i) {
      v0.beta1[i] = a(v0.xi1[i], 0.0);
      v0.beta2[i] = b(v0.xi1[i], 0.0);
    }
    const auto c = evolve_constrained(v0, ch);
    const auto g = evolve_constrained(v0, ch, {.generic_metric = true});
    double diff = 0, scale = 0;
    for (std::size_t n = 0; n < c.v.beta1.size(); ++n) {
      diff = std::max({diff, std::abs(c.v.beta1[n] - g.v.beta1[n]), std::abs(c.v.beta2[n] - g.v.beta2[n])});
      scale = std::max({scale, std::abs(c.v.beta1[n]), std::abs(c.v.beta2[n])});
    }
    EXPECT_LT(diff, 1e-12 * scale);
  }
}

TEST(EvolveConstrained, EachComponentEquationMatchesTheChartMatrix) {
  // dt beta2 = -(c + t) chi |G|^(1/2)(beta1 g11 + beta2 g21) and the beta1 row:
  // on the torus chart g12 = 0, so the rows reduce to the case form.
  const auto ch = torus_chart(64, 8);
  for (std::size_t k = 0; k < ch.nt(); ++k)
    for (std::size_t i = 0; i < ch.n1(); i += 5) {
      const auto fr = chart_frame(ch, 0, k, i, 0.7);
      const Mat2 g = matrix_generic(fr, ch.level + ch.t[k]);
      const Mat2 c = matrix_case(ch, 0, k, i);
      EXPECT_NEAR(std::abs(dot(fr.d1, fr.d2)), 0.0, 1e-14);
      for (int e = 0; e < 4; ++e) EXPECT_NEAR(g[e], c[e], 1e-12 * (1 + std::abs(c[e])));
      EXPECT_GT(c[1], 0.0);  // dt beta1 gains + chi nu beta2
      EXPECT_LT(c[2], 0.0);  // dt beta2 loses chi / nu beta1
    }
}

TEST(EvolveConstrained, SymmetricDataKeepsConstraintGenericDataDrifts) {
  const auto ch = cylinder_chart(48, 80);
  // Symmetric: constant v0 on the f = r cylinder.
  auto sym = blank_form(ch, std::vector<double>(48), true, 2 * pi, 1);
  for (std::size_t j = 0; j < 48; ++j) sym.xi2[j] = 2 * pi * static_cast<double>(j) / 48.0;
  sym.collapsed = false;
  for (std::size_t n = 0; n < sym.beta1.size(); ++n) {
    sym.beta1[n] = 0.8;
    sym.beta2[n] = -0.3;
  }
  const ConstrainedOptions opt;
  const auto s = evolve_constrained(sym, ch, opt);
  for (double c : s.constraint) EXPECT_LE(c, 10 * opt.tol);
  EXPECT_TRUE(s.report.metadata.at("integrator_within_tol").get<bool>());

  // Generic: a discrete gradient (constraint exactly zero) plus a small random field.
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    testutil::SplitMix rng(seed);
    const auto phi = testutil::TrigPoly2::random(rng), w1 = testutil::TrigPoly2::random(rng),
               w2 = testutil::TrigPoly2::random(rng);
    auto gen = sym;
    const std::size_t n1 = gen.n1(), n2 = gen.n2();
    std::vector<double> ph(n1 * n2);
    for (std::size_t j = 0; j < n2; ++j)
      for (std::size_t i = 0; i < n1; ++i) ph[j * n1 + i] = phi(gen.xi1[i], gen.xi2[j]);
    const auto d1 = detail::slice_diff(ph, n1, n2, 0, gen.h1(), true), d2 = detail::slice_diff(ph, n1, n2, 1, gen.h2(), true);
    for (std::size_t j = 0; j < n2; ++j)
      for (std::size_t i = 0; i < n1; ++i) {
        gen.beta1[j * n1 + i] = d1[j * n1 + i] + 1e-3 * w1(gen.xi1[i], gen.xi2[j]);
        gen.beta2[j * n1 + i] = d2[j * n1 + i] + 1e-3 * w2(gen.xi1[i], gen.xi2[j]);
      }
    const auto g = evolve_constrained(gen, ch, opt);
    ASSERT_GT(g.constraint.front(), 0.0);
    EXPECT_GE(g.constraint.back(), 10 * g.constraint.front()) << "seed " << seed;
  }
}

TEST(EllipticResiduals, ConstantSecondComponentSolvesAllThree) {
  const auto ch = torus_chart(64, 8);
  auto v = blank_form(ch, {0.0}, true, 2 * pi, ch.nt());
  for (double& b : v.beta2) b = 1.7;
  for (std::size_t k = 0; k < v.nt(); ++k) {
    const auto r = elliptic_residuals(v, ch, k);
    EXPECT_LT(r.at("div_Bv").norm_inf, 1e-12);
    EXPECT_EQ(r.at("constraint").norm_inf, 0.0);
    EXPECT_LT(r.at("div_BgradV2").norm_inf, 1e-12);
  }
  // v = (1, 0): div(B v) = d1 p, nonzero on a torus chart.
  for (double& b : v.beta2) b = 0.0;
  for (double& b : v.beta1) b = 1.0;
  const auto r = elliptic_residuals(v, ch, 0);
  EXPECT_EQ(r.at("constraint").norm_inf, 0.0);
  EXPECT_GT(r.at("div_Bv").norm_inf, 1e-2);
}

TEST(EllipticResiduals, NonPeriodicDataRejected) {
  const auto ch = torus_chart(64, 4);
  auto v = blank_form(ch, {0.0}, true, 2 * pi, 1);
  for (std::size_t i = 0; i < v.n1(); ++i) v.beta2[i] = v.xi1[i];
  EXPECT_THROW(elliptic_residuals(v, ch, 0), PreconditionError);
}

TEST(EllipticResiduals, ConoidRefusesV2Equation) {
  // f = theta on the (theta, z) plane: level lines theta = c swept along xi2 = r.
  LevelCurve lc;
  lc.kase = ChartCase::conoid;
  lc.closed = false;
  lc.level = 0.3;
  for (int i = 0; i <= 20; ++i) {
    const double z = -1 + 0.1 * i;
    lc.xi1.push_back(z + 1);
    lc.points.push_back({0.3, z});
  }
  const auto f = LevelFunction::analytic([](double th, double) { return th; },
                                         [](double, double) { return std::array<double, 2>{1.0, 0.0}; });
  const auto ch = chart_coefficients(evolve_chart(lc, f, 0.2, 4, {1.0, 1.25, 1.5, 1.75}));
  auto v = blank_form(ch, ch.xi2, false, 0.0, 1);
  EXPECT_THROW(elliptic_residuals(v, ch, 0), PreconditionError);
  const auto r = elliptic_residuals(v, ch, 0, false);
  EXPECT_EQ(r.at("constraint").norm_inf, 0.0);
  EXPECT_FALSE(r.has("div_BgradV2"));
  EXPECT_THROW(dirichlet_energy(v, ch, 0), PreconditionError);
}

TEST(DirichletEnergy, SineControlAndConstant) {
  for (std::size_t n : {32u, 64u, 128u}) {
    std::vector<double> v(n * n), one(n * n, 1.0), c(n * n, 3.0);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) v[j * n + i] = std::sin(2 * pi * static_cast<double>(i) / static_cast<double>(n));
    const double h = 2 * pi / static_cast<double>(n);
    const double e = dirichlet_energy(v, one, one, n, n, 2 * pi, 2 * pi);
    EXPECT_NEAR(e, 2 * pi * pi * std::pow(std::sin(h) / h, 2), 1e-11);
    if (n >= 64) {
      EXPECT_NEAR(e, 2 * pi * pi, 0.01 * 2 * pi * pi);
    }
    EXPECT_EQ(dirichlet_energy(c, one, one, n, n, 2 * pi, 2 * pi), 0.0);
    EXPECT_THROW(dirichlet_energy(v, one, one, n, n, 2 * pi, 2 * pi, false), PreconditionError);
  }
}

TEST(DirichletEnergy, DiscreteIntegrationByPartsIsSecondOrder) {
  for (std::uint64_t seed : {5u, 6u, 7u, 8u}) {
    testutil::SplitMix rng(seed);
    const auto vf = testutil::TrigPoly2::random(rng), pf = testutil::TrigPoly2::random(rng),
               qf = testutil::TrigPoly2::random(rng);
    std::vector<double> err;
    for (std::size_t n : {32u, 64u, 128u}) {
      const double h = 2 * pi / static_cast<double>(n);
      std::vector<double> v(n * n), p(n * n), q(n * n);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
          const double a = h * static_cast<double>(i), b = h * static_cast<double>(j);
          v[j * n + i] = vf(a, b);
          p[j * n + i] = 2 + 0.5 * pf(a, b) / 4;
          q[j * n + i] = 2 + 0.5 * qf(a, b) / 4;
        }
      auto flux = detail::slice_flux(v, p, n, n, 0, h, true);
      const auto f2 = detail::slice_flux(v, q, n, n, 1, h, true);
      std::vector<double> prod(n * n);
      for (std::size_t m = 0; m < prod.size(); ++m) prod[m] = v[m] * (flux[m] + f2[m]);
      const double lhs = pairwise_sum(prod) * h * h;
      const double e = dirichlet_energy(v, p, q, n, n, 2 * pi, 2 * pi);
      err.push_back(std::abs(lhs + e));
    }
    EXPECT_GT(testutil::order(err[0], err[1]), 1.8) << "seed " << seed;
    EXPECT_GT(testutil::order(err[1], err[2]), 1.8) << "seed " << seed;
  }
}

TEST(SystemResiduals, RadialCylinderIsSecondOrderInTime) {
  const auto prof = RadialProfile::power(1.0, 1.0);
  const auto pair = radial_beltrami(prof, 0.5, 3.0, 1e-3, {1.0, 0.0});
  std::vector<double> e1, e2;
  for (std::size_t steps : {20u, 40u}) {
    const auto ch = cylinder_chart(32, steps);
    const auto f = pullback_form(pair.u, ch, {.n2 = 4, .z_period = 0.004});
    const auto r = system_residuals(f, ch);
    EXPECT_LT(r.at("closedness").norm_inf, 1e-9);
    EXPECT_LT(r.at("divergence").norm_inf, 1e-9);
    e1.push_back(r.at("evolution_1").norm_inf);
    e2.push_back(r.at("evolution_2").norm_inf);
  }
  EXPECT_NEAR(testutil::order(e1[0], e1[1]), 2.0, 0.3);
  EXPECT_NEAR(testutil::order(e2[0], e2[1]), 2.0, 0.3);
}

TEST(PullbackCsv, RowCountAndHeader) {
  const auto ch = torus_chart(16, 3);
  const auto f = pullback_form(SymmetricVectorField{torus_swirl(0.1)}, ch);
  std::ostringstream os;
  write_form_csv(os, f);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "xi1,xi2,t,beta1,beta2");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), static_cast<long>(1 + 16 * 4));
  auto v = blank_form(ch, {0.0}, true, 2 * pi, 1);
  const auto res = evolve_constrained(v, ch);
  std::ostringstream hs;
  write_history_csv(hs, res);
  const std::string h = hs.str();
  EXPECT_EQ(std::count(h.begin(), h.end(), '\n'), 5);
}

TEST(EvolveConstrained, ConstantDataOnStraightRevolutionChartKeepsConstraint) {
  // f = r seen as a revolution chart: lines r = 1 + t, so A does not depend on xi1.
  const auto f = LevelFunction::analytic([](double r, double) { return r; }, [](double, double) { return std::array<double, 2>{1.0, 0.0}; });
  LevelCurve lc;
  lc.kase = ChartCase::rev;
  lc.closed = false;
  lc.level = 1.0;
  for (std::size_t i = 0; i < 33; ++i) {
    lc.xi1.push_back(2.0 * static_cast<double>(i) / 32.0);
    lc.points.push_back({1.0, 2.0 * static_cast<double>(i) / 32.0 - 1.0});
  }
  const auto ch = chart_coefficients(evolve_chart(lc, f, 1.0, 40));
  auto v = blank_form(ch, {0.0, 2 * pi / 3, 4 * pi / 3}, true, 2 * pi, 1);
  v.collapsed = false;
  std::fill(v.beta1.begin(), v.beta1.end(), 0.4);
  std::fill(v.beta2.begin(), v.beta2.end(), 0.7);
  const ConstrainedOptions opt;
  const auto res = evolve_constrained(v, ch, opt);
  for (double c : res.constraint) EXPECT_LE(c, 10 * opt.tol);
  // Every slice stays constant in xi.
  for (std::size_t k = 0; k < res.v.nt(); ++k)
    for (std::size_t n = 1; n < res.v.slice_size(); ++n) {
      EXPECT_NEAR(res.v.beta1[res.v.idx(k, 0, 0) + n], res.v.beta1[res.v.idx(k, 0, 0)], 1e-13);
      EXPECT_NEAR(res.v.beta2[res.v.idx(k, 0, 0) + n], res.v.beta2[res.v.idx(k, 0, 0)], 1e-13);
    }
}
