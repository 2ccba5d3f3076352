#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "beltrami/levelset.hpp"
#include "test_util.hpp"

using namespace beltrami;
using std::numbers::pi;

namespace {

Grid2 square(double half, std::size_t n) { return Grid2::spanning(Chart::cartesian_xy, {-half, -half}, {half, half}, {n, n}); }

Grid2 torus_grid(std::size_t n) { return Grid2::spanning(Chart::meridional_rz, {1.0, -1.0}, {3.0, 1.0}, {n, n}); }

double torus_f(double r, double z) { return (r - 2) * (r - 2) + z * z; }

LevelFunction torus_analytic() {
  return LevelFunction::analytic(torus_f, [](double r, double z) { return std::array<double, 2>{2 * (r - 2), 2 * z}; });
}

LevelCurve circle_curve(ChartCase kase, std::array<double, 2> centre, double rho, double c, std::size_t n) {
  LevelCurve lc;
  lc.kase = kase;
  lc.level = c;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 2 * pi * static_cast<double>(i) / static_cast<double>(n);
    lc.xi1.push_back(s);
    lc.points.push_back({centre[0] + rho * std::cos(s), centre[1] + rho * std::sin(s)});
  }
  return lc;
}

}  // namespace

TEST(ExtractLevelCurve, UnitCircleWithinHSquared) {
  for (std::size_t n : {41u, 81u, 161u}) {
    const Grid2 g = square(2, n);
    const auto f = ScalarChartField::sample(g, [](double x, double y) { return std::hypot(x, y); });
    const auto curves = extract_level_curve(f, 1.0);
    ASSERT_EQ(curves.size(), 1u);
    const auto& c = curves[0];
    EXPECT_TRUE(c.closed);
    EXPECT_EQ(c.kase, ChartCase::cyl);
    const double h = g.spacing[0];
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LE(std::abs(c.coords(i)[0] - 1.0), h * h);
  }
}

TEST(ExtractLevelCurve, TorusSectionIsCircle) {
  const Grid2 g = torus_grid(81);
  const auto f = ScalarChartField::sample(g, torus_f);
  const auto curves = extract_level_curve(f, 0.25);
  ASSERT_EQ(curves.size(), 1u);
  const auto& c = curves[0];
  EXPECT_EQ(c.kase, ChartCase::rev);
  const double h = g.spacing[0];
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LE(std::abs(std::hypot(c.points[i][0] - 2, c.points[i][1]) - 0.5), h * h);
  // Counter-clockwise, starting at the largest r.
  EXPECT_GT(detail::signed_area(c.points), 0.0);
  EXPECT_NEAR(c.points[0][0], 2.5, h * h);
  EXPECT_NEAR(c.points[0][1], 0.0, 10 * h * h);
  EXPECT_NEAR(c.xi1[1] - c.xi1[0], 2 * pi / static_cast<double>(c.size()), 1e-15);
}

TEST(ExtractLevelCurve, PlaneGivesOpenStraightLine) {
  const Grid2 g = Grid2::spanning(Chart::cartesian_xy, {-1, -2}, {1.2, 2}, {23, 41});
  const auto f = ScalarChartField::sample(g, [](double x, double) { return x; });
  const auto curves = extract_level_curve(f, 0.0);
  ASSERT_EQ(curves.size(), 1u);
  const auto& c = curves[0];
  EXPECT_FALSE(c.closed);
  for (const auto& p : c.points) EXPECT_NEAR(p[0], 0.0, 1e-12);
  EXPECT_NEAR(std::abs(c.points.front()[1] - c.points.back()[1]), 4.0, 1e-12);
  EXPECT_NEAR(c.xi1.back(), 4.0, 1e-12);
  EXPECT_EQ(c.xi1.front(), 0.0);
}

TEST(ExtractLevelCurve, SeparateComponentsAreReturnedSeparately) {
  const Grid2 g = Grid2::spanning(Chart::cartesian_xy, {-3, -2}, {3, 2}, {121, 81});
  const auto f = ScalarChartField::sample(g, [](double x, double y) {
    return std::exp(-((x - 1.5) * (x - 1.5) + y * y)) + std::exp(-((x + 1.5) * (x + 1.5) + y * y));
  });
  const auto curves = extract_level_curve(f, 0.5);
  ASSERT_EQ(curves.size(), 2u);
  for (const auto& c : curves) {
    EXPECT_TRUE(c.closed);
    double mx = 0;
    for (const auto& p : c.points) mx += p[0] / static_cast<double>(c.size());
    EXPECT_NEAR(std::abs(mx), 1.5, 0.01);
  }
}

TEST(ExtractLevelCurve, ClosedCurvesAreContinuousAcrossTheSeam) {
  const auto f = ScalarChartField::sample(torus_grid(81), torus_f);
  double prev = 1e300;
  for (std::size_t n : {32u, 64u, 128u, 256u}) {
    ExtractOptions opt;
    opt.samples = n;
    const auto c = extract_level_curve(f, 0.25, opt)[0];
    const double gap = std::hypot(c.points.front()[0] - c.points.back()[0], c.points.front()[1] - c.points.back()[1]);
    EXPECT_LT(gap, 0.6 * prev);
    EXPECT_NEAR(gap, 2 * 0.5 * std::sin(pi / static_cast<double>(n)), 1e-3 / static_cast<double>(n));
    prev = gap;
  }
}

TEST(ExtractLevelCurve, RejectsMissingAndIrregularLevels) {
  const auto f = ScalarChartField::sample(square(1, 21), [](double x, double y) { return x * x + y * y; });
  EXPECT_THROW(extract_level_curve(f, 5.0), PreconditionError);
  EXPECT_THROW(extract_level_curve(f, -1.0), PreconditionError);
  const auto saddle = ScalarChartField::sample(square(1, 21), [](double x, double y) { return x * x - y * y; });
  ExtractOptions strict;
  strict.eps = 0.2;  // the crossing branches pass within a cell of the critical point
  EXPECT_THROW(extract_level_curve(saddle, 0.0, strict), PreconditionError);
  const auto threeD = Grid2{Chart::full_3d, {0, 0}, {1, 1}, {5, 5}};
  EXPECT_THROW(chart_case_of(threeD.chart), PreconditionError);
}

TEST(EvolveChart, UnitLevelOfRadiusGrowsLinearly) {
  const auto f = LevelFunction::analytic([](double x, double y) { return std::hypot(x, y); },
                                         [](double x, double y) {
                                           const double r = std::hypot(x, y);
                                           return std::array<double, 2>{x / r, y / r};
                                         });
  const auto ch = chart_coefficients(evolve_chart(circle_curve(ChartCase::cyl, {0, 0}, 1.0, 1.0, 64), f, 0.5, 50));
  for (std::size_t k = 0; k < ch.nt(); ++k)
    for (std::size_t i = 0; i < ch.n1(); ++i) {
      const auto at = ch.idx(0, k, i);
      EXPECT_NEAR(std::hypot(ch.phi[at][0], ch.phi[at][1]), 1.0 + ch.t[k], 1e-13);
      EXPECT_NEAR(ch.chi[at], 1.0, 1e-13);
      // Centred chord length on a circle of radius R: R sin(h) / h.
      const double h = 2 * pi / 64, R = 1.0 + ch.t[k];
      EXPECT_NEAR(ch.nu[at], R * std::sin(h) / h, 1e-12);
    }
}

TEST(EvolveChart, RadiusSquaredFollowsSqrtLaw) {
  const auto f = LevelFunction::analytic([](double x, double y) { return x * x + y * y; },
                                         [](double x, double y) { return std::array<double, 2>{2 * x, 2 * y}; });
  auto err = [&](std::size_t steps) {
    const auto ch = evolve_chart(circle_curve(ChartCase::cyl, {0, 0}, 1.0, 1.0, 16), f, 1.0, steps, {}, {.tol_flow = 1.0});
    double e = 0;
    for (std::size_t i = 0; i < ch.n1(); ++i) {
      const auto& p = ch.phi[ch.idx(0, ch.nt() - 1, i)];
      e = std::max(e, std::abs(std::hypot(p[0], p[1]) - std::sqrt(2.0)));
    }
    return e;
  };
  EXPECT_LT(err(200), 1e-12);
  EXPECT_NEAR(testutil::order(err(4), err(8)), 4.0, 0.5);
}

TEST(EvolveChart, TorusLevelPropertyAndRk4Order) {
  const auto f = torus_analytic();
  const auto start = circle_curve(ChartCase::rev, {2, 0}, 0.5, 0.25, 64);
  const auto ch = evolve_chart(start, f, 0.2, 200);
  for (double d : ch.level_defect) EXPECT_LE(d, 1e-8);
  auto final_defect = [&](std::size_t steps) {
    return evolve_chart(start, f, 0.2, steps, {}, {.tol_flow = 1.0}).level_defect.back();
  };
  const double e1 = final_defect(2), e2 = final_defect(4), e3 = final_defect(8);
  EXPECT_NEAR(testutil::order(e1, e2), 4.0, 0.5);
  EXPECT_NEAR(testutil::order(e2, e3), 4.0, 0.5);
}

TEST(EvolveChart, GridFactorKeepsInterpolatedLevels) {
  const auto field = ScalarChartField::sample(torus_grid(81), torus_f);
  const auto c = extract_level_curve(field, 0.25)[0];
  const auto ch = evolve_chart(c, LevelFunction::from_field(field), 0.2, 200);
  for (double d : ch.level_defect) EXPECT_LE(d, 1e-8);
}

TEST(ChartCoefficients, TorusMatchesCircleFormulas) {
  const auto ch = chart_coefficients(evolve_chart(circle_curve(ChartCase::rev, {2, 0}, 0.5, 0.25, 128), torus_analytic(), 0.2, 40));
  const double h = 2 * pi / 128;
  for (std::size_t k = 0; k < ch.nt(); ++k) {
    const double rho = std::sqrt(0.25 + ch.t[k]);
    for (std::size_t i = 0; i < ch.n1(); ++i) {
      const auto at = ch.idx(0, k, i);
      EXPECT_NEAR(ch.chi[at], 1.0 / (2 * rho), 1e-9);
      EXPECT_NEAR(ch.nu[at], rho * std::sin(h) / h / ch.phi[at][0], 1e-9);
      EXPECT_NEAR(ch.p[at], ch.chi[at] / ch.nu[at], 1e-15);
      EXPECT_NEAR(ch.q[at], ch.chi[at] * ch.nu[at], 1e-15);
      // The flow is normal to the level curve.
      EXPECT_NEAR(ch.d1[at][0] * ch.dt[at][0] + ch.d1[at][1] * ch.dt[at][1], 0.0, 1e-9);
    }
  }
  for (const auto& row : coefficient_bounds(ch)) {
    EXPECT_GT(row["min"].get<double>(), 0.0);
    EXPECT_TRUE(std::isfinite(row["max"].get<double>()));
  }
}

TEST(ChartCoefficients, ConoidHalfPlaneLevels) {
  // f = theta: X = r e_theta, so d theta / dt = 1; chi = r, nu = 1 with z = xi1.
  const auto f = LevelFunction::analytic([](double th, double) { return th; }, [](double, double) { return std::array<double, 2>{1, 0}; });
  LevelCurve lc;
  lc.kase = ChartCase::conoid;
  lc.closed = false;
  lc.level = 0.5;
  for (int i = 0; i <= 20; ++i) {
    lc.xi1.push_back(0.1 * i);
    lc.points.push_back({0.5, -1.0 + 0.1 * i});
  }
  const auto ch = chart_coefficients(evolve_chart(lc, f, 0.3, 30, {0.5, 1.0, 2.0}));
  ASSERT_EQ(ch.ns(), 3u);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t k = 0; k < ch.nt(); ++k)
      for (std::size_t i = 0; i < ch.n1(); ++i) {
        const auto at = ch.idx(s, k, i);
        EXPECT_NEAR(ch.phi[at][0], 0.5 + ch.t[k], 1e-13);
        EXPECT_NEAR(ch.chi[at], ch.xi2[s], 1e-13);
        EXPECT_NEAR(ch.nu[at], 1.0, 1e-12);
      }
  EXPECT_THROW(evolve_chart(lc, f, 0.3, 30), PreconditionError);
}

TEST(ChartCoefficients, ChiMatchesInverseGradientAtSecondOrder) {
  // f = 1 - cos(rho) about (2, 0): circular levels, |grad f| = sin(rho). Not a
  // quadratic, so the cubic interpolant is not exact.
  auto rho = [](double r, double z) { return std::hypot(r - 2, z); };
  auto err = [&](std::size_t n) {
    const auto field = ScalarChartField::sample(torus_grid(n), [&](double r, double z) { return 1 - std::cos(rho(r, z)); });
    ExtractOptions opt;
    opt.samples = 64;
    const auto c = extract_level_curve(field, 1 - std::cos(0.5), opt)[0];
    const auto ch = chart_coefficients(evolve_chart(c, LevelFunction::from_field(field), 0.1, 20));
    return chi_consistency(ch, [&](double r, double z, double) { return std::sin(rho(r, z)); });
  };
  const double e1 = err(41), e2 = err(81), e3 = err(161);
  EXPECT_GT(e1, 0.0);
  EXPECT_GT(testutil::order(e1, e2), 1.7);
  EXPECT_GT(testutil::order(e2, e3), 1.7);
}

TEST(EvolveChart, RejectsFlowIntoCriticalPoint) {
  // f = 1 - r^2 decreases outward; raising the level shrinks the circle into r = 0.
  const auto f = LevelFunction::analytic([](double x, double y) { return 1 - x * x - y * y; },
                                         [](double x, double y) { return std::array<double, 2>{-2 * x, -2 * y}; });
  EXPECT_THROW(evolve_chart(circle_curve(ChartCase::cyl, {0, 0}, std::sqrt(0.5), 0.5, 32), f, 0.6, 60), NumericalError);
}

TEST(EvolveChart, RejectsSelfIntersectingCurve) {
  LevelCurve eight;
  eight.kase = ChartCase::cyl;
  for (int i = 0; i < 64; ++i) {
    const double s = 2 * pi * i / 64.0;
    eight.xi1.push_back(s);
    eight.points.push_back({std::sin(s), std::sin(s) * std::cos(s)});
  }
  const auto f = LevelFunction::analytic([](double x, double) { return x; }, [](double, double) { return std::array<double, 2>{1, 0}; });
  EXPECT_THROW(evolve_chart(eight, f, 0.1, 2), NumericalError);
}

TEST(ChartIo, CsvHasOneRowPerSample) {
  const auto ch = chart_coefficients(evolve_chart(circle_curve(ChartCase::rev, {2, 0}, 0.5, 0.25, 16), torus_analytic(), 0.1, 4));
  std::ostringstream os;
  write_chart_csv(os, ch);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "xi1,xi2,t,r,z,chi,nu,p,q");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 16 * 5);
  const auto meta = chart_metadata(ch);
  EXPECT_EQ(meta["case"], "rev");
  EXPECT_EQ(meta["steps"], 4);
}
