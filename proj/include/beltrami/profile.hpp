#pragma once

// Scalar functions of one variable: the factor profiles f(r), f(z), the swirl
// profiles u3(.) and Gamma(.). Tagged profiles are evaluated analytically;
// sampled profiles use monotone cubic (PCHIP) interpolation so that compositions
// such as u3(Psi) do not overshoot.

// Boost 1.74 pchip calls isnan unqualified.
#include <math.h>
#include <boost/math/interpolators/pchip.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "beltrami/errors.hpp"
#include "beltrami/grid.hpp"

namespace beltrami {

enum class ProfileShape { sampled, constant, linear, power, exponential };

inline std::string_view to_string(ProfileShape s) {
  switch (s) {
    case ProfileShape::sampled: return "sampled";
    case ProfileShape::constant: return "constant";
    case ProfileShape::linear: return "linear";
    case ProfileShape::power: return "power";
    case ProfileShape::exponential: return "exponential";
  }
  return "?";
}

class RadialProfile {
 public:
  /// p(s) = c.
  static RadialProfile constant(double c, Grid1 g = {0.0, 1.0, 5}) {
    return tagged(ProfileShape::constant, c, 0.0, g);
  }
  /// p(s) = a + b s.
  static RadialProfile linear(double a, double b, Grid1 g = {0.0, 1.0, 5}) {
    return tagged(ProfileShape::linear, a, b, g);
  }
  /// p(s) = kappa * max(s, 0)^l.
  static RadialProfile power(double kappa, double l, Grid1 g = {0.0, 1.0, 5}) {
    detail::require(l >= 1.0, "power profile exponent must be >= 1");
    return tagged(ProfileShape::power, kappa, l, g);
  }
  /// p(s) = a * exp(b s).
  static RadialProfile exponential(double a, double b, Grid1 g = {0.0, 1.0, 5}) {
    return tagged(ProfileShape::exponential, a, b, g);
  }

  static RadialProfile sampled(Grid1 g, std::vector<double> samples) {
    detail::require(g.size >= 4 && samples.size() == g.size, "sampled profile needs >= 4 samples matching its grid");
    detail::require(g.spacing > 0.0, "profile spacing must be positive");
    for (double v : samples) detail::require(std::isfinite(v), "profile samples must be finite");
    RadialProfile p;
    p.shape_ = ProfileShape::sampled;
    p.grid_ = g;
    p.samples_ = std::move(samples);
    p.build_interpolants();
    return p;
  }

  [[nodiscard]] ProfileShape shape() const { return shape_; }
  [[nodiscard]] const Grid1& grid() const { return grid_; }
  [[nodiscard]] const std::vector<double>& samples() const { return samples_; }
  [[nodiscard]] double param_a() const { return a_; }
  [[nodiscard]] double param_b() const { return b_; }
  [[nodiscard]] bool is_tagged() const { return shape_ != ProfileShape::sampled; }

  [[nodiscard]] bool in_domain(double s) const {
    if (is_tagged()) return true;
    const double tol = 1e-12 * (1.0 + std::abs(grid_.upper()));
    return s >= grid_.origin - tol && s <= grid_.upper() + tol;
  }

  [[nodiscard]] double value(double s) const {
    switch (shape_) {
      case ProfileShape::constant: return a_;
      case ProfileShape::linear: return a_ + b_ * s;
      case ProfileShape::power: return s > 0.0 ? a_ * std::pow(s, b_) : 0.0;
      case ProfileShape::exponential: return a_ * std::exp(b_ * s);
      case ProfileShape::sampled: check_domain(s); return (*interp_)(clamp(s));
    }
    return 0.0;
  }

  [[nodiscard]] double derivative(double s) const {
    switch (shape_) {
      case ProfileShape::constant: return 0.0;
      case ProfileShape::linear: return b_;
      case ProfileShape::power:
        if (s <= 0.0) return 0.0;
        return b_ == 1.0 ? a_ : a_ * b_ * std::pow(s, b_ - 1.0);
      case ProfileShape::exponential: return a_ * b_ * std::exp(b_ * s);
      case ProfileShape::sampled: check_domain(s); return (*dinterp_)(clamp(s));
    }
    return 0.0;
  }

  /// g(s) = p'(s) p(s), the Grad-Shafranov nonlinearity. For the power tag this is
  /// kappa^2 l s_+^(2l-1).
  [[nodiscard]] double gs_nonlinearity(double s) const {
    if (shape_ == ProfileShape::power) {
      if (s <= 0.0) return 0.0;
      return a_ * a_ * b_ * std::pow(s, 2.0 * b_ - 1.0);
    }
    return derivative(s) * value(s);
  }

  /// Integral of p from 0 to s.
  [[nodiscard]] double integral(double s) const {
    switch (shape_) {
      case ProfileShape::constant: return a_ * s;
      case ProfileShape::linear: return a_ * s + 0.5 * b_ * s * s;
      case ProfileShape::power: return s > 0.0 ? a_ * std::pow(s, b_ + 1.0) / (b_ + 1.0) : 0.0;
      case ProfileShape::exponential: return b_ == 0.0 ? a_ * s : a_ / b_ * (std::exp(b_ * s) - 1.0);
      case ProfileShape::sampled: return sampled_integral(s);
    }
    return 0.0;
  }

 private:
  static RadialProfile tagged(ProfileShape shape, double a, double b, Grid1 g) {
    RadialProfile p;
    p.shape_ = shape;
    p.a_ = a;
    p.b_ = b;
    p.grid_ = g;
    p.samples_.resize(g.size);
    for (std::size_t i = 0; i < g.size; ++i) p.samples_[i] = p.value(g.coord(i));
    return p;
  }

  void build_interpolants() {
    const std::size_t n = grid_.size;
    std::vector<double> x(n), y = samples_, d(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = grid_.coord(i);
    const double h = grid_.spacing;
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
    d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
    auto x2 = x;
    interp_.emplace(std::move(x), std::move(y));
    dinterp_.emplace(std::move(x2), std::move(d));
  }

  void check_domain(double s) const {
    if (!in_domain(s))
      throw PreconditionError("argument " + std::to_string(s) + " exits the sampled profile domain [" +
                              std::to_string(grid_.origin) + ", " + std::to_string(grid_.upper()) + "]");
  }

  [[nodiscard]] double clamp(double s) const { return std::min(std::max(s, grid_.origin), grid_.upper()); }

  // Trapezoid rule on the samples, linear within the last cell.
  [[nodiscard]] double sampled_integral(double s) const {
    auto cumulative = [&](double x) {
      check_domain(x);
      x = clamp(x);
      const double h = grid_.spacing;
      double acc = 0.0;
      std::size_t i = 0;
      while (i + 1 < grid_.size && grid_.coord(i + 1) <= x) {
        acc += 0.5 * h * (samples_[i] + samples_[i + 1]);
        ++i;
      }
      if (i + 1 < grid_.size) {
        const double w = x - grid_.coord(i);
        const double v = samples_[i] + (samples_[i + 1] - samples_[i]) * w / h;
        acc += 0.5 * w * (samples_[i] + v);
      }
      return acc;
    };
    return cumulative(s) - cumulative(0.0);
  }

  using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

  ProfileShape shape_ = ProfileShape::constant;
  double a_ = 0.0;
  double b_ = 0.0;
  Grid1 grid_;
  std::vector<double> samples_;
  std::optional<Pchip> interp_;
  std::optional<Pchip> dinterp_;
};

}  // namespace beltrami
