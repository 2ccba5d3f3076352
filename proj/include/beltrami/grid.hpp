#pragma once

// Uniform grids, scalar fields on coordinate charts, and the symmetric
// vector-field representations used throughout the library.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "beltrami/errors.hpp"
#include "beltrami/spline.hpp"

namespace beltrami {

enum class Chart { cartesian_xy, meridional_rz, theta_z, full_3d };

inline std::string_view to_string(Chart c) {
  switch (c) {
    case Chart::cartesian_xy: return "cartesian-xy";
    case Chart::meridional_rz: return "meridional-rz";
    case Chart::theta_z: return "theta-z";
    case Chart::full_3d: return "full-3d";
  }
  return "?";
}

inline Chart chart_from_string(std::string_view s) {
  if (s == "cartesian-xy") return Chart::cartesian_xy;
  if (s == "meridional-rz") return Chart::meridional_rz;
  if (s == "theta-z") return Chart::theta_z;
  if (s == "full-3d") return Chart::full_3d;
  throw PreconditionError("unknown chart tag '" + std::string(s) + "'");
}

/// Uniform node-centred 2D grid. Axis 0 is x1 / r / theta, axis 1 is x2 / z.
/// Storage is row-major: index(i, j) = i * shape[1] + j.
struct Grid2 {
  Chart chart = Chart::cartesian_xy;
  std::array<double, 2> origin{0.0, 0.0};
  std::array<double, 2> spacing{1.0, 1.0};
  std::array<std::size_t, 2> shape{0, 0};

  static Grid2 spanning(Chart chart, std::array<double, 2> lo, std::array<double, 2> hi,
                        std::array<std::size_t, 2> n) {
    detail::require(n[0] >= 2 && n[1] >= 2, "grid needs at least 2 nodes per axis");
    Grid2 g;
    g.chart = chart;
    g.origin = lo;
    g.shape = n;
    for (int a = 0; a < 2; ++a) g.spacing[a] = (hi[a] - lo[a]) / static_cast<double>(n[a] - 1);
    g.validate();
    return g;
  }

  /// Meridional grid with nodes r_j = (j + 1/2) h_r, so the axis r = 0 sits half a
  /// cell below the first row and is never evaluated.
  static Grid2 meridional_half_plane(double r_max, double z_lo, double z_hi, std::size_t nr,
                                     std::size_t nz) {
    detail::require(nr >= 3 && nz >= 3, "grid needs at least 3 nodes per axis");
    const double hr = r_max / (static_cast<double>(nr) - 0.5);
    Grid2 g;
    g.chart = Chart::meridional_rz;
    g.origin = {0.5 * hr, z_lo};
    g.spacing = {hr, (z_hi - z_lo) / static_cast<double>(nz - 1)};
    g.shape = {nr, nz};
    g.validate();
    return g;
  }

  void validate() const {
    detail::require(spacing[0] > 0.0 && spacing[1] > 0.0, "grid spacing must be strictly positive");
    detail::require(shape[0] > 0 && shape[1] > 0, "grid must be non-empty");
    detail::require(std::isfinite(origin[0]) && std::isfinite(origin[1]), "grid origin must be finite");
    if (chart == Chart::meridional_rz)
      detail::require(origin[0] > 0.0, "meridional grids must exclude the axis (r_min > 0)");
  }

  [[nodiscard]] std::size_t size() const { return shape[0] * shape[1]; }
  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j) const { return i * shape[1] + j; }
  [[nodiscard]] double coord(int axis, std::size_t i) const {
    return origin[axis] + static_cast<double>(i) * spacing[axis];
  }
  [[nodiscard]] double upper(int axis) const { return coord(axis, shape[axis] - 1); }
  [[nodiscard]] double min_spacing() const { return std::min(spacing[0], spacing[1]); }
  [[nodiscard]] double max_spacing() const { return std::max(spacing[0], spacing[1]); }

  [[nodiscard]] bool contains(double a, double b) const {
    return a >= origin[0] && a <= upper(0) && b >= origin[1] && b <= upper(1);
  }

  friend bool operator==(const Grid2&, const Grid2&) = default;
};

/// Scalar samples on a 2D chart grid. Values are immutable once constructed.
class ScalarChartField {
 public:
  ScalarChartField() = default;
  ScalarChartField(Grid2 grid, std::vector<double> values, std::string name = {})
      : grid_(grid), values_(std::move(values)), name_(std::move(name)) {
    grid_.validate();
    detail::require(values_.size() == grid_.size(), "field values do not match grid shape");
    for (double v : values_)
      detail::require(std::isfinite(v), "field '" + name_ + "' contains non-finite values");
  }

  template <class F>
  static ScalarChartField sample(const Grid2& g, F&& fn, std::string name = {}) {
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < g.shape[0]; ++i)
      for (std::size_t j = 0; j < g.shape[1]; ++j) v[g.index(i, j)] = fn(g.coord(0, i), g.coord(1, j));
    return {g, std::move(v), std::move(name)};
  }

  static ScalarChartField constant(const Grid2& g, double c, std::string name = {}) {
    return {g, std::vector<double>(g.size(), c), std::move(name)};
  }

  [[nodiscard]] const Grid2& grid() const { return grid_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return values_[grid_.index(i, j)]; }

  [[nodiscard]] ScalarChartField renamed(std::string name) const { return {grid_, values_, std::move(name)}; }

  // Cubic B-spline coefficients, built on first use and shared between copies.
  [[nodiscard]] const std::vector<double>& spline() const {
    std::call_once(cache_->once, [&] { cache_->coef = detail::spline_coefficients(values_, grid_.shape[0], grid_.shape[1]); });
    return cache_->coef;
  }

  template <class F>
  [[nodiscard]] ScalarChartField map(F&& fn, std::string name = {}) const {
    std::vector<double> v(values_.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = fn(values_[k]);
    return {grid_, std::move(v), std::move(name)};
  }

 private:
  struct SplineCache {
    std::once_flag once;
    std::vector<double> coef;
  };
  Grid2 grid_;
  std::vector<double> values_;
  std::string name_;
  std::shared_ptr<SplineCache> cache_ = std::make_shared<SplineCache>();
};

/// Uniform 3D Cartesian grid, index(i, j, k) = (i * n1 + j) * n2 + k.
struct Grid3 {
  std::array<double, 3> origin{0, 0, 0};
  std::array<double, 3> spacing{1, 1, 1};
  std::array<std::size_t, 3> shape{0, 0, 0};

  static Grid3 spanning(std::array<double, 3> lo, std::array<double, 3> hi, std::array<std::size_t, 3> n) {
    Grid3 g;
    g.origin = lo;
    g.shape = n;
    for (int a = 0; a < 3; ++a) {
      detail::require(n[a] >= 2, "3D grid needs at least 2 nodes per axis");
      g.spacing[a] = (hi[a] - lo[a]) / static_cast<double>(n[a] - 1);
    }
    g.validate();
    return g;
  }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      detail::require(spacing[a] > 0.0, "grid spacing must be strictly positive");
      detail::require(shape[a] > 0, "grid must be non-empty");
    }
  }

  [[nodiscard]] std::size_t size() const { return shape[0] * shape[1] * shape[2]; }
  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * shape[1] + j) * shape[2] + k;
  }
  [[nodiscard]] double coord(int axis, std::size_t i) const {
    return origin[axis] + static_cast<double>(i) * spacing[axis];
  }
  [[nodiscard]] double upper(int axis) const { return coord(axis, shape[axis] - 1); }
  [[nodiscard]] double max_spacing() const { return std::max({spacing[0], spacing[1], spacing[2]}); }

  friend bool operator==(const Grid3&, const Grid3&) = default;
};

struct ScalarField3 {
  Grid3 grid;
  std::vector<double> values;

  template <class F>
  static ScalarField3 sample(const Grid3& g, F&& fn) {
    ScalarField3 s{g, std::vector<double>(g.size())};
    for (std::size_t i = 0; i < g.shape[0]; ++i)
      for (std::size_t j = 0; j < g.shape[1]; ++j)
        for (std::size_t k = 0; k < g.shape[2]; ++k)
          s.values[g.index(i, j, k)] = fn(g.coord(0, i), g.coord(1, j), g.coord(2, k));
    return s;
  }
};

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------------------
// Symmetric vector-field representations.

enum class Symmetry { translational, rotational, z_planar, none };

inline std::string_view to_string(Symmetry s) {
  switch (s) {
    case Symmetry::translational: return "translational";
    case Symmetry::rotational: return "rotational";
    case Symmetry::z_planar: return "z-planar";
    case Symmetry::none: return "none";
  }
  return "?";
}

/// (u1, u2, u3)(x1, x2) on a cartesian-xy chart.
struct TranslationalField {
  std::array<ScalarChartField, 3> c;
};

/// (u_r, u_theta, u_z)(r, z) on a meridional chart.
struct RotationalField {
  std::array<ScalarChartField, 3> c;
};

/// Uniform 1D sampling used for profiles and z-axes.
struct Grid1 {
  double origin = 0.0;
  double spacing = 1.0;
  std::size_t size = 0;
  [[nodiscard]] double coord(std::size_t i) const { return origin + static_cast<double>(i) * spacing; }
  [[nodiscard]] double upper() const { return coord(size - 1); }
  friend bool operator==(const Grid1&, const Grid1&) = default;
};

/// Samples on a full 3D Cartesian grid.
struct GridVectorField {
  Grid3 grid;
  std::array<std::vector<double>, 3> c;

  template <class F>
  static GridVectorField sample(const Grid3& g, F&& fn) {
    GridVectorField u{g, {}};
    for (auto& comp : u.c) comp.resize(g.size());
    for (std::size_t i = 0; i < g.shape[0]; ++i)
      for (std::size_t j = 0; j < g.shape[1]; ++j)
        for (std::size_t k = 0; k < g.shape[2]; ++k) {
          const Vec3 v = fn(g.coord(0, i), g.coord(1, j), g.coord(2, k));
          const std::size_t n = g.index(i, j, k);
          for (int a = 0; a < 3; ++a) u.c[a][n] = v[a];
        }
    return u;
  }
};

}  // namespace beltrami
