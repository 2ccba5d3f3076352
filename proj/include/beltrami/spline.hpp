#pragma once

// Tensor-product cubic B-spline coefficients for uniform 2D grids. End slopes
// come from one-sided five-point differences, so cubics are reproduced exactly
// and the interpolant is C^2 with O(h^2) second derivatives.

#include <cstddef>
#include <vector>

namespace beltrami::detail {

// Coefficients c[-1 .. n] (stored shifted by one) of the 1D interpolant of y
// along a strided line, written with stride `out_stride` into `out`.
inline void spline_line(const double* y, std::size_t n, std::size_t stride, double* out, std::size_t out_stride,
                        std::vector<double>& work) {
  auto Y = [&](std::size_t k) { return y[k * stride]; };
  double d0, d1;  // end slopes in index units
  if (n >= 5) {
    d0 = (-25 * Y(0) + 48 * Y(1) - 36 * Y(2) + 16 * Y(3) - 3 * Y(4)) / 12;
    d1 = (25 * Y(n - 1) - 48 * Y(n - 2) + 36 * Y(n - 3) - 16 * Y(n - 4) + 3 * Y(n - 5)) / 12;
  } else if (n == 4) {
    d0 = (-11 * Y(0) + 18 * Y(1) - 9 * Y(2) + 2 * Y(3)) / 6;
    d1 = (11 * Y(3) - 18 * Y(2) + 9 * Y(1) - 2 * Y(0)) / 6;
  } else {
    d0 = (-3 * Y(0) + 4 * Y(1) - Y(2)) / 2;
    d1 = (3 * Y(n - 1) - 4 * Y(n - 2) + Y(n - 3)) / 2;
  }
  // Tridiagonal system with rows (4, 2), (1, 4, 1)..., (2, 4); Thomas sweep.
  work.resize(2 * n);
  double* cp = work.data();
  double* dp = work.data() + n;
  auto lower = [&](std::size_t k) { return k + 1 == n ? 2.0 : 1.0; };
  auto upper = [&](std::size_t k) { return k == 0 ? 2.0 : 1.0; };
  auto rhs = [&](std::size_t k) {
    double r = 6 * Y(k);
    if (k == 0) r += 2 * d0;
    if (k + 1 == n) r -= 2 * d1;
    return r;
  };
  cp[0] = upper(0) / 4.0;
  dp[0] = rhs(0) / 4.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double m = 4.0 - lower(k) * cp[k - 1];
    cp[k] = k + 1 < n ? upper(k) / m : 0.0;
    dp[k] = (rhs(k) - lower(k) * dp[k - 1]) / m;
  }
  double* c = out;
  auto C = [&](std::size_t k) -> double& { return c[(k + 1) * out_stride]; };  // k in [-1, n] shifted
  C(n - 1) = dp[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) C(k) = dp[k] - cp[k] * C(k + 1);
  c[0] = C(1) - 2 * d0;                             // c[-1]
  c[(n + 1) * out_stride] = C(n - 2) + 2 * d1;      // c[n]
}

/// (n0 + 2) x (n1 + 2) coefficients, row-major in (i, j), for values v(i, j) = v[i * n1 + j].
inline std::vector<double> spline_coefficients(const std::vector<double>& v, std::size_t n0, std::size_t n1) {
  std::vector<double> work;
  std::vector<double> pass(( n0 + 2) * n1);
  for (std::size_t j = 0; j < n1; ++j) spline_line(v.data() + j, n0, n1, pass.data() + j, n1, work);
  std::vector<double> c((n0 + 2) * (n1 + 2));
  for (std::size_t i = 0; i < n0 + 2; ++i) spline_line(pass.data() + i * n1, n1, 1, c.data() + i * (n1 + 2), 1, work);
  return c;
}

}  // namespace beltrami::detail
