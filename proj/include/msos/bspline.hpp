#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msos {

/// Centered cardinal B-spline of order k (B^0 = indicator of (-1/2, 1/2)).
/// B^0 takes the value 1/2 at x = +-1/2 so that integer shifts sum to 1 everywhere.
inline double bspline(int k, double x) {
  if (k < 0) throw std::invalid_argument("bspline: order must be >= 0");
  const double ax = std::abs(x), half = 0.5 * (k + 1);
  if (ax >= half) return k == 0 && ax == half ? 0.5 : 0.0;
  if (k == 0) return 1.0;
  // Truncated-power form: (1/k!) sum_j (-1)^j C(k+1, j) (x + (k+1)/2 - j)_+^k.
  double sum = 0, binom = 1, fact = 1;
  for (int i = 2; i <= k; ++i) fact *= i;
  for (int j = 0; j <= k + 1; ++j) {
    const double u = ax + half - j;
    if (u > 0) sum += ((j % 2) ? -binom : binom) * std::pow(u, k);
    binom = binom * (k + 1 - j) / (j + 1);
  }
  return std::max(0.0, sum / fact);  // cancellation can leave -1e-16 near the support edge
}

/// Integral of sqrt(B^k) over the real line (Simpson rule on the support).
inline double bspline_sqrt_integral(int k) {
  const double half = 0.5 * (k + 1);
  const int n = 20000;
  const double h = 2 * half / n;
  double s = 0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    s += w * std::sqrt(bspline(k, -half + i * h));
  }
  return s * h / 3;
}

}  // namespace msos
