#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

namespace msos {

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  double r = std::remainder(a, 2.0 * pi);
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

/// Element of SIM(2): translation (x, y), log-scale tau = ln a, rotation theta.
struct Sim2Point {
  double x = 0, y = 0, tau = 0, theta = 0;
};

/// Lie-algebra coordinates w.r.t. {A1 = d_theta, A2 = d_xi, A3 = d_eta, A4 = d_tau}.
struct LieCoefficients {
  double c1 = 0, c2 = 0, c3 = 0, c4 = 0;
};

inline constexpr double kEpsSing = 1e-10;

inline Sim2Point canonical(Sim2Point g) {
  g.theta = wrap_angle(g.theta);
  return g;
}

inline Sim2Point group_mul(const Sim2Point& g, const Sim2Point& h) {
  const double a = std::exp(g.tau), c = std::cos(g.theta), s = std::sin(g.theta);
  return {g.x + a * (c * h.x - s * h.y), g.y + a * (s * h.x + c * h.y), g.tau + h.tau,
          wrap_angle(g.theta + h.theta)};
}

inline Sim2Point group_inv(const Sim2Point& g) {
  const double ai = std::exp(-g.tau), c = std::cos(g.theta), s = std::sin(g.theta);
  return {-ai * (c * g.x + s * g.y), -ai * (-s * g.x + c * g.y), -g.tau, wrap_angle(-g.theta)};
}

namespace detail {
// (e^z - 1) / z, evaluated without cancellation for small |z|.
inline std::complex<double> expm1_over(std::complex<double> z) {
  if (std::norm(z) < kEpsSing) return 1.0 + z / 2.0 + z * z / 6.0;
  const double a = z.real(), b = z.imag();
  const double sh = std::sin(0.5 * b);
  const std::complex<double> em1(std::expm1(a) * std::cos(b) - 2.0 * sh * sh,
                                 std::exp(a) * std::sin(b));
  return em1 / z;
}
}  // namespace detail

/// g0 * exp(t (c1 A1 + c2 A2 + c3 A3 + c4 A4)).
/// With z = x + iy the flow is dz/ds = e^{tau + i theta} (c2 + i c3), so
/// z(t) = t (c2 + i c3) (e^{t(c4 + i c1)} - 1) / (t (c4 + i c1)).
inline Sim2Point exp_map(const LieCoefficients& c, double t, const Sim2Point& g0 = {}) {
  const std::complex<double> w(c.c2, c.c3);
  std::complex<double> z;
  if (c.c1 * c.c1 + c.c4 * c.c4 < kEpsSing)
    z = t * w;
  else
    z = t * w * detail::expm1_over(t * std::complex<double>(c.c4, c.c1));
  const Sim2Point local{z.real(), z.imag(), t * c.c4, t * c.c1};
  return group_mul(g0, local);
}

/// Inverse of exp_map at t = 1 from the identity (principal branch, theta in (-pi, pi]).
inline LieCoefficients log_map(const Sim2Point& g) {
  const double th = wrap_angle(g.theta), tau = g.tau;
  const double d = 1.0 + std::exp(2.0 * tau) - 2.0 * std::exp(tau) * std::cos(th);
  if (d < kEpsSing) return {th, g.x, g.y, tau};
  const double ea = std::exp(tau), ct = std::cos(th), st = std::sin(th);
  const double xi = ea * (g.x * ct + g.y * st);
  const double eta = ea * (-g.x * st + g.y * ct);
  const double c2 = ((g.y * th - g.x * tau) + (-th * eta + tau * xi)) / d;
  const double c3 = (-(g.x * th + g.y * tau) + (th * xi + tau * eta)) / d;
  return {th, c2, c3, tau};
}

struct WeightedModulus {
  double original;  // sqrt(c1^2 + c2^2 + c4^2 + |c3|)
  double smooth;    // ((c1^2 + c2^2 + c4^2)^2 + c3^2)^(1/4)
};

inline WeightedModulus weighted_modulus(const LieCoefficients& c) {
  const double q = c.c1 * c.c1 + c.c2 * c.c2 + c.c4 * c.c4;
  return {std::sqrt(q + std::abs(c.c3)), std::sqrt(std::sqrt(q * q + c.c3 * c.c3))};
}

using Mat4 = std::array<std::array<double, 4>, 4>;

/// Rows express {d_theta, d_xi, d_eta, d_tau} in {d_theta, d_x, d_y, d_tau}.
inline Mat4 left_frame_coefficients(const Sim2Point& g) {
  const double a = std::exp(g.tau), c = std::cos(g.theta), s = std::sin(g.theta);
  Mat4 m{};
  m[0][0] = 1;
  m[1][1] = a * c;
  m[1][2] = a * s;
  m[2][1] = -a * s;
  m[2][2] = a * c;
  m[3][3] = 1;
  return m;
}

/// Structure constants c[i][j][k] (0-based) with [A_i, A_j] = sum_k c[i][j][k] A_k.
inline std::array<std::array<std::array<double, 4>, 4>, 4> structure_constants() {
  std::array<std::array<std::array<double, 4>, 4>, 4> c{};
  auto set = [&](int i, int j, int k, double v) {
    c[i - 1][j - 1][k - 1] = v;
    c[j - 1][i - 1][k - 1] = -v;
  };
  set(1, 2, 3, 1);
  set(1, 3, 2, -1);
  set(4, 2, 2, 1);
  set(4, 3, 3, 1);
  return c;
}

}  // namespace msos
