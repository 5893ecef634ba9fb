#pragma once

// Shared synthetic stimuli and helpers for unit and acceptance tests.

#include <cmath>
#include <random>

#include <msos/calculus.hpp>
#include <msos/cwt.hpp>
#include <msos/diffusion.hpp>
#include <msos/image.hpp>
#include <msos/wavelets.hpp>

namespace msos::synth {

inline Image white_noise(int w, int h, uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 r(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  Image f(w, h);
  for (double& v : f.data) v = nd(r);
  return f;
}

/// White noise restricted to the bank's reconstruction band.
inline Image band_limited_noise(const WaveletBank& bank, uint64_t seed) {
  return band_project(white_noise(bank.params.width, bank.params.height, seed), bank);
}

/// Gaussian ridge profile exp(-d^2 / 2 s^2) around a circle.
inline double ring(double x, double y, double cx, double cy, double r, double s) {
  const double d = std::hypot(x - cx, y - cy) - r;
  return std::exp(-d * d / (2 * s * s));
}

/// Two families of concentric circles, thin (left) and thick (right), combined by max.
inline Image two_circle_families(int n) {
  Image f(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double v = 0;
      for (double r = 0.1 * n; r < 0.45 * n; r += 0.1 * n) v = std::max(v, ring(x, y, 0.34 * n, 0.5 * n, r, 1.0));
      for (double r = 0.11 * n; r < 0.45 * n; r += 0.11 * n) v = std::max(v, ring(x, y, 0.66 * n, 0.5 * n, r, 3.0));
      f.at(x, y) = v;
    }
  return f;
}

/// Bright background with two dark lines through the centre at the given angles.
inline Image dark_crossing(int n, double angle_a, double angle_b, double depth = 0.5, double s = 1.5) {
  Image f(n, n);
  const double c = 0.5 * n;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double dx = x - c, dy = y - c;
      const double da = -dx * std::sin(angle_a) + dy * std::cos(angle_a);
      const double db = -dx * std::sin(angle_b) + dy * std::cos(angle_b);
      f.at(x, y) = 1 - depth * std::max(std::exp(-da * da / (2 * s * s)), std::exp(-db * db / (2 * s * s)));
    }
  return f;
}

/// Single bright ring of radius r on a dark background, centred at (cx, cy) (default: image centre).
inline Image circle(int n, double r, double s = 1.5, double cx = -1, double cy = -1) {
  if (cx < 0) cx = 0.5 * n;
  if (cy < 0) cy = 0.5 * n;
  Image f(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) f.at(x, y) = ring(x, y, cx, cy, r, s);
  return f;
}

/// Sum of a few low-frequency plane waves on (x, y, theta): smooth and exactly periodic.
inline LayerField smooth_random_layer(int w, int n, uint64_t seed) {
  std::mt19937_64 r(seed);
  std::normal_distribution<double> nd;
  struct Wave {
    double a, b, c, phase, amp;
  };
  std::vector<Wave> waves;
  const double step = 2 * std::numbers::pi / w;
  for (int i = 0; i < 6; ++i)
    waves.push_back({step * static_cast<int>(nd(r) * 2), step * static_cast<int>(nd(r) * 2),
                     static_cast<double>(static_cast<int>(nd(r) * 1.5)), nd(r) * 3, nd(r)});
  LayerField L(w, w, n);
  for (int k = 0; k < n; ++k)
    for (int y = 0; y < w; ++y)
      for (int x = 0; x < w; ++x) {
        double v = 0;
        for (const auto& q : waves) v += q.amp * std::cos(q.a * x + q.b * y + q.c * L.theta(k) + q.phase);
        L.at(x, y, k) = v;
      }
  return L;
}

/// Relative error at step h of [d_theta, d_xi] L - d_eta L (which = 0) or of
/// [d_theta, d_eta] L + d_xi L (which = 1). The reference derivative uses a tiny central step.
inline double commutator_error(const LayerField& L, int which, double h, Scheme sch) {
  const Dir d2 = which == 0 ? Dir::xi : Dir::eta;
  auto ref = li_derivative(L, which == 0 ? Dir::eta : Dir::xi, 1e-3, Scheme::central);
  if (which == 1)
    for (double& v : ref.data) v = -v;
  const auto a = li_derivative(li_derivative(L, d2, h, sch), Dir::theta, h, sch);
  const auto b = li_derivative(li_derivative(L, Dir::theta, h, sch), d2, h, sch);
  double e = 0, n = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double c = a.data[i] - b.data[i] - ref.data[i];
    e += c * c;
    n += ref.data[i] * ref.data[i];
  }
  return std::sqrt(e / n);
}

struct CurvatureSample {
  std::vector<double> full, horizontal;  // |kappa|
  std::vector<double> signed_right;      // signed full kappa, x right of centre, theta in [0, pi)
  std::vector<double> signed_left;       // mirror region: x left of centre, theta in (0, pi]
};

/// Curvature of the exponential-curve fits on layer l of a circle stimulus, over voxels with
/// |U| >= half the layer maximum.
inline CurvatureSample circle_curvature(const Image& f, const WaveletBank& bank, int l, double cx,
                                        double beta = 0.058, double rho_tilde = 1.5) {
  const auto u = forward(f, bank);
  const auto mag = detail::magnitude(extract_layer(u, l));
  const double mx = *std::max_element(mag.data.begin(), mag.data.end());
  const auto H = hessian3(mag, beta, rho_tilde);
  CurvatureSample s;
  for (size_t v = 0; v < H.size(); ++v) {
    if (mag.data[v] < 0.5 * mx) continue;
    const double kf = curvature(best_exp_fit(H[v], beta, false), false).kappa;
    s.full.push_back(std::abs(kf));
    s.horizontal.push_back(std::abs(curvature(best_exp_fit(H[v], beta, true), true).kappa));
    const int x = static_cast<int>(v % mag.width), k = static_cast<int>(v / mag.plane_size());
    if (x > cx + 5 && 2 * k < mag.n) s.signed_right.push_back(kf);
    if (x < cx - 5 && k >= 1 && 2 * k <= mag.n) s.signed_left.push_back(kf);
  }
  return s;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  return v[m];
}

}  // namespace msos::synth
