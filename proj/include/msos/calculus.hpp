#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>
#include <vector>

#include "bspline.hpp"
#include "fft.hpp"
#include "geometry.hpp"

namespace msos {

/// One scale layer of a score: real values on (x, y, theta_k), theta periodic.
/// Storage is plane-major, data[(k * height + y) * width + x], because every
/// operator below acts per orientation plane.
struct LayerField {
  int width = 0, height = 0, n = 0;
  std::vector<double> data;

  LayerField() = default;
  LayerField(int w, int h, int n_, double v = 0.0) : width(w), height(h), n(n_), data(static_cast<size_t>(w) * h * n_, v) {}

  size_t plane_size() const { return static_cast<size_t>(width) * height; }
  double& at(int x, int y, int k) { return data[(static_cast<size_t>(k) * height + y) * width + x]; }
  double at(int x, int y, int k) const { return data[(static_cast<size_t>(k) * height + y) * width + x]; }
  double* plane(int k) { return data.data() + k * plane_size(); }
  const double* plane(int k) const { return data.data() + k * plane_size(); }
  double s_phi() const { return 2 * std::numbers::pi / n; }
  double theta(int k) const { return k * s_phi(); }
};

enum class Dir { theta, xi, eta };
enum class Scheme { central, forward, spectral };

/// Quarter-turn rotation of every plane with orientation shift by N/4.
inline LayerField rotate_layer_quarter(const LayerField& L) {
  LayerField r(L.width, L.height, L.n);
  const int s = L.n / 4, w = L.width;
  for (int k = 0; k < L.n; ++k)
    for (int y = 0; y < w; ++y)
      for (int x = 0; x < w; ++x) r.at(x, y, (k + s) % L.n) = L.at(y, (w - x) % w, k);
  return r;
}

namespace spectral {

/// Fourier multiplier of a shift by s under periodic cubic B-spline interpolation on a
/// unit grid: sum_m B^3(s - m) e^{i w m} / (2/3 + cos(w)/3).
inline cplx spline_shift(double w, double s) {
  cplx acc = 0;
  for (int m = static_cast<int>(std::ceil(s - 2)); m <= static_cast<int>(std::floor(s + 2)); ++m) {
    const double b = bspline(3, s - m);
    if (b != 0) acc += b * std::polar(1.0, w * m);
  }
  return acc / (2.0 / 3.0 + std::cos(w) / 3.0);
}

/// Spatial shift multiplier for offset (sx, sy) on a width x height grid.
inline CField shift_multiplier(int w, int h, double sx, double sy) {
  std::vector<cplx> mx(w), my(h);
  for (int u = 0; u < w; ++u) mx[u] = spline_shift(bin_frequency(u, w), sx);
  for (int v = 0; v < h; ++v) my[v] = spline_shift(bin_frequency(v, h), sy);
  CField m(static_cast<size_t>(w) * h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) m[static_cast<size_t>(v) * w + u] = mx[u] * my[v];
  return m;
}

/// Difference along (cos t, sin t) with step h: central (f(+h) - f(-h)) / 2h or forward (f(+h) - f) / h.
inline CField difference_multiplier(int w, int h, double t, double step, Scheme sch) {
  const double cx = std::cos(t) * step, cy = std::sin(t) * step;
  CField p = shift_multiplier(w, h, cx, cy);
  if (sch == Scheme::central) {
    const CField q = shift_multiplier(w, h, -cx, -cy);
    for (size_t i = 0; i < p.size(); ++i) p[i] = (p[i] - q[i]) / (2 * step);
  } else {
    for (auto& z : p) z = (z - 1.0) / step;
  }
  return p;
}

/// Circulant along the periodic orientation axis: out[k] = sum_d c[d] in[(k + d) mod n].
struct Circulant {
  std::vector<double> c;  // c[d], d = 0..n-1
};

/// Circulant from a Fourier multiplier over orientation harmonics j in [-n/2, n/2):
/// applied to e^{i nu k} it returns mult(nu) e^{i nu k}.
template <class F>
Circulant circulant_from_multiplier(int n, F mult) {
  Circulant r;
  r.c.assign(n, 0.0);
  for (int d = 0; d < n; ++d) {
    cplx s = 0;
    for (int j = 0; j < n; ++j) {
      const double nu = bin_frequency(j, n);
      s += mult(nu, j) * std::polar(1.0, -nu * d);
    }
    r.c[d] = s.real() / n;
  }
  for (auto& v : r.c)
    if (std::abs(v) < 1e-15) v = 0.0;
  return r;
}

/// Angular difference with step hb bins (converted to per-radian units by s_phi).
inline Circulant angular_difference(int n, double hb, Scheme sch) {
  const double sphi = 2 * std::numbers::pi / n;
  if (sch == Scheme::spectral)
    return circulant_from_multiplier(n, [&](double nu, int j) {
      // Derivative of the trigonometric interpolant; the Nyquist harmonic is dropped.
      return 2 * j == n ? cplx(0.0) : cplx(0.0, nu / sphi);
    });
  if (sch == Scheme::central)
    return circulant_from_multiplier(n, [&](double nu, int) {
      return (spline_shift(nu, hb) - spline_shift(nu, -hb)) / (2 * hb * sphi);
    });
  return circulant_from_multiplier(n, [&](double nu, int) { return (spline_shift(nu, hb) - 1.0) / (hb * sphi); });
}

/// Periodic Gaussian of scale t (= sigma^2 / 2, in rad^2) along theta.
inline Circulant angular_gaussian(int n, double t) {
  return circulant_from_multiplier(n, [&](double nu, int) {
    const double harmonic = nu * n / (2 * std::numbers::pi);
    return cplx(std::exp(-t * harmonic * harmonic), 0.0);
  });
}

/// Spatial Gaussian multiplier exp(-t |omega|^2).
inline std::vector<double> spatial_gaussian(int w, int h, double t) {
  std::vector<double> g(static_cast<size_t>(w) * h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const double wx = bin_frequency(u, w), wy = bin_frequency(v, h);
      g[static_cast<size_t>(v) * w + u] = std::exp(-t * (wx * wx + wy * wy));
    }
  return g;
}

/// Per-plane xi/eta multipliers for a grid, cached by (w, h, n, step, scheme).
struct PlaneOps {
  std::vector<CField> xi, eta;  // index k
};

inline const PlaneOps& plane_ops(int w, int h, int n, double step, Scheme sch) {
  static std::mutex mtx;
  static std::map<std::tuple<int, int, int, double, int>, PlaneOps> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_tuple(w, h, n, step, static_cast<int>(sch));
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  PlaneOps ops;
  for (int k = 0; k < n; ++k) {
    const double t = 2 * std::numbers::pi * k / n;
    ops.xi.push_back(difference_multiplier(w, h, t, step, sch));
    ops.eta.push_back(difference_multiplier(w, h, t + 0.5 * std::numbers::pi, step, sch));
  }
  return cache.emplace(key, std::move(ops)).first->second;
}

/// Layer held as per-plane spectra.
struct LayerSpectrum {
  int width = 0, height = 0, n = 0;
  std::vector<CField> planes;
};

inline LayerSpectrum to_spectrum(const LayerField& L) {
  LayerSpectrum s{L.width, L.height, L.n, {}};
  const auto& fft = Fft2d::get(L.width, L.height);
  CField tmp(L.plane_size());
  for (int k = 0; k < L.n; ++k) {
    const double* p = L.plane(k);
    for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = p[i];
    s.planes.push_back(fft.forward(tmp));
  }
  return s;
}

inline LayerField to_field(const LayerSpectrum& s) {
  LayerField L(s.width, s.height, s.n);
  const auto& fft = Fft2d::get(s.width, s.height);
  CField tmp(L.plane_size());
  for (int k = 0; k < s.n; ++k) {
    fft.inverse(s.planes[k].data(), tmp.data());
    double* p = L.plane(k);
    for (size_t i = 0; i < tmp.size(); ++i) p[i] = tmp[i].real();
  }
  return L;
}

inline LayerSpectrum apply_op(const LayerSpectrum& s, const Circulant& c) {
  LayerSpectrum r{s.width, s.height, s.n, std::vector<CField>(s.n, CField(s.planes[0].size(), 0.0))};
  for (int k = 0; k < s.n; ++k)
    for (int d = 0; d < s.n; ++d) {
      const double w = c.c[d];
      if (w == 0) continue;
      const CField& src = s.planes[(k + d) % s.n];
      CField& dst = r.planes[k];
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
    }
  return r;
}

inline LayerSpectrum apply_op(const LayerSpectrum& s, const std::vector<CField>& per_plane) {
  LayerSpectrum r = s;
  for (int k = 0; k < s.n; ++k)
    for (size_t i = 0; i < r.planes[k].size(); ++i) r.planes[k][i] *= per_plane[k][i];
  return r;
}

inline LayerSpectrum apply_op(const LayerSpectrum& s, const std::vector<double>& mult) {
  LayerSpectrum r = s;
  for (auto& p : r.planes)
    for (size_t i = 0; i < p.size(); ++i) p[i] *= mult[i];
  return r;
}

/// Left-invariant difference in the spectral domain.
inline LayerSpectrum derivative(const LayerSpectrum& s, Dir dir, double step = 1.0, Scheme sch = Scheme::central) {
  if (dir == Dir::theta) return apply_op(s, angular_difference(s.n, step, sch));
  const auto& ops = plane_ops(s.width, s.height, s.n, step, sch);
  return apply_op(s, dir == Dir::xi ? ops.xi : ops.eta);
}

inline LayerSpectrum smooth(const LayerSpectrum& s, double t_sp, double t_ang) {
  LayerSpectrum r = t_ang > 0 ? apply_op(s, angular_gaussian(s.n, t_ang)) : s;
  return t_sp > 0 ? apply_op(r, spatial_gaussian(s.width, s.height, t_sp)) : r;
}

}  // namespace spectral

/// Finite difference along a left-invariant direction. Spatial steps h are in pixels and
/// sample the layer off-grid through periodic cubic B-spline interpolation; the angular
/// step is in radians and is interpolated the same way along the periodic theta axis.
inline LayerField li_derivative(const LayerField& L, Dir dir, double h = 1.0, Scheme sch = Scheme::central) {
  const double step = dir == Dir::theta ? h / L.s_phi() : h;
  return spectral::to_field(spectral::derivative(spectral::to_spectrum(L), dir, step, sch));
}

/// Gaussian-regularized derivative: smooth with scales (t_sp, t_sp, t_ang), where t = sigma^2/2,
/// then apply the listed derivatives in order (first entry acts first). Theta derivatives
/// differentiate the trigonometric interpolant; spatial ones are central spline differences.
inline LayerField gaussian_derivative(const LayerField& L, const std::vector<Dir>& order, double t_sp,
                                      double t_ang) {
  auto s = spectral::smooth(spectral::to_spectrum(L), t_sp, t_ang);
  for (Dir d : order) s = spectral::derivative(s, d, 1.0, d == Dir::theta ? Scheme::spectral : Scheme::central);
  return spectral::to_field(s);
}

using Mat3 = std::array<double, 9>;  // row-major

/// Per-voxel beta-weighted Hessian Hb = B H B with B = diag(beta, 1, 1) and
/// H[i][j] = d_j(d_i |U|) over (theta, xi, eta), at Gaussian scales (t, t, t beta^2).
inline std::vector<Mat3> hessian3(const LayerField& L, double beta, double rho_tilde,
                                  Scheme angular = Scheme::spectral) {
  using namespace spectral;
  const auto s = smooth(to_spectrum(L), rho_tilde, rho_tilde * beta * beta);
  const Dir dirs[3] = {Dir::theta, Dir::xi, Dir::eta};
  std::vector<Mat3> H(L.data.size());
  const double w[3] = {beta, 1.0, 1.0};
  for (int i = 0; i < 3; ++i) {
    const auto di = derivative(s, dirs[i], 1.0, i == 0 ? angular : Scheme::central);
    for (int j = 0; j < 3; ++j) {
      const auto f = to_field(derivative(di, dirs[j], 1.0, j == 0 ? angular : Scheme::central));
      const double wij = w[i] * w[j];
      for (size_t v = 0; v < H.size(); ++v) H[v][3 * i + j] = wij * f.data[v];
    }
  }
  return H;
}

/// Minimal eigenvector of Hb^T Hb mapped back to (c1, c2, c3) with c1^2 + beta^2 (c2^2 + c3^2) = 1.
/// Sign convention: c2 >= 0, then c1 >= 0. Zero Hessian gives (0, 1/beta, 0).
inline LieCoefficients best_exp_fit(const Mat3& Hb, double beta, bool horizontal) {
  double norm = 0;
  for (double v : Hb) norm += v * v;
  Eigen::Vector3d u(0, 1, 0);
  if (norm > 0) {
    if (horizontal) {
      Eigen::Matrix<double, 3, 2> A;
      for (int r = 0; r < 3; ++r) A(r, 0) = Hb[3 * r], A(r, 1) = Hb[3 * r + 1];
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(A.transpose() * A);
      const Eigen::Vector2d e = es.eigenvectors().col(0);
      u = Eigen::Vector3d(e(0), e(1), 0);
    } else {
      Eigen::Matrix3d A;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) A(r, c) = Hb[3 * r + c];
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
      es.computeDirect(A.transpose() * A);
      u = es.eigenvectors().col(0);
      const double ev = es.eigenvalues()(1) - es.eigenvalues()(0);
      if (!(ev > 1e-8 * es.eigenvalues()(2))) {
        es.compute(A.transpose() * A);
        u = es.eigenvectors().col(0);
      }
    }
    u.normalize();
  }
  if (u(1) < 0 || (u(1) == 0 && u(0) < 0)) u = -u;
  // u is the tangent in the orthonormal basis (beta d_theta, d_xi, d_eta).
  return {u(0), u(1) / beta, u(2) / beta, 0.0};
}

inline std::vector<LieCoefficients> best_exp_fit(const std::vector<Mat3>& H, double beta, bool horizontal) {
  std::vector<LieCoefficients> c(H.size());
  for (size_t i = 0; i < H.size(); ++i) c[i] = best_exp_fit(H[i], beta, horizontal);
  return c;
}

inline constexpr double kCurvatureEps = 1e-8;

struct CurvatureValue {
  double kappa;
  bool confident;
};

/// Full: c1 sign(c2) / sqrt(c2^2 + c3^2). Horizontal: c1 / c2.
inline CurvatureValue curvature(const LieCoefficients& c, bool horizontal) {
  if (horizontal) {
    if (std::abs(c.c2) < kCurvatureEps) return {0.0, false};
    return {c.c1 / c.c2, true};
  }
  const double r2 = c.c2 * c.c2 + c.c3 * c.c3;
  if (r2 < kCurvatureEps) return {0.0, false};
  return {c.c1 * (c.c2 >= 0 ? 1.0 : -1.0) / std::sqrt(r2), true};
}

struct GaugeRecord {
  double alpha = 0, d_h = 0, kappa = 0, confidence = 0;
};

/// Rows d_a, d_b, d_c in the orthonormal basis (beta d_theta, d_xi, d_eta).
inline Mat3 gauge_matrix(double alpha, double d_h) {
  const double sa = std::sin(alpha), ca = std::cos(alpha), sd = std::sin(d_h), cd = std::cos(d_h);
  return {sa, -ca * cd, -ca * sd, ca, cd * sa, sa * sd, 0.0, -sd, cd};
}

/// (alpha, d_H) such that the d_a row of M is parallel to the fitted tangent; the
/// straight horizontal fit (0, 1/beta, 0) gives alpha = d_H = 0.
inline std::pair<double, double> gauge_angles(const LieCoefficients& c, double beta, bool enforce_horizontality) {
  Eigen::Vector3d u(c.c1, beta * c.c2, enforce_horizontality ? 0.0 : beta * c.c3);
  if (u.norm() == 0) return {0.0, 0.0};
  u.normalize();
  // d_a = (sin a, -cos a cos d, -cos a sin d) = s u, with s chosen so cos a >= 0, cos d >= 0.
  double p = -u(1), q = -u(2);
  double sgn = 1;
  if (p < 0 || (p == 0 && q < 0)) sgn = -1;
  p *= sgn;
  q *= sgn;
  const double r = std::hypot(p, q);
  if (r < 1e-15) return {0.5 * std::numbers::pi, 0.0};
  double alpha = std::atan2(sgn * u(0), r);
  if (alpha <= -0.5 * std::numbers::pi) alpha += std::numbers::pi;
  const double dh = std::atan2(q, p);
  return {alpha, dh};
}

/// Second derivative along a unit direction r (in the beta-weighted basis): r^T Hb r.
inline double directional_second(const Mat3& Hb, const double* r) {
  double s = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s += r[i] * Hb[3 * i + j] * r[j];
  return s;
}

/// Orientation confidence: second derivatives of |U| orthogonal to the tangent d_a,
/// s = (d_b^2 + d_c^2)|U|.
inline double orientation_confidence(const Mat3& Hb, const Mat3& M) {
  return directional_second(Hb, &M[3]) + directional_second(Hb, &M[6]);
}

/// Full gauge machinery on a magnitude layer: Hessian, fit, curvature, frame angles, confidence.
inline std::vector<GaugeRecord> gauge_frame(const std::vector<Mat3>& H, double beta, bool horizontal,
                                            bool enforce_horizontality) {
  std::vector<GaugeRecord> g(H.size());
  for (size_t i = 0; i < H.size(); ++i) {
    const auto c = best_exp_fit(H[i], beta, horizontal);
    const auto kv = curvature(c, horizontal);
    const auto [a, d] = gauge_angles(c, beta, enforce_horizontality || horizontal);
    const double s = orientation_confidence(H[i], gauge_matrix(a, d));
    g[i] = {a, d, kv.kappa, kv.confident ? s : 0.0};
  }
  return g;
}

inline std::vector<double> orientation_confidence(const LayerField& L, double beta, double rho_tilde,
                                                  bool horizontal = false) {
  const auto H = hessian3(L, beta, rho_tilde);
  const auto g = gauge_frame(H, beta, horizontal, false);
  std::vector<double> s(g.size());
  for (size_t i = 0; i < g.size(); ++i) s[i] = g[i].confidence;
  return s;
}

}  // namespace msos
