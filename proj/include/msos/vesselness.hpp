#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "calculus.hpp"
#include "cwt.hpp"
#include "diffusion.hpp"
#include "errors.hpp"
#include "fft.hpp"
#include "image.hpp"

namespace msos {

enum class Sigma2Mode { fixed, max_fraction, scale_adapted };

struct VesselnessParams {
  double sigma1 = 0.5;
  Sigma2Mode sigma2_mode = Sigma2Mode::max_fraction;
  double sigma2_value = 0.2;  // absolute for fixed, fraction for max_fraction
  std::vector<double> frangi_scales{1.0, 2.0, 4.0};  // t = sigma^2 / 2, pixels^2
  double rho_tilde = 1.5;  // spatial Gaussian scale of the score Hessian
  double beta = 0.058;
  bool bright = false;  // default polarity: dark vessels on a bright background
  bool horizontal = false;
};

namespace detail {
inline double sup_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}
}  // namespace detail

/// Multi-scale image-domain filter. Per scale: Gaussian Hessian, eigenvalues with
/// |l1| <= |l2|, V = exp(-R^2 / 2 s1^2) (1 - exp(-S^2 / 2 s2^2)) where l2 > 0, R = l1 / l2,
/// S = l1^2 + l2^2. Pointwise max over scales, then scaled to [0, 1].
inline Image frangi2d(const Image& f_in, const VesselnessParams& p) {
  if (p.frangi_scales.empty()) throw ConfigError("frangi2d needs at least one scale");
  if (!(p.sigma1 > 0)) throw ConfigError("sigma1 must be > 0");
  const int w = f_in.width, h = f_in.height;
  const auto& fft = Fft2d::get(w, h);
  std::vector<double> src = f_in.data;
  if (p.bright)
    for (double& v : src) v = -v;
  const CField fh = fft.forward_real(src);
  Image out(w, h, 0.0);
  CField a(fh.size()), b(fh.size()), c(fh.size());
  std::vector<double> l1(fh.size()), l2(fh.size()), S(fh.size());
  for (double t : p.frangi_scales) {
    if (!(t > 0)) throw ConfigError("frangi scales must be > 0");
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        const size_t i = static_cast<size_t>(v) * w + u;
        const double wx = bin_frequency(u, w), wy = bin_frequency(v, h);
        const cplx g = fh[i] * std::exp(-t * (wx * wx + wy * wy));
        a[i] = -wx * wx * g;
        b[i] = -wx * wy * g;
        c[i] = -wy * wy * g;
      }
    fft.inverse(a.data(), a.data());
    fft.inverse(b.data(), b.data());
    fft.inverse(c.data(), c.data());
    for (size_t i = 0; i < fh.size(); ++i) {
      const double hxx = a[i].real(), hxy = b[i].real(), hyy = c[i].real();
      const double m = 0.5 * (hxx + hyy), d = std::hypot(0.5 * (hxx - hyy), hxy);
      double e1 = m - d, e2 = m + d;
      if (std::abs(e1) > std::abs(e2)) std::swap(e1, e2);
      l1[i] = e1;
      l2[i] = e2;
      S[i] = e1 * e1 + e2 * e2;
    }
    double s2 = p.sigma2_value;
    if (p.sigma2_mode != Sigma2Mode::fixed) s2 = p.sigma2_value * detail::sup_abs(S);
    if (!(s2 > 0)) continue;  // flat image at this scale
    for (size_t i = 0; i < fh.size(); ++i) {
      if (!(l2[i] > 0)) continue;
      const double R = l1[i] / l2[i];
      const double v = std::exp(-R * R / (2 * p.sigma1 * p.sigma1)) * (1 - std::exp(-S[i] * S[i] / (2 * s2 * s2)));
      out.data[i] = std::max(out.data[i], v);
    }
  }
  const double mx = detail::sup_abs(out.data);
  if (mx > 0)
    for (double& v : out.data) v /= mx;
  return out;
}

/// Gauge second derivatives of Re U in the frame fitted to |U|: tangent U_aa and the
/// orthogonal sum U_bb + U_cc.
struct GaugeSecond {
  std::vector<double> tangent, orth;
};

inline GaugeSecond gauge_second_derivatives(const LayerPair& u, const VesselnessParams& p) {
  const double sign = p.bright ? -1.0 : 1.0;
  LayerField re = u.re;
  for (double& v : re.data) v *= sign;
  const LayerField mag = detail::magnitude(u);
  const auto Hr = hessian3(re, p.beta, p.rho_tilde);
  const auto Hm = hessian3(mag, p.beta, p.rho_tilde);
  GaugeSecond g{std::vector<double>(Hr.size()), std::vector<double>(Hr.size())};
  const bool hor = p.horizontal;
  for (size_t v = 0; v < Hr.size(); ++v) {
    LieCoefficients c;
    if (u.re.n == 1) {
      // No angular axis: fit the tangent in the spatial plane only.
      Eigen::Matrix2d A;
      A << Hm[v][4], Hm[v][5], Hm[v][7], Hm[v][8];
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(A.transpose() * A);
      Eigen::Vector2d e = A.norm() > 0 ? Eigen::Vector2d(es.eigenvectors().col(0)) : Eigen::Vector2d(1, 0);
      if (e(0) < 0 || (e(0) == 0 && e(1) < 0)) e = -e;
      c = {0.0, e(0) / p.beta, e(1) / p.beta, 0.0};
    } else {
      c = best_exp_fit(Hm[v], p.beta, hor);
    }
    const auto [al, dh] = gauge_angles(c, p.beta, hor);
    const Mat3 M = gauge_matrix(al, dh);
    g.tangent[v] = directional_second(Hr[v], &M[0]);
    g.orth[v] = directional_second(Hr[v], &M[3]) + directional_second(Hr[v], &M[6]);
  }
  return g;
}

/// Gauge vesselness on one layer, divided by its own supremum. sigma2 <= 0 selects the
/// parameter rule (fixed value or fraction of sup |U_bb + U_cc|).
inline LayerField se2_vesselness(const LayerPair& u, const VesselnessParams& p, double sigma2 = 0) {
  if (!(p.sigma1 > 0)) throw ConfigError("sigma1 must be > 0");
  const auto g = gauge_second_derivatives(u, p);
  if (!(sigma2 > 0)) {
    if (p.sigma2_mode == Sigma2Mode::fixed)
      sigma2 = p.sigma2_value;
    else if (p.sigma2_mode == Sigma2Mode::max_fraction)
      sigma2 = p.sigma2_value * detail::sup_abs(g.orth);
    else
      throw ConfigError("scale-adapted sigma2 needs the scale index; use sim2_vesselness");
  }
  LayerField out(u.re.width, u.re.height, u.re.n);
  if (!(sigma2 > 0)) return out;
  for (size_t v = 0; v < out.data.size(); ++v) {
    const double o = g.orth[v], t = g.tangent[v];
    if (!(o > 0)) continue;
    out.data[v] = std::exp(-t * t / (4 * p.sigma1 * p.sigma1 * o * o)) * (1 - std::exp(-(o * o + t * t) / (2 * sigma2 * sigma2)));
  }
  const double mx = detail::sup_abs(out.data);
  if (mx > 0)
    for (double& v : out.data) v /= mx;
  return out;
}

/// Max over orientations, divided by the max over (x, theta).
inline Image project_max(const LayerField& v) {
  Image img(v.width, v.height, 0.0);
  for (int k = 0; k < v.n; ++k) {
    const double* pl = v.plane(k);
    for (size_t i = 0; i < img.size(); ++i) img.data[i] = std::max(img.data[i], pl[i]);
  }
  const double mx = detail::sup_abs(img.data);
  if (mx > 0)
    for (double& x : img.data) x /= mx;
  return img;
}

/// sigma2(a_l) = 0.1 e^{l s_rho} sup |U_l|.
inline double adapted_sigma2(const LayerPair& u, int l, double s_rho) {
  return 0.1 * std::exp(l * s_rho) * detail::sup_abs(detail::magnitude(u).data);
}

/// Per-layer gauge vesselness with the scale-adapted sigma2, combined by pointwise max.
inline Image sim2_vesselness(const ScoreVolume& u, const VesselnessParams& p) {
  if (p.sigma2_mode != Sigma2Mode::scale_adapted) throw ConfigError("sim2 vesselness needs sigma2 mode scale_adapted");
  const double s_rho = u.m > 1 ? u.log_scales[1] - u.log_scales[0] : 0.0;
  Image out(u.width, u.height, 0.0);
  for (int l = 0; l < u.m; ++l) {
    const auto layer = extract_layer(u, l);
    const double s2 = adapted_sigma2(layer, l, s_rho);
    if (!(s2 > 0)) continue;
    const Image img = project_max(se2_vesselness(layer, p, s2));
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::max(out.data[i], img.data[i]);
  }
  return out;
}

}  // namespace msos
