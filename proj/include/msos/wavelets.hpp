#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "bspline.hpp"
#include "errors.hpp"
#include "fft.hpp"
#include "image.hpp"

namespace msos {

/// Design parameters of a log-polar B-spline cake-wavelet bank.
///
/// Frequencies are angular (radians per pixel); Nyquist is pi. The scales
/// a_minus, a_plus are derived from the annulus [rho_minus, rho_plus] so that the
/// radial B-spline copies exactly tile it (see derive_scales).
struct BankParams {
  int n_orientations = 20;  // N
  int n_scales = 4;         // M
  int spline_order = 3;     // k
  double rho_minus = 0;     // inner annulus radius
  double rho_plus = 0;      // outer annulus radius
  double sigma_s = 0;       // spatial window std (pixels) at a = 1; infinity disables the window
  int width = 0, height = 0;
  double recon_floor = 0.05;  // reconstruction band: radial partition >= this value
  double a_minus = 0, a_plus = 0;  // derived

  double s_phi() const { return 2 * std::numbers::pi / n_orientations; }
  double s_rho() const { return (std::log(a_plus) - std::log(a_minus)) / n_scales; }
  double tau_minus() const { return std::log(a_minus); }
  /// Radial spline order; capped at M-1 so that the exact-partition interior is nonempty.
  int radial_order() const { return std::min(spline_order, n_scales - 1); }
  double theta(int k) const { return k * s_phi(); }
  double log_scale(int l) const { return tau_minus() + l * s_rho(); }
};

/// Fill a_minus/a_plus: the M radial copies B^kr(ln(a_l rho)/s_rho) cover exactly [rho-, rho+].
inline void derive_scales(BankParams& p) {
  const int kr = p.radial_order();
  const double s = std::log(p.rho_plus / p.rho_minus) / (p.n_scales + kr);
  const double tau_m = s * 0.5 * (kr + 1) - std::log(p.rho_plus);
  p.a_minus = std::exp(tau_m);
  p.a_plus = std::exp(tau_m + p.n_scales * s);
}

/// Defaults: rho- = 2 cycles per image width, rho+ = 0.8 Nyquist, window std = min(w, h)/8.
inline BankParams default_bank_params(int width, int height, int n = 20, int m = 4, int k = 3) {
  BankParams p;
  p.n_orientations = n;
  p.n_scales = m;
  p.spline_order = k;
  p.width = width;
  p.height = height;
  p.rho_minus = 2.0 * 2.0 * std::numbers::pi / width;
  p.rho_plus = 0.8 * std::numbers::pi;
  p.sigma_s = std::min(width, height) / 8.0;
  derive_scales(p);
  return p;
}

inline void validate(const BankParams& p) {
  if (p.width < 16 || p.height < 16) throw ConfigError("bank grid must be at least 16x16");
  if (p.n_orientations < 4) throw ConfigError("n_orientations must be >= 4");
  if (p.n_scales < 1) throw ConfigError("n_scales must be >= 1");
  if (p.spline_order < 0) throw ConfigError("spline_order must be >= 0");
  if (!(p.rho_minus > 0 && p.rho_minus < p.rho_plus))
    throw ConfigError("annulus radii must satisfy 0 < rho_minus < rho_plus");
  if (p.rho_plus >= std::numbers::pi) throw ConfigError("annulus exceeds Nyquist (rho_plus >= pi)");
  if (!(p.sigma_s > 0)) throw ConfigError("sigma_s must be > 0 (use inf to disable the window)");
  if (!(p.a_minus > 0 && p.a_minus < p.a_plus)) throw ConfigError("scale bounds must satisfy 0 < a- < a+");
  if (!(p.recon_floor > 0 && p.recon_floor < 1)) throw ConfigError("recon_floor must lie in (0, 1)");
}

/// A(phi) = B^k(((phi mod 2pi) - pi/2) / s_phi), periodized over the circle.
inline double angular_profile(double phi, const BankParams& p) {
  const int n = p.n_orientations;
  double x = std::fmod((phi - 0.5 * std::numbers::pi) / p.s_phi(), static_cast<double>(n));
  if (x < -0.5 * n) x += n;
  if (x >= 0.5 * n) x -= n;
  return bspline(p.spline_order, x) + bspline(p.spline_order, x + n) + bspline(p.spline_order, x - n);
}

/// Mother radial profile B(rho) = B^kr(ln(rho) / s_rho).
inline double radial_profile(double rho, const BankParams& p) {
  if (!(rho > 0)) throw std::invalid_argument("radial_profile: rho must be > 0");
  return bspline(p.radial_order(), std::log(rho) / p.s_rho());
}

/// Radial profile of scale layer l: B(a_l rho).
inline double radial_copy(double rho, int l, const BankParams& p) {
  if (!(rho > 0)) return 0.0;
  return bspline(p.radial_order(), (std::log(rho) + p.log_scale(l)) / p.s_rho());
}

inline double radial_partition(double rho, const BankParams& p) {
  double s = 0;
  for (int l = 0; l < p.n_scales; ++l) s += radial_copy(rho, l, p);
  return s;
}

/// Radii where the radial copies sum to exactly 1 (margin kr * s_rho inside the annulus).
inline std::pair<double, double> interior_radii(const BankParams& p) {
  const double m = p.radial_order() * p.s_rho();
  return {p.rho_minus * std::exp(m), p.rho_plus * std::exp(-m)};
}

/// Radii where the radial partition falls to recon_floor (bisection on the monotone flanks).
inline std::pair<double, double> reconstruction_radii(const BankParams& p) {
  const auto [ri0, ri1] = interior_radii(p);
  auto solve = [&](double lo, double hi, bool rising) {
    for (int it = 0; it < 200; ++it) {
      const double mid = std::sqrt(lo * hi);
      const bool above = radial_partition(mid, p) >= p.recon_floor;
      if (above == rising)
        hi = mid;
      else
        lo = mid;
    }
    return std::sqrt(lo * hi);
  };
  const double r0 = ri0 > p.rho_minus ? solve(p.rho_minus, ri0, true) : p.rho_minus;
  const double r1 = ri1 < p.rho_plus ? solve(ri1, p.rho_plus, false) : p.rho_plus;
  return {r0, r1};
}

/// Fourier-domain filter bank hat_psi[k][l] on the DFT grid plus admissibility field.
struct WaveletBank {
  BankParams params;
  std::vector<CField> filters;     // index k * M + l
  std::vector<double> m_psi_d;     // (1/(N M)) sum |hat_psi|^2
  std::vector<uint8_t> interior;   // exact-partition annulus bins
  std::vector<uint8_t> recon;      // bins used by the exact inverse
  double approx_weight = 0;        // weight of the summation inverse
  uint64_t hash = 0;

  int n() const { return params.n_orientations; }
  int m() const { return params.n_scales; }
  const CField& filter(int k, int l) const { return filters[static_cast<size_t>(k) * m() + l]; }
  CField& filter(int k, int l) { return filters[static_cast<size_t>(k) * m() + l]; }
};

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 1099511628211ull;
  return h;
}

inline uint64_t params_hash(const BankParams& p) {
  uint64_t h = fnv1a(&p.n_orientations, sizeof(int));
  h = fnv1a(&p.n_scales, sizeof(int), h);
  h = fnv1a(&p.spline_order, sizeof(int), h);
  for (double v : {p.rho_minus, p.rho_plus, p.sigma_s, p.recon_floor, p.a_minus, p.a_plus})
    h = fnv1a(&v, sizeof v, h);
  h = fnv1a(&p.width, sizeof(int), h);
  return fnv1a(&p.height, sizeof(int), h);
}

inline std::vector<double> compute_m_psi_discrete(const WaveletBank& bank) {
  const size_t nb = static_cast<size_t>(bank.params.width) * bank.params.height;
  std::vector<double> m(nb, 0.0);
  for (const auto& f : bank.filters)
    for (size_t i = 0; i < nb; ++i) m[i] += std::norm(f[i]);
  const double s = 1.0 / (static_cast<double>(bank.n()) * bank.m());
  for (auto& v : m) v *= s;
  return m;
}

/// Radius of each DFT bin (angular frequency).
inline std::vector<double> bin_radii(int w, int h) {
  std::vector<double> r(static_cast<size_t>(w) * h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) r[static_cast<size_t>(v) * w + u] = std::hypot(bin_frequency(u, w), bin_frequency(v, h));
  return r;
}

inline void finalize_bank(WaveletBank& bank) {
  const auto& p = bank.params;
  bank.m_psi_d = compute_m_psi_discrete(bank);
  const auto radii = bin_radii(p.width, p.height);
  const auto [i0, i1] = interior_radii(p);
  const auto [r0, r1] = reconstruction_radii(p);
  bank.interior.assign(radii.size(), 0);
  bank.recon.assign(radii.size(), 0);
  for (size_t i = 0; i < radii.size(); ++i) {
    bank.interior[i] = radii[i] >= i0 && radii[i] <= i1;
    bank.recon[i] = radii[i] >= r0 && radii[i] <= r1 && bank.m_psi_d[i] > 0;
  }
  const double ca = bspline_sqrt_integral(p.spline_order), cr = bspline_sqrt_integral(p.radial_order());
  bank.approx_weight = 1.0 / (std::sqrt(static_cast<double>(bank.n()) * bank.m()) * ca * cr);
  bank.hash = params_hash(p);
}

/// Builds hat_psi[k][l](omega) = sqrt(N M A(phi - theta_k) B(a_l rho)), windowed in space by
/// a Gaussian of std a_l * sigma_s (the dilated mother window), DC bin forced to zero.
/// With sigma_s = inf the squared filters average to the exact B-spline partition of unity.
inline WaveletBank build_bank(const BankParams& params) {
  validate(params);
  WaveletBank bank;
  bank.params = params;
  const auto& p = bank.params;
  const int w = p.width, h = p.height, n = p.n_orientations, m = p.n_scales;
  const size_t nb = static_cast<size_t>(w) * h;
  const double norm = std::sqrt(static_cast<double>(n) * m);
  const bool windowed = std::isfinite(p.sigma_s);
  const auto& fft = Fft2d::get(w, h);

  std::vector<double> phi(nb), rho(nb);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const double wx = bin_frequency(u, w), wy = bin_frequency(v, h);
      phi[static_cast<size_t>(v) * w + u] = std::atan2(wy, wx);
      rho[static_cast<size_t>(v) * w + u] = std::hypot(wx, wy);
    }
  // Periodic squared distance to the origin, for the spatial window.
  std::vector<double> dist2(nb);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = std::min(x, w - x), dy = std::min(y, h - y);
      dist2[static_cast<size_t>(y) * w + x] = dx * dx + dy * dy;
    }

  bank.filters.assign(static_cast<size_t>(n) * m, CField(nb));
  std::vector<double> radial(nb);
  for (int l = 0; l < m; ++l) {
    for (size_t i = 0; i < nb; ++i) radial[i] = radial_copy(rho[i], l, p);
    const double win_sigma = std::exp(p.log_scale(l)) * p.sigma_s;
    for (int k = 0; k < n; ++k) {
      CField& f = bank.filter(k, l);
      for (size_t i = 0; i < nb; ++i) {
        const double ab = radial[i] > 0 ? angular_profile(phi[i] - p.theta(k), p) * radial[i] : 0.0;
        f[i] = norm * std::sqrt(ab);
      }
      if (windowed) {
        CField s = fft.inverse(f);
        const double c = -0.5 / (win_sigma * win_sigma);
        for (size_t i = 0; i < nb; ++i) s[i] *= std::exp(c * dist2[i]);
        fft.forward(s.data(), f.data());
      }
      f[0] = 0.0;
    }
  }
  finalize_bank(bank);
  if (windowed) {
    // The window smooths the spectrum and lowers the squared sum slightly; rescale so the
    // interior mean of m_psi_d is 1.
    double sum = 0;
    size_t cnt = 0;
    for (size_t i = 0; i < nb; ++i)
      if (bank.interior[i]) sum += bank.m_psi_d[i], ++cnt;
    if (cnt > 0 && sum > 0) {
      const double g = 1.0 / std::sqrt(sum / cnt);
      for (auto& f : bank.filters)
        for (auto& z : f) z *= g;
      finalize_bank(bank);
    }
  }
  return bank;
}

struct ConditionDiagnostics {
  double sup_m, inf_m, cond_bound;
};

/// sup/inf of m_psi_d over the interior annulus and the bound sqrt(sup/inf) on cond(W).
inline ConditionDiagnostics condition_diagnostics(const std::vector<double>& m_psi_d,
                                                  const std::vector<uint8_t>& interior) {
  double sup = 0, inf = std::numeric_limits<double>::infinity();
  bool any = false;
  for (size_t i = 0; i < m_psi_d.size(); ++i)
    if (interior[i]) {
      sup = std::max(sup, m_psi_d[i]);
      inf = std::min(inf, m_psi_d[i]);
      any = true;
    }
  if (!any || !(inf > 0)) throw RuntimeError("inadmissible wavelet: inf of m_psi_d over interior annulus <= 0");
  return {sup, inf, std::sqrt(sup / inf)};
}

inline ConditionDiagnostics condition_diagnostics(const WaveletBank& bank) {
  return condition_diagnostics(bank.m_psi_d, bank.interior);
}

/// Fraction of filter energy outside [rho-, rho+], worst case over the bank.
inline double max_annulus_leakage(const WaveletBank& bank) {
  const auto radii = bin_radii(bank.params.width, bank.params.height);
  double worst = 0;
  for (const auto& f : bank.filters) {
    double in = 0, out = 0;
    for (size_t i = 0; i < f.size(); ++i)
      (radii[i] >= bank.params.rho_minus && radii[i] <= bank.params.rho_plus ? in : out) += std::norm(f[i]);
    if (in + out > 0) worst = std::max(worst, out / (in + out));
  }
  return worst;
}

namespace io {

inline constexpr char kBankMagic[4] = {'M', 'S', 'W', 'B'};
inline constexpr int32_t kBankVersion = 1;

/// Header (magic, version, params in fixed order) + LE float32 filters (re, im) + m_psi_d.
inline void save_bank(const std::string& path, const WaveletBank& bank) {
  const auto& p = bank.params;
  std::vector<unsigned char> out;
  auto put = [&](const void* d, size_t n) {
    const auto* c = static_cast<const unsigned char*>(d);
    out.insert(out.end(), c, c + n);
  };
  put(kBankMagic, 4);
  put(&kBankVersion, 4);
  const int32_t ints[5] = {p.n_orientations, p.n_scales, p.spline_order, p.width, p.height};
  put(ints, sizeof ints);
  const double dbl[6] = {p.rho_minus, p.rho_plus, p.sigma_s, p.recon_floor, p.a_minus, p.a_plus};
  put(dbl, sizeof dbl);
  for (const auto& f : bank.filters)
    for (const auto& z : f) {
      const float re = static_cast<float>(z.real()), im = static_cast<float>(z.imag());
      put(&re, 4);
      put(&im, 4);
    }
  for (double v : bank.m_psi_d) {
    const float fv = static_cast<float>(v);
    put(&fv, 4);
  }
  write_file(path, out.data(), out.size());
}

inline WaveletBank load_bank(const std::string& path) {
  const auto buf = read_file(path);
  size_t pos = 0;
  auto get = [&](void* d, size_t n) {
    if (pos + n > buf.size()) throw IoError("truncated bank file '" + path + "' at byte " + std::to_string(pos));
    std::memcpy(d, buf.data() + pos, n);
    pos += n;
  };
  char magic[4];
  int32_t version;
  get(magic, 4);
  get(&version, 4);
  if (std::memcmp(magic, kBankMagic, 4) != 0 || version != kBankVersion)
    throw IoError("unsupported format in '" + path + "': not a wavelet bank v1");
  int32_t ints[5];
  double dbl[6];
  get(ints, sizeof ints);
  get(dbl, sizeof dbl);
  WaveletBank bank;
  auto& p = bank.params;
  p.n_orientations = ints[0];
  p.n_scales = ints[1];
  p.spline_order = ints[2];
  p.width = ints[3];
  p.height = ints[4];
  p.rho_minus = dbl[0];
  p.rho_plus = dbl[1];
  p.sigma_s = dbl[2];
  p.recon_floor = dbl[3];
  p.a_minus = dbl[4];
  p.a_plus = dbl[5];
  validate(p);
  const size_t nb = static_cast<size_t>(p.width) * p.height;
  bank.filters.assign(static_cast<size_t>(p.n_orientations) * p.n_scales, CField(nb));
  for (auto& f : bank.filters)
    for (auto& z : f) {
      float re, im;
      get(&re, 4);
      get(&im, 4);
      z = {re, im};
    }
  finalize_bank(bank);
  return bank;
}

}  // namespace io
}  // namespace msos
