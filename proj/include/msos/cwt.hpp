#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fft.hpp"
#include "image.hpp"
#include "wavelets.hpp"

namespace msos {

/// Complex score U(x, y, theta_k, a_l), stored [y][x][k][l].
struct ScoreVolume {
  int width = 0, height = 0, n = 0, m = 0;
  std::vector<double> thetas, log_scales;
  uint64_t bank_hash = 0;
  CField data;

  ScoreVolume() = default;
  ScoreVolume(int w, int h, int n_, int m_) : width(w), height(h), n(n_), m(m_), data(static_cast<size_t>(w) * h * n_ * m_) {}

  size_t index(int x, int y, int k, int l) const {
    return ((static_cast<size_t>(y) * width + x) * n + k) * m + l;
  }
  cplx& at(int x, int y, int k, int l) { return data[index(x, y, k, l)]; }
  const cplx& at(int x, int y, int k, int l) const { return data[index(x, y, k, l)]; }

  /// Copy of the (k, l) plane, row-major.
  CField plane(int k, int l) const {
    CField out(static_cast<size_t>(width) * height);
    const size_t stride = static_cast<size_t>(n) * m;
    for (size_t i = 0, j = static_cast<size_t>(k) * m + l; i < out.size(); ++i, j += stride) out[i] = data[j];
    return out;
  }
  void set_plane(int k, int l, const CField& p) {
    const size_t stride = static_cast<size_t>(n) * m;
    for (size_t i = 0, j = static_cast<size_t>(k) * m + l; i < p.size(); ++i, j += stride) data[j] = p[i];
  }
};

inline ScoreVolume empty_volume(const WaveletBank& bank) {
  const auto& p = bank.params;
  ScoreVolume u(p.width, p.height, p.n_orientations, p.n_scales);
  for (int k = 0; k < u.n; ++k) u.thetas.push_back(p.theta(k));
  for (int l = 0; l < u.m; ++l) u.log_scales.push_back(p.log_scale(l));
  u.bank_hash = bank.hash;
  return u;
}

inline void check_grid(const Image& f, const WaveletBank& bank) {
  if (f.width != bank.params.width || f.height != bank.params.height)
    throw ConfigError("image grid " + std::to_string(f.width) + "x" + std::to_string(f.height) +
                      " does not match bank grid " + std::to_string(bank.params.width) + "x" +
                      std::to_string(bank.params.height));
}

inline void check_volume(const ScoreVolume& u, const WaveletBank& bank) {
  if (u.width != bank.params.width || u.height != bank.params.height || u.n != bank.n() || u.m != bank.m())
    throw ConfigError("score volume dimensions do not match the bank");
}

/// Keeps DFT bins with rho_minus <= |omega| <= rho_plus.
inline Image annulus_project(const Image& f, double rho_minus, double rho_plus) {
  if (!(rho_minus > 0 && rho_minus < rho_plus && rho_plus <= std::numbers::pi))
    throw ConfigError("annulus radii must satisfy 0 < rho_minus < rho_plus <= pi");
  const auto& fft = Fft2d::get(f.width, f.height);
  CField s = fft.forward_real(f.data);
  const auto radii = bin_radii(f.width, f.height);
  for (size_t i = 0; i < s.size(); ++i)
    if (radii[i] < rho_minus || radii[i] > rho_plus) s[i] = 0.0;
  fft.inverse(s.data(), s.data());
  Image g(f.width, f.height);
  for (size_t i = 0; i < s.size(); ++i) g.data[i] = s[i].real();
  return g;
}

/// Projection onto the band the exact inverse reconstructs.
inline Image band_project(const Image& f, const WaveletBank& bank) {
  check_grid(f, bank);
  const auto& fft = Fft2d::get(f.width, f.height);
  CField s = fft.forward_real(f.data);
  for (size_t i = 0; i < s.size(); ++i)
    if (!bank.recon[i]) s[i] = 0.0;
  fft.inverse(s.data(), s.data());
  Image g(f.width, f.height);
  for (size_t i = 0; i < s.size(); ++i) g.data[i] = s[i].real();
  return g;
}

/// U_kl = IDFT(conj(hat_psi_kl) * DFT(f)).
inline ScoreVolume forward(const Image& f, const WaveletBank& bank) {
  check_grid(f, bank);
  const auto& fft = Fft2d::get(f.width, f.height);
  const CField fh = fft.forward_real(f.data);
  ScoreVolume u = empty_volume(bank);
  CField tmp(fh.size());
  for (int k = 0; k < u.n; ++k)
    for (int l = 0; l < u.m; ++l) {
      const CField& psi = bank.filter(k, l);
      for (size_t i = 0; i < fh.size(); ++i) tmp[i] = std::conj(psi[i]) * fh[i];
      fft.inverse(tmp.data(), tmp.data());
      u.set_plane(k, l, tmp);
    }
  return u;
}

/// Spectrum sum_kl DFT(U_kl) * hat_psi_kl.
inline CField adjoint_spectrum(const ScoreVolume& u, const WaveletBank& bank) {
  check_volume(u, bank);
  const auto& fft = Fft2d::get(u.width, u.height);
  CField acc(static_cast<size_t>(u.width) * u.height, 0.0), tmp;
  for (int k = 0; k < u.n; ++k)
    for (int l = 0; l < u.m; ++l) {
      tmp = fft.forward(u.plane(k, l));
      const CField& psi = bank.filter(k, l);
      for (size_t i = 0; i < acc.size(); ++i) acc[i] += tmp[i] * psi[i];
    }
  return acc;
}

/// f = IDFT(sum_kl DFT(U_kl) hat_psi_kl / (N M m_psi_d)) on the reconstruction band.
/// This is the single normalization site: with the sqrt(N M) filter scaling the
/// forward-inverse pair is exact wherever m_psi_d > 0.
inline Image inverse_exact(const ScoreVolume& u, const WaveletBank& bank) {
  CField s = adjoint_spectrum(u, bank);
  const double nm = static_cast<double>(bank.n()) * bank.m();
  for (size_t i = 0; i < s.size(); ++i) s[i] = bank.recon[i] ? s[i] / (nm * bank.m_psi_d[i]) : 0.0;
  const auto& fft = Fft2d::get(u.width, u.height);
  fft.inverse(s.data(), s.data());
  Image g(u.width, u.height);
  for (size_t i = 0; i < s.size(); ++i) g.data[i] = s[i].real();
  return g;
}

/// f ~ w * Re sum_kl U_kl with w = 1/(sqrt(N M) c_A c_B), c = integral of sqrt(B^k).
inline Image inverse_approx(const ScoreVolume& u, const WaveletBank& bank) {
  check_volume(u, bank);
  Image g(u.width, u.height);
  const size_t per = static_cast<size_t>(u.n) * u.m;
  for (size_t i = 0; i < g.size(); ++i) {
    double s = 0;
    for (size_t j = 0; j < per; ++j) s += u.data[i * per + j].real();
    g.data[i] = bank.approx_weight * s;
  }
  return g;
}

/// | sum_omega sum_kl |DFT U_kl|^2 / (N M m_psi_d) - ||f_band||^2 | / ||f_band||^2.
inline double plancherel_residual(const ScoreVolume& u, const Image& f, const WaveletBank& bank) {
  check_volume(u, bank);
  const auto& fft = Fft2d::get(u.width, u.height);
  const CField fh = fft.forward_real(f.data);
  std::vector<double> energy(fh.size(), 0.0);
  for (int k = 0; k < u.n; ++k)
    for (int l = 0; l < u.m; ++l) {
      const CField t = fft.forward(u.plane(k, l));
      for (size_t i = 0; i < t.size(); ++i) energy[i] += std::norm(t[i]);
    }
  const double nm = static_cast<double>(bank.n()) * bank.m();
  double eu = 0, ef = 0;
  for (size_t i = 0; i < fh.size(); ++i)
    if (bank.recon[i]) {
      eu += energy[i] / (nm * bank.m_psi_d[i]);
      ef += std::norm(fh[i]);
    }
  if (ef == 0) return eu == 0 ? 0.0 : 1.0;
  return std::abs(eu - ef) / ef;
}

/// Score of a quarter-turn rotated image: planes rotate and orientations shift by N/4.
inline ScoreVolume rotate_volume_quarter(const ScoreVolume& u) {
  if (u.n % 4 != 0 || u.width != u.height) throw ConfigError("quarter-turn needs N % 4 == 0 and a square grid");
  ScoreVolume r = u;
  const int s = u.n / 4, w = u.width;
  for (int y = 0; y < w; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < u.n; ++k)
        for (int l = 0; l < u.m; ++l) r.at(x, y, (k + s) % u.n, l) = u.at(y, (w - x) % w, k, l);
  return r;
}

namespace io {

/// Header "MSSV", version, dims, thetas, log-scales, bank hash; LE float32 (re, im) payload.
inline void save_volume(const std::string& path, const ScoreVolume& u) {
  std::vector<unsigned char> out;
  auto put = [&](const void* d, size_t n) {
    const auto* c = static_cast<const unsigned char*>(d);
    out.insert(out.end(), c, c + n);
  };
  put("MSSV", 4);
  const int32_t hdr[5] = {1, u.width, u.height, u.n, u.m};
  put(hdr, sizeof hdr);
  put(u.thetas.data(), 8 * u.thetas.size());
  put(u.log_scales.data(), 8 * u.log_scales.size());
  put(&u.bank_hash, 8);
  for (const auto& z : u.data) {
    const float re = static_cast<float>(z.real()), im = static_cast<float>(z.imag());
    put(&re, 4);
    put(&im, 4);
  }
  write_file(path, out.data(), out.size());
}

inline ScoreVolume load_volume(const std::string& path) {
  const auto buf = read_file(path);
  size_t pos = 0;
  auto get = [&](void* d, size_t n) {
    if (pos + n > buf.size()) throw IoError("truncated volume file '" + path + "' at byte " + std::to_string(pos));
    std::memcpy(d, buf.data() + pos, n);
    pos += n;
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, "MSSV", 4) != 0) throw IoError("unsupported format in '" + path + "': not a score volume");
  int32_t hdr[5];
  get(hdr, sizeof hdr);
  if (hdr[0] != 1 || hdr[1] <= 0 || hdr[2] <= 0 || hdr[3] <= 0 || hdr[4] <= 0)
    throw IoError("invalid score volume header in '" + path + "'");
  ScoreVolume u(hdr[1], hdr[2], hdr[3], hdr[4]);
  u.thetas.resize(u.n);
  u.log_scales.resize(u.m);
  get(u.thetas.data(), 8 * u.thetas.size());
  get(u.log_scales.data(), 8 * u.log_scales.size());
  get(&u.bank_hash, 8);
  for (auto& z : u.data) {
    float re, im;
    get(&re, 4);
    get(&im, 4);
    z = {re, im};
  }
  return u;
}

}  // namespace io
}  // namespace msos
