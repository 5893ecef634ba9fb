#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "calculus.hpp"
#include "cwt.hpp"
#include "errors.hpp"
#include "fft.hpp"
#include "geometry.hpp"

namespace msos {

// ---------------------------------------------------------------------------
// Linear diffusion: Gaussian-estimate kernel, sampled stack, group convolution.
// ---------------------------------------------------------------------------

struct DiffusionParams {
  double d11 = 0.05;  // angular
  double d22 = 1.0;   // tangential spatial
  double d33 = 0.0;   // lateral spatial (not used by the estimate)
  double d44 = 0.01;  // scale
  double t = 0.7;
};

inline void validate(const DiffusionParams& p) {
  if (!(p.d11 >= 0 && p.d22 >= 0 && p.d33 >= 0 && p.d44 >= 0 && p.t >= 0))
    throw ConfigError("diffusivities and stopping time must be >= 0");
}

inline void require_kernel_params(const DiffusionParams& p) {
  if (!(p.t > 0 && p.d11 > 0 && p.d22 > 0 && p.d44 > 0))
    throw std::invalid_argument("kernel estimate needs t > 0 and d11, d22, d44 > 0");
}

/// 1 / (4 pi t^{5/2} d11 d22 sqrt(d44)).
inline double estimate_front_factor(const DiffusionParams& p) {
  require_kernel_params(p);
  return 1.0 / (4.0 * std::numbers::pi * std::pow(p.t, 2.5) * p.d11 * p.d22 * std::sqrt(p.d44));
}

/// E(g) = [theta^2/d11 + c2^2/d22 + tau^2/d44]^2 + c3^2 / (d11 d22 d44), c = log(g).
inline double estimate_exponent(const Sim2Point& g, const DiffusionParams& p) {
  const auto c = log_map(g);
  const double q = c.c1 * c.c1 / p.d11 + c.c2 * c.c2 / p.d22 + c.c4 * c.c4 / p.d44;
  return q * q + c.c3 * c.c3 / (p.d11 * p.d22 * p.d44);
}

/// K(g) = front * exp(-b E(g) / (4 t)); b = 1 is the uncalibrated estimate.
inline double gaussian_estimate_kernel(const Sim2Point& g, const DiffusionParams& p, double b = 1.0) {
  const double f = estimate_front_factor(p);
  return f * std::exp(-b * estimate_exponent(g, p) / (4.0 * p.t));
}

/// Lattice for sampled kernels and histograms: x, y = i dx (|i| <= rx), theta over the
/// full circle in n_theta bins, tau = j dtau (|j| <= rtau).
struct KernelGrid {
  double dx = 1.0;
  int rx = 10;
  int n_theta = 20;
  double dtau = 0.25;
  int rtau = 2;

  int nx() const { return 2 * rx + 1; }
  int ntau() const { return 2 * rtau + 1; }
  double dtheta() const { return 2 * std::numbers::pi / n_theta; }
  /// Signed orientation offset of bin j (j = 0..n_theta-1).
  double theta(int j) const { return wrap_angle(j * dtheta()); }
  size_t size() const { return static_cast<size_t>(nx()) * nx() * n_theta * ntau(); }
  /// Layout [tau][theta][y][x] with tau, y, x shifted by their radii.
  size_t index(int ix, int iy, int j, int it) const {
    return ((static_cast<size_t>(it + rtau) * n_theta + j) * nx() + (iy + rx)) * nx() + (ix + rx);
  }
  double bin_volume() const { return dx * dx * dtheta() * dtau; }
};

struct KernelStack {
  KernelGrid grid;
  DiffusionParams params;
  double b = 1.0;
  std::vector<double> data;  // unit discrete mass
  double raw_mass = 0;       // sum of samples before normalization
  double discarded = 0;      // mass fraction outside the grid, measured on an enlarged grid
  int required_rx = 0, required_rtau = 0;
};

inline constexpr double kTruncationTarget = 1e-3;

namespace detail {
// Raw samples on a grid; returns per-(Chebyshev radius) and per-|tau index| mass.
inline double sample_kernel(const KernelGrid& g, const DiffusionParams& p, double b, std::vector<double>* out,
                            std::vector<double>* by_radius, std::vector<double>* by_tau) {
  if (out) out->assign(g.size(), 0.0);
  if (by_radius) by_radius->assign(g.rx + 1, 0.0);
  if (by_tau) by_tau->assign(g.rtau + 1, 0.0);
  const double front = estimate_front_factor(p);
  double total = 0;
  for (int it = -g.rtau; it <= g.rtau; ++it)
    for (int j = 0; j < g.n_theta; ++j) {
      const double th = g.theta(j), tau = it * g.dtau;
      // Lower bound of the exponent from the theta and tau terms alone.
      const double q0 = th * th / p.d11 + tau * tau / p.d44;
      if (b * q0 * q0 / (4 * p.t) > 745) continue;
      for (int iy = -g.rx; iy <= g.rx; ++iy)
        for (int ix = -g.rx; ix <= g.rx; ++ix) {
          const double v = front * std::exp(-b * estimate_exponent({ix * g.dx, iy * g.dx, tau, th}, p) / (4 * p.t));
          if (out) (*out)[g.index(ix, iy, j, it)] = v;
          if (by_radius) (*by_radius)[std::max(std::abs(ix), std::abs(iy))] += v;
          if (by_tau) (*by_tau)[std::abs(it)] += v;
          total += v;
        }
    }
  return total;
}
}  // namespace detail

/// Samples the estimate on the lattice and normalizes it to unit mass. The discarded
/// mass is measured against a grid three times larger in x, y and tau; above 1e-3 the
/// call fails with the radii that would meet the target.
inline KernelStack build_kernel_stack(const DiffusionParams& p, const KernelGrid& grid, double b = 1.0) {
  require_kernel_params(p);
  if (grid.rx < 0 || grid.rtau < 0 || grid.n_theta < 1 || !(grid.dx > 0) || !(grid.dtau > 0))
    throw ConfigError("invalid kernel grid");
  if (!(b > 0)) throw ConfigError("kernel exponent factor b must be > 0");
  KernelStack s{grid, p, b, {}, 0, 0, 0, 0};
  s.raw_mass = detail::sample_kernel(grid, p, b, &s.data, nullptr, nullptr);

  KernelGrid big = grid;
  big.rx = 3 * grid.rx + 2;
  big.rtau = 3 * grid.rtau + 2;
  std::vector<double> by_r, by_t;
  const double big_mass = detail::sample_kernel(big, p, b, nullptr, &by_r, &by_t);
  s.discarded = big_mass > 0 ? std::max(0.0, 1.0 - s.raw_mass / big_mass) : 0.0;
  // Smallest radii whose complement holds less than half the target each.
  auto required = [&](const std::vector<double>& m) {
    double tail = big_mass;
    for (size_t r = 0; r < m.size(); ++r) {
      tail -= m[r];
      if (tail < 0.5 * kTruncationTarget * big_mass) return static_cast<int>(r);
    }
    return static_cast<int>(m.size());
  };
  s.required_rx = required(by_r);
  s.required_rtau = required(by_t);
  if (s.discarded >= kTruncationTarget)
    throw ConfigError("kernel truncation discards " + std::to_string(s.discarded) +
                      " of the mass; need rx >= " + std::to_string(s.required_rx) +
                      " and rtau >= " + std::to_string(s.required_rtau));
  if (s.raw_mass <= 0) throw RuntimeError("kernel stack has zero mass on the grid");
  for (double& v : s.data) v /= s.raw_mass;
  return s;
}

/// Left-invariant group convolution of a score with the Gaussian-estimate kernel:
/// out(x, k, l) = sum_{k', l'} sum_z S(z) U_{k'l'}(x - z) with
/// S(z) = K(e^{-tau_l'} R_{-theta_k'} z, theta_k - theta_k', tau_l - tau_l').
/// The stack fixes the truncation radius (rx dx at unit scale, grown by e^{tau_l'}) and
/// must share the score's orientation count and log-scale step. Every input slice is
/// normalized to unit mass over the output layers that exist, so the real-part sum is
/// preserved.
inline ScoreVolume linear_diffuse(const ScoreVolume& u, const KernelStack& ks) {
  const auto& g = ks.grid;
  const auto& p = ks.params;
  if (g.n_theta != u.n) throw ConfigError("kernel grid orientation count does not match the score");
  if (u.m > 1 && std::abs(u.log_scales[1] - u.log_scales[0] - g.dtau) > 1e-9 * g.dtau)
    throw ConfigError("kernel grid log-scale step does not match the score");
  if (u.thetas.size() != static_cast<size_t>(u.n) || u.log_scales.size() != static_cast<size_t>(u.m))
    throw ConfigError("score volume is missing its orientation or scale axes");

  const int w = u.width, h = u.height;
  const size_t np = static_cast<size_t>(w) * h;
  const auto& fft = Fft2d::get(w, h);
  std::vector<CField> uh(static_cast<size_t>(u.n) * u.m);
  for (int k = 0; k < u.n; ++k)
    for (int l = 0; l < u.m; ++l) uh[k * u.m + l] = fft.forward(u.plane(k, l));

  std::vector<CField> acc(uh.size(), CField(np, 0.0));
  const double front = estimate_front_factor(p);
  CField slice(np);
  std::vector<double> raw(np);
  for (int kp = 0; kp < u.n; ++kp)
    for (int lp = 0; lp < u.m; ++lp) {
      const double scale = std::exp(-u.log_scales[lp]);
      const double ct = std::cos(u.thetas[kp]), st = std::sin(u.thetas[kp]);
      const int rad = std::min({static_cast<int>(std::ceil(std::sqrt(2.0) * g.rx * g.dx / scale)), (w - 1) / 2,
                                (h - 1) / 2});
      struct Slice {
        int k, l;
        std::vector<double> v;
      };
      std::vector<Slice> slices;
      double mass = 0;
      for (int l = 0; l < u.m; ++l) {
        const double dtau = u.log_scales[l] - u.log_scales[lp];
        if (std::abs(dtau) > g.rtau * g.dtau + 1e-9) continue;
        for (int k = 0; k < u.n; ++k) {
          const double dth = wrap_angle(u.thetas[k] - u.thetas[kp]);
          const double q0 = dth * dth / p.d11 + dtau * dtau / p.d44;
          if (ks.b * q0 * q0 / (4 * p.t) > 745) continue;
          std::fill(raw.begin(), raw.end(), 0.0);
          double sm = 0;
          for (int zy = -rad; zy <= rad; ++zy)
            for (int zx = -rad; zx <= rad; ++zx) {
              const double lx = scale * (ct * zx + st * zy), ly = scale * (-st * zx + ct * zy);
              if (std::max(std::abs(lx), std::abs(ly)) > g.rx * g.dx + 1e-9) continue;
              const double v = front * std::exp(-ks.b * estimate_exponent({lx, ly, dtau, dth}, p) / (4 * p.t));
              raw[static_cast<size_t>((zy + h) % h) * w + (zx + w) % w] += v;
              sm += v;
            }
          if (sm == 0) continue;
          mass += sm;
          slices.push_back({k, l, raw});
        }
      }
      if (mass == 0) continue;
      const CField& src = uh[kp * u.m + lp];
      for (const auto& s : slices) {
        for (size_t i = 0; i < np; ++i) slice[i] = s.v[i] / mass;
        fft.forward(slice.data(), slice.data());
        CField& dst = acc[s.k * u.m + s.l];
        for (size_t i = 0; i < np; ++i) dst[i] += slice[i] * src[i];
      }
    }

  ScoreVolume out = u;
  for (int k = 0; k < u.n; ++k)
    for (int l = 0; l < u.m; ++l) {
      CField& a = acc[k * u.m + l];
      fft.inverse(a.data(), a.data());
      out.set_plane(k, l, a);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo oracle.
// ---------------------------------------------------------------------------

inline constexpr size_t kMcChunk = 8192;

/// Endpoints of G_{n+1} = G_n + sqrt(t / n_steps) sum_{i=1,2,4} eps_i sqrt(2 D_ii) e_i|G_n
/// with e1 = d_theta, e2 = e^tau (cos theta d_x + sin theta d_y), e4 = d_tau. Theta is not
/// wrapped. Samples are generated in fixed chunks, each with its own seeded stream, so the
/// result does not depend on the thread count.
inline std::vector<Sim2Point> mc_sample_sde(const DiffusionParams& p, size_t n_samples, int n_steps,
                                            uint64_t seed = 0, unsigned threads = 0) {
  validate(p);
  if (n_steps < 100) throw ConfigError("mc_sample_sde needs n_steps >= 100");
  if (n_samples < 1) throw ConfigError("mc_sample_sde needs n_samples >= 1");
  std::vector<Sim2Point> out(n_samples);
  const size_t n_chunks = (n_samples + kMcChunk - 1) / kMcChunk;
  const double ds = std::sqrt(p.t / n_steps);
  const double s1 = ds * std::sqrt(2 * p.d11), s2 = ds * std::sqrt(2 * p.d22), s4 = ds * std::sqrt(2 * p.d44);
  auto run = [&](size_t c0, size_t stride) {
    for (size_t c = c0; c < n_chunks; c += stride) {
      std::seed_seq ss{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(c),
                       static_cast<uint32_t>(c >> 32)};
      std::mt19937_64 rng(ss);
      std::normal_distribution<double> nd;
      const size_t end = std::min(n_samples, (c + 1) * kMcChunk);
      for (size_t i = c * kMcChunk; i < end; ++i) {
        double x = 0, y = 0, th = 0, tau = 0;
        for (int n = 0; n < n_steps; ++n) {
          const double e1 = nd(rng), e2 = nd(rng), e4 = nd(rng);
          const double a = std::exp(tau) * s2 * e2;
          x += a * std::cos(th);
          y += a * std::sin(th);
          th += s1 * e1;
          tau += s4 * e4;
        }
        out[i] = {x, y, tau, th};
      }
    }
  };
  unsigned nt = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  nt = static_cast<unsigned>(std::min<size_t>(nt, n_chunks));
  if (nt <= 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < nt; ++i) pool.emplace_back(run, i, nt);
    for (auto& th : pool) th.join();
  }
  return out;
}

struct Histogram {
  KernelGrid grid;
  std::vector<uint64_t> counts;
  size_t n_samples = 0;

  double mass(size_t i) const { return static_cast<double>(counts[i]) / n_samples; }
  double density(size_t i) const { return mass(i) / grid.bin_volume(); }
  /// Standard error of the density estimate in bin i.
  double density_se(size_t i) const {
    const double pm = mass(i);
    return std::sqrt(pm * (1 - pm) / n_samples) / grid.bin_volume();
  }
};

/// Nearest-lattice-point histogram; theta wraps, samples outside x, y, tau are dropped.
inline Histogram mc_kernel_histogram(const std::vector<Sim2Point>& s, const KernelGrid& g) {
  Histogram hst{g, std::vector<uint64_t>(g.size(), 0), s.size()};
  for (const auto& q : s) {
    const long ix = std::lround(q.x / g.dx), iy = std::lround(q.y / g.dx), it = std::lround(q.tau / g.dtau);
    if (std::abs(ix) > g.rx || std::abs(iy) > g.rx || std::abs(it) > g.rtau) continue;
    long j = std::lround(q.theta / g.dtheta()) % g.n_theta;
    if (j < 0) j += g.n_theta;
    ++hst.counts[g.index(static_cast<int>(ix), static_cast<int>(iy), static_cast<int>(j), static_cast<int>(it))];
  }
  return hst;
}

inline Sim2Point lattice_point(const KernelGrid& g, size_t i) {
  const int nx = g.nx();
  const int ix = static_cast<int>(i % nx) - g.rx;
  const int iy = static_cast<int>((i / nx) % nx) - g.rx;
  const int j = static_cast<int>((i / nx / nx) % g.n_theta);
  const int it = static_cast<int>(i / nx / nx / g.n_theta) - g.rtau;
  return {ix * g.dx, iy * g.dx, it * g.dtau, g.theta(j)};
}

/// Least-squares b on log densities with the front factor fixed:
/// log p_i = log F - b E_i / (4 t) over bins with at least min_hits samples.
inline double fit_b(const Histogram& h, const DiffusionParams& p, uint64_t min_hits = 100) {
  const double lf = std::log(estimate_front_factor(p));
  double num = 0, den = 0;
  for (size_t i = 0; i < h.counts.size(); ++i) {
    if (h.counts[i] < min_hits) continue;
    const double z = estimate_exponent(lattice_point(h.grid, i), p) / (4 * p.t);
    num += (lf - std::log(h.density(i))) * z;
    den += z * z;
  }
  if (den == 0) throw RuntimeError("b calibration needs bins away from the identity");
  return num / den;
}

struct BoundReport {
  size_t bins = 0, violations = 0;
  double worst = 0;  // max (p_mc - K_b) / se over checked bins
};

/// Checks K_b >= p_mc - z se on every bin with >= min_hits samples.
inline BoundReport check_upper_bound(const Histogram& h, const DiffusionParams& p, double b, double z = 2.0,
                                     uint64_t min_hits = 100) {
  BoundReport r;
  r.worst = -1e300;
  for (size_t i = 0; i < h.counts.size(); ++i) {
    if (h.counts[i] < min_hits) continue;
    ++r.bins;
    const double k = gaussian_estimate_kernel(lattice_point(h.grid, i), p, b);
    const double d = (h.density(i) - k) / h.density_se(i);
    r.worst = std::max(r.worst, d);
    if (d > z) ++r.violations;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Nonlinear coherence-enhancing diffusion on score layers.
// ---------------------------------------------------------------------------

struct CedParams {
  double rho_s = 12.0;      // tensor smoothing scale (t = sigma^2/2)
  double rho_tilde = 1.5;   // feature scale for the Hessian
  double beta = 0.058;
  double c = 0.08;
  double dt = 0.2;
  std::vector<double> times{0, 2, 6, 12};
  bool enforce_horizontality = false;
  // false: times[i] belongs to the i-th scale in ascending a (a^- first).
  // true: the list runs from the coarsest scale down, so the finest layer gets the last entry.
  bool times_fine_last = false;
};

inline double ced_dt_max(double beta) { return 0.25 / (1.0 + beta * beta); }

inline void validate(const CedParams& p) {
  if (!(p.rho_s > 0 && p.rho_tilde > 0 && p.beta > 0 && p.c > 0 && p.dt > 0))
    throw ConfigError("CED scales, beta, c and dt must be > 0");
  if (p.dt > ced_dt_max(p.beta))
    throw ConfigError("dt = " + std::to_string(p.dt) + " exceeds the stability bound dt_max = " +
                      std::to_string(ced_dt_max(p.beta)));
  for (double t : p.times)
    if (!(t >= 0)) throw ConfigError("CED times must be >= 0");
}

struct LayerPair {
  LayerField re, im;
};

namespace detail {

inline LayerField magnitude(const LayerPair& u) {
  LayerField m(u.re.width, u.re.height, u.re.n);
  for (size_t i = 0; i < m.data.size(); ++i) m.data[i] = std::hypot(u.re.data[i], u.im.data[i]);
  return m;
}

// Smoothed diffusion tensor in the orthonormal basis (beta d_theta, d_xi, d_eta);
// six components 00, 01, 02, 11, 12, 22.
inline std::array<LayerField, 6> ced_tensor(const LayerField& mag, const CedParams& p, double norm) {
  const auto H = hessian3(mag, p.beta, p.rho_tilde);
  const bool hor = p.enforce_horizontality;
  std::array<LayerField, 6> T;
  for (auto& f : T) f = LayerField(mag.width, mag.height, mag.n);
  for (size_t v = 0; v < H.size(); ++v) {
    const auto c = best_exp_fit(H[v], p.beta, hor);
    const auto [a, d] = gauge_angles(c, p.beta, hor);
    const Mat3 M = gauge_matrix(a, d);
    const double s = orientation_confidence(H[v], M) / norm;
    const double dac = std::exp(-s * s / p.c);
    // T = M^T diag(dac, 0, dac) M.
    const int idx[6][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
    for (int q = 0; q < 6; ++q) {
      const int i = idx[q][0], j = idx[q][1];
      T[q].data[v] = dac * (M[i] * M[j] + M[6 + i] * M[6 + j]);
    }
  }
  for (auto& f : T) f = spectral::to_field(spectral::smooth(spectral::to_spectrum(f), p.rho_s, p.rho_s * p.beta * p.beta));
  return T;
}

inline double confidence_scale(const LayerField& mag, const CedParams& p) {
  const auto H = hessian3(mag, p.beta, p.rho_tilde);
  const bool hor = p.enforce_horizontality;
  double mx = 0;
  for (const auto& r : gauge_frame(H, p.beta, hor, hor)) mx = std::max(mx, std::abs(r.confidence));
  return mx;
}

// Q f = sum_ij D^-_i (T_ij D^+_j f), D_theta scaled by beta.
inline LayerField ced_generator(const LayerField& f, const std::array<LayerField, 6>& T, double beta) {
  using namespace spectral;
  const auto s = to_spectrum(f);
  const Dir dirs[3] = {Dir::theta, Dir::xi, Dir::eta};
  const double w[3] = {beta, 1.0, 1.0};
  std::array<LayerField, 3> g;
  for (int j = 0; j < 3; ++j) g[j] = to_field(derivative(s, dirs[j], 1.0, Scheme::forward));
  const int tix[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  LayerSpectrum acc;
  for (int i = 0; i < 3; ++i) {
    LayerField flux(f.width, f.height, f.n);
    for (size_t v = 0; v < flux.data.size(); ++v) {
      double a = 0;
      for (int j = 0; j < 3; ++j) a += T[tix[i][j]].data[v] * w[j] * g[j].data[v];
      flux.data[v] = w[i] * a;
    }
    auto d = derivative(to_spectrum(flux), dirs[i], -1.0, Scheme::forward);
    if (i == 0) {
      acc = std::move(d);
    } else {
      for (int k = 0; k < f.n; ++k)
        for (size_t q = 0; q < acc.planes[k].size(); ++q) acc.planes[k][q] += d.planes[k][q];
    }
  }
  return to_field(acc);
}

}  // namespace detail

/// Explicit Euler CED on one scale layer. Re and Im evolve with the same tensor, built each
/// step from the current magnitude. The confidence is divided by its maximum over the
/// initial layer, so c acts on a scale-free quantity.
inline LayerPair ced_os(const LayerPair& u0, const CedParams& p, double t_end) {
  validate(p);
  if (!(t_end >= 0)) throw ConfigError("CED stopping time must be >= 0");
  if (t_end == 0) return u0;
  LayerPair u = u0;
  const double norm = detail::confidence_scale(detail::magnitude(u), p);
  if (norm == 0) return u0;
  const int steps = static_cast<int>(std::ceil(t_end / p.dt - 1e-9));
  const double dt = t_end / steps;
  for (int n = 0; n < steps; ++n) {
    const auto T = detail::ced_tensor(detail::magnitude(u), p, norm);
    for (LayerField* f : {&u.re, &u.im}) {
      const auto q = detail::ced_generator(*f, T, p.beta);
      for (size_t v = 0; v < f->data.size(); ++v) f->data[v] += dt * q.data[v];
    }
  }
  return u;
}

inline LayerPair extract_layer(const ScoreVolume& u, int l) {
  LayerPair p{LayerField(u.width, u.height, u.n), LayerField(u.width, u.height, u.n)};
  for (int k = 0; k < u.n; ++k)
    for (int y = 0; y < u.height; ++y)
      for (int x = 0; x < u.width; ++x) {
        const cplx z = u.at(x, y, k, l);
        p.re.at(x, y, k) = z.real();
        p.im.at(x, y, k) = z.imag();
      }
  return p;
}

inline void insert_layer(ScoreVolume& u, int l, const LayerPair& p) {
  for (int k = 0; k < u.n; ++k)
    for (int y = 0; y < u.height; ++y)
      for (int x = 0; x < u.width; ++x) u.at(x, y, k, l) = {p.re.at(x, y, k), p.im.at(x, y, k)};
}

/// CED-OS per scale layer up to its listed time; layers with time 0 are untouched.
inline ScoreVolume ced_sos(const ScoreVolume& u, const CedParams& p) {
  validate(p);
  if (p.times.size() != static_cast<size_t>(u.m))
    throw ConfigError("CED times list has " + std::to_string(p.times.size()) + " entries, score has " +
                      std::to_string(u.m) + " scales");
  ScoreVolume out = u;
  for (int l = 0; l < u.m; ++l) {
    const double t = p.times[p.times_fine_last ? u.m - 1 - l : l];
    if (t == 0) continue;
    insert_layer(out, l, ced_os(extract_layer(u, l), p, t));
  }
  return out;
}

}  // namespace msos
