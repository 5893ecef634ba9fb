#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

namespace msos {

using cplx = std::complex<double>;
using CField = std::vector<cplx>;

/// Signed angular frequency of DFT bin u on an axis of length n.
inline double bin_frequency(int u, int n) {
  const int s = (u <= (n - 1) / 2) ? u : u - n;
  return 2.0 * std::numbers::pi * s / n;
}

/// Cached 2D complex FFT on row-major (height x width) arrays.
/// Plans are created once per size under a lock; execution is reentrant.
class Fft2d {
 public:
  static const Fft2d& get(int width, int height) {
    static std::mutex mtx;
    static std::map<std::pair<int, int>, Fft2d*> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto& p = cache[{width, height}];
    if (!p) p = new Fft2d(width, height);
    return *p;
  }

  void forward(const cplx* in, cplx* out) const {
    if (in == out) {
      CField tmp(in, in + static_cast<size_t>(w_) * h_);
      forward(tmp.data(), out);
      return;
    }
    fftw_execute_dft(fwd_, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
  }
  /// Normalized inverse (includes the 1/(width*height) factor).
  void inverse(const cplx* in, cplx* out) const {
    if (in == out) {
      CField tmp(in, in + static_cast<size_t>(w_) * h_);
      inverse(tmp.data(), out);
      return;
    }
    fftw_execute_dft(inv_, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
    const double s = 1.0 / (static_cast<double>(w_) * h_);
    for (int i = 0; i < w_ * h_; ++i) out[i] *= s;
  }

  CField forward(const CField& in) const {
    CField out(in.size());
    forward(in.data(), out.data());
    return out;
  }
  CField inverse(const CField& in) const {
    CField out(in.size());
    inverse(in.data(), out.data());
    return out;
  }
  CField forward_real(const std::vector<double>& in) const {
    CField c(in.begin(), in.end()), out(c.size());
    forward(c.data(), out.data());
    return out;
  }

  int width() const { return w_; }
  int height() const { return h_; }

 private:
  Fft2d(int w, int h) : w_(w), h_(h) {
    CField a(static_cast<size_t>(w) * h), b(a.size());
    auto* pa = reinterpret_cast<fftw_complex*>(a.data());
    auto* pb = reinterpret_cast<fftw_complex*>(b.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_dft_2d(h, w, pa, pb, FFTW_FORWARD, flags);
    inv_ = fftw_plan_dft_2d(h, w, pa, pb, FFTW_BACKWARD, flags);
  }
  int w_, h_;
  fftw_plan fwd_{}, inv_{};
};

}  // namespace msos
