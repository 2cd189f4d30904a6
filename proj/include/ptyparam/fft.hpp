#pragma once

// Centered, unitary 2D DFT on top of FFTW.
//
// Forward kernel is exp(-i k.r), both directions carry 1/sqrt(N) so that
// Parseval holds sample-for-sample. Index floor(N/2) is the origin in both
// domains; the shifts are folded into the copy in and out of the FFTW buffer.

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "ptyparam/grid.hpp"

namespace ptyparam {

namespace detail {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

/// Process-wide plan cache. FFTW planning is not thread-safe, execution with
/// the new-array interface is, so only lookups take the lock.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  PlanPair get(std::size_t nx, std::size_t ny) {
    std::lock_guard lock(mu_);
    auto key = std::make_pair(nx, ny);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* buf = fftw_alloc_complex(nx * ny);
    PlanPair p;
    const int n0 = static_cast<int>(ny);
    const int n1 = static_cast<int>(nx);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    p.forward = fftw_plan_dft_2d(n0, n1, buf, buf, FFTW_FORWARD, flags);
    p.backward = fftw_plan_dft_2d(n0, n1, buf, buf, FFTW_BACKWARD, flags);
    fftw_free(buf);
    plans_.emplace(key, p);
    return p;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [k, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.backward);
    }
  }
  std::mutex mu_;
  std::map<std::pair<std::size_t, std::size_t>, PlanPair> plans_;
};

/// Cyclic shift of a row-major nx*ny array by (sx, sy): out[(i+s) mod n] = in[i].
inline void cyclic_shift(const cplx* in, cplx* out, std::size_t nx, std::size_t ny, std::size_t sx, std::size_t sy) {
  for (std::size_t iy = 0; iy < ny; ++iy) {
    const cplx* src = in + iy * nx;
    cplx* dst = out + ((iy + sy) % ny) * nx;
    std::copy(src, src + (nx - sx), dst + sx);
    std::copy(src + (nx - sx), src + nx, dst);
  }
}

inline void centered_transform(const cplx* in, cplx* out, std::size_t nx, std::size_t ny, bool forward) {
  const auto plans = PlanCache::instance().get(nx, ny);
  const std::size_t cx = nx / 2, cy = ny / 2;
  thread_local std::vector<cplx> buf;
  buf.resize(nx * ny);
  // ifftshift: centered index n -> FFT index (n - c) mod N
  cyclic_shift(in, buf.data(), nx, ny, nx - cx, ny - cy);
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(forward ? plans.forward : plans.backward, p, p);
  cyclic_shift(buf.data(), out, nx, ny, cx, cy);
  const double norm = 1.0 / std::sqrt(static_cast<double>(nx * ny));
  for (std::size_t i = 0; i < nx * ny; ++i) out[i] *= norm;
}

}  // namespace detail

/// Forward transform; the result lives on reciprocal_grid(f.grid()).
inline ComplexField fft2(const ComplexField& f) {
  if (!all_finite(f)) throw InvalidField("fft2: non-finite input");
  ComplexField out(reciprocal_grid(f.grid()));
  detail::centered_transform(f.data(), out.data(), f.nx(), f.ny(), true);
  return out;
}

/// Inverse transform; maps a spectrum on grid g back to the grid whose
/// reciprocal is g.
inline ComplexField ifft2(const ComplexField& f) {
  if (!all_finite(f)) throw InvalidField("ifft2: non-finite input");
  ComplexField out(reciprocal_grid(f.grid()));
  detail::centered_transform(f.data(), out.data(), f.nx(), f.ny(), false);
  return out;
}

/// In-place variants for hot loops; grid bookkeeping is left to the caller.
inline void fft2_inplace(std::span<cplx> data, std::size_t nx, std::size_t ny) {
  detail::centered_transform(data.data(), data.data(), nx, ny, true);
}
inline void ifft2_inplace(std::span<cplx> data, std::size_t nx, std::size_t ny) {
  detail::centered_transform(data.data(), data.data(), nx, ny, false);
}

}  // namespace ptyparam
