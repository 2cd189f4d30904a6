#pragma once

// Parameter retrieval from reconstructed fields.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptyparam/dipole.hpp"
#include "ptyparam/fft.hpp"
#include "ptyparam/masks.hpp"
#include "ptyparam/optimize.hpp"
#include "ptyparam/rect.hpp"

namespace ptyparam {

// ---------------------------------------------------------------- dipoles

/// Omega samples of a spectrum with their k coordinates, for fast model
/// evaluation.
struct SpectrumSamples {
  std::vector<double> kx, ky;
  std::vector<cplx> value;
  double norm2 = 0.0;  // sum |value|^2

  SpectrumSamples() = default;
  SpectrumSamples(const ComplexField& spectrum, const OmegaMask& omega) {
    const auto& g = spectrum.grid();
    if (g != omega.kgrid) throw std::invalid_argument("spectrum and Omega grids differ");
    for (std::size_t iy = 0; iy < g.ny; ++iy)
      for (std::size_t ix = 0; ix < g.nx; ++ix) {
        const std::size_t m = g.index(ix, iy);
        if (!omega.at(m)) continue;
        kx.push_back(g.x(ix));
        ky.push_back(g.y(iy));
        value.push_back(spectrum[m]);
        norm2 += std::norm(spectrum[m]);
      }
  }
  [[nodiscard]] std::size_t size() const { return value.size(); }
};

namespace detail {

/// Evaluates M(k) = sum_i alpha_i exp(-i k.r_i) at the samples; optionally
/// accumulates the derivative contraction sum_k conj(w_k) dM_k/dtheta.
inline void dipole_model(const std::vector<double>& theta, const SpectrumSamples& s, std::vector<cplx>& model) {
  model.assign(s.size(), cplx{});
  const std::size_t n = theta.size() / 3;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = theta[3 * i], x = theta[3 * i + 1], y = theta[3 * i + 2];
    for (std::size_t m = 0; m < s.size(); ++m) model[m] += a * std::polar(1.0, -(s.kx[m] * x + s.ky[m] * y));
  }
}

/// grad_p = Re sum_k conj(w_k) dM_k/dtheta_p.
inline void dipole_contract(const std::vector<double>& theta, const SpectrumSamples& s, const std::vector<cplx>& w,
                            std::vector<double>& grad) {
  const std::size_t n = theta.size() / 3;
  grad.assign(theta.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = theta[3 * i], x = theta[3 * i + 1], y = theta[3 * i + 2];
    double ga = 0.0, gx = 0.0, gy = 0.0;
    for (std::size_t m = 0; m < s.size(); ++m) {
      const cplx e = std::polar(1.0, -(s.kx[m] * x + s.ky[m] * y));
      const cplx we = std::conj(w[m]) * e;
      ga += we.real();
      // d/dx (a e) = -i kx a e, and Re(conj(w) (-i) z) = Im(conj(w) z)
      gx += a * s.kx[m] * we.imag();
      gy += a * s.ky[m] * we.imag();
    }
    grad[3 * i] = ga;
    grad[3 * i + 1] = gx;
    grad[3 * i + 2] = gy;
  }
}

}  // namespace detail

/// sum over Omega of |spectrum - sum_i alpha_i exp(-i k.r_i)|^2.
inline double dipole_cost(const std::vector<double>& theta, const SpectrumSamples& s,
                          std::vector<double>* grad = nullptr) {
  std::vector<cplx> m;
  detail::dipole_model(theta, s, m);
  double f = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    m[k] = s.value[k] - m[k];  // residual
    f += std::norm(m[k]);
  }
  if (grad) {
    detail::dipole_contract(theta, s, m, *grad);
    for (auto& g : *grad) g *= -2.0;
  }
  return f;
}

inline double dipole_cost(const std::vector<double>& theta, const ComplexField& spectrum, const OmegaMask& omega) {
  return dipole_cost(theta, SpectrumSamples(spectrum, omega));
}

/// Dipole cost minimized over a global phase of the spectrum:
/// |S|^2 + |M|^2 - 2 |<M, S>|. Reconstructions are only defined up to such a
/// phase, so this is the form used for fitting.
inline double dipole_cost_profiled(const std::vector<double>& theta, const SpectrumSamples& s,
                                   std::vector<double>* grad = nullptr) {
  std::vector<cplx> m;
  detail::dipole_model(theta, s, m);
  double mm = 0.0;
  cplx c{};
  for (std::size_t k = 0; k < s.size(); ++k) {
    mm += std::norm(m[k]);
    c += std::conj(m[k]) * s.value[k];
  }
  const double ac = std::abs(c);
  if (grad) {
    // d|M|^2 = 2 Re sum conj(M) dM, d|c| = Re sum conj(conj(u) S) dM, u = c/|c|
    const cplx u = ac > 0.0 ? c / ac : cplx(1.0, 0.0);
    std::vector<cplx> w(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) w[k] = m[k] - std::conj(u) * s.value[k];
    detail::dipole_contract(theta, s, w, *grad);
    for (auto& g : *grad) g *= 2.0;
  }
  return s.norm2 + mm - 2.0 * ac;
}

class DetectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Blob {
  double x = 0.0, y = 0.0;        // intensity centroid
  double peak_x = 0.0, peak_y = 0.0;
  double energy = 0.0;
  std::size_t pixels = 0;
};

/// 8-connected components above `rel_threshold` times the image peak, sorted
/// by decreasing energy.
inline std::vector<Blob> find_blobs(const RealField& img, double rel_threshold = 0.1) {
  const auto& g = img.grid();
  double peak = 0.0;
  for (double v : img) peak = std::max(peak, v);
  std::vector<Blob> blobs;
  if (!(peak > 0.0)) return blobs;
  const double thr = rel_threshold * peak;
  std::vector<std::int32_t> label(img.size(), -1);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < img.size(); ++start) {
    if (img[start] < thr || label[start] >= 0) continue;
    const auto id = static_cast<std::int32_t>(blobs.size());
    Blob b;
    double best = -1.0, sx = 0.0, sy = 0.0;
    stack.push_back(start);
    label[start] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t px = p % g.nx, py = p / g.nx;
      const double v = img[p];
      b.energy += v;
      ++b.pixels;
      sx += v * g.x(px);
      sy += v * g.y(py);
      if (v > best) {
        best = v;
        b.peak_x = g.x(px);
        b.peak_y = g.y(py);
      }
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const long qx = static_cast<long>(px) + dx, qy = static_cast<long>(py) + dy;
          if (qx < 0 || qy < 0 || qx >= static_cast<long>(g.nx) || qy >= static_cast<long>(g.ny)) continue;
          const std::size_t q = g.index(static_cast<std::size_t>(qx), static_cast<std::size_t>(qy));
          if (label[q] >= 0 || img[q] < thr) continue;
          label[q] = id;
          stack.push_back(q);
        }
    }
    b.x = sx / b.energy;
    b.y = sy / b.energy;
    blobs.push_back(b);
  }
  std::sort(blobs.begin(), blobs.end(), [](const Blob& a, const Blob& b) { return a.energy > b.energy; });
  return blobs;
}

struct InitialGuess {
  std::vector<double> theta;
  BoxBounds bounds;
};

/// Initial guess and bounds for n dipoles from the summed dark-field image.
///
/// Positions start at blob centroids and are bounded by the 5x5 pixel array
/// around each blob's brightest pixel. Strength is sqrt(blob energy / unit
/// energy), where `unit_image` is the summed image of a unit-strength dipole,
/// and is bounded to [guess/4, 4 guess]. Dipoles are ordered by x.
inline InitialGuess dipole_initial_guess(const RealField& sum_image, std::size_t n, const RealField& unit_image) {
  auto blobs = find_blobs(sum_image);
  if (blobs.size() < n) {
    std::ostringstream os;
    os << "expected " << n << " blobs, found " << blobs.size();
    for (const auto& b : blobs) os << " [(" << b.x << ", " << b.y << ") energy " << b.energy << "]";
    throw DetectionError(os.str());
  }
  blobs.resize(n);
  std::sort(blobs.begin(), blobs.end(), [](const Blob& a, const Blob& b) { return a.x < b.x; });
  const auto unit = find_blobs(unit_image);
  if (unit.empty()) throw DetectionError("unit-strength reference image is empty");
  const double e_unit = unit.front().energy;
  const double hx = 2.5 * sum_image.grid().dx, hy = 2.5 * sum_image.grid().dy;
  InitialGuess out;
  for (const auto& b : blobs) {
    const double a = std::sqrt(b.energy / e_unit);
    const double lx = b.peak_x - hx, ux = b.peak_x + hx, ly = b.peak_y - hy, uy = b.peak_y + hy;
    out.theta.insert(out.theta.end(), {a, std::clamp(b.x, lx, ux), std::clamp(b.y, ly, uy)});
    out.bounds.lower.insert(out.bounds.lower.end(), {a / 4.0, lx, ly});
    out.bounds.upper.insert(out.bounds.upper.end(), {a * 4.0, ux, uy});
  }
  return out;
}

/// Bounds around a given dipole guess: strengths within [g/4, 4g], positions
/// within +-2.5 detector pixels.
inline InitialGuess dipole_guess_bounds(const std::vector<double>& theta, double det_pixel) {
  InitialGuess out{theta, {}};
  const double h = 2.5 * det_pixel;
  for (std::size_t i = 0; i + 2 < theta.size(); i += 3) {
    out.bounds.lower.insert(out.bounds.lower.end(), {theta[i] / 4.0, theta[i + 1] - h, theta[i + 2] - h});
    out.bounds.upper.insert(out.bounds.upper.end(), {theta[i] * 4.0, theta[i + 1] + h, theta[i + 2] + h});
  }
  return out;
}

/// Sorts dipole triples by x so that fits can be compared to a truth.
inline std::vector<double> canonical_dipoles(std::vector<double> t) {
  const std::size_t n = t.size() / 3;
  std::vector<std::array<double, 3>> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = {t[3 * i], t[3 * i + 1], t[3 * i + 2]};
  std::sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a[1] < b[1]; });
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) t[3 * i + c] = d[i][c];
  return t;
}

/// Least-squares dipole fit to an Omega-masked spectrum. `profiled` removes
/// the global phase of the reconstruction.
inline FitResult fit_dipoles(const ComplexField& spectrum, const OmegaMask& omega, const InitialGuess& guess,
                             bool profiled = true, const MinimizeOptions& opt = {}) {
  const SpectrumSamples s(spectrum, omega);
  CostFunction f = [&](const std::vector<double>& t, std::vector<double>* g) {
    return profiled ? dipole_cost_profiled(t, s, g) : dipole_cost(t, s, g);
  };
  auto res = box_minimize(f, guess.theta, guess.bounds, opt);
  // canonical order, carrying the active flags along
  const std::size_t n = res.theta.size() / 3;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return res.theta[3 * a + 1] < res.theta[3 * b + 1]; });
  auto t = res.theta;
  auto act = res.active;
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      res.theta[3 * i + c] = t[3 * idx[i] + c];
      res.active[3 * i + c] = act[3 * idx[i] + c];
    }
  return res;
}

// -------------------------------------------------------------- rectangle

/// G = |S - model(params)|^2 with S the transform of (O_hat - 1).
inline double rect_cost_G(const std::vector<double>& theta, const ComplexField& spectrum,
                          std::vector<double>* grad = nullptr) {
  const auto p = RectParams::from_theta(theta);
  ComplexField model;
  double f = 0.0;
  if (!grad) {
    model = rect_spectrum_model(p, spectrum.grid());
    for (std::size_t i = 0; i < model.size(); ++i) f += std::norm(spectrum[i] - model[i]);
    return f;
  }
  const auto d = rect_spectrum_derivs(p, spectrum.grid(), &model);
  grad->assign(6, 0.0);
  for (std::size_t i = 0; i < model.size(); ++i) {
    const cplx r = spectrum[i] - model[i];
    f += std::norm(r);
    for (std::size_t q = 0; q < 6; ++q) (*grad)[q] -= 2.0 * (std::conj(r) * d[q][i]).real();
  }
  return f;
}

/// Transform of (O_hat - 1), the data side of G.
inline ComplexField rect_data_spectrum(const ComplexField& object) {
  ComplexField d(object.grid());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = object[i] - 1.0;
  return fft2(d);
}

/// Real-space form of G restricted to the samples that the scan constrains
/// and minimized over the global phase of the reconstruction:
/// sum_W |O|^2 + sum_W |M|^2 - 2 |sum_W conj(M) O|, M = 1 + ifft2(model).
/// With W everywhere and the phase fixed this equals G by Parseval.
class RectFitCost {
 public:
  RectFitCost(const ComplexField& object, std::vector<std::uint8_t> weight)
      : object_(object), w_(std::move(weight)), kgrid_(reciprocal_grid(object.grid())) {
    if (w_.empty()) w_.assign(object.size(), 1);
    if (w_.size() != object.size()) throw std::invalid_argument("RectFitCost: weight size mismatch");
    for (std::size_t i = 0; i < object.size(); ++i)
      if (w_[i]) oo_ += std::norm(object[i]);
  }

  double operator()(const std::vector<double>& theta, std::vector<double>* grad) const {
    const auto p = RectParams::from_theta(theta);
    ComplexField model;
    std::array<ComplexField, 6> d;
    if (grad) {
      d = rect_spectrum_derivs(p, kgrid_, &model);
      for (auto& f : d) ifft2_inplace(f.span(), f.nx(), f.ny());
    } else {
      model = rect_spectrum_model(p, kgrid_);
    }
    ifft2_inplace(model.span(), model.nx(), model.ny());
    double mm = 0.0;
    cplx c{};
    for (std::size_t i = 0; i < model.size(); ++i) {
      if (!w_[i]) continue;
      model[i] += 1.0;
      mm += std::norm(model[i]);
      c += std::conj(model[i]) * object_[i];
    }
    const double ac = std::abs(c);
    if (grad) {
      const cplx u = ac > 0.0 ? c / ac : cplx(1.0, 0.0);
      grad->assign(6, 0.0);
      for (std::size_t i = 0; i < model.size(); ++i) {
        if (!w_[i]) continue;
        const cplx r = model[i] - std::conj(u) * object_[i];
        for (std::size_t q = 0; q < 6; ++q) (*grad)[q] += 2.0 * (std::conj(r) * d[q][i]).real();
      }
    }
    return oo_ + mm - 2.0 * ac;
  }

 private:
  ComplexField object_;
  std::vector<std::uint8_t> w_;
  GridSpec kgrid_;
  double oo_ = 0.0;
};

/// Default search box around a rectangle guess (A, phi, a, b, x, y).
inline BoxBounds rect_default_bounds(const std::vector<double>& g) {
  const auto p = RectParams::from_theta(g);
  const double sx = std::max(5.0, 0.5 * p.a), sy = std::max(5.0, 0.5 * p.b);
  return {{1e-3, p.phi - std::numbers::pi, 0.5 * p.a, 0.5 * p.b, p.x - sx, p.y - sy},
          {1.0, p.phi + std::numbers::pi, 1.5 * p.a, 1.5 * p.b, p.x + sx, p.y + sy}};
}

/// Initial guess offset from `truth` in proportion to the rectangle size:
/// widths scaled by 0.96 and 1.077, positions moved by -0.149 a and +0.061 b,
/// A and phi raised by 0.03. For the 11.46 x 25.99 rectangle these are the
/// offsets of the guess (0.73, 3.17, 11, 28, 4, 3).
inline std::vector<double> proportional_rect_guess(const RectParams& t) {
  return {t.A + 0.03, t.phi + 0.03, 0.96 * t.a, 28.0 / 25.99 * t.b, t.x - 0.149 * t.a, t.y + 0.0608 * t.b};
}

inline double wrap_phase(double phi) {
  phi = std::fmod(phi, 2.0 * std::numbers::pi);
  return phi < 0.0 ? phi + 2.0 * std::numbers::pi : phi;
}

/// Fit the rectangle parameters to a reconstructed object. `weight` selects
/// the constrained samples (empty = all). phi is wrapped to [0, 2 pi).
inline FitResult fit_rect(const ComplexField& object, const std::vector<double>& theta0, const BoxBounds& bounds,
                          std::vector<std::uint8_t> weight = {}, const MinimizeOptions& opt = {}) {
  RectFitCost cost(object, std::move(weight));
  CostFunction f = [&](const std::vector<double>& t, std::vector<double>* g) { return cost(t, g); };
  auto res = box_minimize(f, theta0, bounds, opt);
  res.theta[1] = wrap_phase(res.theta[1]);
  return res;
}

// ------------------------------------------------------------------- csv

/// One row per parameter: parameter,truth,guess,lower,upper,retrieved,active.
inline std::string fit_csv(const std::vector<std::string>& names, const std::optional<std::vector<double>>& truth,
                           const std::vector<double>& guess, const BoxBounds& bounds, const FitResult& res) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "parameter,truth,guess,lower,upper,retrieved,active\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    os << names[i] << ',';
    if (truth) os << (*truth)[i];
    os << ',' << guess[i] << ',' << bounds.lower[i] << ',' << bounds.upper[i] << ',' << res.theta[i] << ','
       << (res.active[i] ? 1 : 0) << '\n';
  }
  return os.str();
}

inline std::vector<std::string> dipole_names(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 1; i <= n; ++i)
    for (const char* p : {"alpha", "x", "y"}) v.push_back(p + std::to_string(i));
  return v;
}

}  // namespace ptyparam
