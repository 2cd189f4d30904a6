#pragma once

// Real-space ptychography of a single rectangle in a unit background.
//
//   O(r) = 1 + C rect_{a,b}(r - r1),   C = A exp(i phi) - 1
//
// A probe P is raster-scanned over O; each view records |fft2(P O_window)|^2.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptyparam/fft.hpp"
#include "ptyparam/grid.hpp"
#include "ptyparam/masks.hpp"

namespace ptyparam {

/// Rectangle parameters. Parameter-vector order is (A, phi, a, b, x, y).
struct RectParams {
  double a = 1.0;
  double b = 1.0;
  double x = 0.0;
  double y = 0.0;
  double A = 1.0;
  double phi = 0.0;

  static constexpr std::size_t n_params = 6;
  static constexpr std::array<const char*, 6> names{"A1", "phi1", "a1", "b1", "x1", "y1"};

  [[nodiscard]] cplx c() const { return std::polar(A, phi) - 1.0; }
  [[nodiscard]] std::vector<double> theta() const { return {A, phi, a, b, x, y}; }
  static RectParams from_theta(const std::vector<double>& t) {
    if (t.size() != n_params) throw std::invalid_argument("rectangle theta needs 6 entries");
    return {t[2], t[3], t[4], t[5], t[0], t[1]};
  }
  void validate() const {
    if (!(A > 0.0 && A <= 1.0)) throw std::invalid_argument("rectangle: A1 must lie in (0,1]");
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("rectangle: widths must be positive");
  }
};

inline std::vector<std::string> rect_names() { return {RectParams::names.begin(), RectParams::names.end()}; }

/// Unnormalized sinc, sin(u)/u.
inline double sinc(double u) {
  if (std::abs(u) < 1e-6) return 1.0 - u * u / 6.0;
  return std::sin(u) / u;
}

/// Crisp rasterization: cells whose centers lie inside or on the boundary get
/// A exp(i phi), all others 1.
inline ComplexField rasterize_rect(const RectParams& p, const GridSpec& g) {
  p.validate();
  const double hx = 0.5 * g.fov_x(), hy = 0.5 * g.fov_y();
  if (p.x - p.a / 2 < -hx || p.x + p.a / 2 > hx || p.y - p.b / 2 < -hy || p.y + p.b / 2 > hy)
    throw std::invalid_argument("rasterize_rect: rectangle exceeds the field of view");
  ComplexField o(g, cplx(1.0, 0.0));
  const cplx inside = std::polar(p.A, p.phi);
  for (std::size_t iy = 0; iy < g.ny; ++iy)
    for (std::size_t ix = 0; ix < g.nx; ++ix)
      if (std::abs(g.x(ix) - p.x) <= p.a / 2 && std::abs(g.y(iy) - p.y) <= p.b / 2) o(ix, iy) = inside;
  return o;
}

namespace detail {

/// Sampled-to-continuous normalization 1/(dx dy sqrt(N)) for a spectrum on kgrid.
inline double rect_norm(const GridSpec& kgrid) {
  const auto rg = reciprocal_grid(kgrid);
  return 1.0 / (rg.dx * rg.dy * std::sqrt(static_cast<double>(kgrid.size())));
}

// a sinc(a k/2) = 2 sin(a k/2)/k and its derivative in a, cos(a k/2).
inline double width_profile(double a, double k) { return a * sinc(0.5 * a * k); }
inline double width_profile_da(double a, double k) { return std::cos(0.5 * a * k); }

}  // namespace detail

/// Analytic spectrum of O - 1 under the unitary DFT:
/// C a b sinc(a kx/2) sinc(b ky/2) exp(-i k.r1) / (dx dy sqrt(N)).
inline ComplexField rect_spectrum_model(const RectParams& p, const GridSpec& kgrid) {
  ComplexField s(kgrid);
  const cplx c = p.c() * detail::rect_norm(kgrid);
  std::vector<cplx> fx(kgrid.nx), fy(kgrid.ny);
  for (std::size_t ix = 0; ix < kgrid.nx; ++ix) {
    const double kx = kgrid.x(ix);
    fx[ix] = detail::width_profile(p.a, kx) * std::polar(1.0, -kx * p.x);
  }
  for (std::size_t iy = 0; iy < kgrid.ny; ++iy) {
    const double ky = kgrid.y(iy);
    fy[iy] = detail::width_profile(p.b, ky) * std::polar(1.0, -ky * p.y);
  }
  for (std::size_t iy = 0; iy < kgrid.ny; ++iy)
    for (std::size_t ix = 0; ix < kgrid.nx; ++ix) s(ix, iy) = c * fx[ix] * fy[iy];
  return s;
}

/// Model spectrum together with its six parameter derivatives (A, phi, a, b, x, y).
inline std::array<ComplexField, 6> rect_spectrum_derivs(const RectParams& p, const GridSpec& kgrid,
                                                        ComplexField* model = nullptr) {
  const double n = detail::rect_norm(kgrid);
  const cplx c = p.c() * n;
  const cplx dc_da = std::polar(1.0, p.phi) * n;
  const cplx dc_dphi = cplx(0.0, 1.0) * std::polar(p.A, p.phi) * n;
  std::array<ComplexField, 6> d;
  for (auto& f : d) f = ComplexField(kgrid);
  if (model) *model = ComplexField(kgrid);
  std::vector<cplx> ex(kgrid.nx), ey(kgrid.ny);
  std::vector<double> wx(kgrid.nx), wy(kgrid.ny), wdx(kgrid.nx), wdy(kgrid.ny);
  for (std::size_t ix = 0; ix < kgrid.nx; ++ix) {
    const double kx = kgrid.x(ix);
    ex[ix] = std::polar(1.0, -kx * p.x);
    wx[ix] = detail::width_profile(p.a, kx);
    wdx[ix] = detail::width_profile_da(p.a, kx);
  }
  for (std::size_t iy = 0; iy < kgrid.ny; ++iy) {
    const double ky = kgrid.y(iy);
    ey[iy] = std::polar(1.0, -ky * p.y);
    wy[iy] = detail::width_profile(p.b, ky);
    wdy[iy] = detail::width_profile_da(p.b, ky);
  }
  for (std::size_t iy = 0; iy < kgrid.ny; ++iy) {
    for (std::size_t ix = 0; ix < kgrid.nx; ++ix) {
      const std::size_t m = kgrid.index(ix, iy);
      const cplx e = ex[ix] * ey[iy];
      const cplx s = c * wx[ix] * wy[iy] * e;
      d[0][m] = dc_da * wx[ix] * wy[iy] * e;
      d[1][m] = dc_dphi * wx[ix] * wy[iy] * e;
      d[2][m] = c * wdx[ix] * wy[iy] * e;
      d[3][m] = c * wx[ix] * wdy[iy] * e;
      d[4][m] = cplx(0.0, -kgrid.x(ix)) * s;
      d[5][m] = cplx(0.0, -kgrid.y(iy)) * s;
      if (model) (*model)[m] = s;
    }
  }
  return d;
}

/// Band-limited object 1 + ifft2(rect_spectrum_model): the sampled object whose
/// DFT is exactly the analytic model on the grid.
inline ComplexField band_limited_rect(const RectParams& p, const GridSpec& g) {
  auto o = ifft2(rect_spectrum_model(p, reciprocal_grid(g)));
  ComplexField out(g);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 + o[i];
  return out;
}

struct Probe {
  ComplexField field;
  double radius = 0.0;  // support radius in wavelengths
};

/// Gaussian-amplitude, flat-phase probe truncated to a circular support.
/// `sigma` is the amplitude standard deviation.
inline Probe gaussian_probe(const GridSpec& g, double sigma, double radius, double scale = 1.0) {
  Probe p{ComplexField(g), radius};
  for (std::size_t iy = 0; iy < g.ny; ++iy) {
    for (std::size_t ix = 0; ix < g.nx; ++ix) {
      const double r2 = g.x(ix) * g.x(ix) + g.y(iy) * g.y(iy);
      if (r2 <= radius * radius * (1.0 + 1e-12)) p.field(ix, iy) = scale * std::exp(-r2 / (2.0 * sigma * sigma));
    }
  }
  return p;
}

/// Amplitude sigma for a Gaussian whose intensity FWHM is `fwhm`.
inline double sigma_from_intensity_fwhm(double fwhm) { return fwhm / (2.0 * std::sqrt(std::log(2.0))); }

struct ScanPlan {
  std::vector<Vec2> shifts;                           // probe centers (wavelengths)
  std::vector<std::array<std::size_t, 2>> offsets;   // window origin in object samples
  double pitch = 0.0;
  double radius = 0.0;

  [[nodiscard]] std::size_t size() const { return shifts.size(); }
  /// Linear overlap of neighbouring support disks, 1 - pitch/(2 r0).
  [[nodiscard]] double overlap_ratio() const { return radius > 0.0 ? 1.0 - pitch / (2.0 * radius) : 0.0; }
};

/// n x n raster centered on the object origin. Shifts are rounded to whole
/// object samples so every view is an exact window of the object grid.
inline ScanPlan raster_scan(std::size_t n, double pitch, const GridSpec& object, const GridSpec& probe, double radius) {
  if (n == 0) throw std::invalid_argument("raster_scan: need at least one position");
  ScanPlan plan;
  plan.pitch = pitch;
  plan.radius = radius;
  const double half = 0.5 * static_cast<double>(n - 1);
  for (std::size_t iy = 0; iy < n; ++iy) {
    for (std::size_t ix = 0; ix < n; ++ix) {
      const long sx = std::lround((static_cast<double>(ix) - half) * pitch / object.dx);
      const long sy = std::lround((static_cast<double>(iy) - half) * pitch / object.dy);
      const long ox = static_cast<long>(object.cx()) + sx - static_cast<long>(probe.cx());
      const long oy = static_cast<long>(object.cy()) + sy - static_cast<long>(probe.cy());
      if (ox < 0 || oy < 0 || ox + static_cast<long>(probe.nx) > static_cast<long>(object.nx) ||
          oy + static_cast<long>(probe.ny) > static_cast<long>(object.ny))
        throw std::invalid_argument("raster_scan: probe window leaves the object grid");
      plan.shifts.push_back({static_cast<double>(sx) * object.dx, static_cast<double>(sy) * object.dy});
      plan.offsets.push_back({static_cast<std::size_t>(ox), static_cast<std::size_t>(oy)});
    }
  }
  return plan;
}

/// psi_j = P(r - R_j) O(r) on the probe window.
inline ComplexField exit_wave(const Probe& probe, const ComplexField& object, const ScanPlan& plan, std::size_t j) {
  const auto& pg = probe.field.grid();
  const auto [ox, oy] = plan.offsets.at(j);
  if (ox + pg.nx > object.nx() || oy + pg.ny > object.ny())
    throw std::invalid_argument("exit_wave: shifted probe leaves the object grid");
  ComplexField psi(pg);
  for (std::size_t iy = 0; iy < pg.ny; ++iy)
    for (std::size_t ix = 0; ix < pg.nx; ++ix) psi(ix, iy) = probe.field(ix, iy) * object(ox + ix, oy + iy);
  return psi;
}

inline RealField far_field_intensity(const ComplexField& psi) { return intensity(fft2(psi)); }

inline double photon_count_rect(const Probe& probe) { return energy(probe.field); }

/// Probe scale factor that makes photon_count_rect equal `pn`.
inline double calibrate_probe_scale(const Probe& probe, double pn) {
  if (pn < 0.0) throw std::invalid_argument("calibrate_probe_scale: negative photon target");
  const double e = photon_count_rect(probe);
  if (!(e > 0.0)) throw std::domain_error("calibrate_probe_scale: empty probe");
  return std::sqrt(pn / e);
}

/// (N dx / 2)^2 / (lambda z) with all lengths in the same unit.
inline double fresnel_number(std::size_t n, double dx, double wavelength, double z) {
  const double h = 0.5 * static_cast<double>(n) * dx;
  return h * h / (wavelength * z);
}

/// Object samples covered by at least one probe support.
inline std::vector<std::uint8_t> illuminated_mask(const Probe& probe, const ScanPlan& plan, const GridSpec& object) {
  std::vector<std::uint8_t> m(object.size(), 0);
  const auto& pg = probe.field.grid();
  for (const auto& [ox, oy] : plan.offsets)
    for (std::size_t iy = 0; iy < pg.ny; ++iy)
      for (std::size_t ix = 0; ix < pg.nx; ++ix)
        if (probe.field(ix, iy) != cplx{}) m[object.index(ox + ix, oy + iy)] = 1;
  return m;
}

/// Geometry of the rectangle experiment.
struct RectGeometry {
  std::size_t n_object = 90;
  std::size_t n_probe = 60;
  double dx = 1.0;
  double fwhm = 15.0;       // probe intensity FWHM
  double radius = 15.0;     // probe support radius
  std::size_t n_scan = 5;
  double pitch = 7.5;

  [[nodiscard]] GridSpec object() const { return {n_object, n_object, dx, dx}; }
  [[nodiscard]] GridSpec window() const { return {n_probe, n_probe, dx, dx}; }
  [[nodiscard]] Probe probe(double scale = 1.0) const {
    return gaussian_probe(window(), sigma_from_intensity_fwhm(fwhm), radius, scale);
  }
  [[nodiscard]] ScanPlan plan() const { return raster_scan(n_scan, pitch, object(), window(), radius); }
};

}  // namespace ptyparam
