#pragma once

// Dark-field Fourier ptychography of point scatterers.
//
// Each dipole i radiates alpha_i * exp(-i k.r_i) into the object spectrum. A
// tilted plane wave k_j shifts that spectrum across a fixed pupil Q, and the
// camera records |ifft2(Q(k) O(k - k_j))|^2. Lengths are in wavelengths.

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "ptyparam/fft.hpp"
#include "ptyparam/grid.hpp"
#include "ptyparam/masks.hpp"

namespace ptyparam {

struct Dipole {
  double alpha = 0.0;  // lambda^3
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Dipole&, const Dipole&) = default;
};

struct DipoleScene {
  std::vector<Dipole> dipoles;
  double a_in = 1.0;  // sqrt(photons); set by flux calibration
  double z = 0.0;

  [[nodiscard]] std::size_t size() const { return dipoles.size(); }

  /// Flattened parameter vector (alpha, x, y) per dipole.
  [[nodiscard]] std::vector<double> theta() const {
    std::vector<double> t;
    t.reserve(3 * dipoles.size());
    for (const auto& d : dipoles) t.insert(t.end(), {d.alpha, d.x, d.y});
    return t;
  }
  void set_theta(const std::vector<double>& t) {
    if (t.size() != 3 * dipoles.size()) throw std::invalid_argument("theta length does not match dipole count");
    for (std::size_t i = 0; i < dipoles.size(); ++i) dipoles[i] = {t[3 * i], t[3 * i + 1], t[3 * i + 2]};
  }
  static DipoleScene from_theta(const std::vector<double>& t, double a_in = 1.0, double z = 0.0) {
    DipoleScene s;
    s.dipoles.resize(t.size() / 3);
    s.a_in = a_in;
    s.z = z;
    s.set_theta(t);
    return s;
  }
};

/// Plane-wave illuminations at a fixed polar angle, azimuths 2*pi*j/J.
struct TiltSet {
  double polar = std::numbers::pi / 3.0;
  std::size_t count = 36;
  double k = two_pi;

  [[nodiscard]] std::vector<Vec2> vectors() const {
    std::vector<Vec2> v;
    const double r = k * std::sin(polar);
    for (std::size_t j = 0; j < count; ++j) {
      const double phi = two_pi * static_cast<double>(j) / static_cast<double>(count);
      v.push_back({r * std::cos(phi), r * std::sin(phi)});
    }
    return v;
  }

  /// Tilts rounded to the nearest reciprocal-grid node so that spectrum
  /// shifts are whole-sample moves.
  [[nodiscard]] std::vector<Vec2> snapped(const GridSpec& kgrid) const {
    auto v = vectors();
    for (auto& t : v) t = {std::round(t.x / kgrid.dx) * kgrid.dx, std::round(t.y / kgrid.dy) * kgrid.dy};
    return v;
  }
};

/// Sampling layout of the dark-field microscope.
///
/// `detector` is the object-referred camera grid, `pupil` its reciprocal, and
/// `spectrum` an extended k grid with the pupil's spacing that holds every
/// shifted pupil disk.
struct DarkFieldGeometry {
  std::size_t n_det = 200;
  double det_pixel = 0.5;
  std::size_t n_ext = 375;
  double na = 0.4;
  double polar = std::numbers::pi / 3.0;
  std::size_t n_tilts = 36;
  double k = two_pi;
  bool snap_tilts = true;

  [[nodiscard]] GridSpec detector() const { return {n_det, n_det, det_pixel, det_pixel}; }
  [[nodiscard]] GridSpec pupil() const { return reciprocal_grid(detector()); }
  [[nodiscard]] GridSpec spectrum() const {
    const auto p = pupil();
    return {n_ext, n_ext, p.dx, p.dy};
  }
  /// Real-space spacing of the extended object grid.
  [[nodiscard]] double object_spacing() const { return extended_spacing(n_det, det_pixel, n_ext); }
  [[nodiscard]] TiltSet tilt_set() const { return {polar, n_tilts, k}; }
  [[nodiscard]] std::vector<Vec2> tilts() const {
    return snap_tilts ? tilt_set().snapped(pupil()) : tilt_set().vectors();
  }
};

/// Pupil transfer factor 1_{kNA} * A_in k^2 exp(i kz |z|) / (8 i pi kz).
inline ComplexField q_factor(const GridSpec& kgrid, double z, double a_in, double na, double k) {
  if (!(na > 0.0 && na < 1.0)) throw std::invalid_argument("q_factor: NA must lie in (0,1)");
  ComplexField q(kgrid);
  const PupilMask mask{kgrid, na, k};
  const cplx denom_unit = cplx(0.0, 8.0 * std::numbers::pi);
  for (std::size_t iy = 0; iy < kgrid.ny; ++iy) {
    for (std::size_t ix = 0; ix < kgrid.nx; ++ix) {
      const Vec2 kp{kgrid.x(ix), kgrid.y(iy)};
      if (!mask.contains(kp)) continue;
      const double kz = std::sqrt(k * k - kp.x * kp.x - kp.y * kp.y);
      q(ix, iy) = a_in * k * k * std::exp(cplx(0.0, kz * std::abs(z))) / (denom_unit * kz);
    }
  }
  return q;
}

/// O(k) = sum_i alpha_i exp(-i k.r_i), evaluated analytically at `shift + k_grid`.
inline ComplexField object_spectrum(const DipoleScene& scene, const GridSpec& kgrid, Vec2 shift = {}) {
  ComplexField o(kgrid);
  std::vector<cplx> ex(kgrid.nx), ey(kgrid.ny);
  for (const auto& d : scene.dipoles) {
    for (std::size_t ix = 0; ix < kgrid.nx; ++ix) ex[ix] = std::polar(1.0, -(kgrid.x(ix) + shift.x) * d.x);
    for (std::size_t iy = 0; iy < kgrid.ny; ++iy) ey[iy] = d.alpha * std::polar(1.0, -(kgrid.y(iy) + shift.y) * d.y);
    for (std::size_t iy = 0; iy < kgrid.ny; ++iy)
      for (std::size_t ix = 0; ix < kgrid.nx; ++ix) o(ix, iy) += ex[ix] * ey[iy];
  }
  return o;
}

/// Exit-pupil field of dipole i alone under tilt `kj`: Q(k) alpha_i exp(-i (k - kj).r_i).
/// `q` must be the pupil factor for the scene's A_in.
inline ComplexField partial_pupil_field(const DipoleScene& scene, std::size_t i, Vec2 kj, const ComplexField& q) {
  if (i >= scene.size()) throw std::out_of_range("partial_pupil_field: dipole index out of range");
  DipoleScene one{{scene.dipoles[i]}, scene.a_in, scene.z};
  auto psi = object_spectrum(one, q.grid(), Vec2{} - kj);
  for (std::size_t m = 0; m < psi.size(); ++m) psi[m] *= q[m];
  return psi;
}

/// Psi_j(k) = Q(k) O(k - kj).
inline ComplexField pupil_field(const DipoleScene& scene, Vec2 kj, const ComplexField& q) {
  auto psi = object_spectrum(scene, q.grid(), Vec2{} - kj);
  for (std::size_t m = 0; m < psi.size(); ++m) psi[m] *= q[m];
  return psi;
}

/// Camera intensity for one tilt, on the detector grid reciprocal to q's grid.
inline RealField dark_field_intensity(const DipoleScene& scene, Vec2 kj, const ComplexField& q) {
  return intensity(ifft2(pupil_field(scene, kj, q)));
}

/// Photons collected from dipole i under normal incidence; q is the pupil
/// factor for the scene's A_in.
inline double photon_count_dip(const DipoleScene& scene, const ComplexField& q, std::size_t i = 0) {
  return energy(ifft2(partial_pupil_field(scene, i, {}, q)));
}

/// A_in such that photon_count_dip reaches `pn`.
inline double calibrate_a_in(const DipoleScene& scene, const DarkFieldGeometry& geo, double pn, std::size_t i = 0) {
  if (pn < 0.0) throw std::invalid_argument("calibrate_a_in: negative photon target");
  const auto q1 = q_factor(geo.pupil(), scene.z, 1.0, geo.na, geo.k);
  const double unit = photon_count_dip(scene, q1, i);
  if (!(unit > 0.0)) throw std::domain_error("calibrate_a_in: dipole collects no light");
  return std::sqrt(pn / unit);
}

/// Quasi-static sphere polarisability factor in the form
/// (eps_r - 2)/(eps_r + 1) * d^3.
inline cplx quasi_static_polarisability(cplx eps_r, double d) {
  return (eps_r - 2.0) / (eps_r + 1.0) * (d * d * d);
}

/// Detector field and its derivatives with respect to (alpha_i, x_i, y_i),
/// computed by sampling the pupil and inverse transforming.
class SampledPupil {
 public:
  SampledPupil(const DarkFieldGeometry& geo, double z = 0.0)
      : pupil_(geo.pupil()), q_unit_(q_factor(geo.pupil(), z, 1.0, geo.na, geo.k)), tilts_(geo.tilts()) {}
  SampledPupil(ComplexField q_unit, std::vector<Vec2> tilts)
      : pupil_(q_unit.grid()), q_unit_(std::move(q_unit)), tilts_(std::move(tilts)) {}

  [[nodiscard]] std::size_t views() const { return tilts_.size(); }
  [[nodiscard]] GridSpec detector() const { return reciprocal_grid(pupil_); }
  [[nodiscard]] const ComplexField& q_unit() const { return q_unit_; }
  [[nodiscard]] const std::vector<Vec2>& tilts() const { return tilts_; }

  /// psi receives the detector field; d (if non-null) the 3N derivative fields.
  void field(const DipoleScene& s, std::size_t j, ComplexField& psi, std::vector<ComplexField>* d = nullptr) const {
    const auto& g = pupil_;
    const Vec2 kj = tilts_.at(j);
    psi = ComplexField(g);
    if (d) d->assign(3 * s.size(), ComplexField(g));
    std::vector<cplx> ex(g.nx), ey(g.ny);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& dp = s.dipoles[i];
      for (std::size_t ix = 0; ix < g.nx; ++ix) ex[ix] = std::polar(1.0, -(g.x(ix) - kj.x) * dp.x);
      for (std::size_t iy = 0; iy < g.ny; ++iy) ey[iy] = std::polar(1.0, -(g.y(iy) - kj.y) * dp.y);
      for (std::size_t iy = 0; iy < g.ny; ++iy) {
        for (std::size_t ix = 0; ix < g.nx; ++ix) {
          const std::size_t m = g.index(ix, iy);
          if (q_unit_[m] == cplx{}) continue;
          const cplx b = s.a_in * q_unit_[m] * ex[ix] * ey[iy];
          psi[m] += dp.alpha * b;
          if (d) {
            (*d)[3 * i][m] = b;
            (*d)[3 * i + 1][m] = cplx(0.0, -(g.x(ix) - kj.x)) * dp.alpha * b;
            (*d)[3 * i + 2][m] = cplx(0.0, -(g.y(iy) - kj.y)) * dp.alpha * b;
          }
        }
      }
    }
    psi = ifft2(psi);
    if (d)
      for (auto& f : *d) f = ifft2(f);
  }

 private:
  GridSpec pupil_;
  ComplexField q_unit_;
  std::vector<Vec2> tilts_;
};

/// Continuum model of a flat (paraxial) pupil: the point response is the Airy
/// amplitude h(rho) = s Q0 kNA J1(kNA rho)/rho evaluated directly at detector
/// sample positions. s matches the unitary inverse DFT in the dense-sampling
/// limit, so intensities agree with SampledPupil up to pupil apodization.
class AiryPupil {
 public:
  AiryPupil(const DarkFieldGeometry& geo, double z = 0.0)
      : det_(geo.detector()), kna_(geo.k * geo.na), tilts_(geo.tilts()) {
    const auto p = geo.pupil();
    q0_ = geo.k * geo.k * std::exp(cplx(0.0, geo.k * std::abs(z))) / (cplx(0.0, 8.0 * std::numbers::pi) * geo.k);
    scale_ = two_pi / (std::sqrt(static_cast<double>(det_.size())) * p.dx * p.dy);
  }

  [[nodiscard]] std::size_t views() const { return tilts_.size(); }
  [[nodiscard]] GridSpec detector() const { return det_; }
  [[nodiscard]] const std::vector<Vec2>& tilts() const { return tilts_; }
  [[nodiscard]] double kna() const { return kna_; }
  /// Amplitude prefactor s*Q0 for A_in = 1.
  [[nodiscard]] cplx amplitude() const { return scale_ * q0_; }

  /// kNA J1(kNA rho)/rho, with its rho -> 0 limit.
  [[nodiscard]] double airy(double rho) const {
    const double u = kna_ * rho;
    if (u < 1e-8) return 0.5 * kna_ * kna_;
    return kna_ * std::cyl_bessel_j(1.0, u) / rho;
  }
  /// d/drho of airy(): -kNA^2 J2(kNA rho)/rho, zero at the origin.
  [[nodiscard]] double airy_slope(double rho) const {
    const double u = kna_ * rho;
    if (u < 1e-8) return 0.0;
    return -kna_ * kna_ * std::cyl_bessel_j(2.0, u) / rho;
  }

  void field(const DipoleScene& s, std::size_t j, ComplexField& psi, std::vector<ComplexField>* d = nullptr) const {
    const Vec2 kj = tilts_.at(j);
    psi = ComplexField(det_);
    if (d) d->assign(3 * s.size(), ComplexField(det_));
    const cplx amp = s.a_in * amplitude();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& dp = s.dipoles[i];
      const cplx ph = amp * std::polar(1.0, kj.x * dp.x + kj.y * dp.y);
      for (std::size_t iy = 0; iy < det_.ny; ++iy) {
        for (std::size_t ix = 0; ix < det_.nx; ++ix) {
          const double rx = det_.x(ix) - dp.x, ry = det_.y(iy) - dp.y;
          const double rho = std::hypot(rx, ry);
          const double h = airy(rho);
          const std::size_t m = det_.index(ix, iy);
          psi[m] += dp.alpha * ph * h;
          if (d) {
            const double slope = airy_slope(rho);
            const double gx = rho > 0.0 ? slope * rx / rho : 0.0;
            const double gy = rho > 0.0 ? slope * ry / rho : 0.0;
            (*d)[3 * i][m] = ph * h;
            (*d)[3 * i + 1][m] = dp.alpha * ph * (cplx(0.0, kj.x) * h - gx);
            (*d)[3 * i + 2][m] = dp.alpha * ph * (cplx(0.0, kj.y) * h - gy);
          }
        }
      }
    }
  }

 private:
  GridSpec det_;
  double kna_;
  std::vector<Vec2> tilts_;
  cplx q0_;
  double scale_ = 1.0;
};

}  // namespace ptyparam
