#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptyparam {

using cplx = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Raised for malformed grids or fields (non-finite samples, bad shapes).
class InvalidField : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Uniform centered sampling grid. Lengths are in wavelength units.
///
/// Sample n sits at (n - center) * spacing with center = floor(N/2), so the
/// origin is always a sample and the same convention holds in reciprocal
/// space after a transform.
struct GridSpec {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double dx = 1.0;
  double dy = 1.0;

  GridSpec() = default;
  GridSpec(std::size_t nx_, std::size_t ny_, double dx_, double dy_)
      : nx(nx_), ny(ny_), dx(dx_), dy(dy_) {
    validate();
  }

  void validate() const {
    if (nx < 2 || ny < 2) throw InvalidField("grid needs at least 2 samples per axis");
    if (!(dx > 0.0) || !(dy > 0.0) || !std::isfinite(dx) || !std::isfinite(dy))
      throw InvalidField("grid spacing must be positive and finite");
  }

  [[nodiscard]] std::size_t size() const { return nx * ny; }
  [[nodiscard]] std::size_t cx() const { return nx / 2; }
  [[nodiscard]] std::size_t cy() const { return ny / 2; }
  [[nodiscard]] double x(std::size_t ix) const {
    return (static_cast<double>(ix) - static_cast<double>(cx())) * dx;
  }
  [[nodiscard]] double y(std::size_t iy) const {
    return (static_cast<double>(iy) - static_cast<double>(cy())) * dy;
  }
  [[nodiscard]] std::size_t index(std::size_t ix, std::size_t iy) const { return iy * nx + ix; }
  [[nodiscard]] double fov_x() const { return static_cast<double>(nx) * dx; }
  [[nodiscard]] double fov_y() const { return static_cast<double>(ny) * dy; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Grid of the centered DFT of a field sampled on `g`: dk = 2*pi / (N * dx).
inline GridSpec reciprocal_grid(const GridSpec& g) {
  g.validate();
  return GridSpec(g.nx, g.ny, two_pi / g.fov_x(), two_pi / g.fov_y());
}

/// Extended-FoV object grid for a scanning measurement: the object is
/// sampled with `n_ext` cells spanning the same reciprocal spacing as a
/// detector of `n_det` pixels with pitch `det_pixel`.
inline double extended_spacing(std::size_t n_det, double det_pixel, std::size_t n_ext) {
  return static_cast<double>(n_det) * det_pixel / static_cast<double>(n_ext);
}

/// Row-major (y outer) 2D sample array bound to a grid.
template <typename T>
class Field2D {
 public:
  Field2D() = default;
  explicit Field2D(const GridSpec& g, T fill = T{}) : grid_(g), data_(g.size(), fill) { g.validate(); }
  Field2D(const GridSpec& g, std::vector<T> data) : grid_(g), data_(std::move(data)) {
    g.validate();
    if (data_.size() != g.size()) throw InvalidField("field data length does not match grid");
  }

  [[nodiscard]] const GridSpec& grid() const { return grid_; }
  [[nodiscard]] std::size_t nx() const { return grid_.nx; }
  [[nodiscard]] std::size_t ny() const { return grid_.ny; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t ix, std::size_t iy) { return data_[grid_.index(ix, iy)]; }
  const T& operator()(std::size_t ix, std::size_t iy) const { return data_[grid_.index(ix, iy)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  [[nodiscard]] std::span<T> span() { return data_; }
  [[nodiscard]] std::span<const T> span() const { return data_; }
  [[nodiscard]] std::vector<T>& values() { return data_; }
  [[nodiscard]] const std::vector<T>& values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

 private:
  GridSpec grid_;
  std::vector<T> data_;
};

using ComplexField = Field2D<cplx>;
using RealField = Field2D<double>;

template <typename T>
bool all_finite(const Field2D<T>& f) {
  for (const auto& v : f) {
    if constexpr (std::is_same_v<T, cplx>) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    } else {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

inline RealField intensity(const ComplexField& f) {
  RealField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = std::norm(f[i]);
  return out;
}

/// Sum of |f|^2 (expected photons when f is a detector field).
inline double energy(const ComplexField& f) {
  double s = 0.0;
  for (const auto& v : f) s += std::norm(v);
  return s;
}

inline double sum(const RealField& f) {
  double s = 0.0;
  for (double v : f) s += v;
  return s;
}

}  // namespace ptyparam
