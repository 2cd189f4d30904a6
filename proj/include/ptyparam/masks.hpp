#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "ptyparam/grid.hpp"

namespace ptyparam {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  [[nodiscard]] double norm() const { return std::hypot(x, y); }
  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Indicator of the objective NA in the pupil: 1 for |k| <= k*NA.
struct PupilMask {
  GridSpec kgrid;
  double na = 0.0;
  double k = two_pi;

  [[nodiscard]] double cutoff() const { return k * na; }
  [[nodiscard]] bool contains(Vec2 kp) const { return kp.norm() <= cutoff() * (1.0 + 1e-12); }
  [[nodiscard]] RealField sample() const {
    RealField m(kgrid);
    for (std::size_t iy = 0; iy < kgrid.ny; ++iy)
      for (std::size_t ix = 0; ix < kgrid.nx; ++ix)
        m(ix, iy) = contains({kgrid.x(ix), kgrid.y(iy)}) ? 1.0 : 0.0;
    return m;
  }
};

/// Union of pupil disks shifted by each illumination tilt: the part of the
/// object spectrum that dark-field data can constrain.
struct OmegaMask {
  GridSpec kgrid;
  std::vector<Vec2> tilts;
  double na = 0.0;
  double k = two_pi;
  std::vector<std::uint8_t> inside;      // one byte per k sample
  std::vector<std::size_t> bright_field;  // indices of tilts with |k_j| <= k*NA

  [[nodiscard]] bool operator()(std::size_t ix, std::size_t iy) const { return inside[kgrid.index(ix, iy)] != 0; }
  [[nodiscard]] bool at(std::size_t i) const { return inside[i] != 0; }
  [[nodiscard]] std::size_t area() const {
    return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), std::uint8_t{1}));
  }
  [[nodiscard]] bool dark_field() const { return bright_field.empty(); }

  /// Radius of the hole around k = 0 guaranteed by the tilt geometry.
  [[nodiscard]] double hole_radius() const {
    double r = std::numeric_limits<double>::infinity();
    for (const auto& t : tilts) r = std::min(r, t.norm() - k * na);
    return std::max(r, 0.0);
  }

  void apply(ComplexField& f) const {
    for (std::size_t i = 0; i < f.size(); ++i)
      if (!inside[i]) f[i] = 0.0;
  }
};

inline OmegaMask make_omega(const std::vector<Vec2>& tilts, double na, double k, const GridSpec& kgrid) {
  if (tilts.empty()) throw std::invalid_argument("make_omega: empty tilt set");
  OmegaMask m{kgrid, tilts, na, k, std::vector<std::uint8_t>(kgrid.size(), 0), {}};
  const double r = k * na * (1.0 + 1e-12);
  for (std::size_t j = 0; j < tilts.size(); ++j)
    if (tilts[j].norm() <= k * na) m.bright_field.push_back(j);
  for (std::size_t iy = 0; iy < kgrid.ny; ++iy) {
    const double ky = kgrid.y(iy);
    for (std::size_t ix = 0; ix < kgrid.nx; ++ix) {
      const double kx = kgrid.x(ix);
      for (const auto& t : tilts) {
        if (std::hypot(kx + t.x, ky + t.y) <= r) {
          m.inside[kgrid.index(ix, iy)] = 1;
          break;
        }
      }
    }
  }
  return m;
}

}  // namespace ptyparam
