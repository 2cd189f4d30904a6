#pragma once

// Poisson likelihood, Fisher information and Cramer-Rao bounds.
//
// For Poisson counts with means I_p(theta) the Fisher matrix is
//   F_ab = sum_p (dI_p/dtheta_a)(dI_p/dtheta_b) / I_p,
// and with I = |psi|^2, dI = 2 Re(conj(psi) dpsi).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptyparam/dipole.hpp"
#include "ptyparam/fft.hpp"
#include "ptyparam/rect.hpp"

namespace ptyparam {

inline constexpr double intensity_floor = 1e-12;

/// -sum [n ln I - I - ln n!]. Counts must be nonnegative; I is floored at eps.
inline double poisson_nll(const RealField& counts, const RealField& model, double eps = intensity_floor,
                          RealField* grad = nullptr) {
  if (counts.size() != model.size()) throw std::invalid_argument("poisson_nll: shape mismatch");
  if (grad) *grad = RealField(model.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double n = counts[i];
    if (!(n >= 0.0)) throw std::invalid_argument("poisson_nll: negative count");
    const double I = std::max(model[i], eps);
    s += I - (n > 0.0 ? n * std::log(I) : 0.0) + std::lgamma(n + 1.0);
    if (grad) (*grad)[i] = 1.0 - n / I;
  }
  return s;
}

struct FisherMatrix {
  Eigen::MatrixXd m;
  std::vector<std::string> names;
  std::size_t floored = 0;  // pixels whose intensity hit the floor

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(m.rows()); }
  [[nodiscard]] double asymmetry() const {
    const double n = m.norm();
    return n > 0.0 ? (m - m.transpose()).norm() / n : 0.0;
  }
  [[nodiscard]] double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
  [[nodiscard]] bool is_psd() const { return min_eigenvalue() >= -1e-10 * m.norm(); }
};

namespace detail {

/// F += dI dI^T / I for one detector field and its parameter derivatives.
inline void accumulate_fisher(Eigen::MatrixXd& f, const ComplexField& psi, const std::vector<ComplexField>& d,
                              double eps, std::size_t& floored) {
  const auto np = static_cast<Eigen::Index>(d.size());
  Eigen::VectorXd di(np);
  for (std::size_t p = 0; p < psi.size(); ++p) {
    double I = std::norm(psi[p]);
    bool any = false;
    for (Eigen::Index a = 0; a < np; ++a) {
      di[a] = 2.0 * (std::conj(psi[p]) * d[static_cast<std::size_t>(a)][p]).real();
      any = any || di[a] != 0.0;
    }
    if (!any) continue;
    if (I < eps) {
      I = eps;
      ++floored;
    }
    f.selfadjointView<Eigen::Lower>().rankUpdate(di, 1.0 / I);
  }
}

inline void symmetrize(Eigen::MatrixXd& f) { f = f.selfadjointView<Eigen::Lower>(); }

}  // namespace detail

/// Fisher matrix of (alpha_i, x_i, y_i) for any dipole imager exposing
/// views() and field(scene, j, psi, &derivs).
template <class Imager>
FisherMatrix fisher_dipoles(const Imager& imager, const DipoleScene& scene, double eps = intensity_floor) {
  if (scene.size() == 0) throw std::invalid_argument("fisher_dipoles: empty scene");
  const auto n = static_cast<Eigen::Index>(3 * scene.size());
  FisherMatrix out{Eigen::MatrixXd::Zero(n, n), {}, 0};
  for (std::size_t i = 1; i <= scene.size(); ++i)
    for (const char* p : {"alpha", "x", "y"}) out.names.push_back(p + std::to_string(i));
  ComplexField psi;
  std::vector<ComplexField> d;
  double total = 0.0;
  for (std::size_t j = 0; j < imager.views(); ++j) {
    imager.field(scene, j, psi, &d);
    total += energy(psi);
    detail::accumulate_fisher(out.m, psi, d, eps, out.floored);
  }
  if (!(total > 0.0)) throw std::domain_error("fisher_dipoles: model intensity is identically zero");
  detail::symmetrize(out.m);
  return out;
}

/// Fisher matrix assembled from central differences of the intensities.
template <class Imager>
FisherMatrix fisher_dipoles_fd(const Imager& imager, const DipoleScene& scene, double rel_step = 1e-5,
                               double eps = intensity_floor) {
  const auto theta = scene.theta();
  const auto n = static_cast<Eigen::Index>(theta.size());
  FisherMatrix out{Eigen::MatrixXd::Zero(n, n), {}, 0};
  ComplexField psi, pp, pm;
  for (std::size_t j = 0; j < imager.views(); ++j) {
    imager.field(scene, j, psi);
    std::vector<ComplexField> dI(theta.size());
    for (std::size_t a = 0; a < theta.size(); ++a) {
      const double h = rel_step * (a % 3 == 0 ? std::abs(theta[a]) : 1.0);
      auto s = scene;
      auto t = theta;
      t[a] = theta[a] + h;
      s.set_theta(t);
      imager.field(s, j, pp);
      t[a] = theta[a] - h;
      s.set_theta(t);
      imager.field(s, j, pm);
      dI[a] = ComplexField(psi.grid());
      for (std::size_t p = 0; p < psi.size(); ++p) dI[a][p] = (std::norm(pp[p]) - std::norm(pm[p])) / (2.0 * h);
    }
    for (std::size_t p = 0; p < psi.size(); ++p) {
      double I = std::norm(psi[p]);
      if (I < eps) {
        I = eps;
        ++out.floored;
      }
      for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b <= a; ++b)
          out.m(a, b) += dI[static_cast<std::size_t>(a)][p].real() * dI[static_cast<std::size_t>(b)][p].real() / I;
    }
  }
  detail::symmetrize(out.m);
  return out;
}

struct SingleDipoleFisher {
  double alpha_alpha = 0.0;
  Eigen::Matrix2d rr = Eigen::Matrix2d::Zero();
};

/// Closed forms for one dipole behind a flat pupil:
///   I_aa = 4 sum_{p,j} |h(r_p - r_1)|^2
///   I_rr = 4 alpha^2 |s Q0 A_in|^2 kNA^4 sum_{p,j} J2(kNA rho)^2 / rho^2 * u u^T
/// with u the unit vector of r_p - r_1. trace(I_rr) is the scalar J2 sum.
inline SingleDipoleFisher fisher_single_dipole_closed(const AiryPupil& imager, const DipoleScene& scene) {
  if (scene.size() != 1) throw std::invalid_argument("fisher_single_dipole_closed: scene must hold one dipole");
  const auto& d = scene.dipoles[0];
  const auto g = imager.detector();
  const double c2 = std::norm(scene.a_in * imager.amplitude());
  const double kna = imager.kna();
  double haa = 0.0;
  Eigen::Matrix2d rr = Eigen::Matrix2d::Zero();
  for (std::size_t iy = 0; iy < g.ny; ++iy)
    for (std::size_t ix = 0; ix < g.nx; ++ix) {
      const double rx = g.x(ix) - d.x, ry = g.y(iy) - d.y;
      const double rho = std::hypot(rx, ry);
      const double h = imager.airy(rho);
      haa += c2 * h * h;
      if (kna * rho < 1e-8) continue;  // J2(u)^2/u^2 -> 0
      const double j2 = std::cyl_bessel_j(2.0, kna * rho);
      const double w = j2 * j2 / (rho * rho);
      Eigen::Vector2d u(rx / rho, ry / rho);
      rr += w * u * u.transpose();
    }
  const double views = static_cast<double>(imager.views());
  SingleDipoleFisher out;
  out.alpha_alpha = 4.0 * views * haa;
  out.rr = 4.0 * views * d.alpha * d.alpha * c2 * std::pow(kna, 4) * rr;
  return out;
}

/// Everything needed to evaluate the rectangle experiment for given parameters.
struct RectScene {
  RectParams params;
  Probe probe;
  ScanPlan plan;
  GridSpec object;

  [[nodiscard]] ComplexField object_field() const { return band_limited_rect(params, object); }
};

/// Fisher matrix of (A, phi, a, b, x, y) for the band-limited rectangle
/// object, from exact parameter derivatives of its spectrum.
inline FisherMatrix fisher_rect(const RectScene& sc, double eps = intensity_floor) {
  const auto kg = reciprocal_grid(sc.object);
  ComplexField s;
  auto ds = rect_spectrum_derivs(sc.params, kg, &s);
  ComplexField obj = ifft2(s);
  for (auto& v : obj) v += 1.0;
  for (auto& f : ds) f = ifft2(f);
  FisherMatrix out{Eigen::MatrixXd::Zero(6, 6), rect_names(), 0};
  std::vector<ComplexField> dpsi(6);
  for (std::size_t j = 0; j < sc.plan.size(); ++j) {
    auto psi = exit_wave(sc.probe, obj, sc.plan, j);
    for (std::size_t q = 0; q < 6; ++q) dpsi[q] = fft2(exit_wave(sc.probe, ds[q], sc.plan, j));
    psi = fft2(psi);
    detail::accumulate_fisher(out.m, psi, dpsi, eps, out.floored);
  }
  detail::symmetrize(out.m);
  return out;
}

/// Central-difference Fisher matrix of the rectangle experiment.
inline FisherMatrix fisher_rect_fd(const RectScene& sc, double step = 1e-5, double eps = intensity_floor) {
  const auto theta = sc.params.theta();
  FisherMatrix out{Eigen::MatrixXd::Zero(6, 6), rect_names(), 0};
  auto intensities = [&](const std::vector<double>& t) {
    const auto o = band_limited_rect(RectParams::from_theta(t), sc.object);
    std::vector<RealField> I;
    for (std::size_t j = 0; j < sc.plan.size(); ++j) I.push_back(far_field_intensity(exit_wave(sc.probe, o, sc.plan, j)));
    return I;
  };
  const auto I0 = intensities(theta);
  std::vector<std::vector<RealField>> dI(6);
  for (std::size_t a = 0; a < 6; ++a) {
    auto t = theta;
    t[a] = theta[a] + step;
    auto ip = intensities(t);
    t[a] = theta[a] - step;
    auto im = intensities(t);
    for (std::size_t j = 0; j < ip.size(); ++j)
      for (std::size_t p = 0; p < ip[j].size(); ++p) ip[j][p] = (ip[j][p] - im[j][p]) / (2.0 * step);
    dI[a] = std::move(ip);
  }
  for (std::size_t j = 0; j < I0.size(); ++j)
    for (std::size_t p = 0; p < I0[j].size(); ++p) {
      double I = I0[j][p];
      if (I < eps) {
        I = eps;
        ++out.floored;
      }
      for (Eigen::Index a = 0; a < 6; ++a)
        for (Eigen::Index b = 0; b <= a; ++b)
          out.m(a, b) += dI[static_cast<std::size_t>(a)][j][p] * dI[static_cast<std::size_t>(b)][j][p] / I;
    }
  detail::symmetrize(out.m);
  return out;
}

namespace detail {

/// Bilinear interpolation of a field at a continuous position (zero outside).
inline cplx bilinear(const ComplexField& f, double x, double y) {
  const auto& g = f.grid();
  const double fx = x / g.dx + static_cast<double>(g.cx());
  const double fy = y / g.dy + static_cast<double>(g.cy());
  const double x0 = std::floor(fx), y0 = std::floor(fy);
  const double tx = fx - x0, ty = fy - y0;
  auto at = [&](double ix, double iy) -> cplx {
    if (ix < 0 || iy < 0 || ix >= static_cast<double>(g.nx) || iy >= static_cast<double>(g.ny)) return 0.0;
    return f(static_cast<std::size_t>(ix), static_cast<std::size_t>(iy));
  };
  return (1 - tx) * (1 - ty) * at(x0, y0) + tx * (1 - ty) * at(x0 + 1, y0) + (1 - tx) * ty * at(x0, y0 + 1) +
         tx * ty * at(x0 + 1, y0 + 1);
}

/// Inverse DFT of a spectrum evaluated at an arbitrary point.
inline cplx nonuniform_idft(const ComplexField& spec, double x, double y) {
  const auto& g = spec.grid();
  std::vector<cplx> ey(g.ny), ex(g.nx);
  for (std::size_t i = 0; i < g.nx; ++i) ex[i] = std::polar(1.0, g.x(i) * x);
  for (std::size_t i = 0; i < g.ny; ++i) ey[i] = std::polar(1.0, g.y(i) * y);
  cplx s{};
  for (std::size_t iy = 0; iy < g.ny; ++iy) {
    cplx row{};
    for (std::size_t ix = 0; ix < g.nx; ++ix) row += spec(ix, iy) * ex[ix];
    s += row * ey[iy];
  }
  return s / std::sqrt(static_cast<double>(g.size()));
}

}  // namespace detail

/// Diagonal of the rectangle Fisher matrix from the edge-sampled closed
/// forms (unit-weight line sums, probe sampled bilinearly at the edges, phase
/// kernel ifft(F/conj F) evaluated by direct summation). I_phiphi is A^2 I_AA
/// in this form. Kept for comparison with fisher_rect.
inline std::array<double, 6> fisher_rect_edge_diagonal(const RectScene& sc) {
  const auto& p = sc.params;
  const cplx c = p.c();
  const auto obj = sc.object_field();
  const auto& g = sc.object;
  std::array<double, 6> out{};
  for (std::size_t j = 0; j < sc.plan.size(); ++j) {
    const Vec2 R = sc.plan.shifts[j];
    auto far = fft2(exit_wave(sc.probe, obj, sc.plan, j));
    ComplexField ratio(far.grid());
    for (std::size_t i = 0; i < far.size(); ++i) {
      const double a = std::abs(far[i]);
      ratio[i] = a > 0.0 ? far[i] / std::conj(far[i]) : cplx{};
    }
    const auto kernel = ifft2(ratio);
    // K at a point given in object coordinates, shifted into the window frame
    auto K = [&](double x, double y) { return detail::nonuniform_idft(ratio, x - R.x, y - R.y); };
    auto Pj = [&](double x, double y) { return detail::bilinear(sc.probe.field, x - R.x, y - R.y); };

    // A: sums over the rectangle interior on the object grid
    double t1 = 0.0, t2 = 0.0;
    const auto& pg = sc.probe.field.grid();
    const auto [ox, oy] = sc.plan.offsets[j];
    for (std::size_t iy = 0; iy < pg.ny; ++iy)
      for (std::size_t ix = 0; ix < pg.nx; ++ix) {
        const double x = g.x(ox + ix), y = g.y(oy + iy);
        if (std::abs(x - p.x) > p.a / 2 || std::abs(y - p.y) > p.b / 2) continue;
        const cplx pp = sc.probe.field(ix, iy);
        t1 += std::norm(pp);
        t2 += (kernel(ix, iy) * std::polar(1.0, -2.0 * p.phi) * std::conj(pp) * std::conj(pp)).real();
      }
    out[0] += 2.0 * t1 + 2.0 * t2;

    // a/x from the x edges (lines of constant y), b/y from the y edges
    auto edge_terms = [&](bool along_x) {
      double s_abs = 0.0, s_plus = 0.0, s_minus = 0.0, s_mid = 0.0;
      const double w = along_x ? p.a : p.b;
      const double c0 = along_x ? p.x : p.y;
      const double lo = along_x ? p.y - p.b / 2 : p.x - p.a / 2;
      const double hi = along_x ? p.y + p.b / 2 : p.x + p.a / 2;
      const std::size_t n = along_x ? g.ny : g.nx;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = along_x ? g.y(i) : g.x(i);
        if (t < lo || t > hi) continue;
        auto at = [&](double e, double tt) { return along_x ? std::pair{e, tt} : std::pair{tt, e}; };
        const auto [xp, yp] = at(c0 + w / 2, t);
        const auto [xm, ym] = at(c0 - w / 2, t);
        const cplx pp = Pj(xp, yp), pm = Pj(xm, ym);
        const cplx cc = std::conj(c) * std::conj(c);
        s_abs += std::norm(c) * (std::norm(pp) + std::norm(pm));
        const auto [x2p, y2p] = at(2 * c0 + w, t);
        const auto [x2m, y2m] = at(2 * c0 - w, t);
        const auto [x20, y20] = at(2 * c0, t);
        s_plus += (cc * K(x2p, y2p) * std::conj(pp) * std::conj(pp)).real();
        s_minus += (cc * K(x2m, y2m) * std::conj(pm) * std::conj(pm)).real();
        s_mid += (cc * K(x20, y20) * std::conj(pp) * std::conj(pm)).real();
      }
      return std::array<double, 4>{s_abs, s_plus, s_minus, s_mid};
    };
    const auto ex = edge_terms(true);
    const auto ey = edge_terms(false);
    out[2] += 0.5 * (ex[0] + ex[1] + ex[2]) + ex[3];
    out[4] += 2.0 * (ex[0] + ex[1] + ex[2]) - 4.0 * ex[3];
    out[3] += 0.5 * (ey[0] + ey[1] + ey[2]) + ey[3];
    out[5] += 2.0 * (ey[0] + ey[1] + ey[2]) - 4.0 * ey[3];
  }
  out[1] = p.A * p.A * out[0];
  return out;
}

struct CrlbReport {
  std::vector<std::string> names;
  std::vector<double> crlb;
  double pn = 0.0;
  double condition = 0.0;
  bool pseudo_inverse = false;
  bool diagonal_only = false;
};

/// Diagonal of the inverse Fisher matrix via a symmetric eigendecomposition.
/// Eigenvalues below 1e-12 lambda_max are dropped (pseudo-inverse).
inline CrlbReport crlb(const FisherMatrix& f, double pn = 0.0, bool diagonal_only = false) {
  if (f.m.rows() != f.m.cols()) throw std::invalid_argument("crlb: matrix is not square");
  if (f.asymmetry() > 1e-10) throw std::invalid_argument("crlb: matrix is not symmetric");
  CrlbReport r;
  r.names = f.names;
  r.pn = pn;
  r.diagonal_only = diagonal_only;
  const auto n = f.m.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.m);
  const auto& ev = es.eigenvalues();
  const double lmax = ev.maxCoeff(), lmin = ev.minCoeff();
  r.condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (diagonal_only) {
    for (Eigen::Index i = 0; i < n; ++i) r.crlb.push_back(f.m(i, i) > 0.0 ? 1.0 / f.m(i, i) : std::numeric_limits<double>::infinity());
    return r;
  }
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ev[i] > 1e-12 * lmax) {
      inv[i] = 1.0 / ev[i];
    } else {
      r.pseudo_inverse = true;
    }
  }
  const Eigen::MatrixXd& V = es.eigenvectors();
  for (Eigen::Index i = 0; i < n; ++i) r.crlb.push_back((V.row(i).array().square() * inv.transpose().array()).sum());
  return r;
}

/// CRLB of a parameter subset with every other parameter treated as known:
/// the inverse of the corresponding diagonal block.
inline CrlbReport crlb_block(const FisherMatrix& f, const std::vector<std::size_t>& idx, double pn = 0.0) {
  FisherMatrix sub;
  const auto k = static_cast<Eigen::Index>(idx.size());
  sub.m.resize(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    sub.names.push_back(f.names.at(idx[static_cast<std::size_t>(a)]));
    for (Eigen::Index b = 0; b < k; ++b)
      sub.m(a, b) = f.m(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(a)]), static_cast<Eigen::Index>(idx[static_cast<std::size_t>(b)]));
  }
  return crlb(sub, pn);
}

inline std::string fisher_csv(const FisherMatrix& f) {
  std::ostringstream os;
  os << std::setprecision(12) << "row";
  for (const auto& n : f.names) os << ',' << n;
  os << '\n';
  for (Eigen::Index i = 0; i < f.m.rows(); ++i) {
    os << f.names.at(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < f.m.cols(); ++j) os << ',' << f.m(i, j);
    os << '\n';
  }
  return os.str();
}

inline std::string crlb_csv(const CrlbReport& r) {
  std::ostringstream os;
  os << std::setprecision(12) << "parameter,crlb,pn,condition,pseudo_inverse,diagonal_only\n";
  for (std::size_t i = 0; i < r.crlb.size(); ++i)
    os << r.names[i] << ',' << r.crlb[i] << ',' << r.pn << ',' << r.condition << ',' << r.pseudo_inverse << ','
       << r.diagonal_only << '\n';
  return os.str();
}

}  // namespace ptyparam
