#pragma once

// Ptychographic reconstruction engines.
//
// Both experiments share one structure: an estimate is cut into per-view exit
// fields, each exit field is propagated to the detector, and the detector
// modulus is constrained. A model type supplies
//
//   views(), estimate_grid(), exit_grid()
//   exit(est, j, e)                 e = view j's exit field
//   propagate(e), backpropagate(d)  unitary, in place
//   update(est, j, de, beta)        PIE step for a change de of the exit field
//   adjoint(grad, j, g)             grad += (d exit / d est)^H g
//   project(est)                    support constraint
//
// and the generic engines below drive it. FourierPtychoModel is the dark-field
// microscope (estimate = object spectrum, exit = pupil field, detector =
// inverse transform); RealSpacePtychoModel is the scanned-probe experiment.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "ptyparam/dipole.hpp"
#include "ptyparam/fft.hpp"
#include "ptyparam/grid.hpp"
#include "ptyparam/masks.hpp"
#include "ptyparam/rect.hpp"

namespace ptyparam {

using Measurements = std::vector<RealField>;

struct ReconConfig {
  std::size_t max_iters = 500;
  double beta = 1.0;
  double tol = 1e-12;       // stop when |dE|/E between sweeps falls below
  double target = 0.0;      // stop when E/E0 falls below (0 disables)
  bool shuffle = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("recon: max_iters must be >= 1");
    if (!(beta > 0.0 && beta <= 2.0)) throw std::invalid_argument("recon: beta must lie in (0,2]");
    if (!(tol > 0.0)) throw std::invalid_argument("recon: tolerance must be positive");
  }
};

struct ReconResult {
  ComplexField estimate;
  double cost = 0.0;
  std::vector<double> trace;             // cost per sweep
  std::vector<std::size_t> order;        // view order of the last sweep
  std::size_t iterations = 0;
  bool converged = false;
};

class ReconDiverged : public std::runtime_error {
 public:
  ReconDiverged(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  [[nodiscard]] const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

/// Estimate = object spectrum on an extended k grid; view j sees
/// Q(k) Est(k - k_j) through the pupil.
class FourierPtychoModel {
 public:
  /// q: pupil factor (including A_in) on the pupil grid; tilts must be pupil
  /// grid nodes; spectrum: estimate grid with the same spacing.
  FourierPtychoModel(ComplexField q, const std::vector<Vec2>& tilts, const GridSpec& spectrum, double na,
                     double k = two_pi)
      : q_(std::move(q)), spec_(spectrum), omega_(make_omega(tilts, na, k, spectrum)) {
    const auto& pg = q_.grid();
    for (const auto& v : q_) wmax_ = std::max(wmax_, std::norm(v));
    if (!(wmax_ > 0.0)) throw std::invalid_argument("FourierPtychoModel: empty pupil");
    for (const auto& t : tilts) {
      const double sx = t.x / pg.dx, sy = t.y / pg.dy;
      const long tx = std::lround(sx), ty = std::lround(sy);
      if (std::abs(sx - tx) > 1e-6 || std::abs(sy - ty) > 1e-6)
        throw std::invalid_argument("FourierPtychoModel: tilt is not a pupil-grid node");
      std::vector<std::pair<std::size_t, std::size_t>> map;
      for (std::size_t my = 0; my < pg.ny; ++my) {
        for (std::size_t mx = 0; mx < pg.nx; ++mx) {
          const std::size_t m = pg.index(mx, my);
          if (q_[m] == cplx{}) continue;
          const long ex = static_cast<long>(mx) - static_cast<long>(pg.cx()) - tx + static_cast<long>(spec_.cx());
          const long ey = static_cast<long>(my) - static_cast<long>(pg.cy()) - ty + static_cast<long>(spec_.cy());
          if (ex < 0 || ey < 0 || ex >= static_cast<long>(spec_.nx) || ey >= static_cast<long>(spec_.ny))
            throw std::invalid_argument("FourierPtychoModel: shifted pupil leaves the spectrum grid");
          map.emplace_back(m, spec_.index(static_cast<std::size_t>(ex), static_cast<std::size_t>(ey)));
        }
      }
      maps_.push_back(std::move(map));
    }
  }

  FourierPtychoModel(const DarkFieldGeometry& geo, double a_in, double z = 0.0)
      : FourierPtychoModel(q_factor(geo.pupil(), z, a_in, geo.na, geo.k), geo.tilts(), geo.spectrum(), geo.na,
                           geo.k) {}

  [[nodiscard]] std::size_t views() const { return maps_.size(); }
  [[nodiscard]] const GridSpec& estimate_grid() const { return spec_; }
  [[nodiscard]] const GridSpec& exit_grid() const { return q_.grid(); }
  /// Real-space detector sampling of the propagated field.
  [[nodiscard]] GridSpec detector_grid() const { return reciprocal_grid(q_.grid()); }
  [[nodiscard]] const OmegaMask& omega() const { return omega_; }
  [[nodiscard]] const ComplexField& q() const { return q_; }
  [[nodiscard]] ComplexField initial() const { return ComplexField(spec_); }

  void exit(const ComplexField& est, std::size_t j, ComplexField& e) const {
    if (e.grid() != q_.grid()) e = ComplexField(q_.grid());
    std::fill(e.begin(), e.end(), cplx{});
    for (const auto& [m, s] : maps_[j]) e[m] = q_[m] * est[s];
  }
  void propagate(ComplexField& e) const { ifft2_inplace(e.span(), e.nx(), e.ny()); }
  void backpropagate(ComplexField& d) const { fft2_inplace(d.span(), d.nx(), d.ny()); }
  void update(ComplexField& est, std::size_t j, const ComplexField& de, double beta) const {
    const double w = beta / wmax_;
    for (const auto& [m, s] : maps_[j]) est[s] += w * std::conj(q_[m]) * de[m];
  }
  void adjoint(ComplexField& grad, std::size_t j, const ComplexField& g) const {
    for (const auto& [m, s] : maps_[j]) grad[s] += std::conj(q_[m]) * g[m];
  }
  void project(ComplexField& est) const { omega_.apply(est); }

 private:
  ComplexField q_;
  GridSpec spec_;
  OmegaMask omega_;
  double wmax_ = 0.0;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> maps_;
};

/// Estimate = object transmission; view j sees P(r - R_j) O(r).
class RealSpacePtychoModel {
 public:
  RealSpacePtychoModel(Probe probe, ScanPlan plan, const GridSpec& object)
      : probe_(std::move(probe)), plan_(std::move(plan)), object_(object) {
    for (const auto& v : probe_.field) wmax_ = std::max(wmax_, std::norm(v));
    if (!(wmax_ > 0.0)) throw std::invalid_argument("RealSpacePtychoModel: empty probe");
    const auto& pg = probe_.field.grid();
    for (const auto& [ox, oy] : plan_.offsets)
      if (ox + pg.nx > object_.nx || oy + pg.ny > object_.ny)
        throw std::invalid_argument("RealSpacePtychoModel: probe window leaves the object grid");
  }

  [[nodiscard]] std::size_t views() const { return plan_.size(); }
  [[nodiscard]] const GridSpec& estimate_grid() const { return object_; }
  [[nodiscard]] const GridSpec& exit_grid() const { return probe_.field.grid(); }
  /// Far-field sampling (angular frequency) of the propagated field.
  [[nodiscard]] GridSpec detector_grid() const { return reciprocal_grid(probe_.field.grid()); }
  [[nodiscard]] const Probe& probe() const { return probe_; }
  [[nodiscard]] const ScanPlan& plan() const { return plan_; }
  [[nodiscard]] ComplexField initial() const { return ComplexField(object_, cplx(1.0, 0.0)); }

  void exit(const ComplexField& est, std::size_t j, ComplexField& e) const {
    const auto& pg = probe_.field.grid();
    if (e.grid() != pg) e = ComplexField(pg);
    const auto [ox, oy] = plan_.offsets[j];
    for (std::size_t iy = 0; iy < pg.ny; ++iy)
      for (std::size_t ix = 0; ix < pg.nx; ++ix) e(ix, iy) = probe_.field(ix, iy) * est(ox + ix, oy + iy);
  }
  void propagate(ComplexField& e) const { fft2_inplace(e.span(), e.nx(), e.ny()); }
  void backpropagate(ComplexField& d) const { ifft2_inplace(d.span(), d.nx(), d.ny()); }
  void update(ComplexField& est, std::size_t j, const ComplexField& de, double beta) const {
    const double w = beta / wmax_;
    const auto& pg = probe_.field.grid();
    const auto [ox, oy] = plan_.offsets[j];
    for (std::size_t iy = 0; iy < pg.ny; ++iy)
      for (std::size_t ix = 0; ix < pg.nx; ++ix) est(ox + ix, oy + iy) += w * std::conj(probe_.field(ix, iy)) * de(ix, iy);
  }
  void adjoint(ComplexField& grad, std::size_t j, const ComplexField& g) const {
    const auto& pg = probe_.field.grid();
    const auto [ox, oy] = plan_.offsets[j];
    for (std::size_t iy = 0; iy < pg.ny; ++iy)
      for (std::size_t ix = 0; ix < pg.nx; ++ix) grad(ox + ix, oy + iy) += std::conj(probe_.field(ix, iy)) * g(ix, iy);
  }
  void project(ComplexField&) const {}

 private:
  Probe probe_;
  ScanPlan plan_;
  GridSpec object_;
  double wmax_ = 0.0;
};

/// Detector field of view j for a given estimate.
template <class Model>
ComplexField detector_field(const Model& model, const ComplexField& est, std::size_t j) {
  ComplexField e;
  model.exit(est, j, e);
  model.propagate(e);
  return e;
}

/// Noise-free intensities of every view.
template <class Model>
Measurements simulate(const Model& model, const ComplexField& est) {
  Measurements out;
  out.reserve(model.views());
  for (std::size_t j = 0; j < model.views(); ++j)
    out.emplace_back(model.detector_grid(), intensity(detector_field(model, est, j)).values());
  return out;
}

namespace detail {

inline void check_measurements(const Measurements& meas, std::size_t views, const GridSpec& g) {
  if (meas.size() != views) throw std::invalid_argument("measurement count does not match view count");
  for (const auto& m : meas) {
    if (m.nx() != g.nx || m.ny() != g.ny) throw std::invalid_argument("measurement shape does not match detector");
    for (double v : m)
      if (!(v >= 0.0)) throw std::invalid_argument("measurements must be finite and nonnegative");
  }
}

inline double modulus_error(const ComplexField& d, const RealField& meas) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double r = std::sqrt(meas[i]) - std::sqrt(std::norm(d[i]));
    s += r * r;
  }
  return s;
}

/// Modulus projection onto measured amplitudes `amp`; returns the squared
/// amplitude misfit before projection.
inline double modulus_project(ComplexField& d, const RealField& amp) {
  double err = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double a = std::sqrt(std::norm(d[i]));
    const double m = amp[i];
    err += (m - a) * (m - a);
    d[i] = a > 0.0 ? d[i] * (m / a) : cplx(m, 0.0);
  }
  return err;
}

}  // namespace detail

/// Replace the modulus of d by sqrt(meas), keeping its phase (phase 0 where d = 0).
inline void modulus_replace(ComplexField& d, const RealField& meas) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double a = std::sqrt(std::norm(d[i]));
    const double m = std::sqrt(meas[i]);
    d[i] = a > 0.0 ? d[i] * (m / a) : cplx(m, 0.0);
  }
}

/// E = sum_j sum_pixels (sqrt(I_j) - |detector field|)^2.
template <class Model>
double cost_E(const Model& model, const ComplexField& est, const Measurements& meas) {
  detail::check_measurements(meas, model.views(), model.detector_grid());
  double s = 0.0;
  ComplexField e;
  for (std::size_t j = 0; j < model.views(); ++j) {
    model.exit(est, j, e);
    model.propagate(e);
    s += detail::modulus_error(e, meas[j]);
  }
  return s;
}

/// Sequential PIE: one modulus projection and object update per view.
template <class Model>
ReconResult pie(const Model& model, const Measurements& meas, ComplexField est, const ReconConfig& cfg) {
  cfg.validate();
  detail::check_measurements(meas, model.views(), model.detector_grid());
  ReconResult res;
  std::vector<std::size_t> order(model.views());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  ComplexField e, d;
  Measurements amp = meas;
  for (auto& m : amp)
    for (auto& v : m) v = std::sqrt(v);
  model.project(est);
  const double e0 = cost_E(model, est, meas);
  res.trace.push_back(e0);
  if (e0 == 0.0) {
    res.estimate = std::move(est);
    res.order = order;
    res.converged = true;
    return res;
  }
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double running = 0.0;
    for (std::size_t j : order) {
      model.exit(est, j, e);
      d = e;
      model.propagate(d);
      running += detail::modulus_project(d, amp[j]);
      model.backpropagate(d);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= e[i];
      model.update(est, j, d, cfg.beta);
    }
    model.project(est);
    res.trace.push_back(running);
    res.iterations = it + 1;
    const std::size_t n = res.trace.size();
    if (n > 20 && res.trace[n - 1] > 10.0 * res.trace[n - 21])
      throw ReconDiverged("recon: cost grew tenfold over 20 sweeps", res.trace);
    if (!std::isfinite(running)) throw ReconDiverged("recon: non-finite cost", res.trace);
    if (cfg.target > 0.0 && running <= cfg.target * e0) {
      res.converged = true;
      break;
    }
    const double prev = res.trace[n - 2];
    if (prev > 0.0 && std::abs(prev - running) <= cfg.tol * prev) {
      res.converged = true;
      break;
    }
    if (running == 0.0) {
      res.converged = true;
      break;
    }
  }
  res.order = order;
  res.cost = cost_E(model, est, meas);
  res.estimate = std::move(est);
  return res;
}

/// Real-space PIE from the unit background.
inline ReconResult pie_reconstruct(const Measurements& meas, const Probe& probe, const ScanPlan& plan,
                                   const GridSpec& object, const ReconConfig& cfg) {
  RealSpacePtychoModel m(probe, plan, object);
  return pie(m, meas, m.initial(), cfg);
}

/// Fourier ptychography with known pupil, from a zero spectrum; the result is
/// supported on Omega.
inline ReconResult fourier_pty_reconstruct(const Measurements& meas, const ComplexField& q,
                                           const std::vector<Vec2>& tilts, const GridSpec& spectrum, double na,
                                           const ReconConfig& cfg, double k = two_pi) {
  FourierPtychoModel m(q, tilts, spectrum, na, k);
  return pie(m, meas, m.initial(), cfg);
}

struct MleConfig {
  std::size_t max_iters = 200;
  double tol = 1e-12;   // relative change of the objective
  double eps = 1e-12;   // intensity floor, photons
};

/// Half the Poisson deviance of an estimate,
///   sum I - n + n ln(n / I)   (n ln(n/I) = 0 for n = 0),
/// i.e. the negative log-likelihood minus its data-only constant, and
/// optionally its gradient with respect to conj(estimate). The constant is
/// removed so that relative changes measure the fit, not the photon count.
template <class Model>
double poisson_objective(const Model& model, const ComplexField& est, const Measurements& counts, double eps,
                         ComplexField* grad) {
  double nll = 0.0;
  ComplexField e;
  if (grad) *grad = ComplexField(model.estimate_grid());
  for (std::size_t j = 0; j < model.views(); ++j) {
    model.exit(est, j, e);
    model.propagate(e);
    const auto& n = counts[j];
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double I = std::max(std::norm(e[i]), eps);
      nll += I - n[i] + (n[i] > 0.0 ? n[i] * std::log(n[i] / I) : 0.0);
      if (grad) e[i] *= (1.0 - n[i] / I);
    }
    if (grad) {
      model.backpropagate(e);
      model.adjoint(*grad, j, e);
    }
  }
  if (grad) model.project(*grad);
  return nll;
}

/// Poisson maximum-likelihood refinement by nonlinear conjugate gradients
/// with backtracking; every accepted step lowers the NLL.
template <class Model>
ReconResult mle_refine(const Model& model, const Measurements& counts, ComplexField est, const MleConfig& cfg) {
  detail::check_measurements(counts, model.views(), model.detector_grid());
  ReconResult res;
  ComplexField g, g_prev, dir, trial;
  double f = poisson_objective(model, est, counts, cfg.eps, &g);
  res.trace.push_back(f);
  double step = 0.0;
  auto dot = [](const ComplexField& a, const ComplexField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (std::conj(a[i]) * b[i]).real();
    return s;
  };
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const double gg = dot(g, g);
    if (gg == 0.0) {
      res.converged = true;
      break;
    }
    if (it == 0) {
      dir = g;
      for (auto& v : dir) v = -v;
    } else {
      // Polak-Ribiere+, restarting when the direction stops descending
      double num = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) num += (std::conj(g[i]) * (g[i] - g_prev[i])).real();
      const double b = std::max(0.0, num / dot(g_prev, g_prev));
      for (std::size_t i = 0; i < g.size(); ++i) dir[i] = -g[i] + b * dir[i];
      if (dot(dir, g) >= 0.0) {
        dir = g;
        for (auto& v : dir) v = -v;
      }
    }
    const double slope = 2.0 * dot(g, dir);  // directional derivative of f
    if (step == 0.0) {
      // initial scale: unit relative change of the estimate
      double ne = std::sqrt(dot(est, est)), nd = std::sqrt(dot(dir, dir));
      step = nd > 0.0 ? 1e-3 * std::max(ne, 1e-30) / nd : 1.0;
    } else {
      step *= 2.0;
    }
    bool accepted = false;
    double f_new = f;
    for (int bt = 0; bt < 60; ++bt) {
      trial = est;
      for (std::size_t i = 0; i < trial.size(); ++i) trial[i] += step * dir[i];
      f_new = poisson_objective(model, trial, counts, cfg.eps, nullptr);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || f_new >= f) {
      res.converged = true;
      break;
    }
    est = std::move(trial);
    const double rel = (f - f_new) / std::max(std::abs(f), 1e-300);
    f = f_new;
    g_prev = std::move(g);
    f = poisson_objective(model, est, counts, cfg.eps, &g);
    res.trace.push_back(f);
    res.iterations = it + 1;
    if (rel < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.cost = f;
  res.estimate = std::move(est);
  return res;
}

}  // namespace ptyparam
