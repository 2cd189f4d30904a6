#pragma once

// Bound-constrained quasi-Newton minimizer.
//
// Variables are mapped to u in [0,1]^n by the bounds, so parameters of very
// different magnitudes share one scale. Steps are projected BFGS steps on the
// free variables with a projected Armijo backtracking search.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptyparam {

struct BoxBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  [[nodiscard]] std::size_t size() const { return lower.size(); }
  void validate() const {
    if (lower.size() != upper.size()) throw std::invalid_argument("bounds: size mismatch");
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (!(lower[i] <= upper[i])) throw std::invalid_argument("bounds: lower exceeds upper at index " + std::to_string(i));
  }
  [[nodiscard]] bool contains(const std::vector<double>& t) const {
    if (t.size() != size()) return false;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] < lower[i] || t[i] > upper[i]) return false;
    return true;
  }
};

/// Cost with optional analytic gradient. When `grad` is null only the cost
/// is requested.
using CostFunction = std::function<double(const std::vector<double>& theta, std::vector<double>* grad)>;

struct MinimizeOptions {
  std::size_t max_iters = 2000;
  double ftol = 1e-12;     // relative cost change
  double gtol = 1e-10;     // projected gradient norm in scaled variables
  double fd_step = 1e-6;   // central-difference step, relative to bound width
  bool analytic_gradient = true;
  double first_step = 0.01;  // largest trial move (scaled units) before curvature is known
};

struct FitResult {
  std::vector<double> theta;
  double cost = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<bool> active;  // parameter pinned at a bound
  std::string message;

  [[nodiscard]] bool any_active() const {
    for (bool a : active)
      if (a) return true;
    return false;
  }
};

class NonFiniteCost : public std::runtime_error {
 public:
  NonFiniteCost(const std::vector<double>& theta) : std::runtime_error(describe(theta)), theta_(theta) {}
  [[nodiscard]] const std::vector<double>& theta() const { return theta_; }

 private:
  static std::string describe(const std::vector<double>& t) {
    std::ostringstream os;
    os << "non-finite cost at theta = [";
    for (std::size_t i = 0; i < t.size(); ++i) os << (i ? ", " : "") << t[i];
    os << "]";
    return os.str();
  }
  std::vector<double> theta_;
};

/// Central-difference gradient with per-parameter steps.
inline std::vector<double> fd_gradient(const CostFunction& f, const std::vector<double>& theta,
                                       const std::vector<double>& steps) {
  std::vector<double> g(theta.size());
  auto t = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (steps[i] == 0.0) continue;
    t[i] = theta[i] + steps[i];
    const double fp = f(t, nullptr);
    t[i] = theta[i] - steps[i];
    const double fm = f(t, nullptr);
    t[i] = theta[i];
    g[i] = (fp - fm) / (2.0 * steps[i]);
  }
  return g;
}

inline FitResult box_minimize(const CostFunction& cost, const std::vector<double>& theta0, const BoxBounds& bounds,
                              const MinimizeOptions& opt = {}) {
  bounds.validate();
  const std::size_t n = theta0.size();
  if (bounds.size() != n) throw std::invalid_argument("box_minimize: bounds do not match theta");
  if (!bounds.contains(theta0)) throw std::invalid_argument("box_minimize: initial point outside bounds");

  using Vec = Eigen::VectorXd;
  Vec width(n), lo(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = bounds.lower[i];
    width[i] = bounds.upper[i] - bounds.lower[i];
  }
  auto to_theta = [&](const Vec& u) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i)
      t[i] = width[i] > 0.0 ? std::clamp(lo[i] + u[i] * width[i], bounds.lower[i], bounds.upper[i]) : lo[i];
    return t;
  };
  std::vector<double> steps(n);
  for (std::size_t i = 0; i < n; ++i) steps[i] = opt.fd_step * width[i];

  FitResult res;
  auto eval = [&](const Vec& u, Vec* gu) {
    const auto t = to_theta(u);
    ++res.evaluations;
    double f;
    std::vector<double> g;
    if (gu && opt.analytic_gradient) {
      g.assign(n, 0.0);
      f = cost(t, &g);
    } else {
      f = cost(t, nullptr);
      if (gu) g = fd_gradient(cost, t, steps);
    }
    if (!std::isfinite(f)) throw NonFiniteCost(t);
    if (gu) {
      gu->resize(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) (*gu)[i] = g[i] * width[i];
      if (!gu->allFinite()) throw NonFiniteCost(t);
    }
    return f;
  };
  auto project = [&](Vec u) {
    for (std::size_t i = 0; i < n; ++i) u[i] = width[i] > 0.0 ? std::clamp(u[i], 0.0, 1.0) : 0.0;
    return u;
  };
  // Variables at a bound whose gradient pushes outward are held fixed.
  auto active_set = [&](const Vec& u, const Vec& g) {
    std::vector<bool> a(n);
    for (std::size_t i = 0; i < n; ++i)
      a[i] = width[i] == 0.0 || (u[i] <= 0.0 && g[i] > 0.0) || (u[i] >= 1.0 && g[i] < 0.0);
    return a;
  };

  Vec u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = width[i] > 0.0 ? (theta0[i] - lo[i]) / width[i] : 0.0;
  Vec g;
  double f = eval(u, &g);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    const auto act = active_set(u, g);
    Vec pg = g;
    for (std::size_t i = 0; i < n; ++i)
      if (act[i]) pg[i] = 0.0;
    if (pg.norm() < opt.gtol) {
      res.converged = true;
      res.message = "projected gradient below tolerance";
      break;
    }
    Eigen::MatrixXd Hr = H;
    for (std::size_t i = 0; i < n; ++i)
      if (act[i]) {
        Hr.row(static_cast<Eigen::Index>(i)).setZero();
        Hr.col(static_cast<Eigen::Index>(i)).setZero();
      }
    Vec p = -Hr * pg;
    if (H.isIdentity() || p.dot(pg) >= 0.0) {
      // steepest descent without curvature information: limit the first trial
      // move so it cannot jump across the oscillations of the cost
      H.setIdentity();
      p = -pg * std::min(1.0, opt.first_step / pg.lpNorm<Eigen::Infinity>());
    }
    double t = 1.0;
    Vec u_new, g_new;
    double f_new = f;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      u_new = project(u + t * p);
      const Vec s = u_new - u;
      if (s.norm() == 0.0) break;
      f_new = eval(u_new, nullptr);
      if (f_new <= f + 1e-4 * g.dot(s)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    res.iterations = it + 1;
    if (!accepted) {
      if (H.isIdentity()) {
        res.converged = true;
        res.message = "line search stalled at numerical precision";
        break;
      }
      H.setIdentity();
      continue;
    }
    f_new = eval(u_new, &g_new);
    const Vec s = u_new - u;
    const Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    const double df = f - f_new;
    u = u_new;
    g = g_new;
    const double fprev = f;
    f = f_new;
    if (df <= opt.ftol * std::abs(fprev)) {
      res.converged = true;
      res.message = "relative cost change below tolerance";
      break;
    }
  }
  if (!res.converged) res.message = "iteration limit reached";
  res.theta = to_theta(u);
  res.cost = f;
  res.active.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) res.active[i] = width[i] > 0.0 && (u[i] <= 1e-9 || u[i] >= 1.0 - 1e-9);
  return res;
}

}  // namespace ptyparam
