#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ptyparam/optimize.hpp"

using namespace ptyparam;
using Catch::Matchers::WithinAbs;

namespace {

double rosenbrock(const std::vector<double>& t, std::vector<double>* g) {
  const double x = t[0], y = t[1];
  if (g) *g = {-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)};
  return (1.0 - x) * (1.0 - x) + 100.0 * (y - x * x) * (y - x * x);
}

// Zooming grid search: 41 x 41 samples, then shrink the window around the
// best sample by 4 and repeat, never leaving the original box.
std::vector<double> grid_search(const CostFunction& f, std::vector<double> lo, std::vector<double> hi, int levels) {
  const auto lo0 = lo, hi0 = hi;
  std::vector<double> best(2);
  for (int l = 0; l < levels; ++l) {
    double fb = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 40; ++i)
      for (int j = 0; j <= 40; ++j) {
        const std::vector<double> t{lo[0] + (hi[0] - lo[0]) * i / 40.0, lo[1] + (hi[1] - lo[1]) * j / 40.0};
        const double v = f(t, nullptr);
        if (v < fb) {
          fb = v;
          best = t;
        }
      }
    for (int d = 0; d < 2; ++d) {
      const double w = (hi[d] - lo[d]) / 4.0;
      lo[d] = std::max(lo0[d], best[d] - w / 2);
      hi[d] = std::min(hi0[d], best[d] + w / 2);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("box_minimize on quadratic bowls", "[optimize]") {
  const std::vector<double> c{0.3, -1.7, 250.0};
  const std::vector<double> scale{1.0, 10.0, 1e-3};
  CostFunction bowl = [&](const std::vector<double>& t, std::vector<double>* g) {
    double f = 0.0;
    if (g) g->assign(t.size(), 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      f += scale[i] * (t[i] - c[i]) * (t[i] - c[i]);
      if (g) (*g)[i] = 2.0 * scale[i] * (t[i] - c[i]);
    }
    return f;
  };

  SECTION("interior minimum") {
    const BoxBounds b{{-1, -5, 0}, {1, 5, 1000}};
    const auto r = box_minimize(bowl, {0.9, 4.0, 10.0}, b);
    REQUIRE(r.converged);
    for (std::size_t i = 0; i < 3; ++i) REQUIRE_THAT(r.theta[i], WithinAbs(c[i], 1e-10 * std::max(1.0, std::abs(c[i]))));
    REQUIRE_FALSE(r.any_active());
  }
  SECTION("minimum outside the box lands on the nearer bound") {
    const BoxBounds b{{-1, -1, 0}, {1, 5, 1000}};
    const auto r = box_minimize(bowl, {0.5, 3.0, 10.0}, b);
    REQUIRE(r.converged);
    REQUIRE(r.theta[1] == -1.0);
    REQUIRE(r.active[1]);
    REQUIRE_FALSE(r.active[0]);
    REQUIRE_THAT(r.theta[0], WithinAbs(c[0], 1e-9));
  }
  SECTION("finite-difference gradient") {
    MinimizeOptions o;
    o.analytic_gradient = false;
    const BoxBounds b{{-1, -5, 0}, {1, 5, 1000}};
    const auto r = box_minimize(bowl, {0.9, 4.0, 10.0}, b, o);
    REQUIRE(r.converged);
    for (std::size_t i = 0; i < 3; ++i) REQUIRE_THAT(r.theta[i], WithinAbs(c[i], 1e-6 * std::max(1.0, std::abs(c[i]))));
  }
}

TEST_CASE("box_minimize on the Rosenbrock valley", "[optimize]") {
  CostFunction f = rosenbrock;
  const BoxBounds b{{-2.0, -1.0}, {2.0, 3.0}};
  const auto oracle = grid_search(f, b.lower, b.upper, 12);
  const auto r = box_minimize(f, {-1.2, 1.0}, b);
  REQUIRE(r.converged);
  REQUIRE_THAT(r.theta[0], WithinAbs(oracle[0], 1e-6));
  REQUIRE_THAT(r.theta[1], WithinAbs(oracle[1], 1e-6));

  SECTION("with the minimum cut off by a bound") {
    const BoxBounds cut{{-2.0, -1.0}, {0.5, 3.0}};
    const auto o2 = grid_search(f, cut.lower, cut.upper, 12);
    const auto r2 = box_minimize(f, {-1.2, 1.0}, cut);
    REQUIRE(r2.converged);
    REQUIRE(r2.active[0]);
    REQUIRE_THAT(r2.theta[0], WithinAbs(o2[0], 1e-6));
    REQUIRE_THAT(r2.theta[1], WithinAbs(o2[1], 1e-6));
  }
}

TEST_CASE("every evaluated point is feasible", "[optimize]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4;
    BoxBounds b;
    std::vector<double> c(n), t0(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double lo = -1.0 - 3 * u(rng), hi = 1.0 + 3 * u(rng);
      b.lower.push_back(lo);
      b.upper.push_back(hi);
      c[i] = -6.0 + 12.0 * u(rng);  // often outside the box
      t0[i] = lo + (hi - lo) * u(rng);
    }
    bool feasible = true;
    CostFunction f = [&](const std::vector<double>& t, std::vector<double>* g) {
      feasible = feasible && b.contains(t);
      double v = 0.0;
      if (g) g->assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = t[i] - c[i];
        v += d * d + 0.1 * std::pow(d, 4) + 0.3 * d * (t[(i + 1) % n] - c[(i + 1) % n]);
        if (g) {
          (*g)[i] += 2 * d + 0.4 * std::pow(d, 3) + 0.3 * (t[(i + 1) % n] - c[(i + 1) % n]);
          (*g)[(i + 1) % n] += 0.3 * d;
        }
      }
      return v;
    };
    const auto r = box_minimize(f, t0, b);
    REQUIRE(feasible);
    REQUIRE(b.contains(r.theta));
    REQUIRE(r.converged);
  }
}

TEST_CASE("box_minimize errors", "[optimize]") {
  CostFunction f = rosenbrock;
  SECTION("start outside the box") {
    REQUIRE_THROWS_AS(box_minimize(f, {3.0, 0.0}, {{-2, -1}, {2, 3}}), std::invalid_argument);
  }
  SECTION("inverted bounds") {
    REQUIRE_THROWS_AS(box_minimize(f, {0.0, 0.0}, {{1, -1}, {-1, 3}}), std::invalid_argument);
  }
  SECTION("non-finite cost reports the offending point") {
    CostFunction bad = [](const std::vector<double>& t, std::vector<double>* g) {
      if (g) *g = {-1.0};
      return t[0] > 0.5 ? std::nan("") : -t[0];
    };
    try {
      box_minimize(bad, {0.0}, {{-1.0}, {1.0}});
      FAIL("expected NonFiniteCost");
    } catch (const NonFiniteCost& e) {
      REQUIRE(e.theta().size() == 1);
      REQUIRE(e.theta()[0] > 0.5);
    }
  }
}

TEST_CASE("central-difference gradient helper", "[optimize]") {
  CostFunction f = rosenbrock;
  const std::vector<double> t{0.3, -0.4};
  std::vector<double> g;
  f(t, &g);
  const auto fd = fd_gradient(f, t, {1e-6, 1e-6});
  for (std::size_t i = 0; i < 2; ++i) REQUIRE_THAT(fd[i], WithinAbs(g[i], 1e-6 * std::abs(g[i])));
}
