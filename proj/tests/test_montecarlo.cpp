#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "ptyparam/montecarlo.hpp"
#include "ptyparam/pipeline.hpp"

using namespace ptyparam;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Two views of a flat field with mean mu; the estimator is the pixel mean,
// whose variance is mu / (pixel count) and whose Fisher bound is the same.
Experiment flat_experiment(double mu, std::size_t n = 8) {
  Experiment ex;
  ex.names = {"mu"};
  ex.truth = {mu};
  ex.expected = {RealField(GridSpec(n, n, 1, 1), mu), RealField(GridSpec(n, n, 1, 1), mu)};
  ex.crlb = {mu / static_cast<double>(2 * n * n)};
  ex.estimate = [](const Measurements& c) {
    double s = 0.0, k = 0.0;
    for (const auto& v : c) {
      s += std::accumulate(v.begin(), v.end(), 0.0);
      k += static_cast<double>(v.size());
    }
    FitResult r;
    r.theta = {s / k};
    r.active = {false};
    r.converged = true;
    return r;
  };
  return ex;
}

}  // namespace

TEST_CASE("Poisson sampling", "[montecarlo]") {
  SECTION("zero mean gives zero counts") {
    const auto c = sample_poisson(RealField(GridSpec(4, 4, 1, 1), 0.0), 7);
    for (double v : c) REQUIRE(v == 0.0);
  }
  SECTION("moments at a mean of four") {
    const RealField m(GridSpec(500, 200, 1, 1), 4.0);
    const auto c = sample_poisson(m, 12345);
    const double n = static_cast<double>(c.size());
    const double mean = std::accumulate(c.begin(), c.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : c) {
      REQUIRE(v == std::floor(v));
      REQUIRE(v >= 0.0);
      ss += (v - mean) * (v - mean);
    }
    REQUIRE_THAT(mean, WithinAbs(4.0, 0.02));
    REQUIRE_THAT(ss / (n - 1), WithinRel(4.0, 0.05));
  }
  SECTION("deterministic per seed and pixel") {
    const RealField m(GridSpec(6, 5, 1, 1), 30.0);
    const auto a = sample_poisson(m, 99), b = sample_poisson(m, 99), c = sample_poisson(m, 100);
    REQUIRE(a.values() == b.values());
    REQUIRE(a.values() != c.values());
    // a pixel's draw does not depend on its neighbours
    RealField m2 = m;
    m2[0] = 3.0;
    const auto d = sample_poisson(m2, 99);
    for (std::size_t i = 1; i < m.size(); ++i) REQUIRE(d[i] == a[i]);
  }
  SECTION("views get distinct streams") {
    const Measurements mean{RealField(GridSpec(4, 4, 1, 1), 50.0), RealField(GridSpec(4, 4, 1, 1), 50.0)};
    const auto s = sample_measurements(mean, 3);
    REQUIRE(s[0].values() != s[1].values());
    REQUIRE(s[1].values() == sample_poisson(mean[1], mix_seed(3, 1)).values());
  }
  SECTION("invalid means") {
    RealField m(GridSpec(2, 2, 1, 1), 1.0);
    m[2] = -0.5;
    REQUIRE_THROWS_AS(sample_poisson(m, 1), std::invalid_argument);
    m[2] = std::nan("");
    REQUIRE_THROWS_AS(sample_poisson(m, 1), std::invalid_argument);
  }
}

TEST_CASE("variance and squared bias", "[montecarlo]") {
  SECTION("constant estimates") {
    const auto vb = variance_bias({2.5, 2.5, 2.5}, 2.0);
    REQUIRE(vb.variance == 0.0);
    REQUIRE_THAT(vb.bias2, WithinAbs(0.25, 1e-15));
  }
  SECTION("two points") {
    const auto vb = variance_bias({1.0, 3.0}, 1.0);
    REQUIRE(vb.mean == 2.0);
    REQUIRE(vb.variance == 2.0);
    REQUIRE(vb.bias2 == 1.0);
  }
  SECTION("agrees with a streaming (Welford) update") {
    std::vector<double> e;
    for (int i = 0; i < 1000; ++i) e.push_back(1e3 + std::sin(0.37 * i) + 1e-3 * i);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double d = e[i] - mean;
      mean += d / static_cast<double>(i + 1);
      m2 += d * (e[i] - mean);
    }
    const auto vb = variance_bias(e, 1e3);
    REQUIRE_THAT(vb.mean, WithinRel(mean, 1e-14));
    REQUIRE_THAT(vb.variance, WithinRel(m2 / static_cast<double>(e.size() - 1), 1e-10));
  }
  SECTION("needs two estimates") {
    REQUIRE_THROWS_AS(variance_bias({1.0}, 0.0), std::invalid_argument);
  }
}

TEST_CASE("campaigns", "[montecarlo]") {
  const auto ex = flat_experiment(40.0);
  TrialPlan plan;
  plan.base_seed = 11;
  plan.trials = 400;
  plan.pn = 40.0;

  SECTION("pixel-mean estimator attains its variance") {
    const auto r = run_campaign(plan, ex);
    REQUIRE(r.used == 400);
    REQUIRE(r.failed == 0);
    const auto& p = r.at("mu");
    const double slack = 3.0 * std::sqrt(2.0 / 400.0);
    REQUIRE(p.variance >= p.crlb * (1.0 - slack));
    REQUIRE(p.variance <= p.crlb * (1.0 + slack));
    REQUIRE(p.bias2 < p.variance);
  }
  SECTION("noise bypassed") {
    plan.bypass_noise = true;
    const auto r = run_campaign(plan, ex);
    REQUIRE(r.params[0].variance == 0.0);
    REQUIRE(r.params[0].bias2 == 0.0);
  }
  SECTION("bit-identical across thread counts") {
    plan.trials = 60;
    plan.keep_estimates = true;
    const auto a = run_campaign(plan, ex);
    plan.threads = 4;
    const auto b = run_campaign(plan, ex);
    REQUIRE(a.estimates == b.estimates);
    REQUIRE(mc_csv(a) == mc_csv(b));
  }
  SECTION("failed trials are excluded and counted") {
    auto bad = ex;
    std::atomic<int> calls{0};
    bad.estimate = [&](const Measurements& c) {
      auto r = ex.estimate(c);
      const int k = calls++;
      if (k % 20 == 0) r.converged = false;
      if (k % 20 == 1) r.active[0] = true;
      if (k % 20 == 2) throw std::runtime_error("trial blew up");
      return r;
    };
    plan.trials = 100;
    const auto r = run_campaign(plan, bad);
    REQUIRE(r.failed == 15);
    REQUIRE(r.used == 85);
    REQUIRE(mc_csv(r).find(",85\n") != std::string::npos);

    calls = 0;
    bad.estimate = [&](const Measurements& c) {
      auto r2 = ex.estimate(c);
      r2.converged = calls++ % 4 != 0;  // 25% failures
      return r2;
    };
    try {
      run_campaign(plan, bad);
      FAIL("expected CampaignFailed");
    } catch (const CampaignFailed& e) {
      REQUIRE(e.failed() == 25);
      REQUIRE(e.trials() == 100);
    }
  }
  SECTION("plan validation") {
    plan.trials = 1;
    REQUIRE_THROWS_AS(run_campaign(plan, ex), std::invalid_argument);
    plan.trials = 10;
    plan.pn = 0.0;
    REQUIRE_THROWS_AS(run_campaign(plan, ex), std::invalid_argument);
  }
  SECTION("csv layout") {
    McReport r;
    r.used = 5;
    r.params = {{"mu", 1.0, 1.5, 0.25, 0.25, 0.125}};
    REQUIRE(mc_csv(r) == "parameter,truth,mean,variance,bias2,crlb,trials_used\nmu,1,1.5,0.25,0.25,0.125,5\n");
  }
}

TEST_CASE("flux calibration", "[montecarlo]") {
  SECTION("dipole illumination") {
    DarkFieldGeometry geo;
    geo.n_det = 32;
    geo.n_ext = 64;
    geo.n_tilts = 8;
    auto s = DipoleScene::from_theta({1e-3, 0.4, -0.2, 2e-3, 3.0, 1.0});
    REQUIRE(calibrate_flux(s, geo, 0.0) == 0.0);
    s.a_in = calibrate_flux(s, geo, 1e6);
    const auto q = q_factor(geo.pupil(), s.z, s.a_in, geo.na, geo.k);
    REQUIRE_THAT(photon_count_dip(s, q, 0), WithinRel(1e6, 1e-10));
  }
  SECTION("probe") {
    const RectGeometry geo;
    REQUIRE(calibrate_flux(geo.probe(), 0.0) == 0.0);
    const auto p = geo.probe(calibrate_flux(geo.probe(), 1e8));
    REQUIRE_THAT(photon_count_rect(p), WithinRel(1e8, 1e-10));
  }
}
