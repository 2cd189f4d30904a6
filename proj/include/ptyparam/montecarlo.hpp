#pragma once

// Seeded Poisson sampling and estimator-statistics campaigns.
//
// Every pixel draw is keyed by (seed, pixel index) through SplitMix64, so a
// trial's counts do not depend on thread scheduling or on the other trials.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ptyparam/optimize.hpp"
#include "ptyparam/recon.hpp"

namespace ptyparam {

/// SplitMix64 as a UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t state) : s_(state) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    std::uint64_t z = (s_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t s_;
};

/// Combines two keys into one well-mixed 64-bit seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  SplitMix64 g(a ^ (0xD1B54A32D192ED03ull * (b + 1)));
  g();
  return g();
}

/// Independent Poisson draws with the given means. Pixel i uses a generator
/// seeded by mix_seed(seed, i).
inline RealField sample_poisson(const RealField& mean, std::uint64_t seed) {
  RealField out(mean.grid());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double m = mean[i];
    if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("sample_poisson: negative or non-finite mean");
    if (m == 0.0) continue;
    SplitMix64 g(mix_seed(seed, i));
    out[i] = static_cast<double>(std::poisson_distribution<long long>(m)(g));
  }
  return out;
}

/// Counts for every view; view j uses seed mix_seed(seed, j).
inline Measurements sample_measurements(const Measurements& mean, std::uint64_t seed) {
  Measurements out;
  out.reserve(mean.size());
  for (std::size_t j = 0; j < mean.size(); ++j) out.push_back(sample_poisson(mean[j], mix_seed(seed, j)));
  return out;
}

struct VarianceBias {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double bias2 = 0.0;     // (mean - truth)^2
};

inline VarianceBias variance_bias(const std::vector<double>& est, double truth) {
  if (est.size() < 2) throw std::invalid_argument("variance_bias: need at least two estimates");
  const double n = static_cast<double>(est.size());
  double mean = 0.0;
  for (double v : est) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : est) ss += (v - mean) * (v - mean);
  return {mean, ss / (n - 1.0), (mean - truth) * (mean - truth)};
}

struct TrialPlan {
  std::uint64_t base_seed = 0;
  std::size_t trials = 200;
  double pn = 1e6;
  std::vector<std::size_t> track;  // parameter indices to report; empty = all
  bool bypass_noise = false;       // use expected intensities as counts
  std::size_t threads = 1;
  bool keep_estimates = false;

  void validate() const {
    if (trials < 2) throw std::invalid_argument("campaign: need at least two trials");
    if (!(pn > 0.0)) throw std::invalid_argument("campaign: PN must be positive");
  }
};

struct ParameterStats {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double bias2 = 0.0;
  double crlb = std::numeric_limits<double>::quiet_NaN();
};

struct McReport {
  std::vector<ParameterStats> params;
  std::size_t trials = 0;
  std::size_t used = 0;
  std::size_t failed = 0;
  double pn = 0.0;
  std::vector<std::vector<double>> estimates;  // per successful trial, if kept

  [[nodiscard]] const ParameterStats& at(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return p;
    throw std::out_of_range("McReport: no parameter " + name);
  }
};

class CampaignFailed : public std::runtime_error {
 public:
  CampaignFailed(const std::string& what, std::size_t failed, std::size_t trials)
      : std::runtime_error(what), failed_(failed), trials_(trials) {}
  [[nodiscard]] std::size_t failed() const { return failed_; }
  [[nodiscard]] std::size_t trials() const { return trials_; }

 private:
  std::size_t failed_, trials_;
};

/// Maps one set of photon counts to fitted parameters.
using TrialEstimator = std::function<FitResult(const Measurements& counts)>;

struct Experiment {
  std::vector<std::string> names;
  std::vector<double> truth;
  Measurements expected;         // noise-free intensities (photons)
  TrialEstimator estimate;
  std::vector<double> crlb;      // optional, same order as names
};

/// Runs the trials (in parallel when plan.threads > 1) and reduces them in
/// trial order. A trial fails when its fit did not converge, ended with a
/// parameter on a bound, or threw; more than 20% failures is an error.
inline McReport run_campaign(const TrialPlan& plan, const Experiment& ex) {
  plan.validate();
  if (ex.truth.size() != ex.names.size()) throw std::invalid_argument("campaign: truth and names differ in length");
  std::vector<std::optional<std::vector<double>>> results(plan.trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < plan.trials; t = next++) {
      try {
        const auto counts = plan.bypass_noise ? ex.expected : sample_measurements(ex.expected, plan.base_seed + t);
        const auto fr = ex.estimate(counts);
        if (fr.converged && !fr.any_active()) results[t] = fr.theta;
      } catch (const std::exception&) {
        // counted as a failed trial
      }
    }
  };
  const std::size_t nthreads = std::clamp<std::size_t>(plan.threads, 1, plan.trials);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  McReport rep;
  rep.trials = plan.trials;
  rep.pn = plan.pn;
  std::vector<std::vector<double>> ok;
  for (const auto& r : results)
    if (r) ok.push_back(*r);
  rep.used = ok.size();
  rep.failed = plan.trials - ok.size();
  if (5 * rep.failed > plan.trials)
    throw CampaignFailed("campaign: " + std::to_string(rep.failed) + " of " + std::to_string(plan.trials) +
                             " trials failed",
                         rep.failed, plan.trials);
  if (ok.size() < 2) throw CampaignFailed("campaign: fewer than two usable trials", rep.failed, plan.trials);
  std::vector<std::size_t> track = plan.track;
  if (track.empty())
    for (std::size_t i = 0; i < ex.names.size(); ++i) track.push_back(i);
  for (std::size_t i : track) {
    std::vector<double> col;
    for (const auto& e : ok) col.push_back(e.at(i));
    const auto vb = variance_bias(col, ex.truth.at(i));
    ParameterStats ps{ex.names.at(i), ex.truth[i], vb.mean, vb.variance, vb.bias2};
    if (i < ex.crlb.size()) ps.crlb = ex.crlb[i];
    rep.params.push_back(ps);
  }
  if (plan.keep_estimates) rep.estimates = std::move(ok);
  return rep;
}

inline std::string mc_csv(const McReport& r) {
  std::ostringstream os;
  os << std::setprecision(10) << "parameter,truth,mean,variance,bias2,crlb,trials_used\n";
  for (const auto& p : r.params)
    os << p.name << ',' << p.truth << ',' << p.mean << ',' << p.variance << ',' << p.bias2 << ',' << p.crlb << ','
       << r.used << '\n';
  return os.str();
}

}  // namespace ptyparam
