#pragma once

// End-to-end estimators: measurements -> reconstruction -> parameter fit.

#include <memory>
#include <optional>
#include <vector>

#include "ptyparam/dipole.hpp"
#include "ptyparam/fit.hpp"
#include "ptyparam/montecarlo.hpp"
#include "ptyparam/recon.hpp"
#include "ptyparam/rect.hpp"

namespace ptyparam {

/// Incoherent sum of all views.
inline RealField summed_image(const Measurements& m) {
  if (m.empty()) throw std::invalid_argument("summed_image: no views");
  RealField s(m.front().grid());
  for (const auto& v : m)
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += v[i];
  return s;
}

/// Summed image of a unit-strength dipole at the origin, used to turn blob
/// energies into strength guesses.
inline RealField unit_dipole_image(const FourierPtychoModel& model) {
  DipoleScene unit{{{1.0, 0.0, 0.0}}};
  auto o = object_spectrum(unit, model.estimate_grid());
  model.project(o);
  return summed_image(simulate(model, o));
}

/// Initial guess and bounds from the measurements alone.
inline InitialGuess auto_dipole_guess(const FourierPtychoModel& model, const Measurements& meas, std::size_t n) {
  return dipole_initial_guess(summed_image(meas), n, unit_dipole_image(model));
}

struct DipolePipeline {
  ReconConfig recon{500, 1.0, 1e-12};
  std::optional<MleConfig> mle;
  MinimizeOptions fit;
};

/// Pipeline used for noisy data: a short PIE run, then Poisson refinement.
inline DipolePipeline noisy_dipole_pipeline() { return {ReconConfig{40, 1.0, 1e-12}, MleConfig{300, 1e-9}, {}}; }

/// Reconstructed spectrum (supported on Omega) from counts or intensities.
inline ComplexField reconstruct_dipoles(const FourierPtychoModel& model, const Measurements& counts,
                                        const DipolePipeline& pipe) {
  auto est = pie(model, counts, model.initial(), pipe.recon).estimate;
  if (pipe.mle) est = mle_refine(model, counts, std::move(est), *pipe.mle).estimate;
  return est;
}

struct RectPipeline {
  ReconConfig recon{1000, 1.0, 1e-12};
  std::optional<MleConfig> mle;
  MinimizeOptions fit;
};

inline RectPipeline noisy_rect_pipeline() { return {ReconConfig{300, 1.0, 1e-8}, std::nullopt, {}}; }

inline ComplexField reconstruct_rect(const RealSpacePtychoModel& model, const Measurements& counts,
                                     const RectPipeline& pipe) {
  auto est = pie(model, counts, model.initial(), pipe.recon).estimate;
  if (pipe.mle) est = mle_refine(model, counts, std::move(est), *pipe.mle).estimate;
  return est;
}

/// Photon calibration: A_in giving `pn` photons from dipole i.
inline double calibrate_flux(const DipoleScene& scene, const DarkFieldGeometry& geo, double pn, std::size_t i = 0) {
  return calibrate_a_in(scene, geo, pn, i);
}

/// Photon calibration: probe scale giving `pn` photons in the probe.
inline double calibrate_flux(const Probe& probe, double pn) { return calibrate_probe_scale(probe, pn); }

/// Campaign description of the dipole experiment at the scene's A_in. Every
/// trial fits from `guess`.
inline Experiment dipole_experiment(const DipoleScene& scene, const DarkFieldGeometry& geo, const InitialGuess& guess,
                                    const DipolePipeline& pipe = noisy_dipole_pipeline()) {
  auto model = std::make_shared<FourierPtychoModel>(geo, scene.a_in, scene.z);
  auto truth = object_spectrum(scene, geo.spectrum());
  model->project(truth);
  Experiment ex;
  ex.names = dipole_names(scene.size());
  ex.truth = scene.theta();
  ex.expected = simulate(*model, truth);
  ex.estimate = [model, guess, pipe](const Measurements& counts) {
    return fit_dipoles(reconstruct_dipoles(*model, counts, pipe), model->omega(), guess, true, pipe.fit);
  };
  return ex;
}

inline Experiment rect_experiment(const RectParams& truth, const Probe& probe, const ScanPlan& plan,
                                  const GridSpec& object, const std::vector<double>& guess, const BoxBounds& bounds,
                                  const RectPipeline& pipe = noisy_rect_pipeline()) {
  auto model = std::make_shared<RealSpacePtychoModel>(probe, plan, object);
  auto weight = illuminated_mask(probe, plan, object);
  Experiment ex;
  ex.names = rect_names();
  ex.truth = truth.theta();
  ex.expected = simulate(*model, band_limited_rect(truth, object));
  ex.estimate = [model, weight, guess, bounds, pipe](const Measurements& counts) {
    return fit_rect(reconstruct_rect(*model, counts, pipe), guess, bounds, weight, pipe.fit);
  };
  return ex;
}

}  // namespace ptyparam
