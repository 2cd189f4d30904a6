#pragma once

// Experiment configuration: a JSON document with every length given as a
// string "<value> <unit>", unit one of nm, um, µm, mm, cm, m, lambda.
// Unknown keys are errors.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ptyparam/ptyparam.hpp"

namespace ptyparam::cli {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A length with its unit, resolved against a wavelength later.
struct Length {
  double value = 0.0;
  std::string unit;

  /// Value in wavelengths; `wavelength_m` is the wavelength in metres.
  [[nodiscard]] double lambdas(double wavelength_m) const {
    if (unit == "lambda") return value;
    return value * metres_per(unit) / wavelength_m;
  }
  [[nodiscard]] double metres() const {
    if (unit == "lambda") throw ConfigError("a wavelength cannot be given in units of lambda");
    return value * metres_per(unit);
  }

  static double metres_per(const std::string& u) {
    if (u == "nm") return 1e-9;
    if (u == "um" || u == "µm") return 1e-6;
    if (u == "mm") return 1e-3;
    if (u == "cm") return 1e-2;
    if (u == "m") return 1.0;
    throw ConfigError("unknown length unit '" + u + "'");
  }

  static Length parse(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path + ": length must be a string with a unit, e.g. \"250 nm\"");
    std::istringstream is(j.get<std::string>());
    Length l;
    if (!(is >> l.value)) throw ConfigError(path + ": cannot read a number from '" + j.get<std::string>() + "'");
    if (!(is >> l.unit)) throw ConfigError(path + ": missing unit in '" + j.get<std::string>() + "'");
    std::string rest;
    if (is >> rest) throw ConfigError(path + ": trailing text in '" + j.get<std::string>() + "'");
    if (l.unit == "λ") l.unit = "lambda";
    if (l.unit != "lambda") metres_per(l.unit);
    if (!std::isfinite(l.value)) throw ConfigError(path + ": length must be finite");
    return l;
  }
};

namespace detail {

/// Rejects keys outside `allowed`.
inline void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(path + ": unknown key '" + it.key() + "'");
}

inline const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + ": missing key '" + key + "'");
  return j.at(key);
}

template <class T>
T get(const json& j, const std::string& key, const std::string& path, std::optional<T> def = std::nullopt) {
  if (!j.contains(key)) {
    if (def) return *def;
    throw ConfigError(path + ": missing key '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

inline double number(const json& j, const std::string& key, const std::string& path,
                     std::optional<double> def = std::nullopt) {
  if (j.contains(key) && !j.at(key).is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return get<double>(j, key, path, def);
}

inline std::size_t count(const json& j, const std::string& key, const std::string& path,
                         std::optional<std::size_t> def = std::nullopt) {
  if (j.contains(key) && !j.at(key).is_number_unsigned())
    throw ConfigError(path + "." + key + ": expected a nonnegative integer");
  return get<std::size_t>(j, key, path, def);
}

inline std::vector<double> numbers(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) return {};
  const auto& a = j.at(key);
  if (a.is_number()) return {a.get<double>()};
  if (!a.is_array()) throw ConfigError(path + "." + key + ": expected a number or a list of numbers");
  std::vector<double> out;
  for (const auto& v : a) {
    if (!v.is_number()) throw ConfigError(path + "." + key + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::vector<Length> lengths(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) return {};
  const auto& a = j.at(key);
  if (!a.is_array()) throw ConfigError(path + "." + key + ": expected a list of lengths");
  std::vector<Length> out;
  for (std::size_t i = 0; i < a.size(); ++i)
    out.push_back(Length::parse(a[i], path + "." + key + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

struct ReconBlock {
  ReconConfig pie;
  std::size_t mle_iters = 0;  // 0 disables Poisson refinement
  double mle_tol = 1e-10;

  [[nodiscard]] std::optional<MleConfig> mle() const {
    if (mle_iters == 0) return std::nullopt;
    return MleConfig{mle_iters, mle_tol};
  }
};

struct NoiseBlock {
  std::vector<double> pn{1e8};
  std::size_t trials = 200;
  std::uint64_t base_seed = 1;
  bool sample = false;  // simulate writes Poisson counts instead of expectations
};

struct CrlbBlock {
  std::vector<double> pn;
  double sweep_pn = 1e8;              // photon number for the alpha2 / b1 sweeps
  std::vector<double> alpha2_scale;   // dipole experiment
  std::vector<double> b1;             // rectangle experiment, wavelengths
  bool diagonal_only = false;
};

struct DipoleConfig {
  DarkFieldGeometry geo;
  double wavelength_m = 500e-9;
  double magnification = 20.0;
  double z = 0.0;
  DipoleScene truth;
  std::optional<std::vector<double>> guess;  // theta; bounds follow the guess
};

struct RectConfig {
  RectGeometry geo;
  double wavelength_m = 30e-9;
  double overlap = 0.75;
  double detector_pixel_m = 50e-6;
  std::size_t detector_pixels = 60;
  double distance_m = 1.88e-2;
  RectParams truth;
  std::optional<std::vector<double>> guess;  // (A, phi, a, b, x, y); empty = proportional
};

struct ExperimentConfig {
  std::string application;  // "dipole-darkfield" or "rect-ptycho"
  std::string output_dir = ".";
  std::variant<DipoleConfig, RectConfig> experiment;
  ReconBlock recon;
  MinimizeOptions fit;
  NoiseBlock noise;
  CrlbBlock crlb;
  std::vector<std::string> track;  // parameters reported by campaigns; empty = all

  [[nodiscard]] bool is_dipole() const { return std::holds_alternative<DipoleConfig>(experiment); }
  [[nodiscard]] const DipoleConfig& dipole() const { return std::get<DipoleConfig>(experiment); }
  [[nodiscard]] const RectConfig& rect() const { return std::get<RectConfig>(experiment); }
};

namespace detail {

inline DipoleConfig parse_dipole(const json& geo, const json& scene) {
  check_keys(geo, "geometry", {"wavelength", "incident_angle_deg", "tilts", "na", "magnification", "detector_pixel",
                               "detector_pixels", "object_pixels", "distance", "snap_tilts"});
  DipoleConfig c;
  c.wavelength_m = Length::parse(need(geo, "wavelength", "geometry"), "geometry.wavelength").metres();
  if (!(c.wavelength_m > 0.0)) throw ConfigError("geometry.wavelength must be positive");
  const double angle = number(geo, "incident_angle_deg", "geometry");
  if (!(angle > 0.0 && angle < 90.0)) throw ConfigError("geometry.incident_angle_deg must lie in (0, 90)");
  c.geo.polar = angle * std::numbers::pi / 180.0;
  c.geo.n_tilts = count(geo, "tilts", "geometry");
  if (c.geo.n_tilts == 0) throw ConfigError("geometry.tilts must be positive");
  c.geo.na = number(geo, "na", "geometry");
  if (!(c.geo.na > 0.0 && c.geo.na < 1.0)) throw ConfigError("geometry.na must lie in (0, 1)");
  c.magnification = number(geo, "magnification", "geometry");
  if (!(c.magnification > 0.0)) throw ConfigError("geometry.magnification must be positive");
  const auto pix = Length::parse(need(geo, "detector_pixel", "geometry"), "geometry.detector_pixel");
  c.geo.det_pixel = pix.lambdas(c.wavelength_m) / c.magnification;
  if (!(c.geo.det_pixel > 0.0)) throw ConfigError("geometry.detector_pixel must be positive");
  c.geo.n_det = count(geo, "detector_pixels", "geometry");
  c.geo.n_ext = count(geo, "object_pixels", "geometry");
  if (c.geo.n_det < 2 || c.geo.n_ext < c.geo.n_det) throw ConfigError("geometry: need 2 <= detector_pixels <= object_pixels");
  if (geo.contains("distance")) c.z = Length::parse(geo.at("distance"), "geometry.distance").lambdas(c.wavelength_m);
  c.geo.snap_tilts = get<bool>(geo, "snap_tilts", "geometry", true);

  check_keys(scene, "scene", {"dipoles", "initial_guess"});
  auto read_dipoles = [&](const json& a, const std::string& path) {
    if (!a.is_array()) throw ConfigError(path + ": expected a list of dipoles");
    std::vector<double> t;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      check_keys(a[i], p, {"alpha", "x", "y"});
      const double alpha = number(a[i], "alpha", p);
      if (!(alpha > 0.0)) throw ConfigError(p + ".alpha must be positive (units of lambda^3)");
      t.insert(t.end(), {alpha, Length::parse(need(a[i], "x", p), p + ".x").lambdas(c.wavelength_m),
                         Length::parse(need(a[i], "y", p), p + ".y").lambdas(c.wavelength_m)});
    }
    return t;
  };
  c.truth = DipoleScene::from_theta(read_dipoles(need(scene, "dipoles", "scene"), "scene.dipoles"), 1.0, c.z);
  if (scene.contains("initial_guess")) {
    const auto& g = scene.at("initial_guess");
    if (!(g.is_string() && g.get<std::string>() == "auto")) {
      c.guess = read_dipoles(g, "scene.initial_guess");
      if (c.guess->size() != c.truth.theta().size())
        throw ConfigError("scene.initial_guess must list as many dipoles as scene.dipoles");
    }
  }
  return c;
}

inline RectConfig parse_rect(const json& geo, const json& scene) {
  check_keys(geo, "geometry", {"wavelength", "object_pixels", "probe_pixels", "spacing", "scan", "overlap",
                               "support_radius", "probe_fwhm", "detector_pixel", "detector_pixels", "distance"});
  RectConfig c;
  c.wavelength_m = Length::parse(need(geo, "wavelength", "geometry"), "geometry.wavelength").metres();
  if (!(c.wavelength_m > 0.0)) throw ConfigError("geometry.wavelength must be positive");
  auto len = [&](const char* key) {
    return Length::parse(need(geo, key, "geometry"), std::string("geometry.") + key).lambdas(c.wavelength_m);
  };
  c.geo.n_object = count(geo, "object_pixels", "geometry");
  c.geo.n_probe = count(geo, "probe_pixels", "geometry");
  if (c.geo.n_probe < 2 || c.geo.n_probe > c.geo.n_object) throw ConfigError("geometry: need 2 <= probe_pixels <= object_pixels");
  c.geo.dx = len("spacing");
  if (!(c.geo.dx > 0.0)) throw ConfigError("geometry.spacing must be positive");
  c.geo.n_scan = count(geo, "scan", "geometry");
  if (c.geo.n_scan == 0) throw ConfigError("geometry.scan must be positive");
  c.overlap = number(geo, "overlap", "geometry");
  if (!(c.overlap >= 0.0 && c.overlap < 1.0)) throw ConfigError("geometry.overlap must lie in [0, 1)");
  c.geo.radius = len("support_radius");
  if (!(c.geo.radius > 0.0)) throw ConfigError("geometry.support_radius must be positive");
  c.geo.fwhm = geo.contains("probe_fwhm") ? len("probe_fwhm") : c.geo.radius;
  if (!(c.geo.fwhm > 0.0)) throw ConfigError("geometry.probe_fwhm must be positive");
  c.geo.pitch = 2.0 * c.geo.radius * (1.0 - c.overlap);
  if (geo.contains("detector_pixel"))
    c.detector_pixel_m = Length::parse(geo.at("detector_pixel"), "geometry.detector_pixel").metres();
  c.detector_pixels = count(geo, "detector_pixels", "geometry", c.geo.n_probe);
  if (c.detector_pixels != c.geo.n_probe) throw ConfigError("geometry.detector_pixels must equal probe_pixels");
  if (geo.contains("distance")) c.distance_m = Length::parse(geo.at("distance"), "geometry.distance").metres();

  check_keys(scene, "scene", {"rectangle", "initial_guess"});
  auto read_rect = [&](const json& r, const std::string& p) {
    check_keys(r, p, {"a", "b", "x", "y", "A", "phi"});
    auto l = [&](const char* key) {
      return Length::parse(need(r, key, p), p + "." + key).lambdas(c.wavelength_m);
    };
    RectParams q{l("a"), l("b"), l("x"), l("y"), number(r, "A", p), number(r, "phi", p)};
    try {
      q.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(p + ": " + e.what());
    }
    return q;
  };
  c.truth = read_rect(need(scene, "rectangle", "scene"), "scene.rectangle");
  if (scene.contains("initial_guess")) {
    const auto& g = scene.at("initial_guess");
    if (!(g.is_string() && g.get<std::string>() == "proportional"))
      c.guess = read_rect(g, "scene.initial_guess").theta();
  }
  return c;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  using namespace detail;
  check_keys(j, "config", {"application", "output_dir", "geometry", "scene", "recon", "fit", "noise", "crlb", "track"});
  ExperimentConfig c;
  c.application = get<std::string>(j, "application", "config");
  c.output_dir = get<std::string>(j, "output_dir", "config", std::string("."));
  const auto& geo = need(j, "geometry", "config");
  const auto& scene = need(j, "scene", "config");
  if (c.application == "dipole-darkfield") {
    c.experiment = parse_dipole(geo, scene);
  } else if (c.application == "rect-ptycho") {
    c.experiment = parse_rect(geo, scene);
  } else {
    throw ConfigError("config.application must be 'dipole-darkfield' or 'rect-ptycho'");
  }

  // reconstruction defaults differ per experiment
  if (c.is_dipole()) {
    c.recon.pie = ReconConfig{500, 1.0, 1e-12};
    c.recon.mle_iters = 0;
  } else {
    c.recon.pie = ReconConfig{1000, 1.0, 1e-12};
  }
  if (j.contains("recon")) {
    const auto& r = j.at("recon");
    check_keys(r, "recon", {"max_iters", "beta", "tol", "target", "shuffle", "seed", "mle_iters", "mle_tol"});
    c.recon.pie.max_iters = count(r, "max_iters", "recon", c.recon.pie.max_iters);
    c.recon.pie.beta = number(r, "beta", "recon", c.recon.pie.beta);
    c.recon.pie.tol = number(r, "tol", "recon", c.recon.pie.tol);
    c.recon.pie.target = number(r, "target", "recon", c.recon.pie.target);
    c.recon.pie.shuffle = get<bool>(r, "shuffle", "recon", false);
    c.recon.pie.seed = get<std::uint64_t>(r, "seed", "recon", std::uint64_t{0});
    c.recon.mle_iters = count(r, "mle_iters", "recon", c.recon.mle_iters);
    c.recon.mle_tol = number(r, "mle_tol", "recon", c.recon.mle_tol);
    try {
      c.recon.pie.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    check_keys(f, "fit", {"max_iters", "ftol", "gtol"});
    c.fit.max_iters = count(f, "max_iters", "fit", c.fit.max_iters);
    c.fit.ftol = number(f, "ftol", "fit", c.fit.ftol);
    c.fit.gtol = number(f, "gtol", "fit", c.fit.gtol);
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    check_keys(n, "noise", {"pn", "trials", "base_seed", "sample"});
    if (n.contains("pn")) c.noise.pn = numbers(n, "pn", "noise");
    c.noise.trials = count(n, "trials", "noise", c.noise.trials);
    c.noise.base_seed = get<std::uint64_t>(n, "base_seed", "noise", c.noise.base_seed);
    c.noise.sample = get<bool>(n, "sample", "noise", false);
  }
  if (c.noise.pn.empty()) throw ConfigError("noise.pn must not be empty");
  for (double v : c.noise.pn)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("noise.pn values must be finite and nonnegative");
  if (j.contains("crlb")) {
    const auto& k = j.at("crlb");
    check_keys(k, "crlb", {"pn", "sweep_pn", "alpha2_scale", "b1", "diagonal_only"});
    c.crlb.pn = numbers(k, "pn", "crlb");
    c.crlb.sweep_pn = number(k, "sweep_pn", "crlb", c.crlb.sweep_pn);
    c.crlb.alpha2_scale = numbers(k, "alpha2_scale", "crlb");
    c.crlb.diagonal_only = get<bool>(k, "diagonal_only", "crlb", false);
    if (k.contains("b1")) {
      if (c.is_dipole()) throw ConfigError("crlb.b1 applies to the rect-ptycho application only");
      for (const auto& l : lengths(k, "b1", "crlb")) c.crlb.b1.push_back(l.lambdas(c.rect().wavelength_m));
    }
    if (!c.crlb.alpha2_scale.empty() && (!c.is_dipole() || c.dipole().truth.size() < 2))
      throw ConfigError("crlb.alpha2_scale needs a dipole scene with at least two dipoles");
    for (double v : c.crlb.pn)
      if (!(v > 0.0)) throw ConfigError("crlb.pn values must be positive");
    if (!(c.crlb.sweep_pn > 0.0)) throw ConfigError("crlb.sweep_pn must be positive");
  }
  if (j.contains("track")) {
    c.track = get<std::vector<std::string>>(j, "track", "config");
    const auto names = c.is_dipole() ? dipole_names(c.dipole().truth.size()) : rect_names();
    for (const auto& t : c.track)
      if (std::find(names.begin(), names.end(), t) == names.end()) throw ConfigError("track: unknown parameter '" + t + "'");
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace ptyparam::cli
