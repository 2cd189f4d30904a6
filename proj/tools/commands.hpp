#pragma once

// Implementations of the ptyparam subcommands. Every output file is written
// to a temporary name and renamed into place.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "ptyparam/ptyparam.hpp"

namespace ptyparam::cli {

namespace fs = std::filesystem;

/// Input files missing or unreadable; reported like a configuration error.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// report --check found a violated property.
class CheckFailed : public std::runtime_error {
 public:
  CheckFailed(const std::string& what, std::vector<std::string> failures)
      : std::runtime_error(what), failures_(std::move(failures)) {}
  [[nodiscard]] const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << text;
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Rows of a comma-separated file with a header; returns header + rows.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw InputError("CSV column '" + name + "' not found");
  }
};

inline Csv read_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  Csv c;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!l.empty() && l.back() == ',') f.emplace_back();
    return f;
  };
  if (!std::getline(in, line)) throw InputError(path.string() + " is empty");
  c.header = split(line);
  while (std::getline(in, line))
    if (!line.empty()) c.rows.push_back(split(line));
  return c;
}

inline double to_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw InputError("bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    if (s == "nan") return std::nan("");
    throw InputError("bad number '" + s + "'");
  }
}

struct RunContext {
  ExperimentConfig cfg;
  fs::path out;
  std::size_t threads = 1;
};

// ------------------------------------------------------------- experiment

/// Dipole scene with A_in calibrated to `pn` photons from the first dipole.
inline DipoleScene dipole_scene_at(const DipoleConfig& d, double pn) {
  DipoleScene s = d.truth;
  s.a_in = s.size() == 0 ? 1.0 : calibrate_flux(s, d.geo, pn);
  return s;
}

inline Probe rect_probe_at(const RectConfig& r, double pn) {
  return r.geo.probe(calibrate_flux(r.geo.probe(), pn));
}

inline std::string view_file(std::size_t j) {
  std::ostringstream os;
  os << "view_" << std::setw(3) << std::setfill('0') << j << ".ptyf";
  return os.str();
}

inline Measurements read_measurements(const fs::path& dir, std::size_t views, const GridSpec& g) {
  const auto manifest = read_csv(dir / "manifest.csv");
  if (manifest.rows.size() != views)
    throw InputError("manifest lists " + std::to_string(manifest.rows.size()) + " views, the configuration has " +
                     std::to_string(views));
  const auto fcol = manifest.column("file");
  Measurements m;
  for (const auto& row : manifest.rows) {
    ComplexField f;
    try {
      f = read_ptyf(dir / row.at(fcol));
    } catch (const FormatError& e) {
      throw InputError(e.what());
    }
    if (f.nx() != g.nx || f.ny() != g.ny) throw InputError("measurement " + row.at(fcol) + " has the wrong shape");
    m.push_back(real_part(f));
  }
  return m;
}

inline fs::path measurement_dir(const RunContext& ctx, const std::string& input) {
  return input.empty() ? ctx.out / "measurements" : fs::path(input);
}

// ---------------------------------------------------------------- simulate

inline void cmd_simulate(const RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const double pn = cfg.noise.pn.front();
  const fs::path dir = ctx.out / "measurements";
  fs::create_directories(dir);
  Measurements meas;
  std::ostringstream manifest, meta;
  manifest << std::setprecision(12);
  meta << std::setprecision(12) << "key,value\n";
  if (cfg.is_dipole()) {
    const auto& d = cfg.dipole();
    const auto scene = dipole_scene_at(d, pn);
    FourierPtychoModel model(d.geo, scene.a_in, scene.z);
    auto o = object_spectrum(scene, d.geo.spectrum());
    model.project(o);
    meas = simulate(model, o);
    manifest << "view,file,kx,ky\n";
    const auto tilts = d.geo.tilts();
    for (std::size_t j = 0; j < tilts.size(); ++j)
      manifest << j << ',' << view_file(j) << ',' << tilts[j].x << ',' << tilts[j].y << '\n';
    meta << "application,dipole-darkfield\npn," << pn << "\na_in," << scene.a_in << "\nviews," << tilts.size()
         << "\ndetector_spacing_lambda," << d.geo.det_pixel << "\nobject_spacing_lambda," << d.geo.object_spacing()
         << "\n";
  } else {
    const auto& r = cfg.rect();
    const auto probe = rect_probe_at(r, pn);
    const auto plan = r.geo.plan();
    RealSpacePtychoModel model(probe, plan, r.geo.object());
    meas = simulate(model, band_limited_rect(r.truth, r.geo.object()));
    manifest << "view,file,shift_x,shift_y\n";
    for (std::size_t j = 0; j < plan.size(); ++j)
      manifest << j << ',' << view_file(j) << ',' << plan.shifts[j].x << ',' << plan.shifts[j].y << '\n';
    meta << "application,rect-ptycho\npn," << pn << "\nprobe_scale," << calibrate_flux(r.geo.probe(), pn)
         << "\nviews," << plan.size() << "\noverlap," << plan.overlap_ratio() << "\npitch_lambda," << plan.pitch
         << "\nfresnel_number," << fresnel_number(r.geo.n_probe, r.geo.dx * r.wavelength_m, r.wavelength_m, r.distance_m)
         << "\n";
  }
  if (cfg.noise.sample) meas = sample_measurements(meas, cfg.noise.base_seed);
  meta << "noise," << (cfg.noise.sample ? "poisson" : "none") << "\n";
  for (std::size_t j = 0; j < meas.size(); ++j) write_ptyf(dir / view_file(j), to_complex(meas[j]));
  write_text(dir / "manifest.csv", manifest.str());
  write_text(ctx.out / "simulation.csv", meta.str());
}

// ------------------------------------------------------------- reconstruct

inline void cmd_reconstruct(const RunContext& ctx, const std::string& input) {
  const auto& cfg = ctx.cfg;
  const double pn = cfg.noise.pn.front();
  ReconResult res;
  std::optional<MleConfig> mle = cfg.recon.mle();
  if (cfg.is_dipole()) {
    const auto& d = cfg.dipole();
    const auto scene = dipole_scene_at(d, pn);
    FourierPtychoModel model(d.geo, scene.a_in, scene.z);
    const auto meas = read_measurements(measurement_dir(ctx, input), model.views(), d.geo.detector());
    res = pie(model, meas, model.initial(), cfg.recon.pie);
    if (mle) res.estimate = mle_refine(model, meas, std::move(res.estimate), *mle).estimate;
  } else {
    const auto& r = cfg.rect();
    RealSpacePtychoModel model(rect_probe_at(r, pn), r.geo.plan(), r.geo.object());
    const auto meas = read_measurements(measurement_dir(ctx, input), model.views(), r.geo.window());
    res = pie(model, meas, model.initial(), cfg.recon.pie);
    if (mle) res.estimate = mle_refine(model, meas, std::move(res.estimate), *mle).estimate;
  }
  write_ptyf(ctx.out / "reconstruction.ptyf", res.estimate);
  std::ostringstream tr;
  tr << std::setprecision(12) << "sweep,cost\n";
  for (std::size_t i = 0; i < res.trace.size(); ++i) tr << i << ',' << res.trace[i] << '\n';
  write_text(ctx.out / "recon_trace.csv", tr.str());
  std::ostringstream s;
  s << std::setprecision(12) << "key,value\niterations," << res.iterations << "\nconverged," << res.converged
    << "\ncost," << res.cost << "\nrelative_cost," << (res.trace.front() > 0 ? res.cost / res.trace.front() : 0.0)
    << "\nmle," << (mle ? 1 : 0) << '\n';
  write_text(ctx.out / "recon.csv", s.str());
}

// --------------------------------------------------------------------- fit

inline InitialGuess dipole_guess(const RunContext& ctx, const FourierPtychoModel& model, const Measurements* meas) {
  const auto& d = ctx.cfg.dipole();
  if (d.truth.size() == 0) throw ConfigError("scene.dipoles is empty; nothing to fit");
  if (d.guess) return dipole_guess_bounds(*d.guess, d.geo.det_pixel);
  if (!meas) throw InputError("automatic initial guess needs the measurements");
  return auto_dipole_guess(model, *meas, d.truth.size());
}

inline std::vector<double> rect_guess(const RectConfig& r) {
  return r.guess ? *r.guess : proportional_rect_guess(r.truth);
}

inline void cmd_fit(const RunContext& ctx, const std::string& input) {
  const auto& cfg = ctx.cfg;
  ComplexField est;
  try {
    est = read_ptyf(ctx.out / "reconstruction.ptyf");
  } catch (const FormatError& e) {
    throw InputError(e.what());
  }
  std::string csv;
  FitResult res;
  if (cfg.is_dipole()) {
    const auto& d = cfg.dipole();
    const auto scene = dipole_scene_at(d, cfg.noise.pn.front());
    FourierPtychoModel model(d.geo, scene.a_in, scene.z);
    if (est.grid() != model.estimate_grid()) throw InputError("reconstruction does not match the spectrum grid");
    std::optional<Measurements> meas;
    if (!d.guess) meas = read_measurements(measurement_dir(ctx, input), model.views(), d.geo.detector());
    const auto guess = dipole_guess(ctx, model, meas ? &*meas : nullptr);
    res = fit_dipoles(est, model.omega(), guess, true, cfg.fit);
    csv = fit_csv(dipole_names(d.truth.size()), d.truth.theta(), guess.theta, guess.bounds, res);
  } else {
    const auto& r = cfg.rect();
    if (est.grid() != r.geo.object()) throw InputError("reconstruction does not match the object grid");
    const auto g = rect_guess(r);
    const auto b = rect_default_bounds(g);
    const auto probe = rect_probe_at(r, cfg.noise.pn.front());
    res = fit_rect(est, g, b, illuminated_mask(probe, r.geo.plan(), r.geo.object()), cfg.fit);
    csv = fit_csv(rect_names(), r.truth.theta(), g, b, res);
  }
  write_text(ctx.out / "fit.csv", csv);
  if (!res.converged) std::fprintf(stderr, "warning: fit did not converge: %s\n", res.message.c_str());
}

// -------------------------------------------------------------------- crlb

struct CrlbRow {
  std::string sweep;
  double value;
  CrlbReport report;
  std::size_t floored;
};

inline std::string crlb_rows_csv(const std::vector<CrlbRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(12) << "sweep,value,parameter,crlb,pn,condition,pseudo_inverse,diagonal_only,floored\n";
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.report.crlb.size(); ++i)
      os << r.sweep << ',' << r.value << ',' << r.report.names[i] << ',' << r.report.crlb[i] << ',' << r.report.pn
         << ',' << r.report.condition << ',' << r.report.pseudo_inverse << ',' << r.report.diagonal_only << ','
         << r.floored << '\n';
  return os.str();
}

inline FisherMatrix dipole_fisher_at(const DipoleConfig& d, const DipoleScene& scene) {
  return fisher_dipoles(SampledPupil(d.geo, scene.z), scene);
}

inline RectScene rect_scene_at(const RectConfig& r, const RectParams& p, double pn) {
  return {p, rect_probe_at(r, pn), r.geo.plan(), r.geo.object()};
}

inline void cmd_crlb(const RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const bool diag = cfg.crlb.diagonal_only;
  std::vector<CrlbRow> rows;
  const auto pns = cfg.crlb.pn.empty() ? cfg.noise.pn : cfg.crlb.pn;
  if (cfg.is_dipole()) {
    const auto& d = cfg.dipole();
    if (d.truth.size() == 0) throw ConfigError("scene.dipoles is empty; no Fisher information");
    for (double pn : pns) {
      const auto f = dipole_fisher_at(d, dipole_scene_at(d, pn));
      rows.push_back({"pn", pn, crlb(f, pn, diag), f.floored});
    }
    for (double s : cfg.crlb.alpha2_scale) {
      auto dd = d;
      dd.truth.dipoles[1].alpha *= s;
      const auto f = dipole_fisher_at(dd, dipole_scene_at(dd, cfg.crlb.sweep_pn));
      rows.push_back({"alpha2_scale", s, crlb(f, cfg.crlb.sweep_pn, diag), f.floored});
    }
    write_text(ctx.out / "fisher.csv", fisher_csv(dipole_fisher_at(d, dipole_scene_at(d, pns.front()))));
  } else {
    const auto& r = cfg.rect();
    for (double pn : pns) {
      const auto f = fisher_rect(rect_scene_at(r, r.truth, pn));
      rows.push_back({"pn", pn, crlb(f, pn, diag), f.floored});
    }
    for (double b1 : cfg.crlb.b1) {
      auto p = r.truth;
      p.b = b1;
      const auto f = fisher_rect(rect_scene_at(r, p, cfg.crlb.sweep_pn));
      rows.push_back({"b1", b1, crlb(f, cfg.crlb.sweep_pn, diag), f.floored});
    }
    write_text(ctx.out / "fisher.csv", fisher_csv(fisher_rect(rect_scene_at(r, r.truth, pns.front()))));
  }
  write_text(ctx.out / "crlb.csv", crlb_rows_csv(rows));
}

// -------------------------------------------------------------- montecarlo

inline std::vector<std::size_t> tracked_indices(const ExperimentConfig& cfg) {
  const auto names = cfg.is_dipole() ? dipole_names(cfg.dipole().truth.size()) : rect_names();
  std::vector<std::size_t> idx;
  for (const auto& t : cfg.track)
    idx.push_back(static_cast<std::size_t>(std::find(names.begin(), names.end(), t) - names.begin()));
  return idx;
}

inline void cmd_montecarlo(const RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  struct Point {
    std::string sweep;
    double value;
    double pn;
    Experiment ex;
  };
  std::vector<Point> points;
  if (cfg.is_dipole()) {
    const auto& d = cfg.dipole();
    if (d.truth.size() == 0) throw ConfigError("scene.dipoles is empty; nothing to estimate");
    DipolePipeline pipe{cfg.recon.pie, cfg.recon.mle(), cfg.fit};
    for (double pn : cfg.noise.pn) {
      const auto scene = dipole_scene_at(d, pn);
      FourierPtychoModel model(d.geo, scene.a_in, scene.z);
      auto o = object_spectrum(scene, d.geo.spectrum());
      model.project(o);
      const auto meas = simulate(model, o);
      auto ex = dipole_experiment(scene, d.geo, dipole_guess(ctx, model, &meas), pipe);
      ex.crlb = crlb(dipole_fisher_at(d, scene), pn).crlb;
      points.push_back({"pn", pn, pn, std::move(ex)});
    }
  } else {
    const auto& r = cfg.rect();
    RectPipeline pipe{cfg.recon.pie, cfg.recon.mle(), cfg.fit};
    const auto b1s = cfg.crlb.b1.empty() ? std::vector<double>{r.truth.b} : cfg.crlb.b1;
    for (double pn : cfg.noise.pn)
      for (double b1 : b1s) {
        auto p = r.truth;
        p.b = b1;
        auto g = r.guess && cfg.crlb.b1.empty() ? *r.guess : proportional_rect_guess(p);
        const auto sc = rect_scene_at(r, p, pn);
        auto ex = rect_experiment(p, sc.probe, sc.plan, sc.object, g, rect_default_bounds(g), pipe);
        ex.crlb = crlb(fisher_rect(sc), pn).crlb;
        points.push_back({cfg.crlb.b1.empty() ? "pn" : "b1", cfg.crlb.b1.empty() ? pn : b1, pn, std::move(ex)});
      }
  }
  std::ostringstream index;
  index << std::setprecision(12) << "sweep,value,pn,file,trials,used,failed\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    TrialPlan plan;
    plan.base_seed = cfg.noise.base_seed;
    plan.trials = cfg.noise.trials;
    plan.pn = points[i].pn;
    plan.track = tracked_indices(cfg);
    plan.threads = ctx.threads;
    const auto rep = run_campaign(plan, points[i].ex);
    const std::string file = "mc_" + std::to_string(i) + ".csv";
    write_text(ctx.out / "montecarlo" / file, mc_csv(rep));
    index << points[i].sweep << ',' << points[i].value << ',' << points[i].pn << ',' << file << ',' << rep.trials
          << ',' << rep.used << ',' << rep.failed << '\n';
  }
  write_text(ctx.out / "montecarlo.csv", index.str());
}

// ------------------------------------------------------------------ report

struct CurvePoint {
  std::string sweep;
  double value;
  std::string parameter;
  double crlb = std::nan("");
  double variance = std::nan("");
  double bias2 = std::nan("");
  std::size_t used = 0;
};

/// Minimal log-log line chart: CRLB as a line, Monte Carlo variance as dots.
inline std::string svg_chart(const std::string& title, const std::vector<CurvePoint>& pts) {
  const double W = 480, H = 320, L = 60, R = 20, T = 30, B = 40;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& p : pts) {
    if (!(p.value > 0)) continue;
    xmin = std::min(xmin, std::log10(p.value));
    xmax = std::max(xmax, std::log10(p.value));
    for (double y : {p.crlb, p.variance})
      if (y > 0) {
        ymin = std::min(ymin, std::log10(y));
        ymax = std::max(ymax, std::log10(y));
      }
  }
  if (!(xmax > xmin)) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (!(ymax > ymin)) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  auto X = [&](double v) { return L + (std::log10(v) - xmin) / (xmax - xmin) * (W - L - R); };
  auto Y = [&](double v) { return H - B - (std::log10(v) - ymin) / (ymax - ymin) * (H - T - B); };
  std::ostringstream os;
  os << std::setprecision(6) << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << L << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n"
     << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << L << "\" y=\"" << H - 10 << "\" font-size=\"11\">log10 x: " << xmin << " .. " << xmax
     << ", log10 y: " << ymin << " .. " << ymax << "</text>\n";
  std::string path;
  for (const auto& p : pts)
    if (p.value > 0 && p.crlb > 0) path += (path.empty() ? "M" : " L") + std::to_string(X(p.value)) + "," + std::to_string(Y(p.crlb));
  if (!path.empty()) os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>\n";
  for (const auto& p : pts)
    if (p.value > 0 && p.variance > 0)
      os << "<circle cx=\"" << X(p.value) << "\" cy=\"" << Y(p.variance) << "\" r=\"4\" fill=\"firebrick\"/>\n";
  os << "</svg>\n";
  return os.str();
}

/// Collects CRLB and Monte Carlo results of a run directory into curves.csv
/// plus one SVG per (sweep, parameter). With `check`, verifies
///   - Monte Carlo variance >= CRLB (1 - 3 sqrt(2/T)) for every reported parameter,
///   - CRLB x PN constant to 0.1% along the PN sweep.
inline void cmd_report(const fs::path& run, bool check) {
  std::map<std::pair<std::string, std::string>, std::map<double, CurvePoint>> curves;
  bool any = false;
  if (fs::exists(run / "crlb.csv")) {
    any = true;
    const auto c = read_csv(run / "crlb.csv");
    const auto cs = c.column("sweep"), cv = c.column("value"), cp = c.column("parameter"), cc = c.column("crlb");
    for (const auto& row : c.rows) {
      auto& pt = curves[{row[cs], row[cp]}][to_double(row[cv])];
      pt.sweep = row[cs];
      pt.value = to_double(row[cv]);
      pt.parameter = row[cp];
      pt.crlb = to_double(row[cc]);
    }
  }
  if (fs::exists(run / "montecarlo.csv")) {
    any = true;
    const auto idx = read_csv(run / "montecarlo.csv");
    const auto is = idx.column("sweep"), iv = idx.column("value"), ifl = idx.column("file");
    for (const auto& row : idx.rows) {
      const auto mc = read_csv(run / "montecarlo" / row[ifl]);
      const auto mp = mc.column("parameter"), mv = mc.column("variance"), mb = mc.column("bias2"),
                 mcr = mc.column("crlb"), mu = mc.column("trials_used");
      for (const auto& r : mc.rows) {
        auto& pt = curves[{row[is], r[mp]}][to_double(row[iv])];
        pt.sweep = row[is];
        pt.value = to_double(row[iv]);
        pt.parameter = r[mp];
        if (std::isnan(pt.crlb)) pt.crlb = to_double(r[mcr]);
        pt.variance = to_double(r[mv]);
        pt.bias2 = to_double(r[mb]);
        pt.used = static_cast<std::size_t>(to_double(r[mu]));
      }
    }
  }
  if (!any) throw InputError("run directory " + run.string() + " holds neither crlb.csv nor montecarlo.csv");

  std::ostringstream os;
  os << std::setprecision(12) << "sweep,value,parameter,crlb,mc_variance,mc_bias2,trials_used\n";
  std::vector<std::string> failures;
  for (const auto& [key, pts] : curves) {
    std::vector<CurvePoint> v;
    for (const auto& [x, p] : pts) {
      v.push_back(p);
      os << p.sweep << ',' << p.value << ',' << p.parameter << ',' << p.crlb << ',' << p.variance << ',' << p.bias2
         << ',' << p.used << '\n';
      if (check && p.used >= 2 && p.crlb > 0 && p.variance < p.crlb * (1.0 - 3.0 * std::sqrt(2.0 / static_cast<double>(p.used))))
        failures.push_back(p.parameter + " at " + p.sweep + "=" + std::to_string(p.value) + ": variance " +
                           std::to_string(p.variance) + " below CRLB " + std::to_string(p.crlb));
    }
    if (check && key.first == "pn" && v.size() >= 2) {
      const double ref = v.front().crlb * v.front().value;
      for (const auto& p : v)
        if (std::abs(p.crlb * p.value / ref - 1.0) > 1e-3)
          failures.push_back(p.parameter + ": CRLB x PN not constant along the PN sweep");
    }
    if (v.size() >= 2)
      write_text(run / ("curve_" + key.first + "_" + key.second + ".svg"), svg_chart(key.second + " vs " + key.first, v));
  }
  write_text(run / "curves.csv", os.str());
  if (!failures.empty()) throw CheckFailed(std::to_string(failures.size()) + " check(s) failed", failures);
}

}  // namespace ptyparam::cli
