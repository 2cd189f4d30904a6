// ptyparam command-line driver.
//
//   ptyparam simulate    -c run.json
//   ptyparam reconstruct -c run.json [--input DIR]
//   ptyparam fit         -c run.json [--input DIR]
//   ptyparam crlb        -c run.json
//   ptyparam montecarlo  -c run.json [--threads N]
//   ptyparam report      RUN_DIR [--check]
//
// Exit codes: 0 ok, 2 configuration or input error, 3 numerical failure,
// 4 report --check failure. Errors are printed to stderr as one JSON object.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>
#include <thread>

#include "commands.hpp"

namespace {

using namespace ptyparam;
using namespace ptyparam::cli;

int fail(int code, const std::string& kind, const std::string& message,
         const std::vector<std::string>& details = {}) {
  nlohmann::json j;
  j["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
  if (!details.empty()) j["error"]["details"] = details;
  std::cerr << j.dump() << std::endl;
  return code;
}

std::size_t default_threads() {
  if (const char* env = std::getenv("PTYPARAM_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter retrieval and Cramer-Rao bounds for ptychography"};
  app.require_subcommand(1);
  std::string config, out, input, run_dir;
  std::size_t threads = default_threads();
  bool check = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config, "experiment configuration (JSON)")->required();
    sub->add_option("-o,--out", out, "output directory (overrides output_dir)");
  };
  auto* simulate = app.add_subcommand("simulate", "write noise-free or Poisson measurements");
  add_common(simulate);
  auto* reconstruct = app.add_subcommand("reconstruct", "PIE (+ optional Poisson MLE) reconstruction");
  add_common(reconstruct);
  reconstruct->add_option("--input", input, "measurement directory (default OUT/measurements)");
  auto* fit = app.add_subcommand("fit", "fit the parametric model to the reconstruction");
  add_common(fit);
  fit->add_option("--input", input, "measurement directory, for the automatic dipole guess");
  auto* crlb_cmd = app.add_subcommand("crlb", "Fisher information and Cramer-Rao bounds");
  add_common(crlb_cmd);
  auto* mc = app.add_subcommand("montecarlo", "Monte Carlo estimator statistics");
  add_common(mc);
  mc->add_option("--threads", threads, "worker threads (default $PTYPARAM_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  auto* report = app.add_subcommand("report", "collect curves and optionally check them");
  report->add_option("run_dir", run_dir, "run directory")->required();
  report->add_flag("--check", check, "exit 4 when a bound is violated");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }

  try {
    if (report->parsed()) {
      cmd_report(run_dir, check);
      return 0;
    }
    RunContext ctx;
    ctx.cfg = load_config(config);
    ctx.out = out.empty() ? fs::path(ctx.cfg.output_dir) : fs::path(out);
    ctx.threads = threads;
    fs::create_directories(ctx.out);
    if (simulate->parsed()) cmd_simulate(ctx);
    if (reconstruct->parsed()) cmd_reconstruct(ctx, input);
    if (fit->parsed()) cmd_fit(ctx, input);
    if (crlb_cmd->parsed()) cmd_crlb(ctx);
    if (mc->parsed()) cmd_montecarlo(ctx);
    return 0;
  } catch (const ConfigError& e) {
    return fail(2, "config", e.what());
  } catch (const InputError& e) {
    return fail(2, "input", e.what());
  } catch (const FormatError& e) {
    return fail(2, "input", e.what());
  } catch (const IoError& e) {
    return fail(2, "input", e.what());
  } catch (const CheckFailed& e) {
    return fail(4, "check", e.what(), e.failures());
  } catch (const ReconDiverged& e) {
    return fail(3, "numerical", e.what());
  } catch (const NonFiniteCost& e) {
    return fail(3, "numerical", e.what());
  } catch (const CampaignFailed& e) {
    return fail(3, "numerical", e.what());
  } catch (const DetectionError& e) {
    return fail(3, "numerical", e.what());
  } catch (const std::domain_error& e) {
    return fail(3, "numerical", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(2, "input", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(2, "config", e.what());
  } catch (const std::exception& e) {
    return fail(3, "numerical", e.what());
  }
}
