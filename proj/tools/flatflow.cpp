// Command-line front end: run a scenario, recompute trace diagnostics, and
// probe a stored run.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "flatflow/scenario.hpp"

namespace ff = flatflow;
namespace fs = std::filesystem;

namespace {

int run(const std::string& config_path, const std::string& out_override, bool quiet) {
  const ff::ScenarioConfig cfg = ff::parse_config(fs::path(config_path));
  const fs::path dir = out_override.empty() ? fs::path(cfg.output_dir) : fs::path(out_override);
  const int every = std::max(1, cfg.steps / 20);
  auto progress = [&](const ff::FlowRecord& r) {
    if (quiet || r.step % every != 0) return;
    std::fprintf(stderr, "step %5d  t=%.5f  lambda=%.6f  area=%.9g  perimeter=%.6f  kappa_dev=%.4g\n", r.step, r.t,
                 r.lambda, r.area, r.perimeter, r.kappa_dev);
  };
  const ff::RunSummary s = ff::run_scenario(cfg, dir, progress);
  std::printf("wrote %s (%zu steps, %.1f s)%s\n", dir.string().c_str(), s.trace.records.size(), s.seconds,
              s.trace.truncated ? ", stopped early" : "");
  return 0;
}

int diagnose(const std::string& dir) {
  const ff::ScenarioConfig cfg = ff::parse_config(fs::path(dir) / "config.ini");
  const ff::FlowTrace tr = ff::load_trace(dir);
  ff::write_trace_diagnostics(dir, cfg, tr);
  std::ifstream is(fs::path(dir) / "summary.csv");
  std::cout << is.rdbuf();
  return 0;
}

int probe_excess(const std::string& dir, const std::string& point, double t0, double r, double sigma, double alpha,
                 int depth) {
  std::stringstream ss(point);
  double x = 0, y = 0;
  char comma = 0;
  if (!(ss >> x >> comma >> y) || comma != ',' || !ss.eof())
    throw ff::Error(ff::ErrorKind::ConfigError, "--point expects x,y");
  const ff::FlowTrace tr = ff::load_trace(dir);
  if (t0 < 0.0) t0 = tr.records.back().t;
  if (r <= 0.0) r = 8.0 * tr.grid.spacing;
  const auto levels = ff::decay_probe(tr, {x, y}, t0, r, sigma, alpha, depth);
  auto os = ff::detail::open_out(fs::path(dir) / "excess_probe.csv");
  os << ff::kDecayColumns << '\n';
  ff::write_decay_csv(os, 0, levels);
  std::printf("%10s %12s %12s %10s %10s %10s\n", "scale", "excess", "ratio", "dA", "domega", "dc");
  for (const auto& l : levels)
    std::printf("%10.5f %12.4e %12.4e %10.4f %10.4f %10.4f\n", l.r, l.excess, l.excess_ratio, l.dA, l.domega, l.dc);
  return 0;
}

int probe_harnack(const std::string& config_path, const std::string& out_override) {
  const ff::ScenarioConfig cfg = ff::parse_config(fs::path(config_path));
  const fs::path dir = out_override.empty() ? fs::path(cfg.output_dir) : fs::path(out_override);
  ff::run_harnack_probe(dir, cfg);
  std::ifstream is(dir / "harnack_summary.csv");
  std::cout << is.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volume-preserving flat flow simulator and measurement tools"};
  app.require_subcommand(1);

  std::string config, out, dir, point;
  bool quiet = false;
  double t0 = -1.0, r = 0.0, sigma = 0.5, alpha = 0.1;
  int depth = 2;

  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write its outputs");
  run_cmd->add_option("config", config, "Scenario file")->required();
  run_cmd->add_option("-o,--out", out, "Output directory (overrides the config)");
  run_cmd->add_flag("-q,--quiet", quiet, "No progress lines");

  auto* diag_cmd = app.add_subcommand("diagnose", "Recompute apriori and good-time reports of a run directory");
  diag_cmd->add_option("trace-dir", dir, "Run directory")->required();

  auto* ex_cmd = app.add_subcommand("probe-excess", "Excess decay probe at a boundary point of a stored run");
  ex_cmd->add_option("trace-dir", dir, "Run directory")->required();
  ex_cmd->add_option("--point", point, "x,y near the boundary")->required();
  ex_cmd->add_option("--t0", t0, "Anchor time (default: final step)");
  ex_cmd->add_option("--r", r, "Initial scale (default: 8 spacings)");
  ex_cmd->add_option("--sigma", sigma, "Scale ratio")->check(CLI::Range(0.0, 1.0));
  ex_cmd->add_option("--alpha", alpha, "Hoelder exponent")->check(CLI::Range(0.0, 1.0));
  ex_cmd->add_option("--depth", depth, "Number of refinements")->check(CLI::NonNegativeNumber);

  auto* har_cmd = app.add_subcommand("probe-harnack", "ABP contact-set probe on synthetic supersolutions");
  har_cmd->add_option("config", config, "Scenario file")->required();
  har_cmd->add_option("-o,--out", out, "Output directory (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) return run(config, out, quiet);
    if (*diag_cmd) return diagnose(dir);
    if (*ex_cmd) return probe_excess(dir, point, t0, r, sigma, alpha, depth);
    if (*har_cmd) return probe_harnack(config, out);
  } catch (const ff::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return ff::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
