// Batch front end: run-bmfg, run-local, diagnose-bgp, oracle-check.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "kgrowth/kgrowth.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStability = 3;
constexpr int kExitOracle = 4;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw kgrowth::ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void log_line(const std::string& msg) { std::cerr << "[kgrowth] " << msg << '\n'; }

int do_run(const std::string& config_path, const std::string& out_dir, kgrowth::SolverKind kind) {
  auto cfg = config_path.empty() ? kgrowth::parse_config(std::string()) : kgrowth::parse_config(slurp(config_path));
  cfg.solver = kind;
  const auto m = kgrowth::run(cfg, out_dir, log_line);
  std::printf("solver=%s converged=%s iterations=%zu wall_time=%.2fs\n", kgrowth::to_string(kind).c_str(),
              m.converged ? "true" : "false", m.iterations, m.wall_time);
  if (!m.error.empty()) {
    std::fprintf(stderr, "%s error: %s\n", m.error_kind.c_str(), m.error.c_str());
    return m.error_kind == "stability" ? kExitStability : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boltzmann mean-field games of knowledge growth"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  auto* bmfg = app.add_subcommand("run-bmfg", "solve the nonlocal (Boltzmann) game");
  bmfg->add_option("-c,--config", config_path, "JSON configuration (defaults if omitted)");
  bmfg->add_option("-o,--out", out_dir, "output directory")->capture_default_str();

  auto* local = app.add_subcommand("run-local", "solve the localized (Burgers) game");
  local->add_option("-c,--config", config_path, "JSON configuration (defaults if omitted)");
  local->add_option("-o,--out", out_dir, "output directory")->capture_default_str();

  std::string traj_dir;
  double t_max = 5.0;
  auto* diag = app.add_subcommand("diagnose-bgp", "tail and growth-parameter report of a stored run");
  diag->add_option("dir", traj_dir, "run output directory")->required();
  diag->add_option("--t-max", t_max, "end of the tail-drift window")->capture_default_str();

  std::size_t samples = 1000000;
  auto* oracle = app.add_subcommand("oracle-check", "optimizer and logistic oracle suites");
  oracle->add_option("--samples", samples, "brute-force samples per optimizer query")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bmfg) return do_run(config_path, out_dir, kgrowth::SolverKind::nonlocal);
    if (*local) return do_run(config_path, out_dir, kgrowth::SolverKind::local);
    if (*diag) {
      const auto report = kgrowth::diagnose_bgp(traj_dir, t_max);
      std::printf("inv_theta max relative deviation over [0, %g]: %.6g\n", t_max,
                  report.at("max_relative_deviation").get<double>());
      if (!report.at("gamma_bracket").is_null()) {
        const auto& g = report.at("gamma_bracket");
        std::printf("gamma bracket at t=%g: (%.6g, %.6g]\n", g.at("t").get<double>(),
                    g.at("lower").get<double>(), g.at("upper").get<double>());
      }
      std::printf("report written to %s/bgp_report.json\n", traj_dir.c_str());
      return 0;
    }
    if (*oracle) {
      bool ok = true;
      for (const auto& r : kgrowth::oracle_check(samples)) {
        std::printf("%-24s %s error=%.3e tol=%.1e\n", r.name.c_str(), r.passed() ? "PASS" : "FAIL", r.error,
                    r.tolerance);
        ok = ok && r.passed();
      }
      return ok ? 0 : kExitOracle;
    }
  } catch (const kgrowth::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const kgrowth::StabilityError& e) {
    std::fprintf(stderr, "stability error: %s\n", e.what());
    return kExitStability;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
