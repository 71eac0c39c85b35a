#pragma once

// Run orchestration and file output shared by the CLI and the acceptance
// suite: slice CSVs, diagnostics.json and manifest.json.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgrowth/bgp.hpp"
#include "kgrowth/boltzmann.hpp"
#include "kgrowth/config.hpp"
#include "kgrowth/coupling.hpp"
#include "kgrowth/errors.hpp"
#include "kgrowth/grid.hpp"
#include "kgrowth/hjb.hpp"
#include "kgrowth/localmfg.hpp"
#include "kgrowth/model.hpp"

namespace kgrowth {

namespace fs = std::filesystem;

inline SolutionTrajectory solve(const RunConfig& cfg, const Logger& log = {}) {
  return cfg.solver == SolverKind::local ? local_fixed_point_solve(cfg, log)
                                         : fixed_point_solve(cfg, log);
}

/// Levels written as slices: every slice_interval in time, plus the final level.
inline std::vector<std::size_t> stored_levels(const SolutionTrajectory& traj, double slice_interval) {
  const std::size_t last = traj.levels() - 1;
  const std::size_t stride =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(slice_interval / traj.dt)));
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n <= last; n += stride) out.push_back(n);
  if (out.back() != last) out.push_back(last);
  return out;
}

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string slice_filename(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "slice_t%g.csv", t);
  return buf;
}

inline void write_slice_csv(const fs::path& path, const DensityField& f, const ValueField& V,
                            const ControlField& S) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "z,f,V,S\n";
  for (std::size_t j = 0; j < f.size(); ++j) {
    out << format_g17(f.grid.node(j)) << ',' << format_g17(f[j]) << ',' << format_g17(V[j]) << ','
        << format_g17(S[j]) << '\n';
  }
}

struct SliceColumns {
  std::vector<double> z, f, V, S;
};

inline SliceColumns read_slice_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "z,f,V,S") throw std::runtime_error(path.string() + ": unexpected header");
  SliceColumns c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    double v[4];
    for (int k = 0; k < 4; ++k) {
      if (!std::getline(row, cell, ',')) throw std::runtime_error(path.string() + ": short row");
      v[k] = std::strtod(cell.c_str(), nullptr);
    }
    c.z.push_back(v[0]);
    c.f.push_back(v[1]);
    c.V.push_back(v[2]);
    c.S.push_back(v[3]);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Per-slice checks reported in diagnostics.json

/// Right end of the leading interval where S = 1 (up to 1e-12); -1 if S(0) < 1.
inline double saturation_edge(const ControlField& S) {
  double edge = -1.0;
  for (std::size_t j = 0; j < S.size(); ++j) {
    if (S[j] < 1.0 - 1e-12) break;
    edge = S.grid.node(j);
  }
  return edge;
}

struct SignChange {
  bool found = false;
  std::size_t node = 0;   // node of the crossing closest to V = 0
  double z = 0.0;
  double residual = 0.0;  // |U((1-S) z0) + alpha(S) B(z0)|
  double bound = 0.0;     // 5 dz max |dV/dz|
};

/// First upward zero crossing of V and the stationarity residual there.
inline SignChange value_sign_change(const ValueField& V, const ControlField& S,
                                    const BenefitField& B, const ModelSpec& spec) {
  SignChange sc;
  const std::size_t n = V.size();
  const double dz = V.grid.dz();
  for (std::size_t j = 0; j + 1 < n; ++j) {
    if (V[j] < 0.0 && V[j + 1] >= 0.0) {
      sc.found = true;
      sc.node = std::abs(V[j]) <= std::abs(V[j + 1]) ? j : j + 1;
      break;
    }
  }
  if (!sc.found) return sc;
  const double z0 = V.grid.node(sc.node);
  sc.z = z0;
  const double p = (1.0 - S[sc.node]) * z0;
  sc.residual = std::abs(eval_utility(spec.utility, p) + eval_alpha(spec.learning, S[sc.node]) * B[sc.node]);
  double slope = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) slope = std::max(slope, std::abs(V[j + 1] - V[j]) / dz);
  sc.bound = 5.0 * dz * slope;
  return sc;
}

inline BenefitField slice_benefit(const RunConfig& cfg, const ValueField& V, const DensityField& f,
                                  const KernelTable* table) {
  if (cfg.solver == SolverKind::local) return local_benefit(V, f, f.grid.dz(), cfg.local_benefit);
  return benefit(V, f, *table);
}

inline nlohmann::json tail_fit_json(const TailFit& fit) {
  return {{"inv_theta", fit.inv_theta}, {"beta_hat", fit.beta_hat},   {"window_lo", fit.window_lo},
          {"window_hi", fit.window_hi}, {"r_squared", fit.r_squared}, {"n_points", fit.n_points}};
}

inline nlohmann::json gamma_json(const GammaBracket& g, double t, double theta) {
  return {{"t", t},
          {"theta", theta},
          {"lower", g.lower},
          {"upper", g.upper},
          {"integral_term", g.integral_term},
          {"degenerate", g.degenerate()}};
}

/// Last stored level strictly before the horizon (the terminal level has S = 0).
inline std::size_t last_interior(const std::vector<double>& times, double T) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (times[i] < T - 1e-9 && times[i] >= times[best]) best = i;
  return best;
}

inline nlohmann::json diagnostics_json(const RunConfig& cfg, const SolutionTrajectory& traj,
                                       const std::vector<std::size_t>& levels) {
  using nlohmann::json;
  const auto& d = traj.diagnostics;
  const auto report = convergence_report(traj);
  json j;
  j["schema"] = 1;
  j["solver_kind"] = to_string(cfg.solver);
  j["dt"] = traj.dt;
  j["steps"] = traj.levels() - 1;
  j["normalization"] = d.normalization;
  j["mass"] = d.mass;
  j["mean"] = d.mean;
  j["clipped_mass_max"] = d.clipped_mass.empty() ? 0.0 : *std::max_element(d.clipped_mass.begin(), d.clipped_mass.end());
  if (!d.boundary_flux.empty()) j["boundary_flux"] = d.boundary_flux;
  j["residuals"] = d.residuals;
  j["iterations"] = d.iterations;
  j["converged"] = d.converged;
  j["policy_sweeps"] = d.policy_sweeps;
  j["unconverged_policy_levels"] = d.unconverged_levels;
  j["convergence"] = {{"final_residual", report.final_residual},
                      {"iterations", report.iterations},
                      {"worst_mass_drift", report.worst_mass_drift},
                      {"worst_step_mass_drift", report.worst_step_mass_drift},
                      {"mean_violations", report.mean_violations},
                      {"V_violation_max", report.V_violation_max},
                      {"S_violation_max", report.S_violation_max},
                      {"V_violations", report.V_violations},
                      {"S_violations", report.S_violations}};

  std::optional<KernelTable> table;
  if (cfg.solver == SolverKind::nonlocal) table.emplace(cfg.model.kernel, cfg.grid);
  std::vector<double> times;
  std::vector<DensityField> slices;
  json per_slice = json::array();
  for (std::size_t n : levels) {
    const auto& f = traj.f[n];
    const auto& V = traj.V[n];
    const auto& S = traj.S[n];
    const auto B = slice_benefit(cfg, V, f, table ? &*table : nullptr);
    json s;
    s["t"] = traj.times[n];
    s["file"] = slice_filename(traj.times[n]);
    s["V_min"] = *std::min_element(V.values.begin(), V.values.end());
    s["saturation_edge"] = saturation_edge(S);
    s["productivity"] = productivity(f, S, cfg.model.utility);
    const auto sc = value_sign_change(V, S, B, cfg.model);
    if (sc.found) {
      s["V_sign_change"] = {{"z", sc.z}, {"node", sc.node}, {"residual", sc.residual}, {"bound", sc.bound}};
    } else {
      s["V_sign_change"] = nullptr;
    }
    per_slice.push_back(s);
    times.push_back(traj.times[n]);
    slices.push_back(f);
  }
  j["slices"] = per_slice;

  try {
    const auto tails = tail_preservation_report(times, slices, cfg.model);
    json tj = json::array();
    for (const auto& s : tails.samples) {
      auto e = tail_fit_json(s.fit);
      e["t"] = s.t;
      e["beta_envelope_lo"] = s.beta_envelope_lo;
      e["beta_envelope_hi"] = s.beta_envelope_hi;
      tj.push_back(e);
    }
    j["tail_fits"] = tj;
    j["tail_max_relative_deviation_t_le_5"] = tails.max_relative_deviation(5.0);
    const double inv_theta0 = tails.samples.front().fit.inv_theta;
    if (tails.samples.front().fit.is_pareto()) {
      const std::size_t k = last_interior(times, cfg.T);
      const std::size_t n = levels[k];
      const double theta = 1.0 / inv_theta0;
      j["gamma_bracket"] = gamma_json(gamma_bracket(traj.f[n], traj.S[n], cfg.model, theta), traj.times[n], theta);
    } else {
      j["gamma_bracket"] = nullptr;
    }
  } catch (const DomainError& e) {
    j["tail_fits"] = nullptr;
    j["tail_error"] = e.what();
    j["gamma_bracket"] = nullptr;
  }
  return j;
}

// ---------------------------------------------------------------------------

struct RunManifest {
  nlohmann::json config_echo;
  SolverKind solver_kind = SolverKind::nonlocal;
  std::vector<std::string> outputs;
  double wall_time = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::string error_kind;  // empty, "stability" or "numerical"
  std::string error;

  nlohmann::json to_json() const {
    return {{"config_echo", config_echo},
            {"solver_kind", to_string(solver_kind)},
            {"outputs", outputs},
            {"wall_time", wall_time},
            {"converged", converged},
            {"iterations", iterations},
            {"error_kind", error_kind.empty() ? nlohmann::json() : nlohmann::json(error_kind)},
            {"error", error.empty() ? nlohmann::json() : nlohmann::json(error)}};
  }
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

/// Solves, writes slices, diagnostics and manifest into out_dir. Solver
/// failures are recorded in the manifest (converged = false) rather than thrown.
/// When `keep` is non-null the trajectory is handed back to the caller.
inline RunManifest run(const RunConfig& cfg, const fs::path& out_dir, const Logger& log = {},
                       SolutionTrajectory* keep = nullptr) {
  cfg.validate();
  fs::create_directories(out_dir);
  RunManifest m;
  m.config_echo = to_json(cfg);
  m.solver_kind = cfg.solver;
  const auto start = std::chrono::steady_clock::now();
  try {
    auto traj = solve(cfg, log);
    const auto levels = stored_levels(traj, cfg.slice_interval);
    for (std::size_t n : levels) {
      const auto name = slice_filename(traj.times[n]);
      write_slice_csv(out_dir / name, traj.f[n], traj.V[n], traj.S[n]);
      m.outputs.push_back(name);
    }
    write_text(out_dir / "diagnostics.json", diagnostics_json(cfg, traj, levels).dump(2) + "\n");
    m.outputs.push_back("diagnostics.json");
    m.converged = traj.diagnostics.converged;
    m.iterations = traj.diagnostics.iterations;
    if (keep) *keep = std::move(traj);
  } catch (const StabilityError& e) {
    m.error_kind = "stability";
    m.error = e.what();
  } catch (const NumericalError& e) {
    m.error_kind = "numerical";
    m.error = e.what();
  }
  m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  m.outputs.push_back("manifest.json");
  write_text(out_dir / "manifest.json", m.to_json().dump(2) + "\n");
  return m;
}

// ---------------------------------------------------------------------------
// diagnose-bgp: post-processing of a stored run directory

inline double slice_time_from_name(const std::string& name) {
  if (name.rfind("slice_t", 0) != 0 || name.size() < 12 || name.substr(name.size() - 4) != ".csv")
    return std::numeric_limits<double>::quiet_NaN();
  const std::string num = name.substr(7, name.size() - 11);
  char* end = nullptr;
  const double t = std::strtod(num.c_str(), &end);
  return end && *end == '\0' ? t : std::numeric_limits<double>::quiet_NaN();
}

inline nlohmann::json diagnose_bgp(const fs::path& dir, double t_max = 5.0, TailWindow window = {}) {
  using nlohmann::json;
  if (!fs::is_directory(dir)) throw std::runtime_error("trajectory directory not found: " + dir.string());
  const auto manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw std::runtime_error("missing manifest.json in " + dir.string());
  std::ifstream mf(manifest_path);
  const json manifest = json::parse(mf);
  const RunConfig cfg = parse_config(manifest.at("config_echo"));

  std::vector<std::pair<double, fs::path>> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const double t = slice_time_from_name(e.path().filename().string());
    if (std::isfinite(t)) files.emplace_back(t, e.path());
  }
  if (files.empty()) throw std::runtime_error("no slice files in " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<double> times;
  std::vector<DensityField> f_slices;
  std::vector<ControlField> S_slices;
  for (const auto& [t, path] : files) {
    const auto cols = read_slice_csv(path);
    const KnowledgeGrid grid(cols.z.back(), cols.z.size());
    times.push_back(t);
    f_slices.emplace_back(grid, cols.f);
    S_slices.emplace_back(grid, cols.S);
  }
  const auto tails = tail_preservation_report(times, f_slices, cfg.model, window);
  json out;
  out["schema"] = 1;
  json series = json::array();
  for (const auto& s : tails.samples) {
    auto e = tail_fit_json(s.fit);
    e["t"] = s.t;
    e["beta_envelope_lo"] = s.beta_envelope_lo;
    e["beta_envelope_hi"] = s.beta_envelope_hi;
    series.push_back(e);
  }
  out["tail_fits"] = series;
  out["t_max"] = t_max;
  out["max_relative_deviation"] = tails.max_relative_deviation(t_max);
  const double inv_theta0 = tails.samples.front().fit.inv_theta;
  if (tails.samples.front().fit.is_pareto()) {
    const std::size_t k = last_interior(times, cfg.T);
    const double theta = 1.0 / inv_theta0;
    out["gamma_bracket"] = gamma_json(gamma_bracket(f_slices[k], S_slices[k], cfg.model, theta), times[k], theta);
  } else {
    out["gamma_bracket"] = nullptr;
  }
  write_text(dir / "bgp_report.json", out.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------------------
// oracle-check: optimizer brute force and logistic comparison

struct OracleResult {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return error <= tolerance; }
};

/// Closed forms / bisection against a 10^6-sample argmax on random (z, B).
/// The logarithmic case is checked on the unregularized objective, the one the
/// optimizer maximizes.
inline OracleResult optimizer_oracle(const ModelSpec& spec, const std::string& name,
                                     std::size_t pairs = 100, std::size_t samples = 1000000,
                                     unsigned long long seed = 20240611ULL) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> zdist(0.1, 10.0), bdist(-1.0, 20.0);
  OracleResult r{name, 0.0, 2e-6};
  for (std::size_t k = 0; k < pairs; ++k) {
    const double z = zdist(rng);
    const double b = bdist(rng);
    const double s = optimal_control(spec, z, b);
    const double o = optimal_control_oracle(spec, z, b, samples);
    r.error = std::max(r.error, std::abs(s - o));
  }
  return r;
}

/// Constant kernel, frozen alpha = 1: survival against the logistic solution at t.
inline double logistic_error(const KnowledgeGrid& grid, double dt, double t_end = 1.0, double beta = 3.0) {
  const auto f0 = initial_datum(grid, beta).f;
  const auto steps = RunConfig::steps_for(t_end, dt);
  const KernelTable table(KernelSpec::constant(), grid);
  std::vector<AlphaField> alphas(steps, AlphaField(grid, 1.0));
  const auto pass = forward_solve(f0, alphas, table, dt);
  const auto F0 = cdf(f0);
  const auto F1 = cdf(pass.f.back());
  const double t = static_cast<double>(steps) * dt;
  double err = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double exact = logistic_oracle(std::clamp(1.0 - F0[j], 0.0, 1.0), t);
    err = std::max(err, std::abs((1.0 - F1[j]) - exact));
  }
  return err;
}

inline std::vector<OracleResult> oracle_check(std::size_t samples = 1000000) {
  std::vector<OracleResult> out;
  ModelSpec lin;
  lin.utility = UtilitySpec::linear();
  ModelSpec iso;
  iso.utility = UtilitySpec::isoelastic(0.5);
  ModelSpec log;
  log.utility = UtilitySpec::logarithmic(0.0);
  out.push_back(optimizer_oracle(lin, "optimizer/linear", 100, samples));
  out.push_back(optimizer_oracle(iso, "optimizer/isoelastic", 100, samples));
  out.push_back(optimizer_oracle(log, "optimizer/logarithmic", 100, samples));
  out.push_back({"logistic/default-grid", logistic_error(KnowledgeGrid(10.0, 1001), 0.01), 5e-3});
  return out;
}

}  // namespace kgrowth
