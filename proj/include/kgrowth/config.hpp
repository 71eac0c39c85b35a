#pragma once

// JSON run configuration: parsing with defaults for omitted keys, strict
// rejection of unknown keys, and the inverse serialization.

#include <cstddef>
#include <initializer_list>
#include <set>
#include <string>

#include <json.hpp>

#include "kgrowth/coupling.hpp"
#include "kgrowth/errors.hpp"
#include "kgrowth/model.hpp"

namespace kgrowth {

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& where,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items()) {
    (void)v;
    if (!keys.count(k)) throw ConfigError("unknown key '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

inline const json* child(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline void read_number(const json& obj, const char* key, const std::string& where, double& out) {
  if (const json* v = child(obj, key)) {
    if (!v->is_number()) throw ConfigError(where + "." + key + ": expected a number");
    out = v->get<double>();
  }
}

inline void read_count(const json& obj, const char* key, const std::string& where, std::size_t& out) {
  if (const json* v = child(obj, key)) {
    if (!v->is_number_integer() || v->get<long long>() < 0)
      throw ConfigError(where + "." + key + ": expected a non-negative integer");
    out = v->get<std::size_t>();
  }
}

inline std::string read_string(const json& obj, const char* key, const std::string& where,
                               const std::string& fallback) {
  if (const json* v = child(obj, key)) {
    if (!v->is_string()) throw ConfigError(where + "." + key + ": expected a string");
    return v->get<std::string>();
  }
  return fallback;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& doc) {
  using detail::json;
  RunConfig cfg;
  if (doc.is_null()) {
    cfg.validate();
    return cfg;
  }
  detail::reject_unknown(doc, "", {"grid", "time", "model", "init", "fixed_point", "solver", "output"});

  if (const json* g = detail::child(doc, "grid")) {
    detail::reject_unknown(*g, "grid", {"z_max", "n_nodes"});
    double z_max = cfg.grid.z_max();
    std::size_t n_nodes = cfg.grid.size();
    detail::read_number(*g, "z_max", "grid", z_max);
    detail::read_count(*g, "n_nodes", "grid", n_nodes);
    cfg.grid = KnowledgeGrid(z_max, n_nodes);
  }
  if (const json* t = detail::child(doc, "time")) {
    detail::reject_unknown(*t, "time", {"T", "dt"});
    detail::read_number(*t, "T", "time", cfg.T);
    if (detail::child(*t, "dt")) {
      double dt = 0.0;
      detail::read_number(*t, "dt", "time", dt);
      cfg.dt = dt;
    }
  }
  if (const json* m = detail::child(doc, "model")) {
    detail::reject_unknown(*m, "model", {"kernel", "utility", "alpha0", "r"});
    if (const json* k = detail::child(*m, "kernel")) {
      detail::reject_unknown(*k, "model.kernel", {"family", "delta", "kappa", "mu"});
      const auto fam = detail::read_string(*k, "family", "model.kernel", "polynomial");
      if (fam == "constant") cfg.model.kernel.family = KernelFamily::constant;
      else if (fam == "polynomial") cfg.model.kernel.family = KernelFamily::polynomial;
      else if (fam == "exponential") cfg.model.kernel.family = KernelFamily::exponential;
      else throw ConfigError("model.kernel.family: one of constant, polynomial, exponential");
      detail::read_number(*k, "delta", "model.kernel", cfg.model.kernel.delta);
      detail::read_number(*k, "kappa", "model.kernel", cfg.model.kernel.kappa);
      detail::read_number(*k, "mu", "model.kernel", cfg.model.kernel.mu);
    }
    if (const json* u = detail::child(*m, "utility")) {
      detail::reject_unknown(*u, "model.utility", {"family", "zeta", "epsilon"});
      const auto fam = detail::read_string(*u, "family", "model.utility", "linear");
      if (fam == "linear") cfg.model.utility.family = UtilityFamily::linear;
      else if (fam == "isoelastic") cfg.model.utility.family = UtilityFamily::isoelastic;
      else if (fam == "logarithmic") cfg.model.utility.family = UtilityFamily::logarithmic;
      else throw ConfigError("model.utility.family: one of linear, isoelastic, logarithmic");
      detail::read_number(*u, "zeta", "model.utility", cfg.model.utility.zeta);
      detail::read_number(*u, "epsilon", "model.utility", cfg.model.utility.epsilon_reg);
    }
    detail::read_number(*m, "alpha0", "model", cfg.model.learning.alpha0);
    detail::read_number(*m, "r", "model", cfg.model.discount_rate);
  }
  if (const json* i = detail::child(doc, "init")) {
    detail::reject_unknown(*i, "init", {"kind", "beta", "upper"});
    const auto kind = detail::read_string(*i, "kind", "init", "pareto");
    if (kind == "pareto") cfg.init.kind = InitKind::pareto;
    else if (kind == "uniform") cfg.init.kind = InitKind::uniform;
    else throw ConfigError("init.kind: one of pareto, uniform");
    detail::read_number(*i, "beta", "init", cfg.init.beta);
    detail::read_number(*i, "upper", "init", cfg.init.upper);
  }
  if (const json* fp = detail::child(doc, "fixed_point")) {
    detail::reject_unknown(*fp, "fixed_point", {"tol", "max_iter"});
    detail::read_number(*fp, "tol", "fixed_point", cfg.fp_tol);
    detail::read_count(*fp, "max_iter", "fixed_point", cfg.fp_max_iter);
  }
  if (const json* s = detail::child(doc, "solver")) {
    detail::reject_unknown(*s, "solver", {"kind", "fixed_control", "local_benefit_variant", "cfl"});
    const auto kind = detail::read_string(*s, "kind", "solver", "nonlocal");
    if (kind == "nonlocal") cfg.solver = SolverKind::nonlocal;
    else if (kind == "local") cfg.solver = SolverKind::local;
    else throw ConfigError("solver.kind: one of nonlocal, local");
    if (const json* fc = detail::child(*s, "fixed_control"); fc && !fc->is_null()) {
      if (!fc->is_number()) throw ConfigError("solver.fixed_control: expected a number or null");
      cfg.fixed_control = fc->get<double>();
    }
    const auto variant = detail::read_string(*s, "local_benefit_variant", "solver", "f");
    if (variant == "f") cfg.local_benefit = LocalBenefitVariant::f;
    else if (variant == "f_squared") cfg.local_benefit = LocalBenefitVariant::f_squared;
    else throw ConfigError("solver.local_benefit_variant: one of f, f_squared");
    detail::read_number(*s, "cfl", "solver", cfg.cfl);
  }
  if (const json* o = detail::child(doc, "output")) {
    detail::reject_unknown(*o, "output", {"slice_interval"});
    detail::read_number(*o, "slice_interval", "output", cfg.slice_interval);
  }
  cfg.validate();
  return cfg;
}

inline RunConfig parse_config(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return parse_config(nlohmann::json());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  return parse_config(doc);
}

/// Fully resolved document; parse_config(to_json(cfg)) == cfg.
inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["grid"] = {{"z_max", cfg.grid.z_max()}, {"n_nodes", cfg.grid.size()}};
  j["time"] = {{"T", cfg.T}};
  if (cfg.dt) j["time"]["dt"] = *cfg.dt;
  const auto& k = cfg.model.kernel;
  const auto& u = cfg.model.utility;
  j["model"] = {
      {"kernel", {{"family", to_string(k.family)}, {"delta", k.delta}, {"kappa", k.kappa}, {"mu", k.mu}}},
      {"utility", {{"family", to_string(u.family)}, {"zeta", u.zeta}, {"epsilon", u.epsilon_reg}}},
      {"alpha0", cfg.model.learning.alpha0},
      {"r", cfg.model.discount_rate}};
  j["init"] = {{"kind", to_string(cfg.init.kind)}, {"beta", cfg.init.beta}, {"upper", cfg.init.upper}};
  j["fixed_point"] = {{"tol", cfg.fp_tol}, {"max_iter", cfg.fp_max_iter}};
  j["solver"] = {{"kind", to_string(cfg.solver)},
                 {"fixed_control", cfg.fixed_control ? nlohmann::json(*cfg.fixed_control) : nlohmann::json()},
                 {"local_benefit_variant", to_string(cfg.local_benefit)},
                 {"cfl", cfg.cfl}};
  j["output"] = {{"slice_interval", cfg.slice_interval}};
  return j;
}

inline std::string serialize(const RunConfig& cfg) { return to_json(cfg).dump(2); }

}  // namespace kgrowth
