#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "rls/kernels.hpp"
#include "rls/nystrom.hpp"
#include "rls/potentials.hpp"

namespace rls::cli {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class Problem { schrodinger, dirac };

struct EnergySpec {
  std::vector<double> values;
};

struct BoundSpec {
  double lo = 0.0, hi = 0.0;
  int count = 40;
  int l_max = 2;
  double tol = 1e-8;
  bool present = false;
};

struct OracleToggles {
  bool born = true;
  bool partial_waves = true;
  bool far_field = true;
  bool free_parseval = true;
};

struct RunConfig {
  Problem problem = Problem::schrodinger;
  PotentialSpec potential;
  json potential_echo;
  double mass = 1.0;
  EnergySpec energies;
  double h = 0.2;
  double support_tol = 1e-6;
  int angular_degree = 9;
  SolverOptions solver;
  OracleToggles oracles;
  BoundSpec bound;
  std::string output = "rls_out";
  unsigned seed = 1;
  json source;  // the parsed document, echoed into results
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where.empty() ? "config" : where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where.empty() ? key : where + "." + key, "wrong type");
  }
}

template <class T>
T require(const json& j, const std::string& key, const std::string& where) {
  const std::string field = where.empty() ? key : where + "." + key;
  if (!j.contains(key)) throw ConfigError(field, "required");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(field, "wrong type");
  }
}

inline Vec3 vec3(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(field, "expected [x, y, z]");
  try {
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  } catch (const json::exception&) {
    throw ConfigError(field, "expected numbers");
  }
}

inline ScalarProfile profile(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where, "expected an array of terms");
  ScalarProfile p;
  for (size_t i = 0; i < j.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    check_keys(j[i], {"family", "strength", "scale", "center"}, at);
    AnalyticTerm t;
    t.family = family_from_string(require<std::string>(j[i], "family", at));
    t.strength = require<double>(j[i], "strength", at);
    t.scale = require<double>(j[i], "scale", at);
    if (!(t.scale > 0.0)) throw ConfigError(at + ".scale", "must be positive");
    if (j[i].contains("center")) t.center = vec3(j[i]["center"], at + ".center");
    p.terms.push_back(t);
  }
  return p;
}

inline PotentialSpec potential(const json& j, const std::string& base_dir) {
  check_keys(j, {"scalar", "vector", "charge", "cell_samples", "tabulated"}, "potential");
  PotentialSpec s;
  if (j.contains("scalar")) s.scalar = profile(j["scalar"], "potential.scalar");
  if (j.contains("vector")) {
    const json& v = j["vector"];
    if (!v.is_array() || v.size() != 3) throw ConfigError("potential.vector", "expected three component term lists");
    for (int a = 0; a < 3; ++a) s.vector[a] = profile(v[a], "potential.vector[" + std::to_string(a) + "]");
  }
  s.charge = get<double>(j, "charge", "potential", 1.0);
  s.cell_samples = get<int>(j, "cell_samples", "potential", 4);
  if (s.cell_samples < 1) throw ConfigError("potential.cell_samples", "must be >= 1");
  if (j.contains("tabulated")) {
    std::string path = require<std::string>(j, "tabulated", "potential");
    if (!path.empty() && path[0] != '/' && !base_dir.empty()) path = base_dir + "/" + path;
    std::ifstream in(path);
    if (!in) throw ConfigError("potential.tabulated", "cannot open '" + path + "'");
    s.tabulated = std::make_shared<TabulatedPotential>(read_tabulated_potential(in));
  }
  return s;
}

inline EnergySpec energies(const json& j) {
  check_keys(j, {"list", "range"}, "energies");
  if (j.contains("list") == j.contains("range")) throw ConfigError("energies", "give exactly one of list or range");
  EnergySpec e;
  if (j.contains("list")) {
    e.values = get<std::vector<double>>(j, "list", "energies", {});
    if (e.values.empty()) throw ConfigError("energies.list", "empty");
  } else {
    const json& r = j["range"];
    check_keys(r, {"lo", "hi", "count"}, "energies.range");
    const double lo = require<double>(r, "lo", "energies.range"), hi = require<double>(r, "hi", "energies.range");
    const int count = require<int>(r, "count", "energies.range");
    if (count < 1) throw ConfigError("energies.range.count", "must be >= 1");
    if (count == 1) {
      e.values = {lo};
    } else {
      if (!(hi > lo)) throw ConfigError("energies.range", "hi must exceed lo");
      for (int i = 0; i < count; ++i) e.values.push_back(lo + (hi - lo) * i / (count - 1));
    }
  }
  return e;
}

}  // namespace detail

// Parses and checks the document; numerical validity against the problem
// (gap, resolution) is checked separately by validate_scattering and validate_bound.
inline RunConfig parse_config(const json& j, const std::string& base_dir = "") {
  using namespace detail;
  check_keys(j, {"schema_version", "problem", "potential", "mass", "energies", "grid", "angular", "solver", "oracles",
                 "bound", "output", "seed"},
             "");
  const int version = require<int>(j, "schema_version", "");
  if (version != kSchemaVersion)
    throw ConfigError("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                            std::to_string(kSchemaVersion) + ")");
  RunConfig c;
  c.source = j;
  const std::string problem = require<std::string>(j, "problem", "");
  if (problem == "schrodinger")
    c.problem = Problem::schrodinger;
  else if (problem == "dirac")
    c.problem = Problem::dirac;
  else
    throw ConfigError("problem", "expected schrodinger|dirac, got '" + problem + "'");
  c.potential_echo = j.value("potential", json::object());
  c.potential = potential(c.potential_echo, base_dir);
  c.mass = get<double>(j, "mass", "", 1.0);
  if (!(c.mass > 0.0)) throw ConfigError("mass", "must be positive");
  if (j.contains("energies")) c.energies = energies(j["energies"]);
  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, {"h", "support_tol"}, "grid");
    c.h = get<double>(g, "h", "grid", c.h);
    c.support_tol = get<double>(g, "support_tol", "grid", c.support_tol);
    if (!(c.h > 0.0)) throw ConfigError("grid.h", "must be positive");
    if (!(c.support_tol > 0.0 && c.support_tol < 1.0)) throw ConfigError("grid.support_tol", "must lie in (0, 1)");
  }
  if (j.contains("angular")) {
    const json& a = j["angular"];
    check_keys(a, {"degree"}, "angular");
    c.angular_degree = get<int>(a, "degree", "angular", c.angular_degree);
    if (c.angular_degree < 1 || c.angular_degree > 61) throw ConfigError("angular.degree", "must lie in [1, 61]");
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, {"mode", "dense_limit", "tolerance", "max_iterations", "restart", "exceptional_threshold"}, "solver");
    c.solver.mode = solver_mode_from_string(get<std::string>(s, "mode", "solver", "auto"));
    c.solver.dense_limit = get<size_t>(s, "dense_limit", "solver", c.solver.dense_limit);
    c.solver.krylov.tolerance = get<double>(s, "tolerance", "solver", c.solver.krylov.tolerance);
    c.solver.krylov.max_iterations = get<int>(s, "max_iterations", "solver", c.solver.krylov.max_iterations);
    c.solver.krylov.restart = get<int>(s, "restart", "solver", c.solver.krylov.restart);
    c.solver.exceptional_threshold = get<double>(s, "exceptional_threshold", "solver", c.solver.exceptional_threshold);
    if (!(c.solver.krylov.tolerance > 0.0)) throw ConfigError("solver.tolerance", "must be positive");
    if (c.solver.krylov.max_iterations < 1 || c.solver.krylov.restart < 1)
      throw ConfigError("solver", "max_iterations and restart must be >= 1");
  }
  if (j.contains("oracles")) {
    const json& o = j["oracles"];
    check_keys(o, {"born", "partial_waves", "far_field", "free_parseval"}, "oracles");
    c.oracles.born = get<bool>(o, "born", "oracles", true);
    c.oracles.partial_waves = get<bool>(o, "partial_waves", "oracles", true);
    c.oracles.far_field = get<bool>(o, "far_field", "oracles", true);
    c.oracles.free_parseval = get<bool>(o, "free_parseval", "oracles", true);
  }
  if (j.contains("bound")) {
    const json& b = j["bound"];
    check_keys(b, {"lo", "hi", "count", "l_max", "tol"}, "bound");
    c.bound.present = true;
    c.bound.lo = require<double>(b, "lo", "bound");
    c.bound.hi = require<double>(b, "hi", "bound");
    c.bound.count = get<int>(b, "count", "bound", c.bound.count);
    c.bound.l_max = get<int>(b, "l_max", "bound", c.bound.l_max);
    c.bound.tol = get<double>(b, "tol", "bound", c.bound.tol);
    if (!(c.bound.hi > c.bound.lo) || c.bound.count < 2) throw ConfigError("bound", "need hi > lo and count >= 2");
  }
  c.output = get<std::string>(j, "output", "", c.output);
  c.seed = get<unsigned>(j, "seed", "", c.seed);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  const auto slash = path.find_last_of('/');
  return parse_config(j, slash == std::string::npos ? "" : path.substr(0, slash));
}

// Scattering runs: energies on the continuum and resolution
// sqrt(lambda) h <= 0.3 (Schrodinger) or kappa h <= 0.3 (Dirac).
inline void validate_scattering(const RunConfig& c) {
  if (c.energies.values.empty()) throw ConfigError("energies", "required for this command");
  for (double e : c.energies.values) {
    double k = 0.0;
    if (c.problem == Problem::schrodinger) {
      if (!(e > 0.0)) throw ConfigError("energies", "Schrodinger energies must be positive, got " + std::to_string(e));
      k = std::sqrt(e);
    } else {
      if (!(std::abs(e) > c.mass))
        throw ConfigError("energies", "energy " + std::to_string(e) + " lies in the gap [-m, m] with m = " +
                                          std::to_string(c.mass));
      k = std::sqrt(e * e - c.mass * c.mass);
    }
    if (k * c.h > 0.3 + 1e-12)
      throw ConfigError("grid.h", "wave number times h is " + std::to_string(k * c.h) + " at energy " +
                                      std::to_string(e) + "; must be <= 0.3");
  }
}

inline void validate_bound(const RunConfig& c) {
  if (!c.bound.present) throw ConfigError("bound", "required for this command");
  if (c.problem == Problem::schrodinger) {
    if (!(c.bound.hi < 0.0)) throw ConfigError("bound.hi", "must be negative");
  } else if (!(c.bound.lo > -c.mass && c.bound.hi < c.mass)) {
    throw ConfigError("bound", "range must lie inside the gap (-m, m)");
  }
}

}  // namespace rls::cli
