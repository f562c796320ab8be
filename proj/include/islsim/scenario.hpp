#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "islsim/constellation.hpp"
#include "islsim/energy.hpp"
#include "islsim/game.hpp"
#include "islsim/link.hpp"
#include "islsim/mfg.hpp"
#include "islsim/solver.hpp"
#include "islsim/traffic.hpp"

namespace islsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything a run needs. Defaults are the reference operating point; a config
// file only lists what it changes.
struct Scenario {
  std::uint64_t seed = 1;
  int slots = 360;  // n_t

  ConstellationParams cons;
  LinkParams link;
  EnergyParams energy;
  TrafficParams traffic;
  GameParams game;
  SolverParams solver;

  // mean-field knobs
  int mfg_cells = 200;
  double mfg_crowding_weight = 0.05;
  double mfg_viscosity0 = 0.0;  // 0 = derive 1e-3 * (range)^2 / horizon
  double mfg_damping = 0.5;
  int mfg_picard_iters = 40;
  double mfg_tol = 1e-6;

  int bootstrap_reps = 1000;

  void validate() const {
    // invariant violations below surface as std::invalid_argument; a bad
    // config file must read as a config error to the caller (exit code 2)
    try {
      energy.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (slots <= 0) throw ConfigError("run.slots must be positive");
    if (link.bandwidth_hz <= 0 || link.max_power_w <= 0)
      throw ConfigError("link bandwidth and power cap must be positive");
    if (link.noise_temp_k <= 0 || link.wavelength_m <= 0)
      throw ConfigError("link noise temperature and wavelength must be positive");
    if (link.link_share <= 0 || link.link_share > 1)
      throw ConfigError("link.link_share must lie in (0,1]");
    if (link.snr_margin <= 0) throw ConfigError("link.snr_margin must be > 0");
    if (traffic.num_flows <= 0 || traffic.intensity <= 0)
      throw ConfigError("traffic.num_flows and intensity must be positive");
    if (game.energy_weight <= 0 || game.penalty_weight <= 0 ||
        game.safety_margin_j <= 0)
      throw ConfigError("game weights and margin must be positive");
    if (solver.rho <= 0 || solver.step_c0 <= 0 || solver.inner_iters < 1 ||
        solver.outer_iters < 1 || solver.tol <= 0)
      throw ConfigError("solver parameters out of range");
    if (mfg_cells < 8) throw ConfigError("mfg.cells must be at least 8");
    if (mfg_damping <= 0 || mfg_damping > 1)
      throw ConfigError("mfg.damping must lie in (0,1]");
    if (bootstrap_reps < 10) throw ConfigError("metrics.bootstrap_reps too small");
    // constellation invariants checked by its constructor
    try {
      Constellation probe(cons);
      (void)probe;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  // Calibrate the link budget if the config left it automatic.
  void finalize() {
    if (link.budget_offset <= 0.0)
      link.budget_offset = calibrate_budget_offset(link);
    validate();
  }

  double mfg_viscosity() const {
    if (mfg_viscosity0 > 0.0) return mfg_viscosity0;
    double range = energy.capacity_j - energy.floor_j;
    double horizon = slots * cons.slot_seconds;
    return 1e-3 * range * range / horizon;
  }
};

namespace detail {

using KvMap = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double parse_num(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing junk");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("malformed number for " + key + ": '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  double x = parse_num(key, v);
  long long i = static_cast<long long>(x);
  if (static_cast<double>(i) != x)
    throw ConfigError(key + " must be an integer, got '" + v + "'");
  return i;
}

// One row in the key table: how to read and write each config entry.
struct KeyHandler {
  void (*set)(Scenario&, const std::string&, const std::string&);
  std::string (*get)(const Scenario&);
};

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const std::map<std::string, KeyHandler>& key_table() {
#define NUM_KEY(name, expr)                                                  \
  {                                                                          \
    name, {                                                                  \
      [](Scenario& s, const std::string& k, const std::string& v) {          \
        s.expr = parse_num(k, v);                                            \
      },                                                                     \
          [](const Scenario& s) { return fmt(s.expr); }                      \
    }                                                                        \
  }
#define INT_KEY(name, expr)                                                  \
  {                                                                          \
    name, {                                                                  \
      [](Scenario& s, const std::string& k, const std::string& v) {          \
        s.expr = static_cast<int>(parse_int(k, v));                          \
      },                                                                     \
          [](const Scenario& s) { return std::to_string(s.expr); }           \
    }                                                                        \
  }
  static const std::map<std::string, KeyHandler> table = {
      {"run.seed",
       {[](Scenario& s, const std::string& k, const std::string& v) {
          s.seed = static_cast<std::uint64_t>(parse_int(k, v));
        },
        [](const Scenario& s) { return std::to_string(s.seed); }}},
      INT_KEY("run.slots", slots),
      INT_KEY("constellation.num_sats", cons.num_sats),
      INT_KEY("constellation.num_planes", cons.num_planes),
      NUM_KEY("constellation.altitude_m", cons.altitude_m),
      NUM_KEY("constellation.inclination_deg", cons.inclination_deg),
      NUM_KEY("constellation.orbit_period_s", cons.orbit_period_s),
      NUM_KEY("constellation.eclipse_fraction", cons.eclipse_fraction),
      NUM_KEY("constellation.slot_seconds", cons.slot_seconds),
      NUM_KEY("constellation.earth_radius_m", cons.earth_radius_m),
      NUM_KEY("link.bandwidth_hz", link.bandwidth_hz),
      NUM_KEY("link.tx_gain_dbi", link.tx_gain_dbi),
      NUM_KEY("link.rx_gain_dbi", link.rx_gain_dbi),
      NUM_KEY("link.noise_temp_k", link.noise_temp_k),
      NUM_KEY("link.wavelength_m", link.wavelength_m),
      NUM_KEY("link.snr_margin", link.snr_margin),
      NUM_KEY("link.max_power_w", link.max_power_w),
      NUM_KEY("link.link_share", link.link_share),
      NUM_KEY("link.budget_offset", link.budget_offset),
      NUM_KEY("energy.capacity_j", energy.capacity_j),
      NUM_KEY("energy.floor_j", energy.floor_j),
      NUM_KEY("energy.initial_j", energy.initial_j),
      NUM_KEY("energy.panel_area_m2", energy.panel_area_m2),
      NUM_KEY("energy.panel_efficiency", energy.panel_efficiency),
      NUM_KEY("energy.solar_flux_w_m2", energy.solar_flux_w_m2),
      NUM_KEY("energy.base_load_w", energy.base_load_w),
      INT_KEY("traffic.num_flows", traffic.num_flows),
      NUM_KEY("traffic.intensity", traffic.intensity),
      NUM_KEY("game.energy_weight", game.energy_weight),
      NUM_KEY("game.penalty_weight", game.penalty_weight),
      NUM_KEY("game.safety_margin_j", game.safety_margin_j),
      NUM_KEY("solver.rho", solver.rho),
      NUM_KEY("solver.step_c0", solver.step_c0),
      INT_KEY("solver.inner_iters", solver.inner_iters),
      INT_KEY("solver.outer_iters", solver.outer_iters),
      NUM_KEY("solver.tol", solver.tol),
      INT_KEY("mfg.cells", mfg_cells),
      NUM_KEY("mfg.crowding_weight", mfg_crowding_weight),
      NUM_KEY("mfg.viscosity0", mfg_viscosity0),
      NUM_KEY("mfg.damping", mfg_damping),
      INT_KEY("mfg.picard_iters", mfg_picard_iters),
      NUM_KEY("mfg.tol", mfg_tol),
      INT_KEY("metrics.bootstrap_reps", bootstrap_reps),
  };
#undef NUM_KEY
#undef INT_KEY
  return table;
}

}  // namespace detail

// ISLSIM_ENERGY_CAPACITY_J overrides energy.capacity_j, and so on: prefix,
// uppercase, dots to underscores. The key set is fixed, so the mapping is
// collision-free.
inline std::string env_name_for(const std::string& key) {
  std::string out = "ISLSIM_";
  for (char c : key)
    out += c == '.' ? '_' : static_cast<char>(std::toupper(c));
  return out;
}

inline void apply_kv(Scenario& s, const std::string& key,
                     const std::string& value) {
  const auto& table = detail::key_table();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key: " + key);
  it->second.set(s, key, value);
}

// Flat key-value text: 'section.key = value', '#' comments, blank lines.
inline Scenario parse_scenario_text(const std::string& text,
                                    bool apply_env = true) {
  Scenario s;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected 'key = value', got '" + line + "'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    apply_kv(s, key, value);
  }
  if (apply_env) {
    for (const auto& [key, handler] : detail::key_table()) {
      const char* v = std::getenv(env_name_for(key).c_str());
      if (v && *v) handler.set(s, key, v);
    }
  }
  s.finalize();
  return s;
}

inline Scenario load_scenario(const std::string& path, bool apply_env = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), apply_env);
}

inline Scenario default_scenario() {
  Scenario s;
  s.finalize();
  return s;
}

// Canonical serialization: every key, sorted, with the final (post-override,
// post-calibration) values. Input to the content hash and the manifest.
inline std::string canonical_text(const Scenario& s) {
  std::string out;
  for (const auto& [key, handler] : detail::key_table())
    out += key + " = " + handler.get(s) + "\n";
  return out;
}

// FNV-1a 64-bit over the canonical text; cheap, stable, good enough to detect
// any config drift between runs.
inline std::uint64_t scenario_hash(const Scenario& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canonical_text(s)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string scenario_hash_hex(const Scenario& s) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(scenario_hash(s)));
  return buf;
}

}  // namespace islsim
