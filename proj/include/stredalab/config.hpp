#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "stredalab/model.hpp"
#include "stredalab/spectral.hpp"

namespace stredalab {

/// Configuration problem: wrong syntax, unknown key, invalid value. Maps to
/// exit code 2 at the CLI boundary.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Full description of one experiment: model, Fermi energy, contour budget,
/// window, optional B-sweep, and output policy.
struct RunConfig {
  HamiltonianSpec model;
  double fermi_energy = 0.0;
  int contour_nodes = 128;
  double window_half_extent = 0.0;  // 0: backend default
  double window_min_buffer = 1.0;
  bool has_sweep = false;
  double sweep_B_start = 0.0;
  double sweep_B_end = 0.0;
  int sweep_steps = 0;
  double delta_B = 1e-3;
  std::string output_dir = ".";
  bool cache = false;
  int precision_digits = 12;
  int threads = 0;  // 0: use STREDALAB_THREADS or hardware default
  EigMode eig_mode = EigMode::automatic;
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
  }
}

inline int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int i = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': not a boolean: '" + v + "'");
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Parses the flat `key = value` format ('#' starts a comment). Unknown and
/// duplicated keys are hard errors; every value is validated before any heavy
/// computation starts.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::map<std::string, bool> seen;
  bool saw_b_start = false, saw_b_end = false, saw_steps = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
    if (seen[key]) throw ConfigError("duplicate config key: '" + key + "'");
    seen[key] = true;

    if (key == "model.backend") {
      if (val == "continuum")
        c.model.backend = Backend::continuum;
      else if (val == "tightbinding")
        c.model.backend = Backend::tightbinding;
      else
        throw ConfigError("config key 'model.backend': expected continuum|tightbinding");
    } else if (key == "model.boundary") {
      if (val == "dirichlet")
        c.model.boundary = Boundary::dirichlet;
      else if (val == "torus")
        c.model.boundary = Boundary::torus;
      else
        throw ConfigError("config key 'model.boundary': expected dirichlet|torus");
    } else if (key == "model.v1")
      c.model.v1 = detail::parse_double(key, val);
    else if (key == "model.v2")
      c.model.v2 = detail::parse_double(key, val);
    else if (key == "model.soc_strength")
      c.model.soc_strength = detail::parse_double(key, val);
    else if (key == "model.zeeman_coupling")
      c.model.zeeman_coupling = detail::parse_double(key, val);
    else if (key == "model.B1")
      c.model.B1 = detail::parse_double(key, val);
    else if (key == "model.B2")
      c.model.B2 = detail::parse_double(key, val);
    else if (key == "model.half_width_L")
      c.model.half_width_L = detail::parse_int(key, val);
    else if (key == "model.points_per_cell")
      c.model.points_per_cell = detail::parse_int(key, val);
    else if (key == "model.tb_flux_per_plaquette")
      c.model.tb_flux_per_plaquette = detail::parse_double(key, val);
    else if (key == "model.tb_spin_flux_offset")
      c.model.tb_spin_flux_offset = detail::parse_double(key, val);
    else if (key == "fermi_energy")
      c.fermi_energy = detail::parse_double(key, val);
    else if (key == "contour_nodes")
      c.contour_nodes = detail::parse_int(key, val);
    else if (key == "window.half_extent")
      c.window_half_extent = detail::parse_double(key, val);
    else if (key == "window.min_buffer")
      c.window_min_buffer = detail::parse_double(key, val);
    else if (key == "sweep.B_start") {
      c.sweep_B_start = detail::parse_double(key, val);
      saw_b_start = true;
    } else if (key == "sweep.B_end") {
      c.sweep_B_end = detail::parse_double(key, val);
      saw_b_end = true;
    } else if (key == "sweep.steps") {
      c.sweep_steps = detail::parse_int(key, val);
      saw_steps = true;
    } else if (key == "delta_B")
      c.delta_B = detail::parse_double(key, val);
    else if (key == "output_dir")
      c.output_dir = val;
    else if (key == "cache")
      c.cache = detail::parse_bool(key, val);
    else if (key == "precision_digits")
      c.precision_digits = detail::parse_int(key, val);
    else if (key == "threads")
      c.threads = detail::parse_int(key, val);
    else if (key == "eig.mode") {
      if (val == "auto")
        c.eig_mode = EigMode::automatic;
      else if (val == "dense")
        c.eig_mode = EigMode::dense;
      else if (val == "lanczos")
        c.eig_mode = EigMode::lanczos;
      else
        throw ConfigError("config key 'eig.mode': expected auto|dense|lanczos");
    } else
      throw ConfigError("unknown config key: '" + key + "'");
  }
  if (saw_b_start || saw_b_end || saw_steps) {
    if (!(saw_b_start && saw_b_end && saw_steps))
      throw ConfigError("sweep requires all of sweep.B_start, sweep.B_end, sweep.steps");
    c.has_sweep = true;
  }
  return c;
}

/// Value-level validation; throws ConfigError naming the offending key.
inline void validate_config(const RunConfig& c) {
  try {
    c.model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key 'model.*': ") + e.what());
  }
  if (!(c.delta_B > 0.0)) throw ConfigError("config key 'delta_B': must be > 0");
  if (c.contour_nodes < 16) throw ConfigError("config key 'contour_nodes': must be >= 16");
  if (c.window_half_extent < 0.0)
    throw ConfigError("config key 'window.half_extent': must be >= 0");
  if (c.window_min_buffer < 0.0) throw ConfigError("config key 'window.min_buffer': must be >= 0");
  if (c.has_sweep && c.sweep_steps < 2) throw ConfigError("config key 'sweep.steps': must be >= 2");
  if (c.precision_digits < 1 || c.precision_digits > 17)
    throw ConfigError("config key 'precision_digits': must be in [1, 17]");
  if (c.threads < 0) throw ConfigError("config key 'threads': must be >= 0");
  std::error_code ec;
  std::filesystem::create_directories(c.output_dir, ec);
  if (ec || !std::filesystem::is_directory(c.output_dir))
    throw ConfigError("config key 'output_dir': not writable: '" + c.output_dir + "'");
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig c = parse_config_text(ss.str());
  validate_config(c);
  return c;
}

}  // namespace stredalab
