#pragma once

// Run configuration: a flat sectioned key-value text format in which every
// dimensioned key states its unit in its name (lambda_bs_per_km2, p_t_db,
// n0_dbm, ...). Conversion to internal SI/linear units happens here, exactly
// once; everything downstream of RunConfig is unit-free.
//
// Parsing is strict: unknown sections or keys are errors that name the
// offending token, and out-of-domain values are rejected before any
// computation starts. ConfigError maps to process exit code 2.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "analytic.hpp"
#include "params.hpp"
#include "units.hpp"

namespace isac {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EngineChoice { analytic, montecarlo, both };

inline const char* engine_name(EngineChoice e) {
  switch (e) {
    case EngineChoice::analytic: return "analytic";
    case EngineChoice::montecarlo: return "montecarlo";
    case EngineChoice::both: return "both";
  }
  return "?";
}

struct SweepSpec {
  std::string parameter;       // from {lambda_bs, beta, gamma, l_p, p_t, eps1, eps2, eps3}
  std::vector<double> values;  // in the same units as the matching config key
  bool empty() const { return parameter.empty(); }
};

struct RunConfig {
  NetworkParams params = default_params();
  BeamPattern beam = default_beam();
  QamOrder qam = default_qam();
  EvalOptions eval;  // analytic-engine numerics (e1 mode, Laplace path, ...)

  // Retained as configured, for the self-describing output header.
  double xi_setting_db = -9.0;
  XiInterpretation xi_interp = XiInterpretation::power_db;

  EngineChoice engine = EngineChoice::analytic;
  std::vector<std::string> metrics;  // canonical metric names; default set below
  double eps1 = 1.0;   // CRLB threshold [m^2]
  double eps2 = 1.0;   // SINR threshold [linear]
  double eps3 = 1e-3;  // SER threshold
  SweepSpec sweep;
  std::int64_t n_trials = 10000;
  std::uint64_t seed = 1;
  std::string output = "-";  // "-" = stdout
  bool timings = false;      // fill the wall_time_s column (off: column left empty)

  std::vector<std::string> warnings;  // accepted-but-ignored keys, etc.
};

inline const std::vector<std::string>& default_metrics() {
  static const std::vector<std::string> m = {"positioning", "communication_sinr",
                                             "communication_ser", "joint_crlb_ser",
                                             "cond_p_given_s"};
  return m;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view v, const std::string& key) {
  double out = 0;
  auto sv = trim(v);
  auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), out);
  if (ec != std::errc{} || p != sv.data() + sv.size())
    throw ConfigError("config key '" + key + "': cannot parse '" + std::string(sv) + "' as a number");
  return out;
}

inline std::int64_t parse_int(std::string_view v, const std::string& key) {
  std::int64_t out = 0;
  auto sv = trim(v);
  auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), out);
  if (ec != std::errc{} || p != sv.data() + sv.size())
    throw ConfigError("config key '" + key + "': cannot parse '" + std::string(sv) + "' as an integer");
  return out;
}

inline std::uint64_t parse_uint(std::string_view v, const std::string& key) {
  std::uint64_t out = 0;
  auto sv = trim(v);
  auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), out);
  if (ec != std::errc{} || p != sv.data() + sv.size())
    throw ConfigError("config key '" + key + "': cannot parse '" + std::string(sv) +
                      "' as a non-negative integer");
  return out;
}

inline bool parse_bool(std::string_view v, const std::string& key) {
  auto sv = trim(v);
  if (sv == "true" || sv == "1" || sv == "yes" || sv == "on") return true;
  if (sv == "false" || sv == "0" || sv == "no" || sv == "off") return false;
  throw ConfigError("config key '" + key + "': cannot parse '" + std::string(sv) + "' as a boolean");
}

inline std::vector<double> parse_double_list(std::string_view v, const std::string& key) {
  std::vector<double> out;
  std::size_t start = 0;
  std::string s(v);
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    std::string_view tok(s.data() + start, (comma == std::string::npos ? s.size() : comma) - start);
    tok = trim(tok);
    if (!tok.empty()) out.push_back(parse_double(tok, key));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty value list");
  return out;
}

inline std::vector<std::string> split_names(std::string_view v) {
  std::vector<std::string> out;
  std::string s(v);
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    std::string_view tok(s.data() + start, (comma == std::string::npos ? s.size() : comma) - start);
    tok = trim(tok);
    if (!tok.empty()) out.emplace_back(tok);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline const std::vector<std::string>& sweep_parameter_names() {
  static const std::vector<std::string> names = {"lambda_bs", "beta", "gamma", "l_p",
                                                 "p_t",       "eps1", "eps2",  "eps3"};
  return names;
}

// Metric-name grammar: the coverage metrics and ergodic metrics of the
// analytic engine by their canonical names, plus "p_localizable" and the
// participation-count family "pmf_l<k>" (k = 0 or 3..l_p).
inline bool parse_pmf_metric(const std::string& name, int* l_out) {
  if (name.rfind("pmf_l", 0) != 0 || name.size() <= 5) return false;
  int l = 0;
  auto sv = std::string_view(name).substr(5);
  auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), l);
  if (ec != std::errc{} || p != sv.data() + sv.size()) return false;
  if (l_out) *l_out = l;
  return true;
}

inline bool is_valid_metric_name(const std::string& name, int l_p) {
  static const char* coverage[] = {"positioning",    "communication_sinr", "communication_ser",
                                   "joint_crlb_sinr", "joint_crlb_ser",    "cond_p_given_s",
                                   "cond_s_given_p",  "cond_p_given_c",    "cond_c_given_p"};
  static const char* ergodic[] = {"ergodic_crlb",
                                  "ergodic_rate",
                                  "ergodic_crlb_given_sinr",
                                  "ergodic_rate_given_crlb",
                                  "ergodic_ser_given_crlb",
                                  "ergodic_crlb_localizable",
                                  "ergodic_sqrt_crlb_localizable",
                                  "ergodic_crlb_given_sinr_localizable",
                                  "ergodic_sqrt_crlb_given_sinr_localizable"};
  for (const char* c : coverage)
    if (name == c) return true;
  for (const char* e : ergodic)
    if (name == e) return true;
  if (name == "p_localizable") return true;
  int l = -1;
  if (parse_pmf_metric(name, &l)) return l == 0 || (l >= 3 && l <= l_p);
  return false;
}

// Parses config text. Raw dB/dBm/degree settings are collected first and
// converted to internal units at the end, so key order never matters.
inline RunConfig parse_config(std::istream& is, const std::string& source_name = "<config>") {
  RunConfig cfg;
  // Raw settings in config units, defaulted to the documented operating point.
  double lambda_bs_per_km2 = 8.0 / std::sqrt(3.0);
  double beta = 3.6;
  double p_t_db = 0.0;
  double n0_dbm = -89.0;
  double sigma_n2_dbm = -89.0;
  double xi_db = -9.0;
  std::string xi_interp = "power_db";
  double gamma_db = -15.0;
  std::int64_t l_p = 10;
  double n_l_cap_m2 = 1e4;
  std::int64_t n_approx = 5;
  std::int64_t g_quad = 32;
  double m1_db = 0.0, m2_db = -20.0, phi_deg = 30.0;
  std::int64_t qam_order = 16;
  std::string engine = "analytic", metric_list, e1_mode = "exact", laplace_path = "closed_form";
  double e1_b = exp_invsq_default_b;
  std::string sweep_parameter, sweep_values;

  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view sv = detail::trim(line);
    if (sv.empty() || sv.front() == '#' || sv.front() == ';') continue;
    if (sv.front() == '[') {
      if (sv.back() != ']')
        throw ConfigError(source_name + ":" + std::to_string(lineno) + ": malformed section header");
      section = std::string(detail::trim(sv.substr(1, sv.size() - 2)));
      if (section != "network" && section != "beam" && section != "sweep" && section != "run")
        throw ConfigError(source_name + ":" + std::to_string(lineno) + ": unknown section [" +
                          section + "]");
      continue;
    }
    std::size_t eq = sv.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(source_name + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key(detail::trim(sv.substr(0, eq)));
    std::string value(detail::trim(sv.substr(eq + 1)));
    if (key.empty())
      throw ConfigError(source_name + ":" + std::to_string(lineno) + ": empty key");
    if (section.empty())
      throw ConfigError(source_name + ":" + std::to_string(lineno) + ": key '" + key +
                        "' appears before any [section]");

    auto unknown = [&]() -> ConfigError {
      return ConfigError(source_name + ":" + std::to_string(lineno) + ": unknown config key '" +
                         key + "' in section [" + section + "]");
    };

    if (section == "network") {
      if (key == "lambda_bs_per_km2") lambda_bs_per_km2 = detail::parse_double(value, key);
      else if (key == "beta") beta = detail::parse_double(value, key);
      else if (key == "p_t_db") p_t_db = detail::parse_double(value, key);
      else if (key == "n0_dbm") n0_dbm = detail::parse_double(value, key);
      else if (key == "sigma_n2_dbm") sigma_n2_dbm = detail::parse_double(value, key);
      else if (key == "xi_db") xi_db = detail::parse_double(value, key);
      else if (key == "xi_interpretation") xi_interp = value;
      else if (key == "gamma_db") gamma_db = detail::parse_double(value, key);
      else if (key == "l_p") l_p = detail::parse_int(value, key);
      else if (key == "n_l_cap_m2") n_l_cap_m2 = detail::parse_double(value, key);
      else if (key == "n_approx") n_approx = detail::parse_int(value, key);
      else if (key == "g_quad") g_quad = detail::parse_int(value, key);
      else if (key == "lambda_u_per_km2") {
        detail::parse_double(value, key);
        cfg.warnings.push_back("config key 'lambda_u_per_km2' is accepted but unused: all metrics "
                               "describe the typical user and do not depend on the user density");
      } else throw unknown();
    } else if (section == "beam") {
      if (key == "m1_db") m1_db = detail::parse_double(value, key);
      else if (key == "m2_db") m2_db = detail::parse_double(value, key);
      else if (key == "phi_deg") phi_deg = detail::parse_double(value, key);
      else throw unknown();
    } else if (section == "sweep") {
      if (key == "parameter") sweep_parameter = value;
      else if (key == "values") sweep_values = value;
      else throw unknown();
    } else {  // run
      if (key == "engine") engine = value;
      else if (key == "metric" || key == "metrics") metric_list = value;
      else if (key == "qam_order") qam_order = detail::parse_int(value, key);
      else if (key == "eps1_m2") cfg.eps1 = detail::parse_double(value, key);
      else if (key == "eps2") cfg.eps2 = detail::parse_double(value, key);
      else if (key == "eps3") cfg.eps3 = detail::parse_double(value, key);
      else if (key == "n_trials") cfg.n_trials = detail::parse_int(value, key);
      else if (key == "seed") cfg.seed = detail::parse_uint(value, key);
      else if (key == "output") cfg.output = value;
      else if (key == "timings") cfg.timings = detail::parse_bool(value, key);
      else if (key == "e1_mode") e1_mode = value;
      else if (key == "e1_b") e1_b = detail::parse_double(value, key);
      else if (key == "laplace_path") laplace_path = value;
      else throw unknown();
    }
  }

  // Enum-valued settings.
  if (xi_interp == "power_db") cfg.xi_interp = XiInterpretation::power_db;
  else if (xi_interp == "amplitude_db") cfg.xi_interp = XiInterpretation::amplitude_db;
  else if (xi_interp == "raw") cfg.xi_interp = XiInterpretation::raw;
  else throw ConfigError("config key 'xi_interpretation': expected power_db, amplitude_db or raw, got '" +
                         xi_interp + "'");
  if (engine == "analytic") cfg.engine = EngineChoice::analytic;
  else if (engine == "montecarlo") cfg.engine = EngineChoice::montecarlo;
  else if (engine == "both") cfg.engine = EngineChoice::both;
  else throw ConfigError("config key 'engine': expected analytic, montecarlo or both, got '" + engine + "'");
  if (e1_mode == "exact") cfg.eval.e1_mode = ExpInvsqMode::exact;
  else if (e1_mode == "approx") cfg.eval.e1_mode = ExpInvsqMode::approx;
  else throw ConfigError("config key 'e1_mode': expected exact or approx, got '" + e1_mode + "'");
  if (laplace_path == "closed_form") cfg.eval.path = EvalPath::closed_form;
  else if (laplace_path == "defining_integral") cfg.eval.path = EvalPath::defining_integral;
  else throw ConfigError("config key 'laplace_path': expected closed_form or defining_integral, got '" +
                         laplace_path + "'");
  cfg.eval.e1_b = e1_b;

  // Unit conversion into the internal parameter set.
  cfg.params.lambda_bs = per_km2_to_per_m2(lambda_bs_per_km2);
  cfg.params.beta = beta;
  cfg.params.p_t = db_to_linear(p_t_db);
  cfg.params.n0 = dbm_to_watts(n0_dbm);
  cfg.params.sigma_n2 = dbm_to_watts(sigma_n2_dbm);
  cfg.xi_setting_db = xi_db;
  cfg.params.xi = resolve_xi(xi_db, cfg.xi_interp);
  cfg.params.gamma = db_to_linear(gamma_db);
  cfg.params.l_p = static_cast<int>(l_p);
  cfg.params.n_l_cap = n_l_cap_m2;
  cfg.params.n_approx = static_cast<int>(n_approx);
  cfg.params.g_quad = static_cast<int>(g_quad);
  cfg.beam.m1 = db_to_linear(m1_db);
  cfg.beam.m2 = db_to_linear(m2_db);
  cfg.beam.phi = deg_to_rad(phi_deg);
  cfg.qam.k = static_cast<int>(qam_order);

  // Domain validation, before any computation.
  try {
    cfg.params.validate();
    cfg.beam.validate();
    cfg.qam.validate();
    cfg.eval.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config value out of domain: ") + e.what());
  }
  if (cfg.n_trials < 1) throw ConfigError("config key 'n_trials': must be >= 1");
  if (!(cfg.eps1 > 0) || !std::isfinite(cfg.eps1))
    throw ConfigError("config key 'eps1_m2': must be finite and > 0");
  if (!(cfg.eps2 > 0) || !std::isfinite(cfg.eps2))
    throw ConfigError("config key 'eps2': must be finite and > 0");
  if (!(cfg.eps3 > 0 && cfg.eps3 < 1))
    throw ConfigError("config key 'eps3': must lie in (0, 1)");

  // Metric list.
  cfg.metrics = metric_list.empty() ? default_metrics() : detail::split_names(metric_list);
  if (cfg.metrics.empty()) throw ConfigError("config key 'metric': empty metric list");
  for (const auto& m : cfg.metrics)
    if (!is_valid_metric_name(m, cfg.params.l_p))
      throw ConfigError("config key 'metric': unknown metric name '" + m + "'");

  // Sweep.
  if (!sweep_parameter.empty() || !sweep_values.empty()) {
    if (sweep_parameter.empty())
      throw ConfigError("config section [sweep]: 'values' given without 'parameter'");
    if (sweep_values.empty())
      throw ConfigError("config section [sweep]: 'parameter' given without 'values'");
    bool known = false;
    for (const auto& n : sweep_parameter_names()) known = known || n == sweep_parameter;
    if (!known)
      throw ConfigError("config key 'parameter': unknown sweep parameter '" + sweep_parameter +
                        "' (expected one of lambda_bs, beta, gamma, l_p, p_t, eps1, eps2, eps3)");
    cfg.sweep.parameter = sweep_parameter;
    cfg.sweep.values = detail::parse_double_list(sweep_values, "values");
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(f, path);
}

// Applies one sweep value (in config units) to a copy of the base config and
// re-validates. Sweep values use the same units as the matching config keys:
// lambda_bs per km^2, gamma and p_t in dB, eps1 in m^2, eps2 linear.
inline RunConfig apply_sweep_value(const RunConfig& base, const std::string& param, double value) {
  RunConfig c = base;
  if (!std::isfinite(value)) throw ConfigError("sweep value out of domain: not finite");
  if (param == "lambda_bs") c.params.lambda_bs = per_km2_to_per_m2(value);
  else if (param == "beta") c.params.beta = value;
  else if (param == "gamma") c.params.gamma = db_to_linear(value);
  else if (param == "l_p") {
    if (value != std::floor(value) || value < 3 || value > 1e6)
      throw ConfigError("sweep value out of domain: l_p must be an integer >= 3");
    c.params.l_p = static_cast<int>(value);
  } else if (param == "p_t") c.params.p_t = db_to_linear(value);
  else if (param == "eps1") c.eps1 = value;
  else if (param == "eps2") c.eps2 = value;
  else if (param == "eps3") c.eps3 = value;
  else throw ConfigError("unknown sweep parameter '" + param + "'");
  try {
    c.params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sweep value out of domain: ") + e.what());
  }
  if (param == "eps1" && !(value > 0)) throw ConfigError("sweep value out of domain: eps1 must be > 0");
  if (param == "eps2" && !(value > 0)) throw ConfigError("sweep value out of domain: eps2 must be > 0");
  if (param == "eps3" && !(value > 0 && value < 1))
    throw ConfigError("sweep value out of domain: eps3 must lie in (0, 1)");
  return c;
}

// Fully resolved configuration (internal units) as '#'-prefixed lines; every
// CSV artifact embeds these so it is self-describing.
inline std::vector<std::string> resolved_config_lines(const RunConfig& c) {
  std::vector<std::string> out;
  char buf[256];
  auto add = [&](const char* key, const std::string& v) { out.push_back(std::string("# ") + key + " = " + v); };
  auto addf = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    add(key, buf);
  };
  auto addi = [&](const char* key, long long v) { add(key, std::to_string(v)); };
  out.push_back("# resolved configuration (internal units: m, W, linear ratios, rad)");
  addf("network.lambda_bs_per_m2", c.params.lambda_bs);
  addf("network.beta", c.params.beta);
  addf("network.p_t_w", c.params.p_t);
  addf("network.n0_w", c.params.n0);
  addf("network.sigma_n2_w", c.params.sigma_n2);
  addf("network.xi", c.params.xi);
  addf("network.xi_setting_db", c.xi_setting_db);
  add("network.xi_interpretation", c.xi_interp == XiInterpretation::power_db      ? "power_db"
                                   : c.xi_interp == XiInterpretation::amplitude_db ? "amplitude_db"
                                                                                    : "raw");
  addf("network.gamma", c.params.gamma);
  addi("network.l_p", c.params.l_p);
  addf("network.n_l_cap_m2", c.params.n_l_cap);
  addi("network.n_approx", c.params.n_approx);
  addi("network.g_quad", c.params.g_quad);
  addf("beam.m1", c.beam.m1);
  addf("beam.m2", c.beam.m2);
  addf("beam.phi_rad", c.beam.phi);
  addi("run.qam_order", c.qam.k);
  add("run.engine", engine_name(c.engine));
  {
    std::string ms;
    for (const auto& m : c.metrics) ms += (ms.empty() ? "" : ",") + m;
    add("run.metrics", ms);
  }
  addf("run.eps1_m2", c.eps1);
  addf("run.eps2", c.eps2);
  addf("run.eps3", c.eps3);
  addi("run.n_trials", c.n_trials);
  add("run.seed", std::to_string(c.seed));
  add("run.e1_mode", c.eval.e1_mode == ExpInvsqMode::exact ? "exact" : "approx");
  addf("run.e1_b", c.eval.e1_b);
  add("run.laplace_path", c.eval.path == EvalPath::closed_form ? "closed_form" : "defining_integral");
  add("run.timings", c.timings ? "true" : "false");
  if (!c.sweep.empty()) {
    add("sweep.parameter", c.sweep.parameter);
    std::string vs;
    for (double v : c.sweep.values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      vs += (vs.empty() ? "" : ",") + std::string(buf);
    }
    add("sweep.values", vs);
  }
  return out;
}

}  // namespace isac
