#pragma once

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "problems.hpp"
#include "study.hpp"

namespace expflow {

/// Everything a CLI run needs. Unset optionals fall back to the problem's
/// defaults.
///
///   [problem]     name, t0, t1
///   [parameters]  problem parameters (N, mu, alpha, ...)
///   [integrator]  family, scheme, order, kstep, tokman, startup,
///                 startup_scheme, startup_tol, constant_step, h
///   [tolerances]  rtol, atol, norm (max | rms)
///   [backend]     kind (direct | arnoldi), krylov_max_dim
///   [output]      csv, probe (comma-separated 1-based components)
///   [study]       methods, n_min, n_max, count, csv
struct RunConfig {
  std::string problem;
  ParamMap params;
  std::optional<double> t0, t1;

  std::string family = "exprb";
  std::string scheme;
  int order = 4;
  int kstep = 2;
  bool tokman = false;
  std::string startup = "fixedpoint";
  std::string startup_scheme;
  std::optional<double> startup_tol;
  bool constant_step = false;
  std::optional<double> h;

  std::optional<double> rtol, atol;
  std::string norm = "max";

  std::optional<std::string> backend;
  std::optional<int> krylov_max_dim;

  std::string csv;
  std::vector<long> probe;

  std::vector<std::string> methods;
  long n_min = 8;
  long n_max = 256;
  int count = 6;
  std::string study_csv;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

/// Shortest decimal form that reads back to the same double.
inline std::string exact_double(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

inline double parse_double(const std::string& s) {
  const char* b = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(b, &end);
  if (s.empty() || end != b + s.size() || (errno == ERANGE && std::isinf(v))) throw ConfigError("not a number: '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s) {
  long v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("not an integer: '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "off" || s == "no" || s == "0") return false;
  throw ConfigError("not a boolean: '" + s + "'");
}

/// "two" | "three" | "four" or the digit.
inline int parse_order(const std::string& s) {
  if (s == "two") return 2;
  if (s == "three") return 3;
  if (s == "four") return 4;
  const long v = parse_long(s);
  if (v < 2 || v > 4) throw ConfigError("order must be two, three or four");
  return static_cast<int>(v);
}

/// Sets one key; `section` is the bracketed name (possibly empty).
inline void set_config_key(RunConfig& c, const std::string& section, const std::string& key, const std::string& v) {
  auto unknown = [&] {
    throw ConfigError("unknown key '" + key + "'" + (section.empty() ? "" : " in [" + section + "]"));
  };
  if (section == "problem") {
    if (key == "name") c.problem = v;
    else if (key == "t0") c.t0 = parse_double(v);
    else if (key == "t1") c.t1 = parse_double(v);
    else unknown();
  } else if (section == "parameters") {
    c.params[key] = parse_double(v);
  } else if (section == "integrator") {
    if (key == "family") {
      (void)parse_integrator(v);
      c.family = v;
    } else if (key == "scheme") c.scheme = v;
    else if (key == "order") c.order = parse_order(v);
    else if (key == "kstep") c.kstep = static_cast<int>(parse_long(v));
    else if (key == "tokman") c.tokman = parse_bool(v);
    else if (key == "startup") {
      (void)parse_startup(v);
      c.startup = v;
    } else if (key == "startup_scheme") c.startup_scheme = v;
    else if (key == "startup_tol") c.startup_tol = parse_double(v);
    else if (key == "constant_step") c.constant_step = parse_bool(v);
    else if (key == "h") c.h = parse_double(v);
    else unknown();
  } else if (section == "tolerances") {
    if (key == "rtol") c.rtol = parse_double(v);
    else if (key == "atol") c.atol = parse_double(v);
    else if (key == "norm") {
      if (v != "max" && v != "rms") throw ConfigError("norm must be max or rms");
      c.norm = v;
    } else unknown();
  } else if (section == "backend") {
    if (key == "kind") {
      (void)parse_backend(v);
      if (v == "custom") throw ConfigError("the custom backend is library-only");
      c.backend = v;
    } else if (key == "krylov_max_dim") c.krylov_max_dim = static_cast<int>(parse_long(v));
    else unknown();
  } else if (section == "output") {
    if (key == "csv") c.csv = v;
    else if (key == "probe") {
      c.probe.clear();
      for (const auto& s : detail::split_list(v)) c.probe.push_back(parse_long(s));
    } else unknown();
  } else if (section == "study") {
    if (key == "methods") {
      c.methods = detail::split_list(v);
      for (const auto& m : c.methods) (void)parse_method(m);
    } else if (key == "n_min") c.n_min = parse_long(v);
    else if (key == "n_max") c.n_max = parse_long(v);
    else if (key == "count") c.count = static_cast<int>(parse_long(v));
    else if (key == "csv") c.study_csv = v;
    else unknown();
  } else {
    throw ConfigError("unknown section [" + section + "]");
  }
}

/// Parses `key = value` lines under `[section]` headers; `#` starts a
/// comment. Errors carry "source:line:".
inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  RunConfig c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  std::vector<std::pair<std::string, int>> param_lines;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "empty key");
    if (section.empty()) throw ConfigError(where + "key '" + key + "' outside any section");
    try {
      set_config_key(c, section, key, val);
    } catch (const Error& e) {
      throw ConfigError(where + e.what());
    }
    if (section == "parameters") param_lines.emplace_back(key, lineno);
  }
  if (!c.problem.empty()) {
    const ProblemSpec* spec = nullptr;
    try {
      spec = &problem_spec(c.problem);
    } catch (const LookupError& e) {
      throw ConfigError(source + ": " + e.what());
    }
    for (const auto& [k, ln] : param_lines)
      if (!spec->defaults.count(k))
        throw ConfigError(source + ":" + std::to_string(ln) + ": problem " + c.problem + " has no parameter '" + k +
                          "'");
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

/// Canonical text form; parse_config(to_text(c)) == c.
inline std::string to_text(const RunConfig& c) {
  using detail::exact_double;
  std::ostringstream os;
  os << "[problem]\n";
  if (!c.problem.empty()) os << "name = " << c.problem << '\n';
  if (c.t0) os << "t0 = " << exact_double(*c.t0) << '\n';
  if (c.t1) os << "t1 = " << exact_double(*c.t1) << '\n';
  if (!c.params.empty()) {
    os << "\n[parameters]\n";
    for (const auto& [k, v] : c.params) os << k << " = " << exact_double(v) << '\n';
  }
  os << "\n[integrator]\n"
     << "family = " << c.family << '\n';
  if (!c.scheme.empty()) os << "scheme = " << c.scheme << '\n';
  os << "order = " << c.order << '\n'
     << "kstep = " << c.kstep << '\n'
     << "tokman = " << (c.tokman ? "true" : "false") << '\n'
     << "startup = " << c.startup << '\n';
  if (!c.startup_scheme.empty()) os << "startup_scheme = " << c.startup_scheme << '\n';
  if (c.startup_tol) os << "startup_tol = " << exact_double(*c.startup_tol) << '\n';
  os << "constant_step = " << (c.constant_step ? "true" : "false") << '\n';
  if (c.h) os << "h = " << exact_double(*c.h) << '\n';
  os << "\n[tolerances]\n";
  if (c.rtol) os << "rtol = " << exact_double(*c.rtol) << '\n';
  if (c.atol) os << "atol = " << exact_double(*c.atol) << '\n';
  os << "norm = " << c.norm << '\n';
  os << "\n[backend]\n";
  if (c.backend) os << "kind = " << *c.backend << '\n';
  if (c.krylov_max_dim) os << "krylov_max_dim = " << *c.krylov_max_dim << '\n';
  os << "\n[output]\n";
  if (!c.csv.empty()) os << "csv = " << c.csv << '\n';
  if (!c.probe.empty()) {
    os << "probe = ";
    for (std::size_t i = 0; i < c.probe.size(); ++i) os << (i ? "," : "") << c.probe[i];
    os << '\n';
  }
  os << "\n[study]\n";
  if (!c.methods.empty()) {
    os << "methods = ";
    for (std::size_t i = 0; i < c.methods.size(); ++i) os << (i ? ", " : "") << c.methods[i];
    os << '\n';
  }
  os << "n_min = " << c.n_min << '\n' << "n_max = " << c.n_max << '\n' << "count = " << c.count << '\n';
  if (!c.study_csv.empty()) os << "csv = " << c.study_csv << '\n';
  return os.str();
}

/// Problem instance with the tspan override applied.
inline ProblemInstance build_instance(const RunConfig& c) {
  if (c.problem.empty()) throw ConfigError("no problem given");
  ProblemInstance pi;
  try {
    pi = make_problem(c.problem, c.params);
  } catch (const LookupError& e) {
    throw ConfigError(e.what());
  }
  if (c.t0) pi.tspan.first = *c.t0;
  if (c.t1) pi.tspan.second = *c.t1;
  return pi;
}

/// Solver options for `solve`: problem defaults overlaid with the config.
inline SolveOptions<double> solve_options(const RunConfig& c, const ProblemInstance& pi) {
  SolveOptions<double> o = pi.options;
  o.integrator = parse_integrator(c.family);
  o.scheme = c.scheme;
  o.order = c.order;
  o.kstep = c.kstep;
  o.tokman = c.tokman;
  o.startup = parse_startup(c.startup);
  o.startup_scheme = c.startup_scheme;
  if (c.startup_tol) o.startup_tol = *c.startup_tol;
  o.constant_step = c.constant_step;
  if (c.h) o.h = *c.h;
  if (c.rtol) o.rtol = *c.rtol;
  if (c.atol) o.atol = *c.atol;
  o.norm = c.norm == "rms" ? ErrorNorm::rms() : ErrorNorm::max();
  if (c.backend) o.backend = parse_backend(*c.backend);
  if (c.krylov_max_dim) o.krylov_max_dim = *c.krylov_max_dim;
  return o;
}

}  // namespace expflow
