#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "integrate.hpp"
#include "problems.hpp"

namespace expflow {

/// A method token resolved into solver options.
///
///   <exprk scheme>              expeuler, krogstad, hochost5, ...
///   exprb2 | exprb3 | exprb4
///   expmssemi<k>[-onestep]      k = 1..6
///   expms<k>[-onestep]          k = 1..5
///   tokman                      expms, k = 2, Tokman's correction
struct MethodSpec {
  std::string token;
  IntegratorKind integrator = IntegratorKind::exprb;
  std::string scheme;
  int order = 4;
  int kstep = 2;
  Startup startup = Startup::fixedpoint;
  bool tokman = false;

  void apply(SolveOptions<double>& o) const {
    o.integrator = integrator;
    o.scheme = scheme;
    o.order = order;
    o.kstep = kstep;
    o.startup = startup;
    o.tokman = tokman;
  }
};

inline MethodSpec parse_method(const std::string& token) {
  MethodSpec m;
  m.token = token;
  std::string body = token;
  const std::string os = "-onestep";
  const bool onestep = body.size() > os.size() && body.ends_with(os);
  if (onestep) body.resize(body.size() - os.size());

  auto trailing_k = [&](const std::string& prefix) -> int {
    const std::string rest = body.substr(prefix.size());
    if (rest.empty() || rest.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("method '" + token + "': expected a step number after " + prefix);
    return std::stoi(rest);
  };

  if (body == "tokman") {
    m.integrator = IntegratorKind::expms;
    m.kstep = 2;
    m.tokman = true;
  } else if (body.starts_with("expmssemi")) {
    m.integrator = IntegratorKind::expmssemi;
    m.kstep = trailing_k("expmssemi");
  } else if (body.starts_with("expms")) {
    m.integrator = IntegratorKind::expms;
    m.kstep = trailing_k("expms");
  } else {
    if (onestep) throw ConfigError("method '" + token + "': -onestep applies to multistep methods only");
    const Tableau& t = registry_get(body);  // LookupError for unknown names
    if (t.family == Family::exprb) {
      m.integrator = IntegratorKind::exprb;
      m.order = t.order;
      m.scheme = t.name;
    } else {
      m.integrator = IntegratorKind::exprk;
      m.scheme = t.name;
    }
  }
  if (onestep) m.startup = Startup::onestep;
  return m;
}

// ---------------------------------------------------------------------------
// Reference solutions

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hexfloat(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

}  // namespace detail

inline constexpr double kReferenceTol = 1e-11;

inline std::filesystem::path cache_dir() {
  if (const char* e = std::getenv("EXPFLOW_CACHE_DIR"); e && *e) return e;
  return std::filesystem::temp_directory_path() / "expflow-cache";
}

/// Cache key over problem name, parameters, time span and initial value.
inline std::string reference_key(const std::string& name, const ProblemInstance& pi) {
  std::ostringstream os;
  os << name << ';';
  for (const auto& [k, v] : pi.params) os << k << '=' << detail::hexfloat(v) << ';';
  os << detail::hexfloat(pi.tspan.first) << ';' << detail::hexfloat(pi.tspan.second) << ';';
  for (double y : pi.y0) os << detail::hexfloat(y) << ',';
  os << "exprb4;" << detail::hexfloat(kReferenceTol);
  std::ostringstream hex;
  hex << name << '-' << std::hex << std::setw(16) << std::setfill('0') << detail::fnv1a(os.str());
  return hex.str();
}

/// y(T): exact if the problem has one, else an exprb4 adaptive run at
/// rtol = atol = 1e-11, stored under cache_dir().
inline Vector<double> reference_solution(const std::string& name, const ProblemInstance& pi, bool* from_cache = nullptr) {
  if (from_cache) *from_cache = false;
  if (pi.problem.exact) return pi.problem.exact(pi.tspan.second);

  const auto file = cache_dir() / (reference_key(name, pi) + ".ref");
  if (std::ifstream in(file); in) {
    std::string tok;
    std::vector<double> vals;
    while (in >> tok) vals.push_back(std::strtod(tok.c_str(), nullptr));
    if (static_cast<Index>(vals.size()) == pi.problem.dim) {
      if (from_cache) *from_cache = true;
      return Eigen::Map<Vector<double>>(vals.data(), pi.problem.dim);
    }
  }

  SolveOptions<double> o = pi.options;
  o.integrator = IntegratorKind::exprb;
  o.scheme.clear();
  o.order = 4;
  o.constant_step = false;
  o.rtol = kReferenceTol;
  o.atol = kReferenceTol;
  o.output_times.clear();
  auto r = expode(pi.problem, pi.tspan, pi.y0, o);
  Vector<double> y = r.y.back();

  std::error_code ec;
  std::filesystem::create_directories(file.parent_path(), ec);
  if (!ec) {
    const auto tmp = file.string() + ".tmp";
    if (std::ofstream out(tmp); out) {
      for (double v : y) out << detail::hexfloat(v) << '\n';
      out.close();
      std::filesystem::rename(tmp, file, ec);
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Convergence studies

/// Step counts n_i ≈ n_min·(n_max/n_min)^{i/(count−1)}, rounded, distinct.
inline std::vector<long> log_steps(long n_min, long n_max, int count) {
  if (n_min < 1 || n_max < n_min || count < 1) throw ConfigError("step sweep needs 1 <= n_min <= n_max and count >= 1");
  std::vector<long> out;
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    const long n = std::lround(static_cast<double>(n_min) * std::pow(static_cast<double>(n_max) / n_min, f));
    if (out.empty() || n != out.back()) out.push_back(n);
  }
  return out;
}

struct StudyRow {
  std::string method;
  long n = 0;
  double h = 0;
  double error = std::numeric_limits<double>::quiet_NaN();
  double wall_time = 0;
  long matfun_evals = 0;
  long krylov_subspaces = 0;
  long krylov_steps = 0;
  long fixedpoint_iterations = 0;
  std::string failure;
  std::string statistics;
};

struct StudySummary {
  std::string method;
  std::optional<double> slope;
};

/// OLS slope of log(error) over log(h), rows with finite error > 100·ε only.
inline std::optional<double> fit_slope(const std::vector<StudyRow>& rows) {
  const double floor = 100 * std::numeric_limits<double>::epsilon();
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (std::isfinite(r.error) && r.error > floor && r.h > 0) {
      x.push_back(std::log(r.h));
      y.push_back(std::log(r.error));
    }
  }
  if (x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0) return std::nullopt;
  return sxy / sxx;
}

/// One constant-step run; integration failures become a NaN row.
inline StudyRow study_point(const ProblemInstance& pi, const SolveOptions<double>& base, const MethodSpec& m, long n,
                            const Vector<double>& ref) {
  StudyRow row;
  row.method = m.token;
  row.n = n;
  row.h = std::abs(pi.tspan.second - pi.tspan.first) / static_cast<double>(n);
  SolveOptions<double> o = base;
  m.apply(o);
  o.constant_step = true;
  o.h = row.h;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto r = expode(pi.problem, pi.tspan, pi.y0, o);
    row.error = (r.y.back() - ref).cwiseAbs().maxCoeff();
    if (!std::isfinite(row.error)) row.error = std::numeric_limits<double>::quiet_NaN();
    row.matfun_evals = r.krylov.matfun_evals;
    row.krylov_subspaces = r.krylov.subspaces_built;
    row.krylov_steps = r.krylov.total_krylov_steps;
    row.fixedpoint_iterations = r.fixedpoint_iterations;
    row.statistics = r.statistics();
  } catch (const IntegrationError& e) {
    row.failure = e.what();
  } catch (const NumericalError& e) {
    row.failure = e.what();
  } catch (const EvaluationError& e) {
    row.failure = e.what();
  }
  row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

struct StudyResult {
  std::vector<StudyRow> rows;  // method-major, n ascending
  std::vector<StudySummary> summaries;
};

inline StudyResult run_study(const ProblemInstance& pi, const SolveOptions<double>& base,
                             const std::vector<MethodSpec>& methods, const std::vector<long>& steps,
                             const Vector<double>& ref) {
  StudyResult res;
  for (const auto& m : methods) {
    std::vector<StudyRow> mine;
    for (long n : steps) mine.push_back(study_point(pi, base, m, n, ref));
    res.summaries.push_back({m.token, fit_slope(mine)});
    res.rows.insert(res.rows.end(), mine.begin(), mine.end());
  }
  return res;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_number(double x) {
  if (std::isnan(x)) return "NaN";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline constexpr const char* kStudyHeader =
    "kind,method,n,h,error,wall_time,matfun_evals,krylov_subspaces,krylov_steps,fixedpoint_iterations,slope";

/// Run rows first, then one `slope` row per method (slope empty when it
/// cannot be fitted).
inline std::string study_csv(const StudyResult& s, bool with_time = true) {
  std::ostringstream os;
  os << kStudyHeader << '\n';
  for (const auto& r : s.rows) {
    os << "run," << r.method << ',' << r.n << ',' << csv_number(r.h) << ',' << csv_number(r.error) << ','
       << (with_time ? csv_number(r.wall_time) : "") << ',' << r.matfun_evals << ',' << r.krylov_subspaces << ','
       << r.krylov_steps << ',' << r.fixedpoint_iterations << ",\n";
  }
  for (const auto& m : s.summaries)
    os << "slope," << m.method << ",,,,,,,,," << (m.slope ? csv_number(*m.slope) : "") << '\n';
  return os.str();
}

}  // namespace expflow
