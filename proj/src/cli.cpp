#include "expflow/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "expflow/expflow.hpp"

namespace expflow::cli {

namespace {

/// A CLI flag that writes one config key.
struct KeyFlag {
  std::string flag, section, key, help;
};

const std::vector<KeyFlag>& solve_flags() {
  static const std::vector<KeyFlag> f{
      {"--problem", "problem", "name", "problem name (see `list --problems`)"},
      {"--t0", "problem", "t0", "start time"},
      {"--t1", "problem", "t1", "end time"},
      {"--integrator", "integrator", "family", "exprk | exprb | expmssemi | expms"},
      {"--scheme", "integrator", "scheme", "tableau name"},
      {"--order", "integrator", "order", "exprb order: two | three | four"},
      {"--kstep", "integrator", "kstep", "multistep window k"},
      {"--startup", "integrator", "startup", "fixedpoint | onestep"},
      {"--startup-scheme", "integrator", "startup_scheme", "one-step startup tableau"},
      {"--startup-tol", "integrator", "startup_tol", "fixed-point startup tolerance"},
      {"--step", "integrator", "h", "constant step size h"},
      {"--rtol", "tolerances", "rtol", "relative tolerance"},
      {"--atol", "tolerances", "atol", "absolute tolerance"},
      {"--norm", "tolerances", "norm", "max | rms"},
      {"--backend", "backend", "kind", "direct | arnoldi"},
      {"--krylov-max-dim", "backend", "krylov_max_dim", "maximal Krylov dimension"},
  };
  return f;
}

struct Common {
  std::string config_file;
  std::map<std::string, std::string> values;  // flag -> raw value
  std::vector<std::string> params;
  bool tokman = false, constant_step = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_file, "key = value config file")->check(CLI::ExistingFile);
  for (const auto& f : solve_flags()) sub->add_option(f.flag, c.values[f.flag], f.help);
  sub->add_option("--param", c.params, "problem parameter override, name=value")->take_all();
  sub->add_flag("--tokman", c.tokman, "expms k=2 with Tokman's correction");
  sub->add_flag("--constant-step", c.constant_step, "exprb without step control (needs --step)");
}

/// Config file first, then every flag that was given.
RunConfig assemble(CLI::App* sub, const Common& c) {
  RunConfig cfg = c.config_file.empty() ? RunConfig{} : load_config(c.config_file);
  for (const auto& f : solve_flags())
    if (sub->count(f.flag)) set_config_key(cfg, f.section, f.key, c.values.at(f.flag));
  for (const auto& p : c.params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw ConfigError("--param expects name=value, got '" + p + "'");
    cfg.params[p.substr(0, eq)] = parse_double(p.substr(eq + 1));
  }
  if (sub->count("--tokman")) cfg.tokman = c.tokman;
  if (sub->count("--constant-step")) cfg.constant_step = c.constant_step;
  return cfg;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

void write_solution_csv(std::ostream& os, const SolveResult<double>& r, const std::vector<long>& probe) {
  const Index d = r.y.front().size();
  std::vector<Index> cols;
  if (probe.empty()) {
    for (Index i = 0; i < d; ++i) cols.push_back(i);
  } else {
    for (long p : probe) {
      if (p < 1 || p > d) throw ConfigError("probe index " + std::to_string(p) + " outside 1.." + std::to_string(d));
      cols.push_back(static_cast<Index>(p - 1));
    }
  }
  os << 't';
  for (Index i : cols) os << ",u_" << (i + 1);
  os << '\n';
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    os << fmt(r.t[k]);
    for (Index i : cols) os << ',' << fmt(r.y[k](i));
    os << '\n';
  }
}

int cmd_solve(const RunConfig& cfg, const std::string& csv_path, bool print_config, std::ostream& out,
              std::ostream& err) {
  if (print_config) {
    out << to_text(cfg);
    return ok;
  }
  ProblemInstance pi = build_instance(cfg);
  SolveOptions<double> o = solve_options(cfg, pi);
  o.on_warning = [&err](const std::string& w) { err << "warning: " << w << '\n'; };
  const auto r = expode(pi.problem, pi.tspan, pi.y0, o);
  const std::string path = csv_path.empty() ? (cfg.csv.empty() ? "solution.csv" : cfg.csv) : csv_path;
  if (path == "-") {
    write_solution_csv(out, r, cfg.probe);
  } else {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    write_solution_csv(f, r, cfg.probe);
  }
  out << "problem: " << pi.problem.name << "  integrator: " << r.integrator << "  scheme: " << r.scheme << '\n';
  out << r.statistics();
  return ok;
}

int cmd_study(const RunConfig& cfg, const std::string& csv_path, bool no_time, std::ostream& out, std::ostream& err) {
  ProblemInstance pi = build_instance(cfg);
  if (cfg.methods.empty()) throw ConfigError("study needs --methods");
  std::vector<MethodSpec> methods;
  for (const auto& m : cfg.methods) methods.push_back(parse_method(m));
  SolveOptions<double> base = solve_options(cfg, pi);
  base.on_warning = [](const std::string&) {};
  const auto steps = log_steps(cfg.n_min, cfg.n_max, cfg.count);
  bool cached = false;
  const Vector<double> ref = reference_solution(cfg.problem, pi, &cached);
  if (!pi.problem.exact) err << (cached ? "reference: cached" : "reference: computed") << '\n';
  const auto res = run_study(pi, base, methods, steps, ref);
  for (const auto& r : res.rows)
    if (!r.failure.empty()) err << r.method << " n=" << r.n << ": " << r.failure << '\n';
  const std::string text = study_csv(res, !no_time);
  const std::string path = csv_path.empty() ? cfg.study_csv : csv_path;
  if (path.empty() || path == "-") {
    out << text;
  } else {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << text;
  }
  return ok;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"expflow: exponential integrators for stiff ODEs", "expflow"};
  app.require_subcommand(1);

  Common sc;
  std::string solve_csv;
  bool print_config = false;
  auto* solve = app.add_subcommand("solve", "integrate one problem, write CSV and statistics");
  add_common(solve, sc);
  solve->add_option("--csv", solve_csv, "solution CSV path, '-' for stdout (default solution.csv)");
  std::string probe;
  solve->add_option("--probe", probe, "comma-separated 1-based components to write");
  solve->add_flag("--print-config", print_config, "print the merged config and exit");

  Common tc;
  std::string study_csv_path, methods;
  long n_min = 0, n_max = 0;
  int count = 0;
  bool no_time = false;
  auto* study = app.add_subcommand("study", "constant-step convergence study");
  add_common(study, tc);
  study->add_option("--methods", methods, "comma-separated method tokens, e.g. exprb4,expms3,expmssemi4-onestep");
  study->add_option("--n-min", n_min, "fewest steps");
  study->add_option("--n-max", n_max, "most steps");
  study->add_option("--count", count, "number of step sizes");
  study->add_option("--csv", study_csv_path, "study CSV path (default stdout)");
  study->add_flag("--no-time", no_time, "leave wall_time empty (reproducible output)");

  bool list_problems = false;
  auto* list = app.add_subcommand("list", "list schemes (and problems)");
  list->add_flag("--problems", list_problems, "also list benchmark problems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*list) {
      out << Registry::builtin().listing();
      if (list_problems) {
        out << "\nproblems:\n";
        for (const auto& s : problem_specs()) {
          out << s.name << "  " << s.description << "  [";
          bool first = true;
          for (const auto& [k, v] : s.defaults) {
            out << (first ? "" : ", ") << k << '=' << v;
            first = false;
          }
          out << "]\n";
        }
      }
      return ok;
    }
    if (*solve) {
      RunConfig cfg = assemble(solve, sc);
      if (solve->count("--probe")) set_config_key(cfg, "output", "probe", probe);
      if (cfg.problem.empty() && !print_config) throw ConfigError("no problem given (--problem or [problem] name)");
      return cmd_solve(cfg, solve_csv, print_config, out, err);
    }
    RunConfig cfg = assemble(study, tc);
    if (study->count("--methods")) set_config_key(cfg, "study", "methods", methods);
    if (study->count("--n-min")) cfg.n_min = n_min;
    if (study->count("--n-max")) cfg.n_max = n_max;
    if (study->count("--count")) cfg.count = count;
    return cmd_study(cfg, study_csv_path, no_time, out, err);
  } catch (const IntegrationError& e) {
    err << "integration failed: " << e.what() << '\n';
    return integration_failure;
  } catch (const NumericalError& e) {
    err << "integration failed: " << e.what() << '\n';
    return integration_failure;
  } catch (const EvaluationError& e) {
    err << "integration failed: " << e.what() << '\n';
    return integration_failure;
  } catch (const Error& e) {
    err << "configuration error: " << e.what() << '\n';
    return config_error;
  }
}

}  // namespace expflow::cli
