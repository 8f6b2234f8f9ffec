#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "evaluator.hpp"
#include "krylov.hpp"
#include "linop.hpp"
#include "phifun.hpp"
#include "schemes.hpp"
#include "stepctl.hpp"

namespace expflow {

enum class IntegratorKind { exprk, exprb, expmssemi, expms };
enum class Backend { direct, arnoldi, custom };
enum class Startup { fixedpoint, onestep };

inline std::string to_string(IntegratorKind k) {
  switch (k) {
    case IntegratorKind::exprk: return "exprk";
    case IntegratorKind::exprb: return "exprb";
    case IntegratorKind::expmssemi: return "expmssemi";
    case IntegratorKind::expms: return "expms";
  }
  return "?";
}
inline std::string to_string(Backend b) {
  switch (b) {
    case Backend::direct: return "direct";
    case Backend::arnoldi: return "arnoldi";
    case Backend::custom: return "custom";
  }
  return "?";
}
inline std::string to_string(Startup s) { return s == Startup::fixedpoint ? "fixedpoint" : "onestep"; }

inline IntegratorKind parse_integrator(const std::string& s) {
  for (auto k : {IntegratorKind::exprk, IntegratorKind::exprb, IntegratorKind::expmssemi, IntegratorKind::expms})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown integrator '" + s + "' (expected exprk, exprb, expmssemi or expms)");
}
inline Backend parse_backend(const std::string& s) {
  for (auto b : {Backend::direct, Backend::arnoldi, Backend::custom})
    if (to_string(b) == s) return b;
  throw ConfigError("unknown matrix function backend '" + s + "' (expected direct or arnoldi)");
}
inline Startup parse_startup(const std::string& s) {
  if (s == "fixedpoint") return Startup::fixedpoint;
  if (s == "onestep") return Startup::onestep;
  throw ConfigError("unknown startup '" + s + "' (expected fixedpoint or onestep)");
}

/// u' = F(t,u), optionally split as u' = A u + g(t,u).
template <Scalar S = double>
struct Problem {
  using Vec = Vector<S>;
  using Fn = std::function<Vec(double, const Vec&)>;
  using OpFn = std::function<Operator<S>(double, const Vec&)>;

  std::string name;
  Index dim = 0;
  Fn rhs;
  OpFn jacobian;
  std::function<Vec(double, const Vec&, const Vec&)> jacobian_action;
  std::optional<Operator<S>> linear_part;
  Fn gfun;
  OpFn dg_dy;
  Fn df_dt;
  std::function<Vec(double)> exact;

  bool nonautonomous = false;
  bool semilinear = false;
  bool jconstant = false;
  Structure structure = Structure::none;
};

template <Scalar S = double>
struct SolveOptions {
  IntegratorKind integrator = IntegratorKind::exprb;
  std::string scheme;  // exprk tableau; for exprb overrides `order`
  int order = 4;
  int kstep = 2;
  bool tokman = false;
  int error_estimate = 0;  // embedded weight set

  double rtol = 1e-6;
  AbsTol atol{1e-8};
  ErrorNorm norm = ErrorNorm::max();

  Backend backend = Backend::direct;
  std::function<std::unique_ptr<MatFunEvaluator<S>>()> custom_evaluator;
  int krylov_max_dim = 36;
  double krylov_tol = 0.0;  // 0: derived from the tolerances

  double initial_step = 0.0;
  double min_step = 0.0;
  double max_step = std::numeric_limits<double>::infinity();
  double h = 0.0;              // constant step size
  bool constant_step = false;  // exprb only; the other families always are

  Startup startup = Startup::fixedpoint;
  std::string startup_scheme;
  double startup_tol = 1e-12;
  int startup_max_iter = 100;

  std::vector<double> output_times;
  std::function<void(const std::string&)> on_warning;
  Index probe_cap = kDefaultProbeCap;
  long max_steps = 1'000'000;
  bool check_problem = true;
};

template <Scalar S = double>
struct SolveResult {
  using Vec = Vector<S>;

  std::vector<double> t;
  std::vector<Vec> y;
  long steps_accepted = 0;
  long steps_rejected = 0;
  long fixedpoint_iterations = 0;
  long rhs_evals = 0;
  KrylovStats krylov;
  std::vector<std::string> warnings;
  std::vector<double> output_t;
  std::vector<Vec> output_y;
  std::string integrator;
  std::string scheme;

  [[nodiscard]] std::string statistics() const {
    std::vector<std::pair<std::string, long>> pre{{"number of accepted steps", steps_accepted},
                                                  {"number of rejected steps", steps_rejected}};
    if (integrator == "expmssemi" || integrator == "expms")
      pre.emplace_back("number of fixed point iterations", fixedpoint_iterations);
    return format_statistics(krylov, pre);
  }
};

// ---------------------------------------------------------------------------
// Linearization

/// Forward-difference Jacobian, δ_j = √ε·max(|u_j|, 1).
template <Scalar S>
Operator<S> jacobian_fd(const Problem<S>& p, double t, const Vector<S>& u, Index cap = kDefaultProbeCap) {
  const Index d = u.size();
  if (d > cap) {
    throw ConfigError("finite-difference Jacobian refused for dimension " + std::to_string(d) + " (cap " +
                      std::to_string(cap) + "); supply jacobian or jacobian_action");
  }
  if (!p.rhs) throw ConfigError("problem has no right-hand side");
  const double sq = std::sqrt(std::numeric_limits<double>::epsilon());
  const Vector<S> f0 = p.rhs(t, u);
  Matrix<S> M(d, d);
  Vector<S> up = u;
  for (Index j = 0; j < d; ++j) {
    const double delta = sq * std::max(std::abs(u(j)), 1.0);
    up(j) = u(j) + S(delta);
    M.col(j) = (p.rhs(t, up) - f0) / S(delta);
    up(j) = u(j);
  }
  return Operator<S>::dense(std::move(M));
}

/// A + B, kept sparse or dense when both are, else matrix-free.
template <Scalar S>
Operator<S> operator_sum(const Operator<S>& a, const Operator<S>& b) {
  if (a.dim() != b.dim()) throw ArgumentError("operator_sum: dimension mismatch");
  Structure s = Structure::none;
  if (a.structure() == b.structure() &&
      (a.structure() == Structure::symmetric || a.structure() == Structure::diagonal ||
       a.structure() == Structure::skewsymmetric))
    s = a.structure();
  if (a.sparse_storage() && b.sparse_storage()) {
    SparseMatrix<S> m = *a.sparse_storage() + *b.sparse_storage();
    return Operator<S>::sparse(std::move(m), s);
  }
  if (a.kind() != Operator<S>::Kind::matfree && b.kind() != Operator<S>::Kind::matfree) {
    return Operator<S>::dense(a.materialize() + b.materialize(), s == Structure::diagonal ? Structure::none : s);
  }
  return Operator<S>::matfree(
      a.dim(), [a, b](const Vector<S>& v) -> Vector<S> { return a.apply(v) + b.apply(v); }, s);
}

/// J(t,u): jacobian callback, action callback, A + ∂g/∂u, finite differences.
template <Scalar S>
Operator<S> evaluate_jacobian(const Problem<S>& p, double t, const Vector<S>& u, Index cap = kDefaultProbeCap) {
  if (p.jacobian) {
    Operator<S> J = p.jacobian(t, u);
    if (!J.valid() || J.dim() != u.size()) throw EvaluationError("jacobian callback returned an operator of wrong size");
    return J;
  }
  if (p.jacobian_action) {
    auto act = p.jacobian_action;
    return Operator<S>::matfree(
        u.size(), [act, t, u](const Vector<S>& v) { return act(t, u, v); },
        p.structure == Structure::symmetric || p.structure == Structure::skewsymmetric ? p.structure
                                                                                        : Structure::none);
  }
  if (p.semilinear && p.linear_part && p.dg_dy) return operator_sum(*p.linear_part, p.dg_dy(t, u));
  return jacobian_fd(p, t, u, cap);
}

/// ∂F/∂t at (t,u); zero for autonomous problems.
template <Scalar S>
Vector<S> evaluate_dt(const Problem<S>& p, double t, const Vector<S>& u, const Vector<S>& f) {
  if (!p.nonautonomous) return Vector<S>::Zero(u.size());
  if (p.df_dt) return p.df_dt(t, u);
  const double delta = std::sqrt(std::numeric_limits<double>::epsilon()) * std::max(std::abs(t), 1.0);
  return (p.rhs(t + delta, u) - f) / S(delta);
}

/// ‖F − (A u + g)‖ ≤ 1e−10·(1 + ‖F‖) at 20 points scattered around (t0, y0).
template <Scalar S>
void check_semilinear_consistency(const Problem<S>& p, double t0, double t1, const Vector<S>& y0) {
  std::mt19937 rng(20240611);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const double scale = 0.1 * (1.0 + detail::abs_max(y0));
  for (int s = 0; s < 20; ++s) {
    Vector<S> u = y0;
    if (s > 0)
      for (Index i = 0; i < u.size(); ++i) u(i) += S(scale * nd(rng));
    const double t = t0 + (t1 - t0) * ud(rng);
    const Vector<S> f = p.rhs(t, u);
    const Vector<S> split = p.linear_part->apply(u) + p.gfun(t, u);
    const double defect = detail::abs_max(Vector<S>(f - split));
    if (!(defect <= 1e-10 * (1.0 + detail::abs_max(f)))) {
      std::ostringstream os;
      os << "semilinear split inconsistent: |F - (A u + g)| = " << defect << " at t = " << t;
      throw ConfigError(os.str());
    }
  }
}

// ---------------------------------------------------------------------------
// Drivers

namespace detail {

inline double signed_step(double t0, double T, double h) { return T >= t0 ? std::abs(h) : -std::abs(h); }

template <Scalar S>
class Driver {
 public:
  using Vec = Vector<S>;
  using Remainder = std::function<Vec(double, const Vec&)>;

  struct Applied {
    std::vector<Vec> values;
    double h_out = 0.0;  // magnitude
    bool reduced = false;
  };

  struct StepOut {
    Vec u;
    Vec err;
    bool has_err = false;
    bool reduced = false;
    double h_out = 0.0;
  };

  Driver(const Problem<S>& p, const SolveOptions<S>& o, double t0, double T, const Vec& y0)
      : p_(p), o_(o), t0_(t0), T_(T), y0_(y0) {
    res_.integrator = to_string(o.integrator);
    switch (o.backend) {
      case Backend::direct: ev_ = std::make_unique<DirectEvaluator<S>>(o.probe_cap); break;
      case Backend::arnoldi: ev_ = std::make_unique<ArnoldiEvaluator<S>>(o.krylov_max_dim); break;
      case Backend::custom:
        if (!o.custom_evaluator) throw ConfigError("custom backend selected without an evaluator factory");
        ev_ = o.custom_evaluator();
        if (!ev_) throw ConfigError("custom evaluator factory returned nothing");
        break;
    }
    ev_->set_warning_sink([this](const std::string& w) { warn(w); });
    ev_->init(y0.size());
    ev_->register_jobs(krylov_labels());
  }

  SolveResult<S> run() {
    push(t0_, y0_);
    switch (o_.integrator) {
      case IntegratorKind::exprk: run_exprk(); break;
      case IntegratorKind::exprb: run_exprb(); break;
      case IntegratorKind::expmssemi: run_expmssemi(); break;
      case IntegratorKind::expms: run_expms(); break;
    }
    res_.krylov = ev_->stats();
    interpolate_output();
    return std::move(res_);
  }

 private:
  // -- plumbing --------------------------------------------------------------

  void warn(const std::string& w) {
    res_.warnings.push_back(w);
    if (o_.on_warning) o_.on_warning(w);
  }

  Vec checked(Vec v, const char* what) const {
    if (v.size() != y0_.size()) throw EvaluationError(std::string(what) + " returned a vector of wrong length");
    return v;
  }
  Vec F(double t, const Vec& u) {
    ++res_.rhs_evals;
    return checked(p_.rhs(t, u), "rhs");
  }
  Vec g(double t, const Vec& u) { return checked(p_.gfun(t, u), "gfun"); }

  void push(double t, const Vec& u) {
    res_.t.push_back(t);
    res_.y.push_back(u);
  }

  void check_finite(const Vec& u, double t) const {
    if (!u.allFinite()) {
      std::ostringstream os;
      os << "solution is no longer finite at t = " << t;
      throw IntegrationError(os.str());
    }
  }

  /// Absolute accuracy wanted from the matrix functions for a step at state u.
  double base_tol(const Vec& u, bool adaptive) const {
    if (o_.krylov_tol > 0) return o_.krylov_tol;
    if (adaptive) return 0.01 * (o_.atol.values.cwiseAbs().maxCoeff() + o_.rtol * abs_max(u));
    return 1e-12 * std::max(1.0, abs_max(u));
  }

  /// combos(h M)·v; empty combos and zero vectors never reach the backend.
  Applied apply(const std::string& label, const Vec& v, double h, const std::vector<PhiCombo>& combos, double tol,
                bool allow) {
    Applied a;
    a.values.assign(combos.size(), Vec::Zero(v.size()));
    a.h_out = std::abs(h);
    std::vector<PhiCombo> nz;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < combos.size(); ++i)
      if (!combos[i].empty()) {
        nz.push_back(combos[i]);
        where.push_back(i);
      }
    if (nz.empty() || abs_max(v) == 0.0) return a;
    auto r = ev_->evaluate(label, v, h, nz, tol, allow);
    if (r.values.size() != nz.size()) throw EvaluationError("matrix function backend returned wrong number of vectors");
    for (std::size_t i = 0; i < nz.size(); ++i) a.values[where[i]] = std::move(r.values[i]);
    if (r.h_out < std::abs(h) * (1 - 1e-14)) {
      if (!allow) throw EvaluationError("matrix function backend reduced the step where this is not allowed");
      a.reduced = true;
      a.h_out = r.h_out;
    }
    return a;
  }

  Operator<S> jacobian(double t, const Vec& u) { return evaluate_jacobian(p_, t, u, o_.probe_cap); }

  // -- one-step schemes ------------------------------------------------------

  /// One step of an exponential Runge-Kutta (rosenbrock = false, M = A) or
  /// Rosenbrock (rosenbrock = true, M = J_n) scheme in reformulated form.
  /// rem(t_j, Y_j) gives D_j.
  StepOut rk_step(const Tableau& tab, const EmbeddedWeights* emb, double t, const Vec& u, const Vec& Fn,
                  const Vec* d, double h, double tol, bool allow, const Remainder& rem, bool rosenbrock) {
    const int s = tab.s;
    const double ah = std::abs(h);
    StepOut out;

    std::vector<PhiCombo> fc;
    for (int i = 1; i < s; ++i) fc.push_back(tab.c[i] != 0 ? PhiCombo::phi(1, tab.c[i], tab.c[i]) : PhiCombo{});
    fc.push_back(PhiCombo::phi(1));
    auto rF = apply(rosenbrock ? "F1" : "Y1plusA", Fn, h, fc, tol / ah, allow);
    if (rF.reduced) return reduced(rF.h_out);

    std::optional<Applied> rd;
    if (d) {
      std::vector<PhiCombo> dc;
      for (int i = 1; i < s; ++i)
        dc.push_back(tab.c[i] != 0 ? PhiCombo::phi(2, tab.c[i] * tab.c[i], tab.c[i]) : PhiCombo{});
      dc.push_back(PhiCombo::phi(2));
      rd = apply("v", *d, h, dc, tol / (h * h), allow);
      if (rd->reduced) return reduced(rd->h_out);
    }

    const Index n = u.size();
    std::vector<Vec> acc(s, Vec::Zero(n));
    Vec fin = Vec::Zero(n), errv = Vec::Zero(n);
    for (int j = 1; j < s; ++j) {
      Vec Y = u + S(h) * rF.values[j - 1] + S(h) * acc[j];
      if (rd) Y += S(h * h) * rd->values[j - 1];
      const Vec D = rem(t + tab.c[j] * h, Y);
      std::vector<PhiCombo> combos;
      for (int i = j + 1; i < s; ++i) combos.push_back(tab.a[i][j]);
      combos.push_back(tab.b[j]);
      if (emb) {
        PhiCombo diff = tab.b[j];
        for (const auto& term : emb->b[j].terms()) diff += PhiCombo::phi(term.k, -term.alpha, term.scale);
        combos.push_back(diff);
      }
      const std::string label = rosenbrock ? "D" + std::to_string(j + 1) : "Y" + std::to_string(j + 1) + "plusA";
      auto r = apply(label, D, h, combos, tol / ah, allow);
      if (r.reduced) return reduced(r.h_out);
      for (int i = j + 1; i < s; ++i) acc[i] += r.values[i - j - 1];
      fin += r.values[s - j - 1];
      if (emb) errv += r.values.back();
    }
    out.u = u + S(h) * rF.values.back() + S(h) * fin;
    if (rd) out.u += S(h * h) * rd->values.back();
    if (emb) {
      out.err = S(h) * errv;
      out.has_err = true;
    }
    out.h_out = ah;
    return out;
  }

  static StepOut reduced(double h_out) {
    StepOut o;
    o.reduced = true;
    o.h_out = h_out;
    return o;
  }

  const Tableau& scheme_checked(const std::string& name, Family fam) const {
    const Tableau& tab = registry_get(name);
    if (tab.family != fam)
      throw ConfigError("scheme '" + name + "' belongs to family " + std::string(to_string(tab.family)) + ", expected " +
                        std::string(to_string(fam)));
    if (!tab.enabled) throw ConfigError("scheme '" + name + "' is disabled: " + tab.disabled_reason);
    return tab;
  }

  /// Number of constant steps covering [t0, T].
  long constant_steps() const {
    if (!(o_.h > 0)) throw ConfigError(to_string(o_.integrator) + " needs a positive constant step size h");
    const double len = std::abs(T_ - t0_);
    return std::max(1L, std::lround(len / o_.h));
  }

  // -- exprk -----------------------------------------------------------------

  void exprk_steps(const Tableau& tab, long nsteps, double h, double& t, Vec& u, long first, long total) {
    const Operator<S>& A = *p_.linear_part;
    for (long n = 0; n < nsteps; ++n) {
      const Vec gn = g(t, u);
      const Vec Fn = A.apply(u) + gn;
      auto rem = [&](double tj, const Vec& Y) -> Vec { return g(tj, Y) - gn; };
      auto st = rk_step(tab, nullptr, t, u, Fn, nullptr, h, base_tol(u, false), false, rem, false);
      u = std::move(st.u);
      const long idx = first + n + 1;
      t = idx == total ? T_ : t0_ + static_cast<double>(idx) * h;
      check_finite(u, t);
      push(t, u);
      ++res_.steps_accepted;
    }
  }

  void run_exprk() {
    const Tableau& tab = scheme_checked(o_.scheme.empty() ? "krogstad" : o_.scheme, Family::exprk);
    res_.scheme = tab.name;
    const long n = constant_steps();
    const double h = (T_ - t0_) / static_cast<double>(n);
    ev_->init_step(*p_.linear_part, true);
    double t = t0_;
    Vec u = y0_;
    exprk_steps(tab, n, h, t, u, 0, n);
  }

  // -- exprb -----------------------------------------------------------------

  std::string exprb_name() const {
    if (!o_.scheme.empty()) return o_.scheme;
    if (o_.order < 2 || o_.order > 4) throw ConfigError("exprb order must be two, three or four");
    return "exprb" + std::to_string(o_.order);
  }

  /// Remainder D_j = F(t_j, Y_j) − F_n − J(Y_j − u_n) − d_n (t_j − t_n).
  Remainder rosenbrock_remainder(const Operator<S>& J, const Vec& Fn, const Vec& d, double t, const Vec& u) {
    return [this, &J, &Fn, &d, t, &u](double tj, const Vec& Y) -> Vec {
      Vec D = F(tj, Y) - Fn - J.apply(Vec(Y - u));
      if (p_.nonautonomous) D -= S(tj - t) * d;
      return D;
    };
  }

  /// Constant exprb steps (used for exprb with constant_step and for the
  /// expms one-step startup).
  void exprb_constant_steps(const Tableau& tab, long nsteps, double h, double& t, Vec& u, long first, long total) {
    std::optional<Operator<S>> Jc;
    for (long n = 0; n < nsteps; ++n) {
      const Vec Fn = F(t, u);
      Operator<S> J;
      if (p_.jconstant && Jc) {
        J = *Jc;
      } else {
        J = jacobian(t, u);
        if (p_.jconstant) Jc = J;
      }
      const Vec d = evaluate_dt(p_, t, u, Fn);
      ev_->init_step(J, p_.jconstant);
      auto st = rk_step(tab, nullptr, t, u, Fn, p_.nonautonomous ? &d : nullptr, h, base_tol(u, false), false,
                        rosenbrock_remainder(J, Fn, d, t, u), true);
      u = std::move(st.u);
      const long idx = first + n + 1;
      t = idx == total ? T_ : t0_ + static_cast<double>(idx) * h;
      check_finite(u, t);
      push(t, u);
      ++res_.steps_accepted;
    }
  }

  void run_exprb() {
    const Tableau& tab = scheme_checked(exprb_name(), Family::exprb);
    res_.scheme = tab.name;
    if (o_.constant_step) {
      const long n = constant_steps();
      double t = t0_;
      Vec u = y0_;
      exprb_constant_steps(tab, n, (T_ - t0_) / static_cast<double>(n), t, u, 0, n);
      return;
    }

    const bool phi2_estimate = tab.name == "exprb2" || (!tab.has_embedded() && tab.s == 1);
    if (!tab.has_embedded() && !phi2_estimate)
      throw ConfigError("scheme '" + tab.name + "' has no error estimate; use constant steps");
    const EmbeddedWeights* emb = nullptr;
    int p = 2;
    if (!phi2_estimate) {
      if (o_.error_estimate < 0 || o_.error_estimate >= static_cast<int>(tab.embedded.size()))
        throw ConfigError("scheme '" + tab.name + "' has no embedded weight set " + std::to_string(o_.error_estimate));
      emb = &tab.embedded[o_.error_estimate];
      p = std::max(1, emb->order);
    }

    ControllerOptions copt;
    copt.min_step = o_.min_step;
    copt.max_step = o_.max_step;
    ControllerState state;
    const double dir = T_ >= t0_ ? 1.0 : -1.0;
    double h = initial_step(t0_, T_, o_.initial_step, copt);

    double t = t0_;
    Vec u = y0_;
    Vec Fn = F(t, u);
    std::optional<Operator<S>> J;
    Vec d;
    bool relinearize = true;
    long attempts = 0;

    while (dir * (T_ - t) > 0) {
      if (++attempts > o_.max_steps) throw IntegrationError("maximum number of steps exceeded at t = " + std::to_string(t));
      if (relinearize) {
        if (!(p_.jconstant && J)) J = jacobian(t, u);
        d = evaluate_dt(p_, t, u, Fn);
        ev_->init_step(*J, p_.jconstant);
        relinearize = false;
      }
      const double rest = std::abs(T_ - t);
      bool last = false;
      double hh = h;
      if (hh >= rest * (1 - 1e-12)) {
        hh = rest;
        last = true;
      }
      const double hs = dir * hh;
      const double tol = base_tol(u, true);
      auto rem = rosenbrock_remainder(*J, Fn, d, t, u);
      const Vec* dp = p_.nonautonomous ? &d : nullptr;
      auto st = rk_step(tab, emb, t, u, Fn, dp, hs, tol, true, rem, true);

      std::optional<Vec> Fnext;
      if (!st.reduced && phi2_estimate) {
        Fnext = F(t + hs, st.u);
        Vec D = *Fnext - Fn - J->apply(Vec(st.u - u));
        if (p_.nonautonomous) D -= S(hs) * d;
        auto r = apply("D2", D, hs, {PhiCombo::phi(2)}, tol / hh, true);
        if (r.reduced) {
          st = reduced(r.h_out);
        } else {
          st.err = S(hs) * r.values[0];
          st.has_err = true;
        }
      }

      if (st.reduced) {
        // forced by the matrix functions; counts toward the rejection limit
        ++state.consecutive_rejections;
        if (state.consecutive_rejections >= copt.max_consecutive_rejections)
          throw IntegrationError("step size control: too many consecutive step reductions at t = " + std::to_string(t));
        h = st.h_out;
        if (h < o_.min_step) throw IntegrationError("step size fell below MinStep after a Krylov reduction");
        continue;
      }

      const double err = scaled_error<S>(st.err, st.u, u, o_.atol, o_.rtol, o_.norm);
      if (err <= 1.0) {
        t = last ? T_ : t + hs;
        u = std::move(st.u);
        Fn = Fnext ? std::move(*Fnext) : F(t, u);
        push(t, u);
        ++res_.steps_accepted;
        relinearize = true;
        h = next_step(state, err, hh, p, true, copt);
      } else {
        ++res_.steps_rejected;
        h = next_step(state, err, hh, p, false, copt);
      }
    }
  }

  // -- multistep ---------------------------------------------------------------

  /// Polynomials P_ι(σ), ι = 1..k−1, interpolating G on the startup window.
  /// linearized: additionally P_ι'(0) = 0.
  static std::vector<RationalPoly> startup_polys(int k, bool linearized) {
    std::vector<RationalPoly> out;
    RationalPoly omega{Rational(1)};
    for (int i = 0; i < k; ++i) omega = poly_mul(omega, RationalPoly{Rational(-i), Rational(1)});
    Rational domega0 = omega.size() > 1 ? omega[1] : Rational(0);
    for (int iota = 1; iota < k; ++iota) {
      // binom(σ, ι)
      RationalPoly b{Rational(1)};
      Rational fact = 1;
      for (int i = 0; i < iota; ++i) {
        b = poly_mul(b, RationalPoly{Rational(-i), Rational(1)});
        fact *= (i + 1);
      }
      for (auto& c : b) c /= fact;
      if (linearized) {
        const Rational slope = b.size() > 1 ? b[1] : Rational(0);
        b.resize(std::max(b.size(), omega.size()), Rational(0));
        for (std::size_t q = 0; q < omega.size(); ++q) b[q] -= slope * omega[q] / domega0;
      }
      out.push_back(std::move(b));
    }
    return out;
  }

  /// ∫₀^m e^{(m−σ)hM} P(σ) dσ = Σ_q a_q m^{q+1} q! φ_{q+1}(m h M).
  static PhiCombo startup_weight(const RationalPoly& P, int m) {
    std::vector<PhiTerm> terms;
    Rational mp = m, fact = 1;
    for (std::size_t q = 0; q < P.size(); ++q) {
      if (q > 0) fact *= static_cast<long>(q);
      if (P[q] != 0) terms.push_back({static_cast<int>(q) + 1, Rational(P[q] * mp * fact).convert_to<double>(),
                                      static_cast<double>(m)});
      mp *= m;
    }
    return PhiCombo(std::move(terms));
  }

  /// Fixed-point startup on the window t_0..t_{k−1}. Gm(t, u) is the
  /// nonlinearity whose interpolant is propagated; u[0] is fixed.
  long fixed_point_startup(int k, double h, bool linearized, const Vec& F0, const Vec* d0,
                           const std::function<Vec(double, const Vec&)>& Gm, std::vector<Vec>& u) {
    u.assign(k, y0_);
    if (k < 2) return 0;
    const double tol0 = base_tol(y0_, false);
    const double ah = std::abs(h);

    std::vector<PhiCombo> fc;
    for (int m = 1; m < k; ++m) fc.push_back(PhiCombo::phi(1, m, m));
    const auto rF = apply("F1", F0, h, fc, tol0 / ah, false);
    std::optional<Applied> rd;
    if (d0) {
      std::vector<PhiCombo> dc;
      for (int m = 1; m < k; ++m) dc.push_back(PhiCombo::phi(2, double(m) * m, m));
      rd = apply("v", *d0, h, dc, tol0 / (h * h), false);
    }
    const auto polys = startup_polys(k, linearized);
    std::vector<std::vector<PhiCombo>> w(k - 1);  // w[ι−1][m−1]
    for (int iota = 1; iota < k; ++iota)
      for (int m = 1; m < k; ++m) w[iota - 1].push_back(startup_weight(polys[iota - 1], m));

    std::vector<Vec> G(k);
    for (int m = 0; m < k; ++m) G[m] = Gm(t0_ + m * h, u[m]);

    for (int sweep = 1; sweep <= o_.startup_max_iter; ++sweep) {
      // forward differences Δ^ι G_0
      std::vector<Vec> tab = G;
      std::vector<Vec> delta;
      for (int iota = 1; iota < k; ++iota) {
        for (int m = 0; m + iota < k; ++m) tab[m] = tab[m + 1] - tab[m];
        delta.push_back(tab[0]);
      }
      std::vector<Vec> unew(k);
      unew[0] = u[0];
      for (int m = 1; m < k; ++m) {
        unew[m] = y0_ + S(h) * rF.values[m - 1];
        if (rd) unew[m] += S(h * h) * rd->values[m - 1];
      }
      for (int iota = 1; iota < k; ++iota) {
        auto r = apply("GDiffInit" + std::to_string(iota), delta[iota - 1], h, w[iota - 1], tol0 / ah, false);
        for (int m = 1; m < k; ++m) unew[m] += S(h) * r.values[m - 1];
      }
      double change = 0.0;
      std::vector<Vec> Gnew(k);
      Gnew[0] = G[0];
      for (int m = 1; m < k; ++m) {
        check_finite(unew[m], t0_ + m * h);
        Gnew[m] = Gm(t0_ + m * h, unew[m]);
        change = std::max(change, ah * abs_max(Vec(Gnew[m] - G[m])) / std::max(1.0, abs_max(unew[m])));
      }
      u = std::move(unew);
      G = std::move(Gnew);
      if (change <= o_.startup_tol) {
        res_.fixedpoint_iterations += sweep;
        return sweep;
      }
    }
    std::ostringstream os;
    os << "fixed-point startup did not converge in " << o_.startup_max_iter << " sweeps (k = " << k << ", h = " << h
       << ")";
    throw IntegrationError(os.str());
  }

  /// Scheme for the one-step startup of a k-step method.
  std::string onestep_scheme(int k, Family fam) const {
    if (!o_.startup_scheme.empty()) {
      const Tableau& tab = scheme_checked(o_.startup_scheme, fam);
      if (tab.order < k)
        throw ConfigError("startup scheme '" + tab.name + "' has order " + std::to_string(tab.order) + " < k = " +
                          std::to_string(k));
      return tab.name;
    }
    if (fam == Family::exprk) {
      switch (k) {
        case 1:
        case 2: return "strehmelweiner1";
        case 3: return "hochost3a";
        case 4: return "krogstad";
        default: break;
      }
    } else {
      switch (k) {
        case 1:
        case 2: return "exprb3";
        case 3:
        case 4: return "exprb4";
        default: break;
      }
    }
    throw ConfigError("no registered " + std::string(to_string(fam)) + " scheme of order >= " + std::to_string(k) +
                      " for the one-step startup");
  }

  void check_multistep_length(long n, int k) const {
    if (n < k - 1)
      throw ConfigError("the " + std::to_string(k) + "-step method needs at least " + std::to_string(k - 1) +
                        " steps; got " + std::to_string(n));
  }

  void run_expmssemi() {
    const int k = o_.kstep;
    const long N = constant_steps();
    check_multistep_length(N, k);
    const double h = (T_ - t0_) / static_cast<double>(N);
    const Operator<S>& A = *p_.linear_part;
    ev_->init_step(A, true);
    res_.scheme = "adams" + std::to_string(k);

    std::deque<Vec> Gw;  // G_{n−k+1} … G_n
    double t = t0_;
    Vec u = y0_;
    if (k >= 2) {
      if (o_.startup == Startup::fixedpoint) {
        std::vector<Vec> us;
        fixed_point_startup(k, h, false, Vec(A.apply(y0_) + g(t0_, y0_)), nullptr,
                            [this](double tm, const Vec& um) { return g(tm, um); }, us);
        for (int m = 1; m < k; ++m) {
          check_finite(us[m], t0_ + m * h);
          push(t0_ + m * h, us[m]);
          ++res_.steps_accepted;
        }
        u = us.back();
        t = t0_ + (k - 1) * h;
      } else {
        const Tableau& tab = scheme_checked(onestep_scheme(k, Family::exprk), Family::exprk);
        exprk_steps(tab, k - 1, h, t, u, 0, N);
      }
    }
    for (std::size_t i = res_.y.size() - std::min<std::size_t>(res_.y.size(), k); i < res_.y.size(); ++i)
      Gw.push_back(g(res_.t[i], res_.y[i]));

    std::vector<PhiCombo> gam(k);
    for (int j = 1; j < k; ++j) gam[j] = gamma_coeffs(j);

    for (long n = k - 1; n < N; ++n) {
      const Vec& Gn = Gw.back();
      const double tol = base_tol(u, false);
      auto r1 = apply("F1", Vec(A.apply(u) + Gn), h, {PhiCombo::phi(1)}, tol / std::abs(h), false);
      Vec un = u + S(h) * r1.values[0];
      // backward differences ∇^j G_n
      std::vector<Vec> tab(Gw.begin(), Gw.end());
      for (int j = 1; j < k; ++j) {
        for (int i = k - 1; i >= j; --i) tab[i] = tab[i] - tab[i - 1];
        auto r = apply("GDiff" + std::to_string(j), tab[k - 1], h, {gam[j]}, tol / std::abs(h), false);
        un += S(h) * r.values[0];
      }
      t = n + 1 == N ? T_ : t0_ + static_cast<double>(n + 1) * h;
      check_finite(un, t);
      u = std::move(un);
      push(t, u);
      ++res_.steps_accepted;
      Gw.push_back(g(t, u));
      if (static_cast<int>(Gw.size()) > k) Gw.pop_front();
    }
  }

  void run_expms() {
    const int k = o_.kstep;
    const long N = constant_steps();
    check_multistep_length(N, k);
    const double h = (T_ - t0_) / static_cast<double>(N);
    res_.scheme = o_.tokman ? "tokman" : "expms" + std::to_string(k);

    double t = t0_;
    Vec u = y0_;
    std::optional<Operator<S>> Jc;
    auto lin = [&](double tn, const Vec& un) {
      if (p_.jconstant && Jc) return *Jc;
      Operator<S> J = jacobian(tn, un);
      if (p_.jconstant) Jc = J;
      return J;
    };

    if (k >= 2) {
      if (o_.startup == Startup::fixedpoint) {
        const Vec F0 = F(t0_, y0_);
        const Operator<S> J0 = lin(t0_, y0_);
        const Vec d0 = evaluate_dt(p_, t0_, y0_, F0);
        ev_->init_step(J0, p_.jconstant);
        auto Ghat = [&](double tm, const Vec& um) -> Vec {
          Vec G = F(tm, um) - F0 - J0.apply(Vec(um - y0_));
          if (p_.nonautonomous) G -= S(tm - t0_) * d0;
          return G;
        };
        std::vector<Vec> us;
        fixed_point_startup(k, h, true, F0, p_.nonautonomous ? &d0 : nullptr, Ghat, us);
        for (int m = 1; m < k; ++m) {
          push(t0_ + m * h, us[m]);
          ++res_.steps_accepted;
        }
        u = us.back();
        t = t0_ + (k - 1) * h;
      } else {
        const Tableau& tab = scheme_checked(onestep_scheme(k, Family::exprb), Family::exprb);
        exprb_constant_steps(tab, k - 1, h, t, u, 0, N);
      }
    }

    // window of the last k nodes
    std::deque<double> tw;
    std::deque<Vec> uw, Fw;
    for (std::size_t i = res_.y.size() - std::min<std::size_t>(res_.y.size(), k); i < res_.y.size(); ++i) {
      tw.push_back(res_.t[i]);
      uw.push_back(res_.y[i]);
      Fw.push_back(F(res_.t[i], res_.y[i]));
    }

    std::vector<PhiCombo> gh(k);
    for (int j = 1; j < k; ++j) gh[j] = o_.tokman ? PhiCombo::phi(2, -2.0 / 3.0) : gamma_hat_coeffs(j + 1);

    for (long n = k - 1; n < N; ++n) {
      const Vec& Fn = Fw.back();
      const Operator<S> J = lin(t, u);
      const Vec d = evaluate_dt(p_, t, u, Fn);
      ev_->init_step(J, p_.jconstant);
      const double tol = base_tol(u, false);

      auto r1 = apply("F1", Fn, h, {PhiCombo::phi(1)}, tol / std::abs(h), false);
      Vec un = u + S(h) * r1.values[0];
      if (p_.nonautonomous) {
        auto rv = apply("v", d, h, {PhiCombo::phi(2)}, tol / (h * h), false);
        un += S(h * h) * rv.values[0];
      }
      if (k >= 2) {
        std::vector<Vec> tab(k);
        for (int m = 0; m < k; ++m) {
          if (m == k - 1) {
            tab[m] = Vec::Zero(u.size());
            continue;
          }
          tab[m] = Fw[m] - Fn - J.apply(Vec(uw[m] - u));
          if (p_.nonautonomous) tab[m] -= S(tw[m] - t) * d;
        }
        Vec W = Vec::Zero(u.size());
        for (int j = 1; j < k; ++j) {
          for (int i = k - 1; i >= j; --i) tab[i] = tab[i] - tab[i - 1];
          W += tab[k - 1] / S(j);
          auto r = apply("GDiff" + std::to_string(j), W, h, {gh[j]}, tol / std::abs(h), false);
          un += S(h) * r.values[0];
        }
      }
      t = n + 1 == N ? T_ : t0_ + static_cast<double>(n + 1) * h;
      check_finite(un, t);
      u = std::move(un);
      push(t, u);
      ++res_.steps_accepted;
      tw.push_back(t);
      uw.push_back(u);
      Fw.push_back(F(t, u));
      if (static_cast<int>(tw.size()) > k) {
        tw.pop_front();
        uw.pop_front();
        Fw.pop_front();
      }
    }
  }

  // -- output ----------------------------------------------------------------

  void interpolate_output() {
    if (o_.output_times.empty()) return;
    const auto& ts = res_.t;
    const double dir = T_ >= t0_ ? 1.0 : -1.0;
    for (double to : o_.output_times) {
      if (dir * (to - t0_) < 0 || dir * (to - T_) > 0)
        throw ArgumentError("output time " + std::to_string(to) + " outside the integration interval");
      std::size_t i = 0;
      while (i + 1 < ts.size() && dir * (ts[i + 1] - to) < 0) ++i;
      if (i + 1 >= ts.size()) {
        res_.output_t.push_back(to);
        res_.output_y.push_back(res_.y.back());
        continue;
      }
      const double th = (to - ts[i]) / (ts[i + 1] - ts[i]);
      res_.output_t.push_back(to);
      res_.output_y.push_back(S(1 - th) * res_.y[i] + S(th) * res_.y[i + 1]);
    }
  }

  const Problem<S>& p_;
  const SolveOptions<S>& o_;
  double t0_, T_;
  Vec y0_;
  std::unique_ptr<MatFunEvaluator<S>> ev_;
  SolveResult<S> res_;
};

}  // namespace detail

/// Checks the problem/options pair for the chosen integrator family.
template <Scalar S>
void validate_setup(const Problem<S>& p, double t0, double T, const Vector<S>& y0, const SolveOptions<S>& o) {
  if (!std::isfinite(t0) || !std::isfinite(T)) throw ArgumentError("time span must be finite");
  if (T == t0) throw ArgumentError("empty time span: T equals t0");
  if (!p.rhs) throw ConfigError("problem has no right-hand side");
  if (p.dim != 0 && y0.size() != p.dim)
    throw ArgumentError("y0 has length " + std::to_string(y0.size()) + ", problem dimension is " + std::to_string(p.dim));
  if (y0.size() == 0) throw ArgumentError("y0 is empty");
  if (!y0.allFinite()) throw ArgumentError("y0 is not finite");
  if (!(o.rtol > 0)) throw ConfigError("RelTol must be positive");
  if (o.atol.values.size() != 1 && o.atol.values.size() != y0.size())
    throw ConfigError("AbsTol must be a scalar or have one entry per component");
  if (!(o.atol.values.minCoeff() > 0)) throw ConfigError("AbsTol must be positive");
  o.norm.validate(y0.size());
  if (o.backend == Backend::arnoldi && o.krylov_max_dim < 1) throw ConfigError("krylov_max_dim must be positive");
  if (o.min_step < 0 || !(o.max_step > 0) || o.min_step > o.max_step) throw ConfigError("invalid step size bounds");

  const bool semi_family = o.integrator == IntegratorKind::exprk || o.integrator == IntegratorKind::expmssemi;
  if (semi_family || p.semilinear) {
    if (!p.linear_part || !p.gfun) {
      if (semi_family)
        throw ConfigError(to_string(o.integrator) + " needs a semilinear problem (linear part and gfun)");
      throw ConfigError("problem flagged semilinear without linear part and gfun");
    }
    if (p.linear_part->dim() != y0.size()) throw ConfigError("linear part has the wrong dimension");
    if (o.check_problem) check_semilinear_consistency(p, t0, T, y0);
  }

  const bool constant = o.integrator != IntegratorKind::exprb || o.constant_step;
  if (constant && !(o.h > 0)) throw ConfigError(to_string(o.integrator) + " needs a positive constant step size h");

  switch (o.integrator) {
    case IntegratorKind::exprb:
      if (o.scheme.empty() && (o.order < 2 || o.order > 4)) throw ConfigError("exprb order must be two, three or four");
      break;
    case IntegratorKind::exprk: break;
    case IntegratorKind::expmssemi:
      if (o.kstep < 1 || o.kstep > 6) throw ConfigError("expmssemi needs 1 <= k <= 6");
      if (o.tokman) throw ConfigError("the Tokman variant belongs to expms");
      break;
    case IntegratorKind::expms: {
      const int kmax = o.startup == Startup::fixedpoint ? 5 : 4;
      if (o.kstep < 1 || o.kstep > kmax)
        throw ConfigError("expms with " + to_string(o.startup) + " startup needs 1 <= k <= " + std::to_string(kmax));
      if (o.tokman && o.kstep != 2) throw ConfigError("the Tokman variant is a two-step method (k = 2)");
      break;
    }
  }
  if (o.startup_max_iter < 1) throw ConfigError("startup_max_iter must be positive");
  if (!(o.startup_tol >= 0)) throw ConfigError("startup_tol must be non-negative");
}

/// Integrates problem over tspan = {t0, T} from y0.
template <Scalar S>
SolveResult<S> expode(const Problem<S>& problem, std::pair<double, double> tspan, const Vector<S>& y0,
                      const SolveOptions<S>& options) {
  validate_setup(problem, tspan.first, tspan.second, y0, options);
  detail::Driver<S> drv(problem, options, tspan.first, tspan.second, y0);
  return drv.run();
}

}  // namespace expflow
