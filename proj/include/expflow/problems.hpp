#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "core.hpp"
#include "integrate.hpp"
#include "linop.hpp"

namespace expflow {

using ParamMap = std::map<std::string, double>;

/// A built problem with its default time span, initial value and options.
struct ProblemInstance {
  Problem<double> problem;
  std::pair<double, double> tspan{0.0, 1.0};
  Vector<double> y0;
  SolveOptions<double> options;
  ParamMap params;
};

struct ProblemSpec {
  std::string name;
  std::string description;
  ParamMap defaults;
  std::function<ProblemInstance(const ParamMap&)> build;
};

// ---------------------------------------------------------------------------
// Finite-difference Laplacians

/// 3-point Dirichlet Laplacian on N inner points of (0,1), Δx = 1/(N+1).
inline SparseMatrix<double> laplacian_dirichlet_1d(Index N) {
  const double dx = 1.0 / static_cast<double>(N + 1);
  const double s = 1.0 / (dx * dx);
  std::vector<Eigen::Triplet<double>> trip;
  for (Index i = 0; i < N; ++i) {
    trip.emplace_back(i, i, -2.0 * s);
    if (i > 0) trip.emplace_back(i, i - 1, s);
    if (i + 1 < N) trip.emplace_back(i, i + 1, s);
  }
  SparseMatrix<double> L(N, N);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

/// 3-point Neumann Laplacian on N cells of (0,1), Δx = 1/N, mirrored ghosts.
inline SparseMatrix<double> laplacian_neumann_1d(Index N) {
  const double s = static_cast<double>(N) * static_cast<double>(N);
  std::vector<Eigen::Triplet<double>> trip;
  for (Index i = 0; i < N; ++i) {
    double diag = 0.0;
    if (i > 0) {
      trip.emplace_back(i, i - 1, s);
      diag -= s;
    }
    if (i + 1 < N) {
      trip.emplace_back(i, i + 1, s);
      diag -= s;
    }
    trip.emplace_back(i, i, diag);
  }
  SparseMatrix<double> L(N, N);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

/// L ⊗ I + I ⊗ L, index i + N·j.
inline SparseMatrix<double> kron_sum(const SparseMatrix<double>& L) {
  const Index N = L.rows();
  std::vector<Eigen::Triplet<double>> trip;
  for (Index r = 0; r < N; ++r)
    for (SparseMatrix<double>::InnerIterator it(L, r); it; ++it)
      for (Index k = 0; k < N; ++k) {
        trip.emplace_back(it.row() + N * k, it.col() + N * k, it.value());
        trip.emplace_back(k + N * it.row(), k + N * it.col(), it.value());
      }
  SparseMatrix<double> M(N * N, N * N);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

namespace detail {

inline double param(const ParamMap& p, const std::string& key) { return p.at(key); }

inline Index int_param(const ParamMap& p, const std::string& key, Index min) {
  const double v = p.at(key);
  if (v != std::floor(v) || v < static_cast<double>(min))
    throw ConfigError("parameter " + key + " must be an integer >= " + std::to_string(min));
  return static_cast<Index>(v);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// heat1d

/// u_t = ε u_xx + γ sin(πx)(1+t), Dirichlet. The source and initial value
/// live in the first discrete eigenmode, so the semi-discrete solution is
/// a(t)·sin(πx) with a' = λ₁a + γ(1+t), a(0) = 1.
inline ProblemInstance heat1d(Index N = 100, double epsilon = 0.1, double gamma = 0.1) {
  if (N < 2) throw ConfigError("heat1d needs N >= 2");
  if (!(epsilon > 0)) throw ConfigError("heat1d needs epsilon > 0");
  const double dx = 1.0 / static_cast<double>(N + 1);
  Vector<double> sx(N);
  for (Index i = 0; i < N; ++i) sx(i) = std::sin(std::numbers::pi * static_cast<double>(i + 1) * dx);
  SparseMatrix<double> L = epsilon * laplacian_dirichlet_1d(N);
  auto A = Operator<double>::sparse(L, Structure::symmetric);
  const double s = std::sin(std::numbers::pi * dx / 2);
  const double lam = -4.0 * epsilon / (dx * dx) * s * s;

  ProblemInstance pi;
  auto& p = pi.problem;
  p.name = "heat1d";
  p.dim = N;
  p.linear_part = A;
  p.gfun = [sx, gamma](double t, const Vector<double>&) -> Vector<double> { return gamma * (1 + t) * sx; };
  p.rhs = [A, sx, gamma](double t, const Vector<double>& u) -> Vector<double> {
    return A.apply(u) + gamma * (1 + t) * sx;
  };
  p.jacobian = [A](double, const Vector<double>&) { return A; };
  p.df_dt = [sx, gamma](double, const Vector<double>&) -> Vector<double> { return gamma * sx; };
  p.dg_dy = [N](double, const Vector<double>&) {
    return Operator<double>::sparse(SparseMatrix<double>(N, N), Structure::diagonal);
  };
  p.exact = [sx, lam, gamma](double t) -> Vector<double> {
    const double q = -gamma / lam;
    const double c = (q - gamma) / lam;
    return ((1 - c) * std::exp(lam * t) + c + q * t) * sx;
  };
  p.nonautonomous = gamma != 0.0;
  p.semilinear = true;
  p.jconstant = true;
  p.structure = Structure::symmetric;
  pi.tspan = {0.0, 1.0};
  pi.y0 = sx;
  pi.options.integrator = IntegratorKind::exprb;
  pi.params = {{"N", static_cast<double>(N)}, {"epsilon", epsilon}, {"gamma", gamma}};
  return pi;
}

/// Smallest eigenvalue magnitude mode of the heat1d operator.
inline double heat1d_lambda1(Index N, double epsilon) {
  const double dx = 1.0 / static_cast<double>(N + 1);
  const double s = std::sin(std::numbers::pi * dx / 2);
  return -4.0 * epsilon / (dx * dx) * s * s;
}

// ---------------------------------------------------------------------------
// van der Pol

inline ProblemInstance vdp(double mu = 1000.0) {
  if (!(mu >= 0)) throw ConfigError("vdp needs mu >= 0");
  ProblemInstance pi;
  auto& p = pi.problem;
  p.name = "vdp";
  p.dim = 2;
  p.rhs = [mu](double, const Vector<double>& u) -> Vector<double> {
    Vector<double> f(2);
    f << u(1), mu * (1 - u(0) * u(0)) * u(1) - u(0);
    return f;
  };
  p.jacobian = [mu](double, const Vector<double>& u) {
    Matrix<double> J(2, 2);
    J << 0, 1, -1 - 2 * mu * u(0) * u(1), mu * (1 - u(0) * u(0));
    return Operator<double>::dense(J);
  };
  pi.tspan = {0.0, 3000.0};
  pi.y0 = Vector<double>(2);
  pi.y0 << 2.0, -0.6;
  pi.options.integrator = IntegratorKind::exprb;
  pi.options.rtol = 1e-6;
  pi.options.atol = 1e-8;
  pi.params = {{"mu", mu}};
  return pi;
}

// ---------------------------------------------------------------------------
// semilinear test problem u' = Δu + 1/(1+u²) + Φ

/// Exact solution x(1−x)[y(1−y)]eᵗ; the 3-point stencil is exact on it, so
/// the semi-discrete problem has the sampled exact solution.
inline ProblemInstance semilinear(int dims, Index N) {
  if (dims != 1 && dims != 2) throw ConfigError("semilinear problem is one- or two-dimensional");
  if (N < 2) throw ConfigError("semilinear problem needs N >= 2");
  const double dx = 1.0 / static_cast<double>(N + 1);
  const Index d = dims == 1 ? N : N * N;
  SparseMatrix<double> L = dims == 1 ? laplacian_dirichlet_1d(N) : kron_sum(laplacian_dirichlet_1d(N));
  auto A = Operator<double>::sparse(L, Structure::symmetric);

  // profile w = x(1−x)[y(1−y)] and lap = Δw, analytically
  Vector<double> w(d), lap(d);
  for (Index k = 0; k < d; ++k) {
    const Index i = k % N, j = k / N;
    const double x = static_cast<double>(i + 1) * dx;
    const double px = x * (1 - x);
    if (dims == 1) {
      w(k) = px;
      lap(k) = -2.0;
    } else {
      const double y = static_cast<double>(j + 1) * dx;
      const double py = y * (1 - y);
      w(k) = px * py;
      lap(k) = -2.0 * (px + py);
    }
  }
  // Φ = u_t − Δu − 1/(1+u²) on the exact solution
  auto phi_src = [w, lap](double t) -> Vector<double> {
    const double e = std::exp(t);
    Vector<double> ue = e * w;
    return (e * (w - lap)).array() - 1.0 / (1.0 + ue.array().square());
  };
  auto dphi_dt = [w, lap](double t) -> Vector<double> {
    const double e = std::exp(t);
    Vector<double> ue = e * w;
    const auto den = (1.0 + ue.array().square());
    return (e * (w - lap)).array() + 2.0 * ue.array().square() / den.square();
  };

  ProblemInstance pi;
  auto& p = pi.problem;
  p.name = dims == 1 ? "semilinear1d" : "semilinear2d";
  p.dim = d;
  p.linear_part = A;
  p.gfun = [phi_src](double t, const Vector<double>& u) -> Vector<double> {
    return (1.0 / (1.0 + u.array().square())).matrix() + phi_src(t);
  };
  p.rhs = [A, phi_src](double t, const Vector<double>& u) -> Vector<double> {
    return A.apply(u) + (1.0 / (1.0 + u.array().square())).matrix() + phi_src(t);
  };
  auto dg = [](const Vector<double>& u) -> Vector<double> {
    return (-2.0 * u.array() / (1.0 + u.array().square()).square()).matrix();
  };
  p.dg_dy = [dg](double, const Vector<double>& u) { return Operator<double>::diagonal(dg(u)); };
  p.jacobian = [L, dg](double, const Vector<double>& u) {
    SparseMatrix<double> J = L;
    const Vector<double> dd = dg(u);
    for (Index i = 0; i < J.rows(); ++i) J.coeffRef(i, i) += dd(i);
    return Operator<double>::sparse(std::move(J), Structure::symmetric);
  };
  p.df_dt = [dphi_dt](double t, const Vector<double>&) { return dphi_dt(t); };
  p.exact = [w](double t) -> Vector<double> { return std::exp(t) * w; };
  p.nonautonomous = true;
  p.semilinear = true;
  p.structure = Structure::symmetric;
  pi.tspan = {0.0, 1.0};
  pi.y0 = w;
  pi.options.integrator = IntegratorKind::exprb;
  pi.params = {{"N", static_cast<double>(N)}};
  return pi;
}

// ---------------------------------------------------------------------------
// Brusselator

/// MATLAB-style peaks surface on [−3,3]².
inline double peaks(double x, double y) {
  return 3 * (1 - x) * (1 - x) * std::exp(-x * x - (y + 1) * (y + 1)) -
         10 * (x / 5 - x * x * x - std::pow(y, 5)) * std::exp(-x * x - y * y) -
         std::exp(-(x + 1) * (x + 1) - y * y) / 3;
}

/// u_t = αΔu + γ − (β+1)u + u²v, v_t = αΔv + βu − u²v, Neumann, on N×N cells;
/// state [u; v] of length 2N².
inline ProblemInstance brusselator(Index N = 32, double alpha = 1e-2, double beta = 3.4, double gamma = 1.0) {
  if (N < 4) throw ConfigError("brusselator needs N >= 4");
  const Index m = N * N;
  const SparseMatrix<double> L = kron_sum(laplacian_neumann_1d(N));
  std::vector<Eigen::Triplet<double>> trip;
  for (Index r = 0; r < m; ++r)
    for (SparseMatrix<double>::InnerIterator it(L, r); it; ++it) {
      trip.emplace_back(it.row(), it.col(), alpha * it.value());
      trip.emplace_back(m + it.row(), m + it.col(), alpha * it.value());
    }
  for (Index i = 0; i < m; ++i) {
    trip.emplace_back(i, i, -(beta + 1));
    trip.emplace_back(m + i, i, beta);
  }
  SparseMatrix<double> Am(2 * m, 2 * m);
  Am.setFromTriplets(trip.begin(), trip.end());
  auto A = Operator<double>::sparse(Am);

  auto g = [m, gamma](double, const Vector<double>& y) -> Vector<double> {
    Vector<double> out(2 * m);
    for (Index i = 0; i < m; ++i) {
      const double r = y(i) * y(i) * y(m + i);
      out(i) = gamma + r;
      out(m + i) = -r;
    }
    return out;
  };
  auto dg = [m](const Vector<double>& y) {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(4 * m);
    for (Index i = 0; i < m; ++i) {
      const double u = y(i), v = y(m + i);
      t.emplace_back(i, i, 2 * u * v);
      t.emplace_back(i, m + i, u * u);
      t.emplace_back(m + i, i, -2 * u * v);
      t.emplace_back(m + i, m + i, -u * u);
    }
    SparseMatrix<double> D(2 * m, 2 * m);
    D.setFromTriplets(t.begin(), t.end());
    return D;
  };

  ProblemInstance pi;
  auto& p = pi.problem;
  p.name = "brusselator";
  p.dim = 2 * m;
  p.linear_part = A;
  p.gfun = g;
  p.rhs = [A, g](double t, const Vector<double>& y) -> Vector<double> { return A.apply(y) + g(t, y); };
  p.dg_dy = [dg](double, const Vector<double>& y) { return Operator<double>::sparse(dg(y)); };
  p.jacobian = [Am, dg](double, const Vector<double>& y) {
    return Operator<double>::sparse(SparseMatrix<double>(Am + dg(y)));
  };
  p.semilinear = true;
  pi.y0 = Vector<double>::Zero(2 * m);
  for (Index k = 0; k < m; ++k) {
    const double x = (static_cast<double>(k % N) + 0.5) / static_cast<double>(N);
    const double y = (static_cast<double>(k / N) + 0.5) / static_cast<double>(N);
    pi.y0(k) = peaks(-3 + 6 * x, -3 + 6 * y);
  }
  pi.tspan = {0.0, 1.0};
  pi.options.integrator = IntegratorKind::exprb;
  pi.options.backend = Backend::arnoldi;
  pi.options.krylov_max_dim = 36;
  pi.params = {{"N", static_cast<double>(N)}, {"alpha", alpha}, {"beta", beta}, {"gamma", gamma}};
  return pi;
}

// ---------------------------------------------------------------------------
// Registry

inline const std::vector<ProblemSpec>& problem_specs() {
  using detail::int_param;
  using detail::param;
  static const std::vector<ProblemSpec> specs{
      {"brusselator", "2D Brusselator reaction-diffusion, Neumann, 2N^2 unknowns",
       {{"N", 32}, {"alpha", 1e-2}, {"beta", 3.4}, {"gamma", 1.0}},
       [](const ParamMap& p) {
         return brusselator(int_param(p, "N", 4), param(p, "alpha"), param(p, "beta"), param(p, "gamma"));
       }},
      {"heat1d", "1D heat equation with time-dependent source, Dirichlet",
       {{"N", 100}, {"epsilon", 0.1}, {"gamma", 0.1}},
       [](const ParamMap& p) { return heat1d(int_param(p, "N", 2), param(p, "epsilon"), param(p, "gamma")); }},
      {"semilinear1d", "u' = u_xx + 1/(1+u^2) + Phi with exact solution x(1-x)e^t",
       {{"N", 100}},
       [](const ParamMap& p) { return semilinear(1, int_param(p, "N", 2)); }},
      {"semilinear2d", "u' = Lap u + 1/(1+u^2) + Phi with exact solution x(1-x)y(1-y)e^t",
       {{"N", 50}},
       [](const ParamMap& p) { return semilinear(2, int_param(p, "N", 2)); }},
      {"vdp", "van der Pol oscillator", {{"mu", 1000.0}}, [](const ParamMap& p) { return vdp(param(p, "mu")); }},
  };
  return specs;
}

inline const ProblemSpec& problem_spec(const std::string& name) {
  for (const auto& s : problem_specs())
    if (s.name == name) return s;
  std::string known;
  for (const auto& s : problem_specs()) known += (known.empty() ? "" : ", ") + s.name;
  throw LookupError("unknown problem '" + name + "'; available: " + known);
}

/// Builds a registered problem; overrides must name known parameters.
inline ProblemInstance make_problem(const std::string& name, const ParamMap& overrides = {}) {
  const ProblemSpec& spec = problem_spec(name);
  ParamMap p = spec.defaults;
  for (const auto& [k, v] : overrides) {
    if (!p.count(k)) throw ConfigError("problem " + name + " has no parameter '" + k + "'");
    p[k] = v;
  }
  return spec.build(p);
}

}  // namespace expflow
