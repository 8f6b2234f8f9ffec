#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "expflow/problems.hpp"

using namespace expflow;
using Vec = Vector<double>;
using Mat = Matrix<double>;

TEST(Heat1d, EigenvaluesMatchFormula) {
  auto pi = heat1d(3, 1.0, 0.0);
  Mat A = pi.problem.linear_part->materialize();
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  const double l1 = es.eigenvalues().maxCoeff();
  // Δx = 1/4: λ1 = −(4/Δx²) sin²(π/8) = −32 + 16√2
  EXPECT_NEAR(l1, -64.0 * std::pow(std::sin(std::numbers::pi / 8), 2), 1e-12);
  EXPECT_NEAR(l1, -32.0 + 16.0 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(heat1d_lambda1(3, 1.0), l1, 1e-12);
  EXPECT_EQ(pi.problem.dim, 3);
  EXPECT_EQ(heat1d(57).problem.dim, 57);
}

TEST(Heat1d, EigenmodeDecay) {
  auto pi = heat1d(100, 0.1, 0.0);
  auto o = pi.options;
  o.rtol = 1e-8;
  o.atol = 1e-8;
  auto r = expode(pi.problem, pi.tspan, pi.y0, o);
  const double lam = heat1d_lambda1(100, 0.1);
  EXPECT_LE((r.y.back() - std::exp(lam * pi.tspan.second) * pi.y0).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Heat1d, SourceSolutionAgainstQuadrature) {
  // a(t) = e^{λt} + ∫₀ᵗ e^{λ(t−s)} γ(1+s) ds, trapezoid oracle on a fine grid
  auto pi = heat1d(20, 0.1, 0.1);
  const double lam = heat1d_lambda1(20, 0.1), T = 1.0;
  const int n = 200000;
  double integral = 0;
  for (int i = 0; i <= n; ++i) {
    const double s = T * i / n;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    integral += w * std::exp(lam * (T - s)) * 0.1 * (1 + s);
  }
  integral *= T / n;
  const double a = std::exp(lam * T) + integral;
  EXPECT_LE((pi.problem.exact(T) - a * pi.y0).cwiseAbs().maxCoeff(), 1e-9);
  auto o = pi.options;
  o.rtol = 1e-9;
  o.atol = 1e-10;
  auto r = expode(pi.problem, pi.tspan, pi.y0, o);
  EXPECT_LE((r.y.back() - pi.problem.exact(T)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Vdp, RightHandSideAndJacobian) {
  auto pi = vdp(1000);
  Vec f = pi.problem.rhs(0.0, pi.y0);
  EXPECT_DOUBLE_EQ(f(0), -0.6);
  EXPECT_DOUBLE_EQ(f(1), 1798.0);
  Mat J = pi.problem.jacobian(0.0, pi.y0).materialize();
  Mat fd = jacobian_fd(pi.problem, 0.0, pi.y0).materialize();
  EXPECT_LE((J - fd).cwiseAbs().maxCoeff(), 1e-5 * J.cwiseAbs().maxCoeff());
  EXPECT_EQ(pi.tspan.first, 0.0);
}

TEST(Vdp, HarmonicLimitConservesEnergy) {
  auto pi = vdp(0.0);
  auto o = pi.options;
  o.rtol = 1e-8;
  o.atol = 1e-8;
  auto r = expode(pi.problem, {0.0, 2 * std::numbers::pi}, pi.y0, o);
  const double e0 = pi.y0.squaredNorm();
  for (const auto& y : r.y) EXPECT_NEAR(y.squaredNorm(), e0, 1e-6);
}

TEST(Semilinear, ExactSolutionValues) {
  auto p2 = semilinear(2, 49);
  Vec e0 = p2.problem.exact(0.0);
  const Index c = 24 + 49 * 24;  // grid point (0.5, 0.5)
  EXPECT_DOUBLE_EQ(e0(c), 0.0625);
  Vec e1 = p2.problem.exact(1.0);
  EXPECT_LE((e1 - std::exp(1.0) * e0).cwiseAbs().maxCoeff(), 1e-15);
  auto p1 = semilinear(1, 49);
  EXPECT_DOUBLE_EQ(p1.problem.exact(0.0)(24), 0.25);
  EXPECT_EQ(p2.problem.dim, 49 * 49);
}

TEST(Semilinear, ResidualOfExactGridSolution) {
  // u' − F(t,u) on the sampled exact solution; the stencil is exact on
  // quadratics, so only rounding remains (well inside C·Δx²)
  for (int dims : {1, 2}) {
    for (Index N : {16, 32, 64}) {
      auto pi = semilinear(dims, N);
      const double dx = 1.0 / (N + 1);
      for (double t : {0.0, 0.7}) {
        Vec u = pi.problem.exact(t);
        Vec res = u - pi.problem.rhs(t, u);  // u_t = u
        EXPECT_LE(res.cwiseAbs().maxCoeff(), 1e-9 + 0.1 * dx * dx) << dims << " " << N;
      }
    }
  }
}

TEST(Semilinear, TimeDerivativeOfSource) {
  auto pi = semilinear(1, 10);
  Vec u = pi.y0;
  const double t = 0.4, d = 1e-6;
  Vec fd = (pi.problem.rhs(t + d, u) - pi.problem.rhs(t - d, u)) / (2 * d);
  EXPECT_LE((pi.problem.df_dt(t, u) - fd).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Brusselator, DimensionAndLaplacian) {
  EXPECT_EQ(brusselator(100).problem.dim, 20000);
  SparseMatrix<double> L = kron_sum(laplacian_neumann_1d(8));
  Vec rs = L * Vec::Ones(64);
  EXPECT_EQ(rs.cwiseAbs().maxCoeff(), 0.0);
  Mat D(L);
  EXPECT_EQ((D - D.transpose()).cwiseAbs().maxCoeff(), 0.0);
  // entries are integer multiples of 1/Δx²
  for (double v : D.reshaped()) EXPECT_EQ(v / 64.0, std::round(v / 64.0));
}

TEST(Brusselator, Equilibrium) {
  auto pi = brusselator(8, 1e-2, 3.4, 1.0);
  Vec y(128);
  y.head(64).setConstant(1.0);
  y.tail(64).setConstant(3.4);
  EXPECT_LE(pi.problem.rhs(0.0, y).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Brusselator, JacobianMatchesFiniteDifferences) {
  auto pi = brusselator(6);
  Vec y = pi.y0;
  y.tail(36).setConstant(0.7);
  Mat J = pi.problem.jacobian(0.0, y).materialize();
  Mat fd = jacobian_fd(pi.problem, 0.0, y).materialize();
  EXPECT_LE((J - fd).cwiseAbs().maxCoeff(), 1e-5 * J.cwiseAbs().maxCoeff());
}

TEST(Brusselator, PeaksInitialValue) {
  EXPECT_NEAR(peaks(0.0, 0.0), 0.98101184312384, 1e-12);
  auto pi = brusselator(32);
  EXPECT_EQ(pi.y0.tail(1024).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(pi.y0.head(1024).maxCoeff(), 7.0);
  EXPECT_LT(pi.y0.head(1024).minCoeff(), -6.0);
}

TEST(Registry, BuildersPassConsistencyProbe) {
  for (const auto& spec : problem_specs()) {
    ParamMap small;
    if (spec.name == "semilinear2d") small["N"] = 10;
    if (spec.name == "brusselator") small["N"] = 8;
    auto pi = make_problem(spec.name, small);
    EXPECT_EQ(pi.y0.size(), pi.problem.dim) << spec.name;
    EXPECT_TRUE(std::isfinite(pi.tspan.second)) << spec.name;
    if (pi.problem.semilinear) {
      EXPECT_NO_THROW(check_semilinear_consistency(pi.problem, pi.tspan.first, pi.tspan.second, pi.y0))
          << spec.name;
    }
  }
}

TEST(Registry, LookupErrors) {
  EXPECT_THROW(make_problem("maxwell"), LookupError);
  EXPECT_THROW(make_problem("vdp", {{"nu", 1.0}}), ConfigError);
  EXPECT_THROW(make_problem("heat1d", {{"N", 1.5}}), ConfigError);
  EXPECT_EQ(make_problem("heat1d", {{"N", 12}}).problem.dim, 12);
}
