#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <complex>
#include <random>

#include "expflow/linop.hpp"
#include "expflow/phifun.hpp"

using namespace expflow;
using Mat = Matrix<double>;
using Vec = Vector<double>;

namespace {

// φ_k(z) from its integral definition, by adaptive Gauss–Kronrod.
double phi_quad(int k, double z) {
  if (k == 0) return std::exp(z);
  auto f = [&](double tau) { return std::exp((1 - tau) * z) * std::pow(tau, k - 1) / std::tgamma(k); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 15, 1e-15);
}

std::complex<double> phi_quad(int k, std::complex<double> z) {
  if (k == 0) return std::exp(z);
  auto re = [&](double tau) { return (std::exp((1 - tau) * z) * std::pow(tau, k - 1) / std::tgamma(k)).real(); };
  auto im = [&](double tau) { return (std::exp((1 - tau) * z) * std::pow(tau, k - 1) / std::tgamma(k)).imag(); };
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  return {GK::integrate(re, 0.0, 1.0, 15, 1e-15), GK::integrate(im, 0.0, 1.0, 15, 1e-15)};
}

Mat laplacian1d(int n, double dx) {
  Mat a = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = -2;
    if (i > 0) a(i, i - 1) = 1;
    if (i + 1 < n) a(i, i + 1) = 1;
  }
  return a / (dx * dx);
}

}  // namespace

TEST(Linop, ApplyExamples) {
  auto id = Operator<>::identity(3);
  EXPECT_EQ(id.apply(Vec{{1, 2, 3}}), (Vec{{1, 2, 3}}));
  auto dg = Operator<>::diagonal(Vec{{-1, -4}});
  EXPECT_EQ(dg.apply(Vec{{1, 1}}), (Vec{{-1, -4}}));
  auto lap = Operator<>::dense(laplacian1d(4, 0.2));
  Vec e1 = Vec::Unit(4, 0);
  Vec r = lap.apply(e1);
  EXPECT_NEAR(r(0), -50, 1e-12);
  EXPECT_NEAR(r(1), 25, 1e-12);
  EXPECT_EQ(r(2), 0);
  EXPECT_EQ(r(3), 0);
  EXPECT_THROW(lap.apply(Vec::Ones(3)), ArgumentError);
}

TEST(Linop, Materialize) {
  EXPECT_EQ(Operator<>::diagonal(Vec{{2, 3}}).materialize(), (Mat{{2, 0}, {0, 3}}));
  SparseMatrix<double> z(2, 2);
  EXPECT_EQ(Operator<>::sparse(z).materialize(), Mat::Zero(2, 2));
  Mat rot{{0, 1}, {-1, 0}};
  auto mf = Operator<>::matfree(2, [rot](const Vec& v) { return Vec(rot * v); });
  EXPECT_EQ(mf.materialize(), rot);
  auto big = Operator<>::matfree(600, [](const Vec& v) { return v; });
  EXPECT_THROW(big.materialize(), UnsupportedError);
}

TEST(Linop, StructureChecks) {
  Mat m{{1, 2}, {3, 4}};
  EXPECT_THROW(Operator<>::dense(m, Structure::symmetric), ArgumentError);
  EXPECT_THROW(Operator<>::dense(m, Structure::diagonal), ArgumentError);
  EXPECT_THROW(Operator<>::sparse(m.sparseView(), Structure::symmetric), ArgumentError);
  EXPECT_NO_THROW(Operator<>::dense(laplacian1d(5, 1.0), Structure::symmetric));
  EXPECT_NO_THROW(Operator<>::dense(Mat{{0, 1}, {-1, 0}}, Structure::skewsymmetric));
  EXPECT_THROW(Operator<>::dense(Mat(2, 3)), ArgumentError);
}

TEST(Linop, VariantsAgreeAndLinear) {
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  Mat m(12, 12);
  for (auto& x : m.reshaped()) x = nd(rng);
  auto d = Operator<>::dense(m);
  auto s = Operator<>::sparse(m.sparseView());
  auto f = Operator<>::matfree(12, [m](const Vec& v) { return Vec(m * v); });
  for (int t = 0; t < 5; ++t) {
    Vec u(12), v(12);
    for (auto& x : u) x = nd(rng);
    for (auto& x : v) x = nd(rng);
    Vec ref = d.apply(u);
    EXPECT_LE((s.apply(u) - ref).norm(), 1e-14 * ref.norm());
    EXPECT_LE((f.apply(u) - ref).norm(), 1e-14 * ref.norm());
    Vec lhs = d.apply(Vec(2.0 * u - 3.0 * v));
    Vec rhs = 2.0 * d.apply(u) - 3.0 * d.apply(v);
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * rhs.norm());
  }
  EXPECT_NE(d.id(), s.id());
  auto copy = d;
  EXPECT_EQ(copy.id(), d.id());
}

TEST(Linop, MatfreeFailureWrapped) {
  auto bad = Operator<>::matfree(2, [](const Vec&) -> Vec { throw std::runtime_error("boom"); });
  EXPECT_THROW(bad.apply(Vec::Ones(2)), EvaluationError);
}

TEST(PhiScalar, Examples) {
  EXPECT_EQ(phi_scalar(0, 0.0), 1.0);
  EXPECT_EQ(phi_scalar(2, 0.0), 0.5);
  EXPECT_NEAR(phi_scalar(1, 1.0), phi_quad(1, 1.0), 1e-14);
  EXPECT_NEAR(phi_scalar(1, 1.0), std::exp(1.0) - 1.0, 1e-14);
  EXPECT_THROW(phi_scalar(13, 1.0), UnsupportedError);
  EXPECT_THROW(phi_scalar(1, std::nan("")), ArgumentError);
  EXPECT_THROW(phi_scalar(1, INFINITY), ArgumentError);
}

TEST(PhiScalar, QuadratureOracle) {
  for (int k = 0; k <= 6; ++k) {
    for (double z = -20.0; z <= 20.0; z += 0.37) {
      const double ref = phi_quad(k, z);
      EXPECT_NEAR(phi_scalar(k, z), ref, 1e-10 * std::abs(ref)) << "k=" << k << " z=" << z;
    }
    for (double z : {1e-9, -1e-6, 0.01, -0.3, 0.49, 0.51}) {
      const double ref = phi_quad(k, z);
      EXPECT_NEAR(phi_scalar(k, z), ref, 1e-13 * std::abs(ref)) << "k=" << k << " z=" << z;
    }
  }
}

TEST(PhiScalar, ComplexQuadrature) {
  for (int k = 0; k <= 4; ++k) {
    for (auto z : {std::complex<double>(0.2, 0.3), std::complex<double>(-3, 4), std::complex<double>(0, 15)}) {
      auto ref = phi_quad(k, z);
      EXPECT_LE(std::abs(phi_scalar(k, z) - ref), 1e-10 * std::abs(ref));
    }
  }
}

TEST(PhiScalar, RecursionIdentity) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> rad(1e-2, 10.0), ang(0, 2 * M_PI);
  for (int s = 0; s < 200; ++s) {
    auto z = std::polar(rad(rng), ang(rng));
    for (int k = 0; k <= 5; ++k) {
      auto lhs = phi_scalar(k + 1, z);
      auto rhs = (phi_scalar(k, z) - 1.0 / std::tgamma(k + 1)) / z;
      EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::max(1.0, std::abs(lhs))) << z << " k=" << k;
    }
  }
}

TEST(PhiCombo, Examples) {
  EXPECT_EQ(phi_combo_scalar(PhiCombo::phi(1), 0.0), 1.0);
  PhiCombo c({{2, 1.0}, {3, -1.0}});
  EXPECT_NEAR(phi_combo_scalar(c, 0.0), 1.0 / 3.0, 1e-16);
  EXPECT_NEAR(c.value_at_zero(), 1.0 / 3.0, 1e-16);
  PhiCombo half = PhiCombo::phi(1, 1.0, 0.5);
  EXPECT_NEAR(phi_combo_scalar(half, 2.0), phi_quad(1, 1.0), 1e-14);
}

TEST(PhiCombo, MergesAndCancels) {
  PhiCombo a({{1, 1.0}, {2, 2.0}});
  PhiCombo b({{2, 2.0}});
  EXPECT_EQ(a - b, PhiCombo::phi(1));
  EXPECT_TRUE((a - a).empty());
  PhiCombo mixed({PhiTerm{1, 1.0, 1.0}, PhiTerm{1, -1.0, 0.5}});
  EXPECT_EQ(mixed.terms().size(), 2u);
  EXPECT_EQ(mixed.scales(), (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(mixed.max_index(), 1);
}

TEST(Expm, Examples) {
  EXPECT_TRUE(expm_dense<double>(Mat::Zero(3, 3)).isApprox(Mat::Identity(3, 3)));
  Mat d = Mat::Zero(2, 2);
  d(0, 0) = std::log(2.0);
  Mat e = expm_dense<double>(d);
  EXPECT_NEAR(e(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(e(1, 1), 1.0, 1e-15);
  const double th = 0.3;
  Mat r = expm_dense<double>(Mat{{0, th}, {-th, 0}});
  EXPECT_NEAR(r(0, 0), std::cos(th), 1e-15);
  EXPECT_NEAR(r(0, 1), std::sin(th), 1e-15);
  EXPECT_NEAR(r(1, 0), -std::sin(th), 1e-15);
  EXPECT_NEAR(r(0, 0), 0.955336489125606, 1e-12);
  EXPECT_THROW(expm_dense<double>(Mat::Constant(2, 2, 1e300)), NumericalError);
}

TEST(Expm, LargeNormAgainstEigen) {
  // symmetric oracle: Q exp(Λ) Qᵀ from Eigen's self-adjoint solver
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  for (double scale : {0.01, 1.0, 10.0, 60.0}) {
    Mat a(8, 8);
    for (auto& x : a.reshaped()) x = nd(rng);
    a = 0.5 * (a + a.transpose()).eval();
    a *= scale / a.cwiseAbs().colwise().sum().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    Mat ref = es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
              es.eigenvectors().transpose();
    Mat e = expm_dense<double>(a);
    EXPECT_LE((e - ref).cwiseAbs().maxCoeff(), 1e-12 * ref.cwiseAbs().maxCoeff()) << scale;
  }
}

TEST(PhiDenseBlock, Examples) {
  auto z = phi_dense_block<double>(Mat::Zero(3, 3), 1.0, Mat::Identity(3, 3), 2);
  ASSERT_EQ(z.size(), 3u);
  EXPECT_TRUE(z[0].isApprox(Mat::Identity(3, 3)));
  EXPECT_TRUE(z[1].isApprox(Mat::Identity(3, 3)));
  EXPECT_TRUE(z[2].isApprox(0.5 * Mat::Identity(3, 3)));

  Mat d{{1, 0}, {0, -1}};
  for (auto s : {Structure::none, Structure::diagonal, Structure::symmetric}) {
    auto r = phi_dense_block<double>(d, 1.0, Mat::Identity(2, 2), 1, s);
    EXPECT_NEAR(r[1](0, 0), std::exp(1.0) - 1, 1e-14);
    EXPECT_NEAR(r[1](1, 1), 1 - std::exp(-1.0), 1e-14);
    EXPECT_NEAR(r[1](0, 1), 0.0, 1e-15);
  }
}

TEST(PhiDenseBlock, RecursionAgainstLinearSolve) {
  std::mt19937 rng(5);
  std::normal_distribution<double> nd;
  Mat m(5, 5);
  for (auto& x : m.reshaped()) x = nd(rng);
  m /= m.norm();
  Mat e1 = Mat::Zero(5, 1);
  e1(0, 0) = 1;
  auto r = phi_dense_block<double>(m, 1.0, e1, 3);
  auto lu = m.partialPivLu();
  for (int k = 0; k < 3; ++k) {
    Mat oracle = lu.solve(Mat(r[k] - e1 / std::tgamma(k + 1)));
    EXPECT_LE((r[k + 1] - oracle).cwiseAbs().maxCoeff(), 1e-12) << k;
  }
}

TEST(PhiDenseBlock, StiffAgainstEigenOracle) {
  Mat a = laplacian1d(30, 1.0 / 31);
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  const double h = 100.0 / a.cwiseAbs().colwise().sum().maxCoeff();
  Mat b = Mat::Ones(30, 2);
  b.col(1) = Vec::LinSpaced(30, -1, 1);
  auto r = phi_dense_block<double>(a, h, b, 4);
  for (int k = 0; k <= 4; ++k) {
    Vec f(30);
    for (int i = 0; i < 30; ++i) f(i) = phi_quad(k, h * es.eigenvalues()(i));
    Mat ref = es.eigenvectors() * f.asDiagonal() * es.eigenvectors().transpose() * b;
    EXPECT_LE((r[k] - ref).cwiseAbs().maxCoeff(), 1e-11 * ref.cwiseAbs().maxCoeff()) << k;
  }
}

TEST(PhiDenseBlock, SymmetricPathMatchesAugmented) {
  std::mt19937 rng(9);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 5; ++t) {
    Mat a(20, 20);
    for (auto& x : a.reshaped()) x = nd(rng);
    a = 0.5 * (a + a.transpose()).eval();
    Mat b = Mat::Identity(20, 3);
    auto s = phi_dense_block<double>(a, 0.7, b, 3, Structure::symmetric);
    auto g = phi_dense_block<double>(a, 0.7, b, 3, Structure::none);
    for (int k = 0; k <= 3; ++k)
      EXPECT_LE((s[k] - g[k]).cwiseAbs().maxCoeff(), 1e-10 * g[k].cwiseAbs().maxCoeff());
  }
}

TEST(PhiDenseBlock, Caps) {
  EXPECT_THROW(phi_dense_block<double>(Mat::Zero(600, 600), 1.0, Mat::Zero(600, 1), 1), UnsupportedError);
  EXPECT_THROW(phi_dense_block<double>(Mat::Zero(3, 3), 1.0, Mat::Zero(3, 1), 13), UnsupportedError);
}

TEST(SymmetricEigen, DiagonalizesLaplacian) {
  Mat a = laplacian1d(15, 1.0);
  auto eig = symmetric_eigen(a);
  Mat rec = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
  EXPECT_LE((rec - a).cwiseAbs().maxCoeff(), 1e-12 * a.cwiseAbs().maxCoeff());
  EXPECT_LE((eig.vectors.transpose() * eig.vectors - Mat::Identity(15, 15)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(PhiCache, ReuseAndInvalidate) {
  auto op = Operator<>::dense(laplacian1d(6, 1.0), Structure::symmetric);
  PhiCache<double> cache;
  const auto& a = cache.get(op, 0.1, 2);
  const auto& b = cache.get(op, 0.1, 2);
  EXPECT_EQ(&a, &b);
  EXPECT_EQ(cache.computations(), 1);
  EXPECT_EQ(cache.uses(), 2);
  cache.get(op, 0.2, 2);
  EXPECT_EQ(cache.computations(), 2);
  cache.get(op, 0.1, 1);
  EXPECT_EQ(cache.computations(), 2);
  auto other = Operator<>::dense(laplacian1d(6, 1.0), Structure::symmetric);
  cache.get(other, 0.1, 2);
  EXPECT_EQ(cache.computations(), 3);
}
