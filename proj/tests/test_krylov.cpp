#include <gtest/gtest.h>

#include <random>

#include "expflow/krylov.hpp"

using namespace expflow;
using Mat = Matrix<double>;
using Vec = Vector<double>;

namespace {

Mat laplacian1d(int n) {
  const double dx = 1.0 / (n + 1);
  Mat a = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = -2;
    if (i > 0) a(i, i - 1) = 1;
    if (i + 1 < n) a(i, i + 1) = 1;
  }
  return a / (dx * dx);
}

Mat random_matrix(int n, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Mat m(n, n);
  for (auto& x : m.reshaped()) x = nd(rng);
  return m * (scale / m.norm() * std::sqrt(double(n)));
}

Vec random_vector(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Vec v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

// dense oracle for combo(hM)v
Vec dense_combo(const Mat& m, double h, const Vec& v, const PhiCombo& c) {
  Vec out = Vec::Zero(v.size());
  for (const auto& t : c.terms()) {
    auto blocks = phi_dense_block<double>(m, t.scale * h, Mat(v), t.k, Structure::none, 100000);
    out += t.alpha * blocks[t.k].col(0);
  }
  return out;
}

}  // namespace

TEST(Arnoldi, EigenvectorBreaksDownImmediately) {
  Mat m = Mat::Zero(4, 4);
  m.diagonal() << -1, -2, -3, -4;
  auto op = Operator<>::dense(m);
  auto b = krylov_seed(op, Vec(3.0 * Vec::Unit(4, 1)));
  arnoldi_extend(op, b, 4);
  EXPECT_TRUE(b.exact);
  EXPECT_EQ(b.m, 1);
  EXPECT_NEAR(b.Hm()(0, 0), -2.0, 1e-15);
  EXPECT_EQ(error_estimate(b, 0.5, 1), 0.0);
}

TEST(Arnoldi, RelationAndOrthonormality) {
  Mat m = random_matrix(10, 1);
  auto op = Operator<>::dense(m);
  auto b = krylov_seed(op, random_vector(10, 2));
  arnoldi_extend(op, b, 7);
  Mat V = b.V.leftCols(8);
  EXPECT_LE((V.transpose() * V - Mat::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-10);
  Mat lhs = m * b.Vm();
  Mat rhs = b.Vm() * b.Hm();
  rhs.col(6) += b.H(7, 6) * b.V.col(7);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10 * m.cwiseAbs().maxCoeff());
  // full dimension: residual vanishes
  arnoldi_extend(op, b, 10);
  EXPECT_EQ(b.m, 10);
  EXPECT_LE((m * b.Vm() - b.Vm() * b.Hm()).cwiseAbs().maxCoeff(), 1e-10 * m.cwiseAbs().maxCoeff());
  EXPECT_LE(error_estimate(b, 1.0, 1), 1e-12 * b.beta);
}

TEST(Arnoldi, SymmetricGivesTridiagonal) {
  Mat m = laplacian1d(50);
  auto op = Operator<>::dense(m);
  auto b = krylov_seed(op, random_vector(50, 4));
  arnoldi_extend(op, b, 20);
  Mat h = b.Hm();
  const double hmax = h.cwiseAbs().maxCoeff();
  for (int j = 0; j < 20; ++j)
    for (int i = 0; i + 1 < j; ++i) EXPECT_LE(std::abs(h(i, j)), 1e-8 * hmax);
}

TEST(Arnoldi, ZeroSeedRejected) {
  auto op = Operator<>::identity(3);
  EXPECT_THROW(krylov_seed(op, Vec(Vec::Zero(3))), ArgumentError);
}

TEST(ErrorEstimate, WithinFactor100OfTrueError) {
  Mat m = laplacian1d(100);
  auto op = Operator<>::dense(m);
  Vec v = Vec::Ones(100);
  const double h = 1e-3;
  Vec exact = dense_combo(m, h, v, PhiCombo::phi(1));
  for (int mm : {5, 10, 15}) {
    auto b = krylov_seed(op, v);
    arnoldi_extend(op, b, mm);
    Mat e1 = Mat::Zero(mm, 1);
    e1(0, 0) = 1;
    auto small = phi_dense_block<double>(b.Hm(), h, e1, 1);
    Vec approx = b.beta * b.Vm() * small[1].col(0);
    const double err = (approx - exact).norm();
    const double est = error_estimate(b, h, 1);
    EXPECT_GT(est, err / 100) << "m=" << mm << " err=" << err << " est=" << est;
    EXPECT_LT(est, err * 100) << "m=" << mm << " err=" << err << " est=" << est;
  }
}

TEST(Approximate, FullDimensionMatchesDense) {
  Mat m = random_matrix(10, 8, 2.0);
  auto op = Operator<>::dense(m);
  Vec v = random_vector(10, 9);
  std::vector<PhiCombo> combos{PhiCombo::phi(1), PhiCombo({{1, 1.0}, {2, -2.0}}), PhiCombo::phi(1, 0.5, 0.5),
                               PhiCombo({PhiTerm{1, 1.0, 1.0}, PhiTerm{1, -1.0, 0.5}})};
  KrylovApproximator<double> kr;
  auto res = kr.approximate(op, v, 0.8, combos, 1e-300, 10, "F1");
  ASSERT_EQ(res.values.size(), combos.size());
  for (std::size_t i = 0; i < combos.size(); ++i) {
    Vec ref = dense_combo(m, 0.8, v, combos[i]);
    EXPECT_LE((res.values[i] - ref).cwiseAbs().maxCoeff(), 1e-10 * ref.cwiseAbs().maxCoeff()) << i;
  }
  EXPECT_EQ(res.h_out, 0.8);
  EXPECT_EQ(kr.stats().matfun_evals, 4);
  EXPECT_EQ(kr.stats().subspaces_built, 1);
  EXPECT_EQ(kr.stats().max_dims.at("F1"), 10);
}

TEST(Approximate, EigenvectorOneStep) {
  Mat m = laplacian1d(20);
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  Vec v = es.eigenvectors().col(3);
  const double lam = es.eigenvalues()(3);
  auto op = Operator<>::dense(m);
  KrylovApproximator<double> kr;
  std::vector<PhiCombo> c{PhiCombo::phi(1)};
  auto res = kr.approximate(op, v, 0.01, c, 1e-12, 36, "v");
  EXPECT_EQ(res.dim, 1);
  EXPECT_LE((res.values[0] - phi_scalar(1, 0.01 * lam) * v).norm(), 1e-12);
  EXPECT_EQ(kr.stats().total_krylov_steps, 1);
}

TEST(Approximate, ZeroVectorGivesZeros) {
  auto op = Operator<>::dense(laplacian1d(5));
  KrylovApproximator<double> kr;
  std::vector<PhiCombo> c{PhiCombo::phi(1), PhiCombo::phi(2)};
  auto res = kr.approximate(op, Vec::Zero(5), 1.0, c, 1e-8, 10, "F1");
  EXPECT_EQ(res.dim, 0);
  EXPECT_EQ(res.values[1], Vec::Zero(5));
  EXPECT_EQ(kr.stats().subspaces_built, 0);
}

TEST(Approximate, ArgumentChecks) {
  auto op = Operator<>::dense(laplacian1d(5));
  KrylovApproximator<double> kr;
  std::vector<PhiCombo> none;
  std::vector<PhiCombo> one{PhiCombo::phi(1)};
  EXPECT_THROW(kr.approximate(op, Vec::Ones(5), 1.0, none, 1e-8, 10, "F1"), ArgumentError);
  EXPECT_THROW(kr.approximate(op, Vec::Ones(5), 1.0, one, 0.0, 10, "F1"), ArgumentError);
  EXPECT_THROW(kr.approximate(op, Vec::Ones(4), 1.0, one, 1e-8, 10, "F1"), ArgumentError);
}

TEST(Approximate, LargeDiffusionReducesOrConverges) {
  Mat m = laplacian1d(400);
  auto op = Operator<>::sparse(m.sparseView(), Structure::symmetric);
  Vec v = random_vector(400, 21);
  std::vector<PhiCombo> c{PhiCombo::phi(1), PhiCombo::phi(2)};
  for (double h : {1e-6, 1e-5, 1e-4, 1e-3, 1e-2}) {
    KrylovApproximator<double> kr;
    auto res = kr.approximate(op, v, h, c, 1e-8, 36, "F1");
    EXPECT_LE(res.dim, 36);
    EXPECT_LE(res.h_out, h);
    EXPECT_LE(res.estimate, 1e-8);
    for (std::size_t i = 0; i < c.size(); ++i) {
      Vec ref = dense_combo(m, res.h_out, v, c[i]);
      const double err = (res.values[i] - ref).norm();
      EXPECT_LE(err, 1e-6) << "h=" << h << " h_out=" << res.h_out << " i=" << i;
    }
    if (res.h_out < h) {
      EXPECT_EQ(kr.stats().step_reductions, 1);
    }
  }
}

TEST(Approximate, NoReductionWarns) {
  Mat m = laplacian1d(400);
  auto op = Operator<>::dense(m);
  std::vector<std::string> seen;
  KrylovApproximator<double> kr([&](const std::string& w) { seen.push_back(w); });
  std::vector<PhiCombo> c{PhiCombo::phi(1)};
  auto res = kr.approximate(op, random_vector(400, 2), 1e-2, c, 1e-10, 10, "F1", false);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.h_out, 1e-2);
  EXPECT_EQ(kr.stats().warnings, 1);
  EXPECT_EQ(seen.size(), 1u);
}

TEST(Approximate, NormBoundedForPhi0) {
  for (unsigned s = 0; s < 10; ++s) {
    Mat m = random_matrix(30, 100 + s, 3.0);
    auto op = Operator<>::dense(m);
    Vec v = random_vector(30, 200 + s);
    const double bound = std::exp(m.operatorNorm()) * v.norm();
    for (int md : {2, 5, 10}) {
      KrylovApproximator<double> kr;
      std::vector<PhiCombo> c{PhiCombo::phi(0)};
      auto res = kr.approximate(op, v, 1.0, c, 1e-300, md, "F1", false);
      EXPECT_LE(res.values[0].norm(), bound * (1 + 1e-12));
    }
  }
}

TEST(Approximate, ErrorMostlyDecreasesInDimension) {
  int violations = 0, checks = 0;
  for (unsigned s = 0; s < 20; ++s) {
    Mat m = laplacian1d(60) + 50.0 * random_matrix(60, 300 + s, 1.0);
    auto op = Operator<>::dense(m);
    Vec v = random_vector(60, 400 + s);
    const double h = 2e-4;
    Vec ref = dense_combo(m, h, v, PhiCombo::phi(1));
    double prev = INFINITY;
    for (int md = 1; md <= 24; ++md) {
      KrylovApproximator<double> kr;
      std::vector<PhiCombo> c{PhiCombo::phi(1)};
      auto res = kr.approximate(op, v, h, c, 1e-300, md, "F1", false);
      const double err = (res.values[0] - ref).norm();
      if (err > 1e-13 * ref.norm()) {
        ++checks;
        if (err > prev) ++violations;
      }
      prev = err;
    }
  }
  EXPECT_LE(violations, checks / 10);
}

TEST(Recycle, HitAfterRejectionMissOtherwise) {
  Mat m = laplacian1d(80);
  auto op = Operator<>::dense(m);
  Vec v = random_vector(80, 1), w = random_vector(80, 2);
  KrylovApproximator<double> kr;
  std::vector<PhiCombo> c{PhiCombo::phi(1)};
  kr.approximate(op, v, 1e-3, c, 1e-8, 36, "F1");
  const long steps = kr.stats().total_krylov_steps;
  auto r2 = kr.approximate(op, v, 5e-4, c, 1e-8, 36, "F1");
  EXPECT_TRUE(r2.recycled);
  EXPECT_EQ(kr.stats().recycled_subspaces, 1);
  EXPECT_EQ(kr.stats().total_krylov_steps, steps);
  Vec ref = dense_combo(m, 5e-4, v, c[0]);
  EXPECT_LE((r2.values[0] - ref).norm(), 1e-6);

  auto r3 = kr.approximate(op, w, 5e-4, c, 1e-8, 36, "F1");
  EXPECT_FALSE(r3.recycled);
  auto op2 = Operator<>::dense(m);
  auto r4 = kr.approximate(op2, w, 5e-4, c, 1e-8, 36, "F1");
  EXPECT_FALSE(r4.recycled);
  EXPECT_EQ(kr.stats().recycled_subspaces, 1);
  EXPECT_EQ(kr.stats().subspaces_built, 3);
  EXPECT_GE(kr.stats().total_krylov_steps, kr.stats().subspaces_built);
}

TEST(Stats, BlockLayout) {
  KrylovStats s;
  s.matfun_evals = 331;
  s.subspaces_built = 147;
  s.total_krylov_steps = 1455;
  s.recycled_subspaces = 10;
  s.note_dim("D2", 15);
  s.note_dim("F1", 15);
  s.note_dim("v", 15);
  s.note_dim("D3", 11);
  const std::string out = format_statistics(s);
  EXPECT_NE(out.find("statistics:\n"), std::string::npos);
  EXPECT_NE(out.find("number of matrix function evaluation times vector: 331\n"), std::string::npos);
  EXPECT_NE(out.find("number of Krylov subspaces:"), std::string::npos);
  EXPECT_NE(out.find("total number of Krylov steps:"), std::string::npos);
  EXPECT_NE(out.find("number of step size reductions due to Krylov:"), std::string::npos);
  EXPECT_NE(out.find("number of recycled subspaces:"), std::string::npos);
  EXPECT_NE(out.find("F1: 15, v: 15, D2: 15, D3: 11\n"), std::string::npos);
  for (const auto& [k, _] : s.max_dims) EXPECT_TRUE(is_krylov_label(k));
}
