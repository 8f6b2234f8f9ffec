#include <gtest/gtest.h>

#include <random>

#include "expflow/stepctl.hpp"

using namespace expflow;
using Vec = Vector<double>;

TEST(ScaledError, Examples) {
  EXPECT_EQ(scaled_error(Vec(Vec::Zero(3)), Vec(Vec::Ones(3)), Vec(Vec::Ones(3)), 1e-6, 1e-3, ErrorNorm::max()), 0.0);
  const double v = scaled_error(Vec{{1e-3}}, Vec{{1.0}}, Vec{{2.0}}, 1e-6, 1e-3, ErrorNorm::max());
  EXPECT_NEAR(v, 1e-3 / (1e-6 + 2e-3), 1e-15);
  EXPECT_NEAR(v, 0.49975, 1e-5);
  Vec u = Vec::Ones(2);
  const double m1 = scaled_error(Vec{{0.3, 0.0}}, u, u, 1e-6, 1e-3, ErrorNorm::max());
  const double m2 = scaled_error(Vec{{0.3, 0.1}}, u, u, 1e-6, 1e-3, ErrorNorm::max());
  EXPECT_EQ(m1, m2);
  const double r = scaled_error(Vec{{0.3, 0.0}}, u, u, 1e-6, 1e-3, ErrorNorm::rms());
  EXPECT_NEAR(r, m1 / std::sqrt(2.0), 1e-12 * m1);
}

TEST(ScaledError, NonFiniteSignalsRejection) {
  Vec u = Vec::Ones(2);
  EXPECT_TRUE(std::isinf(scaled_error(Vec{{NAN, 0.0}}, u, u, 1e-6, 1e-3, ErrorNorm::max())));
}

TEST(ScaledError, Invariances) {
  std::mt19937 rng(1);
  std::normal_distribution<double> nd;
  Vec e(6), un(6), up(6), atol(6);
  for (int i = 0; i < 6; ++i) e(i) = nd(rng), un(i) = nd(rng), up(i) = nd(rng), atol(i) = 1e-3 * (1 + i);
  for (const auto& norm : {ErrorNorm::max(), ErrorNorm::rms()}) {
    const double base = scaled_error(e, un, up, AbsTol(atol), 1e-4, norm);
    const double lam = 37.5;
    const double scaled = scaled_error(Vec(lam * e), Vec(lam * un), Vec(lam * up), AbsTol(Vec(lam * atol)), 1e-4, norm);
    EXPECT_NEAR(scaled, base, 1e-12 * base);
  }
  std::vector<int> perm{3, 1, 5, 0, 4, 2};
  Vec pe(6), pu(6), pp(6), pa(6);
  for (int i = 0; i < 6; ++i) pe(i) = e(perm[i]), pu(i) = un(perm[i]), pp(i) = up(perm[i]), pa(i) = atol(perm[i]);
  EXPECT_EQ(scaled_error(e, un, up, AbsTol(atol), 1e-4, ErrorNorm::max()),
            scaled_error(pe, pu, pp, AbsTol(pa), 1e-4, ErrorNorm::max()));
}

TEST(ErrorNormTest, CustomAndGramian) {
  auto l1 = ErrorNorm::custom([](const Vec& w) { return w.cwiseAbs().sum(); });
  EXPECT_NO_THROW(l1.validate(4));
  auto bad = ErrorNorm::custom([](const Vec& w) { return w.squaredNorm(); });
  EXPECT_THROW(bad.validate(4), ConfigError);
  auto offset = ErrorNorm::custom([](const Vec& w) { return 1.0 + w.norm(); });
  EXPECT_THROW(offset.validate(4), ConfigError);

  Matrix<double> g = Matrix<double>::Identity(2, 2) * 4.0;
  auto gn = ErrorNorm::gramian(g);
  EXPECT_NEAR(gn(Vec{{1.0, 0.0}}), 2.0, 1e-15);
  EXPECT_THROW(gn.validate(3), ConfigError);
  EXPECT_THROW(ErrorNorm::gramian(Matrix<double>{{1, 2}, {0, 1}}), ConfigError);
  EXPECT_THROW(ErrorNorm::gramian(Matrix<double>{{1, 0}, {0, -1}}), ConfigError);
}

TEST(Controller, Examples) {
  ControllerState s;
  EXPECT_NEAR(next_step(s, 1.0, 1.0, 3, true), 0.9, 1e-15);
  ControllerState r;
  EXPECT_NEAR(next_step(r, 16.0, 1.0, 3, false), 0.45, 1e-15);
  ControllerState z;
  EXPECT_NEAR(next_step(z, 1e-30, 1.0, 3, true), 5.0, 1e-15);
  ControllerState zero;
  EXPECT_NEAR(next_step(zero, 0.0, 2.0, 1, true), 10.0, 1e-15);
}

TEST(Controller, PredictiveRuleWithHistory) {
  ControllerState s;
  next_step(s, 0.5, 1.0, 2, true);
  const double h = 1.2, err = 0.8;
  const double expect = h * 0.9 * std::pow(1 / err, 1.0 / 3) * std::pow(0.5 / err, 1.0 / 3) * (h / 1.0);
  EXPECT_NEAR(next_step(s, err, h, 2, true), expect, 1e-14);
}

TEST(Controller, NoGrowthRightAfterRejection) {
  ControllerState s;
  next_step(s, 0.5, 1.0, 2, true);
  const double hr = next_step(s, 4.0, 1.0, 2, false);
  EXPECT_LT(hr, 1.0);
  EXPECT_LE(next_step(s, 1e-6, hr, 2, true), hr);
  EXPECT_GT(next_step(s, 1e-6, hr, 2, true), hr);
}

TEST(Controller, MonotoneInError) {
  // per branch: `accepted` is an input of the rule, held fixed
  for (bool accepted : {true, false}) {
    double prev = INFINITY;
    for (double err = 1e-6; err < 100; err *= 1.7) {
      ControllerState s;
      s.first_step = false;
      s.h_prev = 1.0;
      s.err_prev = 0.3;
      const double h = next_step(s, err, 1.0, 3, accepted);
      EXPECT_LE(h, prev * (1 + 1e-15)) << accepted << " " << err;
      prev = h;
    }
  }
}

TEST(Controller, FailureModes) {
  ControllerState s;
  ControllerOptions opt;
  for (int i = 0; i < 9; ++i) EXPECT_NO_THROW(next_step(s, 2.0, 1.0, 2, false, opt));
  EXPECT_THROW(next_step(s, 2.0, 1.0, 2, false, opt), IntegrationError);
  ControllerState t;
  opt.min_step = 0.5;
  EXPECT_THROW(next_step(t, 1e6, 1.0, 2, false, opt), IntegrationError);
  ControllerState u;
  opt.min_step = 0;
  opt.max_step = 1.5;
  EXPECT_EQ(next_step(u, 1e-10, 1.0, 2, true, opt), 1.5);
}

TEST(Controller, InitialStep) {
  EXPECT_NEAR(initial_step(0, 2, 0), 2e-4, 1e-18);
  EXPECT_NEAR(initial_step(3, 1, 0), 2e-4, 1e-18);
  EXPECT_EQ(initial_step(0, 2, 0.1), 0.1);
  ControllerOptions opt;
  opt.min_step = 1e-3;
  EXPECT_EQ(initial_step(0, 2, 0, opt), 1e-3);
}
