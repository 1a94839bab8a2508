#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"

using namespace mirfs;
using namespace fixtures;

TEST(PathSum, SingleObservationMixture) {
  auto m = two_state_bernoulli();
  EXPECT_NEAR(pathsum_likelihood(*m, m->default_parameters(), obs({1.0})), 0.55, 1e-15);
}

TEST(PathSum, SecondObservationMarginal) {
  // P(ξ₁ = 1) with ξ₀ summed out: Σ_{x₀,x₁} π(x₀) p(x₀→x₁) f(1|x₁).
  auto m = two_state_bernoulli();
  const auto theta = m->default_parameters();
  const double total = pathsum_likelihood(*m, theta, obs({0.0, 1.0})) + pathsum_likelihood(*m, theta, obs({1.0, 1.0}));
  EXPECT_NEAR(total, 0.585, 1e-15);
  // The core agrees on each term.
  EXPECT_NEAR(std::exp(loglik(*m, theta, obs({0.0, 1.0}))) + std::exp(loglik(*m, theta, obs({1.0, 1.0}))), 0.585, 1e-15);
}

TEST(PathSum, SingleStateIsProductOfDensities) {
  auto m = single_gaussian(0.5, 2.0);
  const auto data = obs({0.1, -0.3, 2.0, 1.1});
  double expected = 0.0;
  for (const auto& xi : data) {
    const double z = (xi[0] - 0.5) / 2.0;
    expected += -0.5 * z * z - std::log(2.0 * std::sqrt(2.0 * std::numbers::pi));
  }
  EXPECT_NEAR(pathsum_loglik(*m, m->default_parameters(), data), expected, 1e-13);
}

TEST(PathSum, EnforcesLimits) {
  auto m = two_state_gaussian();
  ObservationSequence long_data(13, Observation(0.0));
  EXPECT_THROW((void)pathsum_loglik(*m, m->default_parameters(), long_data), ConfigError);
  EXPECT_THROW((void)pathsum_loglik(*m, m->default_parameters(), {}), ConfigError);
}

TEST(PathSum, StationaryLawBySquaringMatchesLinearSolve) {
  auto m = two_state_discrete3();
  const auto theta = m->default_parameters();
  const Vector a = detail::stationary_by_squaring(m->transition(theta.values, MultiIndex::zero(4)));
  const Vector b = stationary_law(*m, theta, 0U).pi();
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(FiniteDifferences, AnalyticGradients) {
  const Vector at = vec({3.0});
  EXPECT_NEAR(fd_gradient([](const Vector& t) { return t(0) * t(0); }, at)(0), 6.0, 1e-9);
  const Vector g = fd_gradient([](const Vector&) { return 4.2; }, vec({1.0, 2.0}));
  EXPECT_EQ(g, Vector::Zero(2));
}

TEST(FiniteDifferences, RichardsonImprovesOnCentral) {
  const auto f = [](const Vector& t) { return std::sin(3.0 * t(0)); };
  const Vector at = vec({0.7});
  const double exact = 3.0 * std::cos(2.1);
  OracleConfig central;
  central.fd_scheme = OracleConfig::Scheme::central;
  central.fd_step = 1e-2;
  OracleConfig half = central;
  half.fd_step = 5e-3;
  OracleConfig rich = central;
  rich.fd_scheme = OracleConfig::Scheme::richardson;
  const double e1 = std::abs(fd_gradient(f, at, central)(0) - exact);
  const double e2 = std::abs(fd_gradient(f, at, half)(0) - exact);
  // O(h²): halving h divides the error by about four.
  EXPECT_NEAR(e1 / e2, 4.0, 0.05);
  EXPECT_LT(std::abs(fd_gradient(f, at, rich)(0) - exact), e2 / 100.0);
}

TEST(FiniteDifferences, Hessians) {
  const Matrix h = fd_hessian([](const Vector& t) { return t(0) * t(1); }, vec({0.3, -2.0}));
  EXPECT_NEAR(h(0, 1), 1.0, 1e-6);
  EXPECT_NEAR(h(1, 0), 1.0, 1e-6);
  EXPECT_NEAR(h(0, 0), 0.0, 1e-6);
  // Second differences of a linear function vanish up to rounding, ~ε|f|/h².
  OracleConfig coarse;
  coarse.fd_step = 1e-3;
  const Matrix lin = fd_hessian([](const Vector& t) { return 2.0 * t(0) - t(1) + 0.5; }, vec({1.0, 1.0}), coarse);
  EXPECT_LE(lin.cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_THROW((void)fd_gradient([](const Vector&) { return 1.0; }, vec({0.0}), OracleConfig{0.0}), ConfigError);
}

TEST(FiniteDifferences, NonFiniteEvaluationIsReported) {
  EXPECT_THROW((void)fd_gradient([](const Vector& t) { return std::log(t(0)); }, vec({0.0})), NumericError);
}

TEST(NaiveProduct, AgreesWithScaledStack) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 9; ++trial) {
    const RandomFixture f = random_fixture(rng, static_cast<Family>(trial % 3));
    const auto data = simulate(*f.model, f.theta, 10, 500U + static_cast<unsigned>(trial)).observations;
    EXPECT_LE(scaled_vs_naive_discrepancy(*f.model, f.theta, data, 2), 1e-12) << f.label;
  }
}

TEST(NaiveProduct, OrderZeroIsPlainProduct) {
  auto m = two_state_gaussian();
  const auto theta = m->default_parameters();
  const auto data = simulate(*m, theta, 5, 3).observations;
  TablePtr table = build_table(6, 0);
  const auto naive = naive_unscaled_product(*m, theta, data, *table, stationary_law(*m, theta, table).pi());
  ASSERT_EQ(naive.size(), 1U);
  const Matrix p = m->transition(theta.values, MultiIndex::zero(6));
  Matrix prod = Matrix::Zero(2, 2);
  for (Eigen::Index x = 0; x < 2; ++x)
    prod(x, x) = m->emission(theta.values, MultiIndex::zero(6), static_cast<std::size_t>(x), data[0], nullptr);
  for (std::size_t j = 1; j < data.size(); ++j) {
    Matrix s(2, 2);
    for (Eigen::Index x = 0; x < 2; ++x)
      for (Eigen::Index y = 0; y < 2; ++y)
        s(x, y) = p(y, x) * m->emission(theta.values, MultiIndex::zero(6), static_cast<std::size_t>(x), data[j], &data[j - 1]);
    prod = s * prod;
  }
  EXPECT_TRUE(naive[0].isApprox(prod, 1e-14));
}

TEST(NaiveProduct, UnderflowsOnLongSequences) {
  auto m = two_state_gaussian();
  const auto theta = m->default_parameters();
  const auto data = simulate(*m, theta, 2000, 99).observations;
  TablePtr table = build_table(6, 0);
  EXPECT_THROW((void)naive_unscaled_product(*m, theta, data, *table, stationary_law(*m, theta, table).pi()), UnderflowError);
  EXPECT_NO_THROW((void)evaluate(*m, theta, data, 2));
}

TEST(FaultInjection, CorruptedDerivativeBreaksScoreOnly) {
  auto base = two_state_gaussian();
  auto bad = std::make_shared<CorruptedDerivativeModel>(base, 1.5);
  const auto theta = base->default_parameters();
  const auto data = simulate(*base, theta, 30, 4).observations;
  EXPECT_DOUBLE_EQ(loglik(*bad, theta, data), loglik(*base, theta, data));
  const Vector fd = fd_gradient([&](const Vector& t) { return loglik(*bad, bad->parameters(t), data); }, theta.values);
  EXPECT_GT(max_relative_error(evaluate(*bad, theta, data, 1).score, fd), 1e-3);
}

TEST(CheckSuite, BuiltinFixturesPass) {
  for (std::shared_ptr<const BuiltinModel> m : {two_state_gaussian(), two_state_ar1(), two_state_discrete3(), bernoulli(0.3)}) {
    const CheckReport r = run_checks(*m, m->default_parameters(), 2, std::nullopt);
    EXPECT_TRUE(r.passed()) << family_name(m->family());
    EXPECT_EQ(r.rows.size(), 8U);
  }
}

TEST(CheckSuite, OrderZeroRunsOnlyLikelihoodChecks) {
  auto m = two_state_gaussian();
  const CheckReport r = run_checks(*m, m->default_parameters(), 0, std::nullopt);
  ASSERT_EQ(r.rows.size(), 3U);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.name.find("score"), std::string::npos);
    EXPECT_EQ(row.name.find("hessian"), std::string::npos);
  }
}

TEST(CheckSuite, FaultInjectionFailsScoreCheck) {
  auto base = two_state_gaussian();
  CorruptedDerivativeModel bad(base, 1.01);
  const CheckReport r = run_checks(bad, base->default_parameters(), 1, std::nullopt);
  EXPECT_FALSE(r.passed());
  const auto failed = r.failures();
  EXPECT_NE(std::find(failed.begin(), failed.end(), "score_vs_fd"), failed.end());
  EXPECT_EQ(std::find(failed.begin(), failed.end(), "likelihood_vs_pathsum"), failed.end());
}
