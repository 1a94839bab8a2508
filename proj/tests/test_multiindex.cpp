#include <gtest/gtest.h>

#include <map>
#include <set>

#include <mirfs/multiindex.hpp>

using mirfs::MultiIndex;
using mirfs::MultiIndexTable;

namespace {

MultiIndex mi(std::vector<unsigned> e) { return MultiIndex(std::move(e)); }

std::uint64_t factorial(unsigned n) {
  std::uint64_t f = 1;
  for (unsigned i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

TEST(MultiIndexTable, SingleParameterOrderTwo) {
  MultiIndexTable t(1, 2);
  ASSERT_EQ(t.size(), 3U);
  EXPECT_EQ(t[0], mi({0}));
  EXPECT_EQ(t[1], mi({1}));
  EXPECT_EQ(t[2], mi({2}));
}

TEST(MultiIndexTable, TwoParametersOrderTwoHasSixIndices) {
  MultiIndexTable t(2, 2);
  ASSERT_EQ(t.size(), 6U);
  const std::vector<MultiIndex> expected{mi({0, 0}), mi({1, 0}), mi({0, 1}),
                                         mi({2, 0}), mi({1, 1}), mi({0, 2})};
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_EQ(t[k], expected[k]) << k;
}

TEST(MultiIndexTable, OrderZeroHoldsOnlyTheZeroIndex) {
  MultiIndexTable t(3, 0);
  ASSERT_EQ(t.size(), 1U);
  EXPECT_EQ(t[0], mi({0, 0, 0}));
}

TEST(MultiIndexTable, SizeMatchesBinomialExhaustively) {
  for (std::size_t q = 1; q <= 4; ++q) {
    for (unsigned r = 0; r <= 4; ++r) {
      MultiIndexTable t(q, r);
      const std::uint64_t k = factorial(r + static_cast<unsigned>(q)) /
                              (factorial(r) * factorial(static_cast<unsigned>(q)));
      EXPECT_EQ(t.size(), k) << "q=" << q << " r=" << r;
      EXPECT_EQ(mirfs::table_size(q, r), k);
      std::set<std::vector<unsigned>> seen;
      unsigned last_order = 0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_TRUE(seen.insert(t[i].exponents()).second) << "duplicate index";
        EXPECT_LE(t[i].order(), r);
        EXPECT_GE(t[i].order(), last_order) << "labels must be graded";
        last_order = t[i].order();
        EXPECT_EQ(t.label(t[i]), i);
      }
    }
  }
}

TEST(MultiIndexTable, UnitIndicesFollowZero) {
  MultiIndexTable t(3, 2);
  for (std::size_t d = 0; d < 3; ++d) EXPECT_EQ(t.unit_label(d), d + 1);
  EXPECT_EQ(t[t.pair_label(0, 2)], mi({1, 0, 1}));
  EXPECT_EQ(t.pair_label(1, 1), t.label(mi({0, 2, 0})));
}

TEST(MultiIndexTable, RejectsBadArguments) {
  EXPECT_THROW(MultiIndexTable(0, 2), mirfs::ConfigError);
  MultiIndexTable t(2, 1);
  EXPECT_THROW((void)t.label(mi({2, 0})), mirfs::ConfigError);
  EXPECT_THROW((void)t.label(mi({1})), mirfs::ConfigError);
  EXPECT_THROW(MultiIndexTable(64, 64), mirfs::ConfigError);
}

TEST(MultinomialCoeff, Examples) {
  EXPECT_EQ(mirfs::multinomial_coeff(mi({2}), mi({1})), 2U);
  EXPECT_EQ(mirfs::multinomial_coeff(mi({1, 1}), mi({1, 0})), 1U);
  EXPECT_EQ(mirfs::multinomial_coeff(mi({2, 1}), mi({1, 1})), 2U);
  EXPECT_THROW((void)mirfs::multinomial_coeff(mi({1, 0}), mi({0, 1})), mirfs::ConfigError);
}

TEST(MultinomialCoeff, PascalRowsForSingleParameter) {
  for (unsigned n = 0; n <= 12; ++n) {
    std::uint64_t sum = 0;
    for (unsigned k = 0; k <= n; ++k) {
      const auto c = mirfs::multinomial_coeff(mi({n}), mi({k}));
      sum += c;
      if (k > 0 && n > 0 && k < n)
        EXPECT_EQ(c, mirfs::multinomial_coeff(mi({n - 1}), mi({k - 1})) +
                         mirfs::multinomial_coeff(mi({n - 1}), mi({k})));
    }
    EXPECT_EQ(sum, std::uint64_t{1} << n);
  }
}

TEST(Decompositions, MixedSecondOrder) {
  MultiIndexTable t(2, 2);
  const auto decs = t.decompositions(mi({1, 1}));
  ASSERT_EQ(decs.size(), 4U);
  std::set<std::pair<std::vector<unsigned>, std::vector<unsigned>>> got;
  for (const auto& d : decs) {
    EXPECT_EQ(d.coeff, 1U);
    got.insert({t[d.mu].exponents(), t[d.rest].exponents()});
  }
  const std::set<std::pair<std::vector<unsigned>, std::vector<unsigned>>> expected{
      {{0, 0}, {1, 1}}, {{1, 0}, {0, 1}}, {{0, 1}, {1, 0}}, {{1, 1}, {0, 0}}};
  EXPECT_EQ(got, expected);
}

TEST(Decompositions, ZeroAndPureSecondOrder) {
  MultiIndexTable t1(1, 2);
  const auto zero = t1.decompositions(mi({0}));
  ASSERT_EQ(zero.size(), 1U);
  EXPECT_EQ(zero[0].coeff, 1U);

  const auto two = t1.decompositions(mi({2}));
  ASSERT_EQ(two.size(), 3U);
  std::map<unsigned, std::uint64_t> coeff_by_mu;
  for (const auto& d : two) coeff_by_mu[t1[d.mu][0]] = d.coeff;
  EXPECT_EQ(coeff_by_mu[0], 1U);
  EXPECT_EQ(coeff_by_mu[1], 2U);
  EXPECT_EQ(coeff_by_mu[2], 1U);
}

TEST(Decompositions, CoefficientsSumToPowerOfTwo) {
  for (std::size_t q = 1; q <= 4; ++q) {
    for (unsigned r = 0; r <= 4; ++r) {
      MultiIndexTable t(q, r);
      for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint64_t sum = 0;
        for (const auto& d : t.decompositions(i)) {
          sum += d.coeff;
          EXPECT_EQ(t[d.mu] + t[d.rest], t[i]);
        }
        EXPECT_EQ(sum, std::uint64_t{1} << t[i].order());
      }
    }
  }
}

TEST(MultiIndex, Arithmetic) {
  EXPECT_EQ(mi({1, 2}) + mi({0, 1}), mi({1, 3}));
  EXPECT_EQ(mi({1, 2}) - mi({0, 1}), mi({1, 1}));
  EXPECT_THROW((void)(mi({0, 2}) - mi({1, 0})), mirfs::ConfigError);
  EXPECT_EQ(mi({2, 3}).factorial(), 12U);
  EXPECT_EQ(mi({1, 0, 2}).to_string(), "(1,0,2)");
  EXPECT_TRUE(mi({0, 1}).componentwise_leq(mi({1, 1})));
  EXPECT_FALSE(mi({2, 0}).componentwise_leq(mi({1, 1})));
}

TEST(MultiIndexTable, DifferenceLabel) {
  MultiIndexTable t(2, 2);
  const auto d = t.difference(t.label(mi({1, 1})), t.label(mi({0, 1})));
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(t[*d], mi({1, 0}));
  EXPECT_FALSE(t.difference(t.label(mi({2, 0})), t.label(mi({0, 1}))).has_value());
}
