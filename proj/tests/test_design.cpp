#include <gtest/gtest.h>

#include <map>
#include <set>

#include "swmcrt/design.hpp"
#include "swmcrt/rng.hpp"

using namespace swmcrt;

namespace {

// N! / prod(N_t!) by plain factorials.
unsigned long long multinomial(const std::vector<int>& counts) {
  auto fact = [](int n) {
    unsigned long long f = 1;
    for (int i = 2; i <= n; ++i) f *= static_cast<unsigned long long>(i);
    return f;
  };
  int n = 0;
  unsigned long long den = 1;
  for (int c : counts) {
    n += c;
    den *= fact(c);
  }
  return fact(n) / den;
}

}  // namespace

TEST(Design, SpaceSizeMatchesMultinomial) {
  EXPECT_EQ(space_size(DesignSpec({1, 1, 1})), 6);
  EXPECT_EQ(space_size(DesignSpec({4})), 1);
  EXPECT_EQ(space_size(DesignSpec({2, 2, 2})), 90);
  for (const auto& c : std::vector<std::vector<int>>{{3, 1, 2}, {1, 2, 3, 4}, {5, 5}, {2, 1, 1}})
    EXPECT_EQ(space_size(DesignSpec(c)), multinomial(c));
}

TEST(Design, StepProbabilities) {
  const DesignSpec two({2, 2});
  EXPECT_EQ(step_conditional_prob(two, 1), Rational(1, 6));
  EXPECT_EQ(step_conditional_prob(two, 2), Rational(1));
  const DesignSpec s({2, 1, 3, 2});
  Rational prod = 1;
  for (int t = 1; t <= s.n_times(); ++t) prod *= step_conditional_prob(s, t);
  EXPECT_EQ(prod, Rational(BigInt(1), space_size(s)));
  EXPECT_THROW(step_conditional_prob(s, 0), std::out_of_range);
  EXPECT_THROW(step_conditional_prob(s, 5), std::out_of_range);
}

TEST(Design, BalancedPutsRemainderLast) {
  const auto s = DesignSpec::balanced(100, 6);
  EXPECT_EQ(s.counts(), (std::vector<int>{16, 16, 16, 16, 16, 20}));
  EXPECT_EQ(s.n_units(), 100);
  EXPECT_THROW(DesignSpec::balanced(3, 4), std::invalid_argument);
}

TEST(Design, RejectsBadSpecs) {
  EXPECT_THROW(DesignSpec(std::vector<int>{}), std::invalid_argument);
  EXPECT_THROW(DesignSpec({2, 0, 1}), std::invalid_argument);
  EXPECT_THROW(DesignSpec(5, 3, {2, 2, 2}), std::invalid_argument);
  EXPECT_THROW(DesignSpec(6, 2, {2, 2, 2}), std::invalid_argument);
}

TEST(Design, ValidateAssignmentReportsFirstViolation) {
  const DesignSpec spec({1, 2});
  using K = AssignmentViolation::Kind;
  EXPECT_FALSE(validate_assignment({{1, 0}, {0, 1}, {0, 1}}, spec));
  auto v = validate_assignment({{1, 1}, {0, 1}, {0, 1}}, spec);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->kind, K::row_sum);
  EXPECT_EQ(v->index, 0u);
  v = validate_assignment({{1, 0}, {1, 0}, {0, 1}}, spec);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->kind, K::column_sum);
  EXPECT_EQ(v->index, 1u);
  EXPECT_EQ(v->expected, 1);
  EXPECT_EQ(v->actual, 2);
  v = validate_assignment({{1, 0}, {0, 1}}, spec);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->kind, K::shape);
  v = validate_assignment({{2, 0}, {0, 1}, {0, 1}}, spec);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->kind, K::entry);
}

TEST(Design, RowsAndTimesRoundTrip) {
  const DesignSpec spec({1, 2, 1});
  const auto z = AssignmentMatrix::from_times(CrossoverTimes{{2, 1, 3, 2}}, spec);
  EXPECT_EQ(z.at(0, 2), 1);
  EXPECT_EQ(z.at(0, 1), 0);
  const auto back = AssignmentMatrix::from_rows(z.rows(), spec);
  EXPECT_EQ(back, z);
  EXPECT_EQ(crossover_times(z.rows(), spec), (CrossoverTimes{{2, 1, 3, 2}}));
  EXPECT_THROW(AssignmentMatrix::from_times(CrossoverTimes{{1, 1, 3, 2}}, spec), std::invalid_argument);
  EXPECT_THROW(AssignmentMatrix::from_times(CrossoverTimes{{2, 1, 4, 2}}, spec), std::invalid_argument);
}

TEST(Design, EnumerationIsCompleteAndOrdered) {
  const DesignSpec spec({2, 1, 1});
  const auto all = enumerate_assignments(spec);
  ASSERT_EQ(all.size(), 12u);
  std::set<std::vector<int>> seen;
  for (std::size_t q = 0; q < all.size(); ++q) {
    EXPECT_NO_THROW(AssignmentMatrix::from_times(all[q], spec));
    seen.insert(all[q].a);
    if (q > 0) EXPECT_LT(all[q - 1].a, all[q].a);
  }
  EXPECT_EQ(seen.size(), 12u);
  EXPECT_THROW(enumerate_assignments(DesignSpec::balanced(40, 4)), std::length_error);
}

TEST(Design, SamplingIsUniform) {
  const DesignSpec spec({1, 1, 1});
  SplitMix64 gen(42);
  std::map<std::vector<int>, int> freq;
  const int draws = 60000;
  for (int d = 0; d < draws; ++d) ++freq[crossover_times(sample_assignment(spec, gen)).a];
  ASSERT_EQ(freq.size(), 6u);
  double chi2 = 0.0;
  for (const auto& [k, n] : freq) chi2 += (n - draws / 6.0) * (n - draws / 6.0) / (draws / 6.0);
  EXPECT_LT(chi2, 20.52);  // chi-square(5) upper 0.001 point
}
