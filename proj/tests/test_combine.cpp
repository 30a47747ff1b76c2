#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "swmcrt/combine.hpp"
#include "swmcrt/rng.hpp"

using namespace swmcrt;

namespace {

double ks_uniform(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    d = std::max({d, static_cast<double>(i + 1) / n - x[i], x[i] - static_cast<double>(i) / n});
  return d;
}

}  // namespace

TEST(Combine, LambdaAndWeights) {
  EXPECT_DOUBLE_EQ(estimate_lambda(1.0, 4.0, 200, 200, 400), 0.1);
  // treated variance is scaled by the control size
  EXPECT_DOUBLE_EQ(estimate_lambda(1.0, 0.0, 10, 40, 100), 1.0 / (100.0 / 40.0));
  const auto w = make_weights({0.1, 0.1});
  EXPECT_NEAR(w.weights[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(w.weights[1], 1.0 / std::sqrt(2.0), 1e-15);
  const auto u = make_weights({1.0, 3.0});
  EXPECT_NEAR(u.weights[0], 0.5, 1e-15);
  EXPECT_NEAR(u.weights[1], std::sqrt(0.75), 1e-15);
  EXPECT_THROW(estimate_lambda(1.0, 1.0, 1, 5, 6), std::invalid_argument);
  EXPECT_THROW(estimate_lambda(0.0, 0.0, 3, 5, 8), std::invalid_argument);
  EXPECT_THROW(make_weights({}), std::invalid_argument);
}

TEST(Combine, KnownValues) {
  const auto w = equal_weights(2);
  EXPECT_NEAR(weighted_z_combine(std::vector<double>{0.5, 0.5}, w).p, 0.5, 1e-12);
  const auto z = weighted_z_combine(std::vector<double>{0.025, 0.025}, w);
  EXPECT_NEAR(z.statistic, std::sqrt(2.0) * -1.959963984540054, 1e-9);
  EXPECT_NEAR(z.p, 0.0027866, 1e-6);
  // Fisher with K=1 returns the input
  EXPECT_NEAR(fisher_combine(std::vector<double>{0.3}).p, 0.3, 1e-12);
  // chi-square(4) upper tail at x is exp(-x/2)(1 + x/2)
  const double x = -4.0 * std::log(0.1);
  EXPECT_NEAR(fisher_combine(std::vector<double>{0.1, 0.1}).p, std::exp(-x / 2) * (1 + x / 2), 1e-12);
  EXPECT_DOUBLE_EQ(bonferroni_combine(std::vector<double>{0.2, 0.01, 0.5}).p, 0.03);
  EXPECT_DOUBLE_EQ(bonferroni_combine(std::vector<double>{0.6, 0.7}).p, 1.0);
}

TEST(Combine, CeilingKeepsQuantileFinite) {
  const auto w = equal_weights(3);
  const auto r = weighted_z_combine(std::vector<double>{1.0, 1.0, 1.0}, w, 499);
  EXPECT_TRUE(std::isfinite(r.statistic));
  EXPECT_LT(r.p, 1.0);
  EXPECT_DOUBLE_EQ(quantile_ceiling(499), 1.0 - 1.0 / 1000.0);
}

TEST(Combine, NullCalibration) {
  SplitMix64 g(11);
  const std::size_t n = 20000;
  std::vector<double> fz, ff;
  const auto w = make_weights({1.0, 2.0, 0.5});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> p{1.0 - uniform01(g), 1.0 - uniform01(g), 1.0 - uniform01(g)};
    fz.push_back(weighted_z_combine(p, w).p);
    ff.push_back(fisher_combine(p).p);
  }
  const double crit = 1.63 / std::sqrt(static_cast<double>(n));  // KS 1% point
  EXPECT_LT(ks_uniform(fz), crit);
  EXPECT_LT(ks_uniform(ff), crit);
}

TEST(Combine, TwoSided) {
  const auto w = equal_weights(2);
  const std::vector<double> lo{0.9, 0.95}, hi{0.12, 0.06};
  const auto g = combine_tails(Combiner::weighted_z, lo, hi, Alternative::greater, &w, 0);
  const auto t = combine_tails(Combiner::weighted_z, lo, hi, Alternative::two_sided, &w, 0);
  EXPECT_NEAR(t.p, 2.0 * g.p, 1e-12);
  const auto f = combine_tails(Combiner::fisher, hi, hi, Alternative::two_sided, nullptr, 0);
  EXPECT_LE(f.p, 1.0);
}

TEST(Combine, CombineResultUsesTestVariances) {
  McrtResult r;
  r.n_units = 40;
  for (int k = 1; k <= 2; ++k) {
    TestOutcome o;
    o.group.k = k;
    o.n_treated = 10;
    o.n_control = 10;
    o.var_treated = 1.0;
    o.var_control = 1.0;
    o.result.p_less = 0.7;
    o.result.p_greater = 0.3;
    o.result.n_resamples = 99;
    r.tests.push_back(o);
  }
  const auto w = weights_from_result(r);
  EXPECT_NEAR(w.weights[0], 1.0 / std::sqrt(2.0), 1e-15);
  const auto c = combine_result(r, Combiner::weighted_z);
  EXPECT_NEAR(c.p, normal_cdf(std::sqrt(2.0) * normal_quantile(0.3)), 1e-12);
  EXPECT_THROW(combine_result(McrtResult{}, Combiner::fisher), std::invalid_argument);
}

TEST(Combine, InputErrors) {
  const auto w = equal_weights(2);
  EXPECT_THROW(weighted_z_combine(std::vector<double>{0.0, 0.5}, w), std::invalid_argument);
  EXPECT_THROW(weighted_z_combine(std::vector<double>{0.5}, w), std::invalid_argument);
  EXPECT_THROW(fisher_combine(std::vector<double>{1.5}), std::invalid_argument);
  EXPECT_THROW(fisher_combine(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(combine(Combiner::weighted_z, std::vector<double>{0.5}), std::invalid_argument);
  EXPECT_THROW(parse_combiner("stouffer"), std::invalid_argument);
  EXPECT_EQ(parse_combiner("weighted-z"), Combiner::weighted_z);
  EXPECT_EQ(parse_alternative("two-sided"), Alternative::two_sided);
}
