#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "swmcrt/rng.hpp"

using namespace swmcrt;

TEST(Rng, DeterministicStreams) {
  SplitMix64 a(7), b(7), c(8);
  for (int i = 0; i < 10; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
  }
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
}

TEST(Rng, UniformBelowIsUnbiased) {
  SplitMix64 g(1);
  std::vector<int> hist(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++hist[uniform_below(g, 7)];
  double chi2 = 0.0;
  for (int h : hist) chi2 += (h - n / 7.0) * (h - n / 7.0) / (n / 7.0);
  EXPECT_LT(chi2, 22.46);  // chi-square(6) upper 0.001 point
}

TEST(Rng, NormalMoments) {
  SplitMix64 g(3);
  const int n = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = standard_normal(g);
    s += x;
    ss += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.015);
}

TEST(Rng, PartialShuffleKeepsMultiset) {
  SplitMix64 g(5);
  std::vector<int> v(20);
  std::iota(v.begin(), v.end(), 0);
  partial_shuffle(v.begin(), v.end(), 5, g);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
}
