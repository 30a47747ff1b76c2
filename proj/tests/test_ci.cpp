#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "swmcrt/ci.hpp"
#include "swmcrt/rng.hpp"

using namespace swmcrt;

namespace {

TwoGroupSample normal_sample(std::size_t m, std::size_t n, std::uint64_t seed, double shift) {
  SplitMix64 g(seed);
  TwoGroupSample s;
  s.scale_n = static_cast<int>(m + n);
  for (std::size_t i = 0; i < m; ++i) s.treated.push_back(standard_normal(g) + shift);
  for (std::size_t i = 0; i < n; ++i) s.control.push_back(standard_normal(g));
  return s;
}

// Exact interval by brute force: the endpoints sit where a relabeled
// difference in means equals the observed one.
std::pair<double, double> brute_force_interval(const TwoGroupSample& s, double alpha) {
  const std::size_t m = s.m(), n = s.n(), N = m + n;
  std::vector<unsigned> masks;
  for (unsigned mask = 0; mask < (1u << N); ++mask)
    if (static_cast<std::size_t>(__builtin_popcount(mask)) == m) masks.push_back(mask);
  auto tails = [&](double delta) {
    std::vector<double> pooled;
    for (double y : s.treated) pooled.push_back(y - delta);
    pooled.insert(pooled.end(), s.control.begin(), s.control.end());
    auto dm = [&](unsigned mask) {
      double a = 0, b = 0;
      for (std::size_t i = 0; i < N; ++i) ((mask >> i) & 1u ? a : b) += pooled[i];
      return a / static_cast<double>(m) - b / static_cast<double>(n);
    };
    const double obs = dm((1u << m) - 1u);
    double le = 0, ge = 0;
    for (auto mask : masks) {
      const double v = dm(mask);
      le += v <= obs + 1e-9;
      ge += v >= obs - 1e-9;
    }
    return std::make_pair(le / static_cast<double>(masks.size()), ge / static_cast<double>(masks.size()));
  };
  // relabeled treated sum equals the observed one once treated values are
  // shifted by delta
  std::vector<double> pts;
  for (auto mask : masks) {
    double relab = 0, obs = 0;
    int moved = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double y = i < m ? s.treated[i] : s.control[i - m];
      if (i < m) obs += y;
      if ((mask >> i) & 1u) {
        relab += y;
        moved += i >= m ? 1 : 0;
      }
    }
    if (moved > 0) pts.push_back((obs - relab) / static_cast<double>(moved));
  }
  std::sort(pts.begin(), pts.end());
  const double thr = alpha / 2 * (1 - 1e-12);
  double lo = NAN, hi = NAN;
  for (double d : pts)
    if (tails(d).second >= thr) {
      lo = d;
      break;
    }
  for (auto it = pts.rbegin(); it != pts.rend(); ++it)
    if (tails(*it).first >= thr) {
      hi = *it;
      break;
    }
  return {lo, hi};
}

}  // namespace

TEST(Ci, ExactIntervalMatchesBruteForce) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto s = normal_sample(4, 4, seed, 1.0);
    CIConfig cfg;
    cfg.alpha = 0.1;
    cfg.refine_iters = 40;
    const auto ci = invert_single(s, cfg);
    const auto [lo, hi] = brute_force_interval(s, 0.1);
    EXPECT_NEAR(ci.lo, lo, 1e-8) << seed;
    EXPECT_NEAR(ci.hi, hi, 1e-8) << seed;
    EXPECT_DOUBLE_EQ(ci.level, 0.9);
  }
}

TEST(Ci, ShiftEquivariance) {
  const auto s = normal_sample(15, 20, 3, 0.5);
  CIConfig cfg;
  const auto a = invert_single(s, cfg);
  auto t = s;
  for (auto& y : t.treated) y += 2.0;
  const auto b = invert_single(t, cfg);
  EXPECT_NEAR(b.lo, a.lo + 2.0, 1e-6);
  EXPECT_NEAR(b.hi, a.hi + 2.0, 1e-6);
}

TEST(Ci, LowerLevelGivesShorterInterval) {
  const auto s = normal_sample(15, 20, 4, 0.5);
  CIConfig c90, c50;
  c50.alpha = 0.5;
  const auto a = invert_single(s, c90), b = invert_single(s, c50);
  EXPECT_LT(b.length(), a.length());
  EXPECT_LE(a.lo, b.lo);
  EXPECT_GE(a.hi, b.hi);
}

TEST(Ci, NarrowGridFailsToBracket) {
  const auto s = normal_sample(10, 10, 5, 0.0);
  CIConfig cfg;
  cfg.grid = GridSpec{5.0, 6.0, 0.1};
  EXPECT_THROW(invert_single(s, cfg), InversionError);
  cfg.grid = GridSpec{-0.01, 0.01, 0.005};
  EXPECT_THROW(invert_single(s, cfg), InversionError);
  cfg.grid = GridSpec{1.0, 0.0, 0.1};
  EXPECT_THROW(invert_single(s, cfg), std::invalid_argument);
}

TEST(Ci, SingleTestCombinationMatchesSingleInversion) {
  const DesignSpec spec({10, 12});
  SplitMix64 g(8);
  auto z = sample_assignment(spec, g);
  OutcomePanel y(22, 3);
  for (std::size_t i = 0; i < 22; ++i)
    for (std::size_t t = 0; t < 3; ++t) y.at(i, t) = standard_normal(g) + (z.crossover(i) == 1 && t == 1 ? 0.7 : 0.0);
  const TrialData data(std::move(z), std::move(y));
  CIConfig cfg;
  cfg.seed = 99;
  const auto combined = invert_combined(data, 0, cfg, Combiner::fisher);
  const auto groups = build_groups(crossover_times(data.z), build_schedule(2, 0));
  ASSERT_EQ(groups.size(), 1u);
  CIConfig single = cfg;
  single.seed = test_seed(cfg.seed, groups[0].k, 0);
  const auto direct = invert_single(group_sample(data, groups[0]), single);
  EXPECT_NEAR(combined.lo, direct.lo, 1e-12);
  EXPECT_NEAR(combined.hi, direct.hi, 1e-12);
}

TEST(Ci, CoverageOfSingleTest) {
  const int reps = 300;
  int covered = 0;
  for (int r = 0; r < reps; ++r) {
    const auto s = normal_sample(10, 10, 500 + static_cast<std::uint64_t>(r), 1.0);
    CIConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(r);
    cfg.budget = 499;
    cfg.refine_iters = 12;
    covered += invert_single(s, cfg).contains(1.0);
  }
  const double rate = static_cast<double>(covered) / reps;
  EXPECT_GE(rate, 0.9 - 3.0 * std::sqrt(0.09 / reps));
}
