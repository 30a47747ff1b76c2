#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "swmcrt/sim.hpp"

using namespace swmcrt;

TEST(Sim, InteractionFunctions) {
  EXPECT_EQ(interaction_f(0, 3.7), 0.0);
  EXPECT_DOUBLE_EQ(interaction_f(1, 2.0), 4.0);
  EXPECT_DOUBLE_EQ(interaction_f(2, 0.0), 2.0);
  EXPECT_NEAR(interaction_f(3, 50.0), 5.0, 1e-12);
  EXPECT_THROW(interaction_f(4, 0.0), std::invalid_argument);
  EXPECT_THROW(interaction_f(-1, 0.0), std::invalid_argument);
}

TEST(Sim, NoiseFreeEffectIsExact) {
  SplitMix64 g(1);
  const OutcomeModel model{0.0, 0.0, 0.0, 0, {0.0, 0.0, 1.0}};
  const auto d = generate_trial(DesignSpec::balanced(30, 6), model, g);
  for (std::size_t i = 0; i < 30; ++i) {
    const int a = d.z.crossover(i);
    for (int t = 0; t <= 6; ++t) {
      const double expect = 0.5 * t + (t == a + 2 ? 1.0 : 0.0);
      EXPECT_DOUBLE_EQ(d.y.at(i, static_cast<std::size_t>(t)), expect);
    }
  }
}

TEST(Sim, TimeSlopeIsOneHalf) {
  SplitMix64 g(2);
  const Sim1Config c{2000, 6, 0, 0.0};
  const auto d = gen_outcomes_sim1(c, g);
  // least-squares slope of the per-time means
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (int t = 0; t <= 6; ++t) {
    double m = 0;
    for (std::size_t i = 0; i < 2000; ++i) m += d.y.at(i, static_cast<std::size_t>(t));
    m /= 2000;
    st += t;
    sy += m;
    stt += t * t;
    sty += t * m;
  }
  const double slope = (7 * sty - st * sy) / (7 * stt - st * st);
  EXPECT_NEAR(slope, 0.5, 0.01);
}

TEST(Sim, UnitEffectVariance) {
  SplitMix64 g(3);
  const OutcomeModel model{0.25, 0.0, 0.0, 0, {}};
  double s = 0, ss = 0;
  const std::size_t n = 100000;
  const auto d = generate_trial(DesignSpec::balanced(static_cast<int>(n), 4), model, g);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = d.y.at(i, 0);
    s += v;
    ss += v * v;
  }
  const double var = (ss - s * s / n) / (n - 1);
  EXPECT_NEAR(var, 0.25, 0.025);
}

TEST(Sim, QuadraticInteractionIsConvex) {
  SplitMix64 g(4);
  const OutcomeModel model{0.25, 0.25, 0.0, 1, {}};
  const auto d = generate_trial(DesignSpec::balanced(20, 8), model, g);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t t = 1; t < 8; ++t) {
      const double second = d.y.at(i, t + 1) - 2 * d.y.at(i, t) + d.y.at(i, t - 1);
      EXPECT_NEAR(second, 0.2, 1e-9);
    }
}

TEST(Sim, NoInteractionMatchesFirstGenerator) {
  const Sim1Config c1{50, 5, 2, 0.6};
  Sim2Config c2;
  c2.N = 50;
  c2.T = 5;
  c2.taus = {0.0, 0.0, 0.6};
  c2.interaction = 0;
  SplitMix64 g1(5), g2(5);
  const auto a = gen_outcomes_sim1(c1, g1), b = gen_outcomes_sim2(c2, g2);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.z, b.z);
}

TEST(Sim, ConfigValidation) {
  SplitMix64 g(6);
  EXPECT_THROW(gen_outcomes_sim1(Sim1Config{100, 6, 5, 0.0}, g), std::invalid_argument);
  EXPECT_THROW(gen_outcomes_sim1(Sim1Config{100, 6, 0, 0.0, 0.0}, g), std::invalid_argument);
  Sim2Config c;
  c.level = 1.0;
  EXPECT_THROW(gen_outcomes_sim2(c, g), std::invalid_argument);
  PowerStudyConfig p;
  p.replicates = 0;
  EXPECT_THROW(power_study(p), std::invalid_argument);
}

TEST(Sim, PowerStudyDeterministicAndOrdered) {
  PowerStudyConfig cfg;
  cfg.cells = {{"tau", 60, 4, 0, 0.0}, {"tau", 60, 4, 0, 0.3}, {"tau", 60, 4, 0, 0.6}, {"bad", 60, 4, 3, 0.0}};
  cfg.replicates = 200;
  cfg.budget = 99;
  const auto a = power_study(cfg);
  cfg.threads = 3;
  const auto b = power_study(cfg);
  EXPECT_EQ(power_csv(a.rows()), power_csv(b.rows()));
  ASSERT_EQ(a.cells.size(), 4u);
  EXPECT_FALSE(a.cells[3].skipped.empty());
  const auto rows = a.rows();
  ASSERT_EQ(rows.size(), 9u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.replicates, 200u);
    EXPECT_NEAR(r.stderr_, std::sqrt(r.rate * (1 - r.rate) / 200), 1e-15);
  }
  // size at tau = 0
  for (std::size_t q = 0; q < 3; ++q) EXPECT_LE(rows[q].rate, 0.05 + 3 * std::sqrt(0.05 * 0.95 / 200));
  // power increases with tau, per method
  for (std::size_t q = 0; q < 3; ++q) {
    EXPECT_LE(rows[q].rate, rows[3 + q].rate);
    EXPECT_LE(rows[3 + q].rate, rows[6 + q].rate);
  }
}

TEST(Sim, CoverageStudySmall) {
  CoverageStudyConfig cfg;
  cfg.N = 40;
  cfg.interactions = {0, 1};
  cfg.lags = {0, 2};
  cfg.replicates = 24;
  cfg.budget = 99;
  const auto a = coverage_study(cfg);
  cfg.threads = 4;
  const auto b = coverage_study(cfg);
  EXPECT_EQ(coverage_csv(a.rows), coverage_csv(b.rows));
  ASSERT_EQ(a.rows.size(), 2u * 2u * 2u);
  for (const auto& r : a.rows) {
    EXPECT_EQ(r.replicates, 24u);
    EXPECT_GE(r.coverage, 0.0);
    EXPECT_LE(r.coverage, 1.0);
  }
  cfg.level = 0.5;
  const auto c = coverage_study(cfg);
  for (std::size_t q = 0; q < c.rows.size(); ++q) EXPECT_LT(c.rows[q].mean_length, a.rows[q].mean_length);
}

TEST(Sim, CsvRoundTrip) {
  std::vector<PowerRow> p{{"N", 100, 8, 2, 0.03, "mcrt_fisher", 300, 17, 17.0 / 300, 0.0133},
                          {"tau", 300, 8, 2, 0.1 + 0.2, "bonferroni", 1, 0, 0.0, 0.0}};
  std::istringstream ps(power_csv(p));
  EXPECT_EQ(read_power_csv(ps), p);
  std::vector<CoverageRow> c{{1, 2, 0.6, "weighted_z", 0.9, 200, 181, 0.905, 0.0207, 0.41, 0.0031, 2}};
  std::istringstream cs(coverage_csv(c));
  EXPECT_EQ(read_coverage_csv(cs), c);
  EXPECT_EQ(power_csv({}), std::string(power_csv_header) + "\n");
  std::istringstream bad("study,N\n");
  EXPECT_THROW(read_power_csv(bad), std::runtime_error);
}
