#pragma once

// Multiple conditional randomization tests for a lag-l effect in a
// stepped-wedge trial: split the crossover times into J interleaved subsets,
// then within each subset compare units crossing over at k against units
// crossing over at the later times of the same subset, on the outcome at
// time k + l.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "swmcrt/design.hpp"
#include "swmcrt/parallel.hpp"
#include "swmcrt/permtest.hpp"

namespace swmcrt {

struct LagSchedule {
  int n_times = 0;
  int lag = 0;
  std::vector<std::vector<int>> subsets;  // C_1..C_J

  std::size_t n_subsets() const noexcept { return subsets.size(); }
  friend bool operator==(const LagSchedule&, const LagSchedule&) = default;
};

inline LagSchedule build_schedule(int n_times, int lag) {
  if (n_times < 1) throw std::invalid_argument("number of time steps must be positive");
  if (lag < 0) throw std::invalid_argument("lag must be non-negative");
  if (lag > n_times - 2)
    throw std::invalid_argument("lag " + std::to_string(lag) + " leaves no testable pair of crossover times for T=" +
                                std::to_string(n_times) + " (need lag <= T-2)");
  LagSchedule s{n_times, lag, {}};
  const int n_subsets = std::min(lag + 1, n_times - lag - 1);
  for (int j = 1; j <= n_subsets; ++j) {
    std::vector<int> c{j};
    for (int t = j; t + lag + 1 <= n_times;) {
      t += lag + 1;
      c.push_back(t);
    }
    s.subsets.push_back(std::move(c));
  }
  return s;
}

struct LagTestGroup {
  int k = 0;              // crossover time of the treated arm
  int subset = 0;         // 1-based index j of the subset holding k (0 for naive groups)
  int outcome_time = 0;   // k + lag
  std::vector<int> control_times;
  std::vector<std::size_t> treated_idx;
  std::vector<std::size_t> control_idx;
};

namespace detail {

inline LagTestGroup make_group(const CrossoverTimes& a, int k, int subset, int lag,
                               std::vector<int> control_times) {
  LagTestGroup g;
  g.k = k;
  g.subset = subset;
  g.outcome_time = k + lag;
  g.control_times = std::move(control_times);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == k)
      g.treated_idx.push_back(i);
    else if (std::find(g.control_times.begin(), g.control_times.end(), a[i]) != g.control_times.end())
      g.control_idx.push_back(i);
  }
  return g;
}

}  // namespace detail

// One group per k that has a later element in its own subset, sorted by k.
inline std::vector<LagTestGroup> build_groups(const CrossoverTimes& a, const LagSchedule& schedule) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 1 || a[i] > schedule.n_times)
      throw std::invalid_argument("crossover time of unit " + std::to_string(i) + " is outside the schedule");
  }
  std::vector<LagTestGroup> groups;
  for (std::size_t j = 0; j < schedule.subsets.size(); ++j) {
    const auto& c = schedule.subsets[j];
    for (std::size_t q = 0; q + 1 < c.size(); ++q) {
      groups.push_back(detail::make_group(a, c[q], static_cast<int>(j + 1), schedule.lag,
                                          std::vector<int>(c.begin() + static_cast<std::ptrdiff_t>(q + 1), c.end())));
    }
  }
  std::sort(groups.begin(), groups.end(), [](const auto& x, const auto& y) { return x.k < y.k; });
  return groups;
}

// The non-nested groups: treated at t against every unit crossing over after
// t + lag.  Used only as the Bonferroni baseline.
inline std::vector<LagTestGroup> build_naive_groups(const CrossoverTimes& a, int n_times, int lag) {
  if (lag < 0 || lag > n_times - 2) throw std::invalid_argument("lag out of range");
  std::vector<LagTestGroup> groups;
  for (int t = 1; t + lag + 1 <= n_times; ++t) {
    std::vector<int> ctl;
    for (int s = t + lag + 1; s <= n_times; ++s) ctl.push_back(s);
    groups.push_back(detail::make_group(a, t, 0, lag, std::move(ctl)));
  }
  return groups;
}

// N x (T+1) outcome panel; column t is the outcome at time t (0 = baseline).
class OutcomePanel {
 public:
  OutcomePanel() = default;
  OutcomePanel(std::size_t n_units, std::size_t n_cols)
      : n_units_(n_units), n_cols_(n_cols), data_(n_units * n_cols, 0.0) {}

  std::size_t n_units() const noexcept { return n_units_; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  double& at(std::size_t i, std::size_t t) { return data_.at(i * n_cols_ + t); }
  double at(std::size_t i, std::size_t t) const { return data_.at(i * n_cols_ + t); }

  friend bool operator==(const OutcomePanel&, const OutcomePanel&) = default;

 private:
  std::size_t n_units_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<double> data_;
};

struct TrialData {
  AssignmentMatrix z;
  OutcomePanel y;
  std::vector<std::string> unit_ids;  // optional labels, empty means 0..N-1

  TrialData(AssignmentMatrix z_, OutcomePanel y_, std::vector<std::string> ids = {})
      : z(std::move(z_)), y(std::move(y_)), unit_ids(std::move(ids)) {
    if (y.n_units() != static_cast<std::size_t>(z.n_units()))
      throw std::invalid_argument("outcome panel has " + std::to_string(y.n_units()) + " rows for " +
                                  std::to_string(z.n_units()) + " units");
    if (y.n_cols() < static_cast<std::size_t>(z.n_times()) + 1)
      throw std::invalid_argument("outcome panel must cover times 0..T");
    if (!unit_ids.empty() && unit_ids.size() != y.n_units())
      throw std::invalid_argument("unit id count does not match panel");
  }

  int n_units() const noexcept { return z.n_units(); }
  int n_times() const noexcept { return z.n_times(); }
};

inline TwoGroupSample group_sample(const TrialData& data, const LagTestGroup& g) {
  TwoGroupSample s;
  s.scale_n = data.n_units();
  const auto t = static_cast<std::size_t>(g.outcome_time);
  for (auto i : g.treated_idx) s.treated.push_back(data.y.at(i, t));
  for (auto i : g.control_idx) s.control.push_back(data.y.at(i, t));
  return s;
}

struct TestConfig {
  Statistic statistic = Statistic::diff_in_means;
  std::size_t budget = 999;
  std::size_t exact_threshold = 20000;
  std::uint64_t seed = default_seed;
  std::size_t min_arm = 2;
  unsigned threads = 1;
};

struct TestOutcome {
  LagTestGroup group;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  double mean_treated = 0.0;
  double mean_control = 0.0;
  double var_treated = 0.0;
  double var_control = 0.0;
  PermutationResult result;
};

struct SkippedTest {
  int k = 0;
  std::string reason;
};

struct McrtResult {
  int lag = 0;
  int n_units = 0;
  std::vector<TestOutcome> tests;  // increasing k
  std::vector<SkippedTest> skipped;

  std::size_t n_tests() const noexcept { return tests.size(); }
};

// A test together with its reference set, kept for re-evaluation at shifted
// outcomes.
struct PreparedTest {
  TestOutcome outcome;
  TwoGroupSample sample;
  PermutationDistribution distribution;
};

struct PreparedTests {
  int lag = 0;
  int n_units = 0;
  std::vector<PreparedTest> tests;
  std::vector<SkippedTest> skipped;
};

// Per-test stream: (seed, k, tag) so adding or removing one test leaves the
// others untouched.
inline std::uint64_t test_seed(std::uint64_t seed, int k, std::uint64_t tag = 0) {
  return derive_seed(seed, {static_cast<std::uint64_t>(k), tag});
}

inline PreparedTests prepare_tests(const TrialData& data, const std::vector<LagTestGroup>& groups, int lag,
                                   const TestConfig& cfg, std::uint64_t tag = 0) {
  PreparedTests out;
  out.lag = lag;
  out.n_units = data.n_units();
  std::vector<std::optional<PreparedTest>> slots(groups.size());
  std::vector<std::string> reasons(groups.size());
  for (std::size_t q = 0; q < groups.size(); ++q) {
    const auto& g = groups[q];
    if (g.outcome_time > data.n_times()) reasons[q] = "outcome time beyond T";
    else if (g.treated_idx.size() < cfg.min_arm)
      reasons[q] = "treated arm has " + std::to_string(g.treated_idx.size()) + " unit(s), need " + std::to_string(cfg.min_arm);
    else if (g.control_idx.size() < cfg.min_arm)
      reasons[q] = "control arm has " + std::to_string(g.control_idx.size()) + " unit(s), need " + std::to_string(cfg.min_arm);
  }
  parallel_for(groups.size(), cfg.threads, [&](std::size_t q) {
    if (!reasons[q].empty()) return;
    const auto& g = groups[q];
    TwoGroupSample s = group_sample(data, g);
    PermutationConfig pc{cfg.statistic, cfg.budget, test_seed(cfg.seed, g.k, tag), cfg.exact_threshold};
    PermutationDistribution dist(s, pc);
    TestOutcome o;
    o.group = g;
    o.n_treated = s.m();
    o.n_control = s.n();
    o.mean_treated = mean(s.treated);
    o.mean_control = mean(s.control);
    o.var_treated = sample_variance(s.treated);
    o.var_control = sample_variance(s.control);
    o.result = dist.result();
    slots[q].emplace(PreparedTest{std::move(o), std::move(s), std::move(dist)});
  });
  for (std::size_t q = 0; q < groups.size(); ++q) {
    if (slots[q]) out.tests.push_back(std::move(*slots[q]));
    else out.skipped.push_back({groups[q].k, reasons[q]});
  }
  return out;
}

inline void check_trial_for_lag(const TrialData& data, int lag) {
  if (lag < 0 || lag > data.n_times() - 2)
    throw std::invalid_argument("lag " + std::to_string(lag) + " out of range 0.." + std::to_string(data.n_times() - 2));
}

inline PreparedTests prepare_mcrts(const TrialData& data, int lag, const TestConfig& cfg) {
  check_trial_for_lag(data, lag);
  const auto schedule = build_schedule(data.n_times(), lag);
  return prepare_tests(data, build_groups(crossover_times(data.z), schedule), lag, cfg, 0);
}

inline PreparedTests prepare_naive_tests(const TrialData& data, int lag, const TestConfig& cfg) {
  check_trial_for_lag(data, lag);
  return prepare_tests(data, build_naive_groups(crossover_times(data.z), data.n_times(), lag), lag, cfg, 1);
}

inline McrtResult summarize(const PreparedTests& p) {
  McrtResult r;
  r.lag = p.lag;
  r.n_units = p.n_units;
  r.skipped = p.skipped;
  for (const auto& t : p.tests) r.tests.push_back(t.outcome);
  return r;
}

inline McrtResult run_mcrts(const TrialData& data, int lag, const TestConfig& cfg) {
  return summarize(prepare_mcrts(data, lag, cfg));
}

inline McrtResult run_naive_tests(const TrialData& data, int lag, const TestConfig& cfg) {
  return summarize(prepare_naive_tests(data, lag, cfg));
}

// Units whose outcome at t + lag is imputable under the lag-l constant-effect
// hypothesis for crossover time t: under both assignments the unit either
// crosses over exactly at t or has not crossed over by t + lag.
inline std::vector<std::size_t> imputable_units(const AssignmentMatrix& z, const AssignmentMatrix& z_star, int t,
                                                int lag) {
  if (!(z.spec() == z_star.spec())) throw std::invalid_argument("assignments come from different designs");
  if (t < 1 || lag < 0 || t + lag > z.n_times()) throw std::invalid_argument("t + lag must lie in 1..T");
  auto ok = [&](int a) { return a == t || a > t + lag; };
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < static_cast<std::size_t>(z.n_units()); ++i)
    if (ok(z.crossover(i)) && ok(z_star.crossover(i))) out.push_back(i);
  return out;
}

}  // namespace swmcrt
