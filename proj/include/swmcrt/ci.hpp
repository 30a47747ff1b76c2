#pragma once

// Confidence intervals for a constant lagged effect by inverting permutation
// tests (or a combination of them) over a grid of hypothesised effects.
//
// Every hypothesised effect reuses the same reference relabelings, so each
// tail p-value is an exactly monotone function of the shift:
//   P1(delta) = P*(T* <= T_obs) is non-increasing,
//   P2(delta) = P*(T* >= T_obs) is non-decreasing.
// The interval is [min{delta : P2 >= alpha/2}, max{delta : P1 >= alpha/2}].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "swmcrt/combine.hpp"
#include "swmcrt/mcrt.hpp"
#include "swmcrt/parallel.hpp"
#include "swmcrt/permtest.hpp"

namespace swmcrt {

struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;
};

struct CIConfig {
  double alpha = 0.1;
  std::optional<GridSpec> grid;  // default: point estimate +- 6 standard errors, 121 points
  bool refine = true;
  int refine_iters = 20;
  std::size_t budget = 999;
  std::size_t exact_threshold = 20000;
  std::uint64_t seed = default_seed;
  unsigned threads = 1;
};

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;
  double grid_resolution = 0.0;

  double length() const noexcept { return hi - lo; }
  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

// The grid did not bracket the acceptance region, or the region was empty.
class InversionError : public std::runtime_error {
 public:
  InversionError(const std::string& what, double p1_lo, double p2_lo, double p1_hi, double p2_hi)
      : std::runtime_error(what), p1_at_lo(p1_lo), p2_at_lo(p2_lo), p1_at_hi(p1_hi), p2_at_hi(p2_hi) {}

  double p1_at_lo, p2_at_lo, p1_at_hi, p2_at_hi;
};

inline void validate_ci_config(const CIConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (cfg.grid) {
    if (!(cfg.grid->lo < cfg.grid->hi)) throw std::invalid_argument("grid needs lo < hi");
    if (!(cfg.grid->step > 0.0)) throw std::invalid_argument("grid step must be positive");
  }
  if (cfg.refine && cfg.refine_iters < 0) throw std::invalid_argument("refine_iters must be non-negative");
  if (cfg.budget == 0) throw std::invalid_argument("budget must be >= 1");
}

inline TwoGroupSample shift_outcomes(const TwoGroupSample& s, double delta) {
  TwoGroupSample out = s;
  for (auto& y : out.treated) y -= delta;
  return out;
}

inline PermutationConfig ci_permutation_config(const CIConfig& cfg, std::uint64_t seed) {
  return PermutationConfig{Statistic::diff_in_means, cfg.budget, seed, cfg.exact_threshold};
}

// (P1, P2) on the sample with treated outcomes shifted by delta.
inline std::pair<double, double> tail_pvalues(const TwoGroupSample& s, double delta, const CIConfig& cfg) {
  return PermutationDistribution(shift_outcomes(s, delta), ci_permutation_config(cfg, cfg.seed)).tails();
}

namespace detail {

using TailCurve = std::function<std::pair<double, double>(double)>;

inline std::vector<double> grid_points(const GridSpec& g) {
  std::vector<double> pts;
  const auto n = static_cast<std::size_t>(std::floor((g.hi - g.lo) / g.step + 1e-9)) + 1;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(g.lo + static_cast<double>(i) * g.step);
  return pts;
}

inline std::vector<double> centered_points(double center, double se, std::size_t count = 121, double width_se = 6.0) {
  if (!(se > 0.0) || !std::isfinite(se)) se = 1e-3 * std::max(1.0, std::abs(center));
  const double step = 2.0 * width_se * se / static_cast<double>(count - 1);
  const auto mid = static_cast<long>(count / 2);
  std::vector<double> pts;
  pts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) pts.push_back(center + static_cast<double>(static_cast<long>(i) - mid) * step);
  return pts;
}

inline ConfidenceInterval invert_curve(const TailCurve& curve, const std::vector<double>& pts, const CIConfig& cfg) {
  const std::size_t n = pts.size();
  if (n < 2) throw std::invalid_argument("grid needs at least two points");
  std::vector<double> p1(n), p2(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) { std::tie(p1[i], p2[i]) = curve(pts[i]); });
  // isotonic cleanup in the conservative direction
  for (std::size_t i = 1; i < n; ++i) p2[i] = std::max(p2[i], p2[i - 1]);
  for (std::size_t i = n - 1; i-- > 0;) p1[i] = std::max(p1[i], p1[i + 1]);

  // Boundary ties (P == alpha/2) count as not rejected.
  const double thr = 0.5 * cfg.alpha * (1.0 - 1e-12);
  auto fail = [&](const std::string& why) {
    return InversionError(why + "; widen the grid", p1.front(), p2.front(), p1.back(), p2.back());
  };

  std::size_t first = n;
  for (std::size_t i = 0; i < n; ++i)
    if (p2[i] >= thr) {
      first = i;
      break;
    }
  std::size_t last = n;
  for (std::size_t i = n; i-- > 0;)
    if (p1[i] >= thr) {
      last = i;
      break;
    }
  if (first == n) throw fail("P2 never exceeds alpha/2 on the grid");
  if (last == n) throw fail("P1 never exceeds alpha/2 on the grid");
  if (first == 0) throw fail("lower bound lies below the grid");
  if (last == n - 1) throw fail("upper bound lies above the grid");

  double step = pts[1] - pts[0];
  double lo = pts[first];
  double hi = pts[last];
  double resolution = step;
  if (cfg.refine && cfg.refine_iters > 0) {
    double fail_lo = pts[first - 1], pass_lo = lo;
    double pass_hi = hi, fail_hi = pts[last + 1];
    for (int it = 0; it < cfg.refine_iters; ++it) {
      const double mid_lo = 0.5 * (fail_lo + pass_lo);
      (curve(mid_lo).second >= thr ? pass_lo : fail_lo) = mid_lo;
      const double mid_hi = 0.5 * (pass_hi + fail_hi);
      (curve(mid_hi).first >= thr ? pass_hi : fail_hi) = mid_hi;
    }
    lo = pass_lo;
    hi = pass_hi;
    resolution = step / std::ldexp(1.0, cfg.refine_iters);
  }
  if (lo > hi)
    throw InversionError("acceptance region is empty", p1.front(), p2.front(), p1.back(), p2.back());
  return ConfidenceInterval{lo, hi, 1.0 - cfg.alpha, resolution};
}

}  // namespace detail

inline ConfidenceInterval invert_single(const TwoGroupSample& s, const CIConfig& cfg) {
  validate_ci_config(cfg);
  validate_sample(s);
  PermutationDistribution dist(s, ci_permutation_config(cfg, cfg.seed));
  std::vector<double> pts;
  if (cfg.grid) {
    pts = detail::grid_points(*cfg.grid);
  } else {
    const double est = mean(s.treated) - mean(s.control);
    const double se = std::sqrt(sample_variance(s.treated) / static_cast<double>(s.m()) +
                                sample_variance(s.control) / static_cast<double>(s.n()));
    pts = detail::centered_points(est, se);
  }
  return detail::invert_curve([&](double d) { return dist.tails(d); }, pts, cfg);
}

// Inverse-variance pooled difference in means and its standard error.
inline std::pair<double, double> pooled_estimate(const PreparedTests& p) {
  double num = 0.0, den = 0.0, plain = 0.0;
  bool degenerate = false;
  for (const auto& t : p.tests) {
    const auto& o = t.outcome;
    const double d = o.mean_treated - o.mean_control;
    const double v = o.var_treated / static_cast<double>(o.n_treated) + o.var_control / static_cast<double>(o.n_control);
    plain += d;
    if (v > 0.0) {
      num += d / v;
      den += 1.0 / v;
    } else {
      degenerate = true;
    }
  }
  if (p.tests.empty()) throw std::invalid_argument("no tests");
  if (degenerate || den == 0.0) return {plain / static_cast<double>(p.tests.size()), 0.0};
  return {num / den, 1.0 / std::sqrt(den)};
}

// Inverts the combined test on already prepared lag-l tests.
inline ConfidenceInterval invert_prepared(const PreparedTests& prep, const CIConfig& cfg, Combiner combiner) {
  validate_ci_config(cfg);
  if (prep.tests.empty()) throw std::invalid_argument("no MCRT group survived; cannot build an interval");
  WeightVector w;
  if (combiner == Combiner::weighted_z) w = weights_from_result(summarize(prep));
  std::size_t resamples = 0;
  for (const auto& t : prep.tests) resamples = std::max(resamples, t.distribution.n_resamples());
  const std::size_t k = prep.tests.size();
  auto curve = [&](double delta) {
    std::vector<double> p1(k), p2(k);
    for (std::size_t q = 0; q < k; ++q) std::tie(p1[q], p2[q]) = prep.tests[q].distribution.tails(delta);
    const WeightVector* wp = combiner == Combiner::weighted_z ? &w : nullptr;
    return std::make_pair(combine(combiner, p1, wp, resamples).p, combine(combiner, p2, wp, resamples).p);
  };
  std::vector<double> pts;
  if (cfg.grid) {
    pts = detail::grid_points(*cfg.grid);
  } else {
    const auto [est, se] = pooled_estimate(prep);
    pts = detail::centered_points(est, se);
  }
  return detail::invert_curve(curve, pts, cfg);
}

inline ConfidenceInterval invert_combined(const TrialData& data, int lag, const CIConfig& cfg, Combiner combiner) {
  TestConfig tc;
  tc.budget = cfg.budget;
  tc.exact_threshold = cfg.exact_threshold;
  tc.seed = cfg.seed;
  tc.threads = cfg.threads;
  return invert_prepared(prepare_mcrts(data, lag, tc), cfg, combiner);
}

}  // namespace swmcrt
