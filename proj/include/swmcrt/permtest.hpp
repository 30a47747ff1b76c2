#pragma once

// Two-group permutation tests with exact and Monte-Carlo reference
// distributions.
//
// Both supported statistics are increasing functions of the sum of the
// (possibly rank-transformed) values assigned to the treated arm, so a
// relabeling is summarised by two numbers: the difference between its treated
// sum and the observed treated sum, and how many originally-treated units it
// moved to control.  That summary lets the same reference set be reused for
// shifted outcomes (treated - delta) without redrawing, which is what the
// confidence-interval code relies on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "swmcrt/rng.hpp"

namespace swmcrt {

enum class Statistic { diff_in_means, rank_sum };

inline std::string to_string(Statistic s) {
  return s == Statistic::diff_in_means ? "diff_in_means" : "rank_sum";
}

struct TwoGroupSample {
  std::vector<double> treated;
  std::vector<double> control;
  int scale_n = 1;  // N in the sqrt(N) factor

  std::size_t m() const noexcept { return treated.size(); }
  std::size_t n() const noexcept { return control.size(); }
};

inline void validate_sample(const TwoGroupSample& s) {
  if (s.treated.empty()) throw std::invalid_argument("treated arm is empty");
  if (s.control.empty()) throw std::invalid_argument("control arm is empty");
  if (s.scale_n < 1) throw std::invalid_argument("scale_n must be positive");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(s.treated.begin(), s.treated.end(), finite) ||
      !std::all_of(s.control.begin(), s.control.end(), finite))
    throw std::invalid_argument("outcomes must be finite");
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Unbiased sample variance (divisor size - 1); 0 for a single value.
inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return ss / static_cast<double>(v.size() - 1);
}

// sqrt(N) * (mean(treated) - mean(control))
inline double diff_in_means(const TwoGroupSample& s) {
  validate_sample(s);
  return std::sqrt(static_cast<double>(s.scale_n)) * (mean(s.treated) - mean(s.control));
}

// Midranks of the pooled values, treated first.
inline std::vector<double> pooled_midranks(const TwoGroupSample& s) {
  std::vector<double> pooled(s.treated);
  pooled.insert(pooled.end(), s.control.begin(), s.control.end());
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && pooled[order[j]] == pooled[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t q = i; q < j; ++q) ranks[order[q]] = r;
    i = j;
  }
  return ranks;
}

// Wilcoxon rank-sum: sum of treated midranks.
inline double rank_sum(const TwoGroupSample& s) {
  validate_sample(s);
  const auto r = pooled_midranks(s);
  return std::accumulate(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(s.m()), 0.0);
}

inline double compute_statistic(const TwoGroupSample& s, Statistic stat) {
  return stat == Statistic::diff_in_means ? diff_in_means(s) : rank_sum(s);
}

struct PermutationResult {
  double stat_obs = 0.0;
  double p_less = 1.0;     // P*(T* <= T_obs)
  double p_greater = 1.0;  // P*(T* >= T_obs)
  std::size_t n_resamples = 0;
  bool exact = false;
};

struct PermutationConfig {
  Statistic statistic = Statistic::diff_in_means;
  std::size_t budget = 999;  // Monte-Carlo resamples B
  std::uint64_t seed = default_seed;
  std::size_t exact_threshold = 20000;  // enumerate when C(m+n, m) <= this
};

// Number of relabelings C(m+n, m), saturating at `cap + 1`.
inline std::size_t relabeling_count(std::size_t m, std::size_t n, std::size_t cap) {
  const std::size_t k = std::min(m, n);
  long double c = 1.0L;
  for (std::size_t j = 1; j <= k; ++j) {
    c = c * static_cast<long double>(m + n - k + j) / static_cast<long double>(j);
    if (c > static_cast<long double>(cap)) return cap + 1;
  }
  return static_cast<std::size_t>(std::llround(c));
}

// A reference set of relabelings of one two-group sample.
class PermutationDistribution {
 public:
  PermutationDistribution(const TwoGroupSample& s, const PermutationConfig& cfg)
      : m_(s.m()), n_(s.n()), scale_n_(s.scale_n), statistic_(cfg.statistic) {
    validate_sample(s);
    if (cfg.budget == 0) throw std::invalid_argument("permutation budget must be >= 1");
    if (statistic_ == Statistic::diff_in_means) {
      values_ = s.treated;
      values_.insert(values_.end(), s.control.begin(), s.control.end());
    } else {
      values_ = pooled_midranks(s);
    }
    for (std::size_t i = 0; i < m_; ++i) obs_sum_ += values_[i];
    total_ = std::accumulate(values_.begin(), values_.end(), 0.0);
    for (double v : values_) abs_total_ += std::abs(v);

    const std::size_t c = relabeling_count(m_, n_, cfg.exact_threshold);
    if (c <= cfg.exact_threshold) {
      exact_ = true;
      enumerate(c);
    } else {
      exact_ = false;
      draw(cfg.budget, cfg.seed);
    }
  }

  std::size_t m() const noexcept { return m_; }
  std::size_t n() const noexcept { return n_; }
  bool exact() const noexcept { return exact_; }
  std::size_t n_resamples() const noexcept { return diff_.size(); }
  Statistic statistic() const noexcept { return statistic_; }

  // Observed statistic after subtracting delta from every treated outcome.
  double stat_obs(double delta = 0.0) const {
    if (statistic_ == Statistic::rank_sum) {
      require_unshifted(delta);
      return obs_sum_;
    }
    const double md = static_cast<double>(m_), nd = static_cast<double>(n_);
    return std::sqrt(static_cast<double>(scale_n_)) *
           (obs_sum_ / md - (total_ - obs_sum_) / nd - delta);
  }

  // (p_less, p_greater) for the outcomes shifted by delta on the treated arm.
  // For each relabeling, T*(delta) - T_obs(delta) is proportional to
  // diff + delta * moved with a positive factor, so the tails only need that.
  std::pair<double, double> tails(double delta = 0.0) const {
    if (statistic_ == Statistic::rank_sum) require_unshifted(delta);
    const double tol = 1e-10 * (1.0 + abs_total_ + static_cast<double>(m_) * std::abs(delta));
    std::size_t le = 0, ge = 0;
    for (std::size_t b = 0; b < diff_.size(); ++b) {
      const double d = diff_[b] + delta * static_cast<double>(moved_[b]);
      le += d <= tol;
      ge += d >= -tol;
    }
    if (exact_) {
      const auto c = static_cast<double>(diff_.size());
      return {static_cast<double>(le) / c, static_cast<double>(ge) / c};
    }
    const auto b1 = static_cast<double>(diff_.size() + 1);
    return {static_cast<double>(le + 1) / b1, static_cast<double>(ge + 1) / b1};
  }

  PermutationResult result(double delta = 0.0) const {
    const auto [lo, hi] = tails(delta);
    return PermutationResult{stat_obs(delta), lo, hi, diff_.size(), exact_};
  }

  // Statistic under each stored relabeling, unshifted.
  std::vector<double> reference_statistics() const {
    const double md = static_cast<double>(m_), nd = static_cast<double>(n_);
    const double scale = std::sqrt(static_cast<double>(scale_n_));
    std::vector<double> out;
    out.reserve(diff_.size());
    for (double d : diff_) {
      const double sum = obs_sum_ + d;
      out.push_back(statistic_ == Statistic::rank_sum ? sum : scale * (sum / md - (total_ - sum) / nd));
    }
    return out;
  }

 private:
  void require_unshifted(double delta) const {
    if (delta != 0.0) throw std::invalid_argument("rank-sum reference set cannot be shifted");
  }

  void record(double treated_sum, std::size_t kept) {
    diff_.push_back(treated_sum - obs_sum_);
    moved_.push_back(static_cast<std::uint32_t>(m_ - kept));
  }

  void enumerate(std::size_t c) {
    diff_.reserve(c);
    moved_.reserve(c);
    const std::size_t total = m_ + n_;
    std::vector<std::size_t> idx(m_);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (;;) {
      double sum = 0.0;
      std::size_t kept = 0;
      for (auto i : idx) {
        sum += values_[i];
        kept += i < m_;
      }
      record(sum, kept);
      // next combination in lexicographic order
      std::size_t pos = m_;
      while (pos > 0 && idx[pos - 1] == total - m_ + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t q = pos; q < m_; ++q) idx[q] = idx[q - 1] + 1;
    }
  }

  void draw(std::size_t budget, std::uint64_t seed) {
    diff_.reserve(budget);
    moved_.reserve(budget);
    const std::size_t total = m_ + n_;
    const bool pick_treated = m_ <= n_;
    const std::size_t k = pick_treated ? m_ : n_;
    std::vector<std::uint32_t> perm(total);
    std::iota(perm.begin(), perm.end(), 0u);
    std::vector<std::size_t> swaps(k);
    for (std::size_t b = 0; b < budget; ++b) {
      SplitMix64 gen(derive_seed(seed, {b}));
      double sum = 0.0;
      std::size_t from_treated = 0;
      for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(gen, total - i));
        swaps[i] = j;
        std::swap(perm[i], perm[j]);
        sum += values_[perm[i]];
        from_treated += perm[i] < m_;
      }
      if (pick_treated) {
        record(sum, from_treated);
      } else {
        // drew the control arm; treated = complement
        record(total_ - sum, m_ - from_treated);
      }
      for (std::size_t i = k; i-- > 0;) std::swap(perm[i], perm[swaps[i]]);
    }
  }

  std::size_t m_, n_;
  int scale_n_;
  Statistic statistic_;
  bool exact_ = false;
  std::vector<double> values_;
  double obs_sum_ = 0.0;
  double total_ = 0.0;
  double abs_total_ = 0.0;
  std::vector<double> diff_;
  std::vector<std::uint32_t> moved_;
};

inline PermutationResult permutation_pvalue(const TwoGroupSample& s, const PermutationConfig& cfg) {
  return PermutationDistribution(s, cfg).result();
}

// Difference-in-means under one uniformly random relabeling of the pooled
// sample.
template <class Gen>
double permuted_diff_in_means(const TwoGroupSample& s, Gen& gen) {
  std::vector<double> pooled(s.treated);
  pooled.insert(pooled.end(), s.control.begin(), s.control.end());
  partial_shuffle(pooled.begin(), pooled.end(), s.m(), gen);
  const auto md = static_cast<std::ptrdiff_t>(s.m());
  const double s1 = std::accumulate(pooled.begin(), pooled.begin() + md, 0.0);
  const double s0 = std::accumulate(pooled.begin() + md, pooled.end(), 0.0);
  return std::sqrt(static_cast<double>(s.scale_n)) *
         (s1 / static_cast<double>(s.m()) - s0 / static_cast<double>(s.n()));
}

}  // namespace swmcrt
