#pragma once

// Combining the per-test one-sided p-values: Fisher, Bonferroni, and the
// weighted Z-score combiner whose weights are the square roots of the
// normalised inverse asymptotic variances of the difference-in-means tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "swmcrt/mcrt.hpp"

namespace swmcrt {

enum class Combiner { fisher, weighted_z, bonferroni };
enum class Alternative { greater, less, two_sided };

inline std::string to_string(Combiner c) {
  switch (c) {
    case Combiner::fisher: return "fisher";
    case Combiner::weighted_z: return "weighted_z";
    case Combiner::bonferroni: return "bonferroni";
  }
  return {};
}

inline Combiner parse_combiner(const std::string& s) {
  if (s == "fisher") return Combiner::fisher;
  if (s == "weighted_z" || s == "weighted-z" || s == "z") return Combiner::weighted_z;
  if (s == "bonferroni") return Combiner::bonferroni;
  throw std::invalid_argument("unknown combiner '" + s + "'");
}

inline std::string to_string(Alternative a) {
  switch (a) {
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
    case Alternative::two_sided: return "two_sided";
  }
  return {};
}

inline Alternative parse_alternative(const std::string& s) {
  if (s == "greater") return Alternative::greater;
  if (s == "less") return Alternative::less;
  if (s == "two_sided" || s == "two-sided") return Alternative::two_sided;
  throw std::invalid_argument("unknown alternative '" + s + "'");
}

inline double normal_cdf(double x) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  return boost::math::cdf(boost::math::normal_distribution<double>(), x);
}

inline double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

// Upper tail of chi-square with `df` degrees of freedom.
inline double chi_square_upper(double x, double df) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

struct WeightVector {
  std::vector<double> lambdas;
  std::vector<double> weights;
};

struct CombinedPValue {
  Combiner method = Combiner::weighted_z;
  double statistic = 0.0;
  double p = 1.0;
  std::vector<double> inputs;
};

// Lambda = (N/n0 * Var1 + N/n1 * Var0)^-1 with the arm sample variances
// plugged in.  The treated variance is divided by the control size and vice
// versa.
inline double estimate_lambda(double var_treated, double var_control, std::size_t n_treated, std::size_t n_control,
                              int n_units) {
  if (n_treated < 2 || n_control < 2) throw std::invalid_argument("lambda needs at least two units per arm");
  if (n_units < 1) throw std::invalid_argument("N must be positive");
  if (var_treated < 0.0 || var_control < 0.0) throw std::invalid_argument("variances must be non-negative");
  const double n = n_units;
  const double v = n / static_cast<double>(n_control) * var_treated + n / static_cast<double>(n_treated) * var_control;
  if (!(v > 0.0)) throw std::invalid_argument("both arms have zero variance; weight undefined");
  return 1.0 / v;
}

inline double estimate_lambda(const TwoGroupSample& s) {
  return estimate_lambda(sample_variance(s.treated), sample_variance(s.control), s.m(), s.n(), s.scale_n);
}

inline WeightVector make_weights(std::vector<double> lambdas) {
  if (lambdas.empty()) throw std::invalid_argument("no tests to weight");
  const double total = std::accumulate(lambdas.begin(), lambdas.end(), 0.0);
  WeightVector w;
  w.weights.reserve(lambdas.size());
  for (double l : lambdas) {
    if (!(l > 0.0) || !std::isfinite(l)) throw std::invalid_argument("lambdas must be positive and finite");
    w.weights.push_back(std::sqrt(l / total));
  }
  w.lambdas = std::move(lambdas);
  return w;
}

inline WeightVector equal_weights(std::size_t k) { return make_weights(std::vector<double>(k, 1.0)); }

// Normalised jointly over every surviving test from every subset.
inline WeightVector weights_from_result(const McrtResult& r) {
  if (r.tests.empty()) throw std::invalid_argument("all tests were skipped; nothing to weight");
  std::vector<double> lambdas;
  lambdas.reserve(r.tests.size());
  for (const auto& t : r.tests)
    lambdas.push_back(estimate_lambda(t.var_treated, t.var_control, t.n_treated, t.n_control, r.n_units));
  auto w = make_weights(std::move(lambdas));
  double sq = 0.0;
  for (double x : w.weights) sq += x * x;
  if (std::abs(sq - 1.0) > 1e-9) throw std::logic_error("squared weights do not sum to one");
  return w;
}

namespace detail {

inline void check_pvalues(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("no p-values to combine");
  for (double x : p) {
    if (!(x > 0.0) || x > 1.0 || std::isnan(x)) throw std::invalid_argument("p-values must lie in (0, 1]");
  }
}

}  // namespace detail

// Largest p fed to the normal quantile.  p = 1 would map to +infinity; the
// ceiling 1 - 1/(2(B+1)) sits half a Monte-Carlo step above the largest
// attainable p below 1.
inline double quantile_ceiling(std::size_t resamples) {
  if (resamples == 0) return std::nextafter(1.0, 0.0);
  return 1.0 - 1.0 / (2.0 * static_cast<double>(resamples + 1));
}

inline CombinedPValue weighted_z_combine(std::span<const double> p, const WeightVector& w,
                                         std::size_t resamples = 0) {
  detail::check_pvalues(p);
  if (w.weights.size() != p.size()) throw std::invalid_argument("weight count does not match p-value count");
  const double ceiling = quantile_ceiling(resamples);
  double t = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) t += w.weights[k] * normal_quantile(std::min(p[k], ceiling));
  return {Combiner::weighted_z, t, std::clamp(normal_cdf(t), std::numeric_limits<double>::min(), 1.0),
          std::vector<double>(p.begin(), p.end())};
}

inline CombinedPValue fisher_combine(std::span<const double> p) {
  detail::check_pvalues(p);
  double stat = 0.0;
  for (double x : p) stat -= 2.0 * std::log(x);
  const double pc = chi_square_upper(stat, 2.0 * static_cast<double>(p.size()));
  return {Combiner::fisher, stat, std::clamp(pc, std::numeric_limits<double>::min(), 1.0),
          std::vector<double>(p.begin(), p.end())};
}

inline CombinedPValue bonferroni_combine(std::span<const double> p) {
  detail::check_pvalues(p);
  const double lo = *std::min_element(p.begin(), p.end());
  return {Combiner::bonferroni, lo, std::min(1.0, static_cast<double>(p.size()) * lo),
          std::vector<double>(p.begin(), p.end())};
}

inline CombinedPValue combine(Combiner method, std::span<const double> p, const WeightVector* w = nullptr,
                              std::size_t resamples = 0) {
  switch (method) {
    case Combiner::fisher: return fisher_combine(p);
    case Combiner::bonferroni: return bonferroni_combine(p);
    case Combiner::weighted_z:
      if (!w) throw std::invalid_argument("weighted Z combiner needs weights");
      return weighted_z_combine(p, *w, resamples);
  }
  throw std::invalid_argument("unknown combiner");
}

// Combines the chosen tail of every surviving test.  For a two-sided
// alternative each direction is combined separately and 2 * min is reported.
inline CombinedPValue combine_tails(Combiner method, std::span<const double> p_less, std::span<const double> p_greater,
                                    Alternative alt, const WeightVector* w, std::size_t resamples) {
  if (alt == Alternative::greater) return combine(method, p_greater, w, resamples);
  if (alt == Alternative::less) return combine(method, p_less, w, resamples);
  auto lo = combine(method, p_less, w, resamples);
  auto hi = combine(method, p_greater, w, resamples);
  auto& best = lo.p <= hi.p ? lo : hi;
  best.p = std::min(1.0, 2.0 * best.p);
  return best;
}

inline CombinedPValue combine_result(const McrtResult& r, Combiner method, Alternative alt = Alternative::greater) {
  if (r.tests.empty()) throw std::invalid_argument("all tests were skipped; nothing to combine");
  std::vector<double> pl, pg;
  std::size_t resamples = 0;
  for (const auto& t : r.tests) {
    pl.push_back(t.result.p_less);
    pg.push_back(t.result.p_greater);
    resamples = std::max(resamples, t.result.n_resamples);
  }
  WeightVector w;
  if (method == Combiner::weighted_z) w = weights_from_result(r);
  return combine_tails(method, pl, pg, alt, method == Combiner::weighted_z ? &w : nullptr, resamples);
}

}  // namespace swmcrt
