#pragma once

// Stepped-wedge assignment mechanism.
//
// Treatment times are 1-based (1..T).  Outcome times are 0-based with the
// baseline at 0, so a trial with T steps has outcome columns 0..T.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "swmcrt/rng.hpp"

namespace swmcrt {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

class DesignSpec {
 public:
  // counts[t-1] is the number of units crossing over at time t.
  explicit DesignSpec(std::vector<int> counts) : counts_(std::move(counts)) {
    if (counts_.empty()) throw std::invalid_argument("design needs at least one time step");
    for (std::size_t t = 0; t < counts_.size(); ++t) {
      if (counts_[t] < 1)
        throw std::invalid_argument("count for time " + std::to_string(t + 1) + " must be >= 1");
    }
    n_units_ = std::accumulate(counts_.begin(), counts_.end(), 0);
  }

  DesignSpec(int n_units, int n_times, std::vector<int> counts) : DesignSpec(std::move(counts)) {
    if (n_times != static_cast<int>(counts_.size()))
      throw std::invalid_argument("counts length does not match number of time steps");
    if (n_units != n_units_) throw std::invalid_argument("counts do not sum to number of units");
  }

  // N_t = floor(N/T) for t < T and the remainder at T.
  static DesignSpec balanced(int n_units, int n_times) {
    if (n_times < 1 || n_units < n_times)
      throw std::invalid_argument("balanced design needs 1 <= T <= N");
    std::vector<int> c(static_cast<std::size_t>(n_times), n_units / n_times);
    c.back() = n_units - (n_times - 1) * (n_units / n_times);
    return DesignSpec(std::move(c));
  }

  int n_units() const noexcept { return n_units_; }
  int n_times() const noexcept { return static_cast<int>(counts_.size()); }
  const std::vector<int>& counts() const noexcept { return counts_; }
  int count(int t) const { return counts_.at(static_cast<std::size_t>(t - 1)); }

  friend bool operator==(const DesignSpec&, const DesignSpec&) = default;

 private:
  std::vector<int> counts_;
  int n_units_ = 0;
};

struct CrossoverTimes {
  std::vector<int> a;  // a[i] in 1..T

  std::size_t size() const noexcept { return a.size(); }
  int operator[](std::size_t i) const { return a[i]; }
  friend bool operator==(const CrossoverTimes&, const CrossoverTimes&) = default;
};

struct AssignmentViolation {
  enum class Kind { shape, row_sum, column_sum, entry } kind;
  std::size_t index;  // offending row (unit) or column (1-based time)
  long expected;
  long actual;

  std::string message() const {
    switch (kind) {
      case Kind::shape:
        return "matrix has " + std::to_string(actual) + " rows, expected " + std::to_string(expected);
      case Kind::entry:
        return "row " + std::to_string(index) + " has a non-binary entry or wrong length";
      case Kind::row_sum:
        return "row " + std::to_string(index) + " sums to " + std::to_string(actual) + ", expected 1";
      case Kind::column_sum:
        return "column " + std::to_string(index) + " sums to " + std::to_string(actual) +
               ", expected " + std::to_string(expected);
    }
    return {};
  }
};

using BinaryRows = std::vector<std::vector<std::uint8_t>>;

// Reports the first violated invariant: each row has exactly one 1 and
// column t has counts[t] ones.  Rows are checked before columns.
inline std::optional<AssignmentViolation> validate_assignment(const BinaryRows& z,
                                                              const DesignSpec& spec) {
  using K = AssignmentViolation::Kind;
  const auto n = static_cast<std::size_t>(spec.n_units());
  const auto T = static_cast<std::size_t>(spec.n_times());
  if (z.size() != n) return AssignmentViolation{K::shape, 0, static_cast<long>(n), static_cast<long>(z.size())};
  std::vector<long> col(T, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (z[i].size() != T) return AssignmentViolation{K::entry, i, 0, 0};
    long s = 0;
    for (std::size_t t = 0; t < T; ++t) {
      if (z[i][t] > 1) return AssignmentViolation{K::entry, i, 0, 0};
      s += z[i][t];
      col[t] += z[i][t];
    }
    if (s != 1) return AssignmentViolation{K::row_sum, i, 1, s};
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (col[t] != spec.counts()[t])
      return AssignmentViolation{K::column_sum, t + 1, spec.counts()[t], col[t]};
  }
  return std::nullopt;
}

class AssignmentMatrix {
 public:
  static AssignmentMatrix from_rows(const BinaryRows& z, const DesignSpec& spec) {
    if (auto v = validate_assignment(z, spec)) throw std::invalid_argument(v->message());
    std::vector<int> a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      a[i] = static_cast<int>(std::find(z[i].begin(), z[i].end(), 1) - z[i].begin()) + 1;
    return AssignmentMatrix(std::move(a), spec);
  }

  static AssignmentMatrix from_times(const CrossoverTimes& times, const DesignSpec& spec) {
    if (times.size() != static_cast<std::size_t>(spec.n_units()))
      throw std::invalid_argument("crossover times length does not match number of units");
    std::vector<int> hist(static_cast<std::size_t>(spec.n_times()), 0);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const int t = times[i];
      if (t < 1 || t > spec.n_times())
        throw std::invalid_argument("unit " + std::to_string(i) + " has crossover time " +
                                    std::to_string(t) + " outside 1.." +
                                    std::to_string(spec.n_times()));
      ++hist[static_cast<std::size_t>(t - 1)];
    }
    if (hist != spec.counts()) throw std::invalid_argument("crossover histogram does not match design counts");
    return AssignmentMatrix(times.a, spec);
  }

  const DesignSpec& spec() const noexcept { return spec_; }
  int n_units() const noexcept { return spec_.n_units(); }
  int n_times() const noexcept { return spec_.n_times(); }

  // Z[i, t] with t in 1..T.
  std::uint8_t at(std::size_t i, int t) const { return a_.at(i) == t ? 1 : 0; }
  int crossover(std::size_t i) const { return a_.at(i); }

  BinaryRows rows() const {
    BinaryRows z(a_.size(), std::vector<std::uint8_t>(static_cast<std::size_t>(n_times()), 0));
    for (std::size_t i = 0; i < a_.size(); ++i) z[i][static_cast<std::size_t>(a_[i] - 1)] = 1;
    return z;
  }

  friend bool operator==(const AssignmentMatrix&, const AssignmentMatrix&) = default;

 private:
  AssignmentMatrix(std::vector<int> a, DesignSpec spec) : spec_(std::move(spec)), a_(std::move(a)) {}

  DesignSpec spec_;
  std::vector<int> a_;
};

inline CrossoverTimes crossover_times(const AssignmentMatrix& z) {
  CrossoverTimes out;
  out.a.resize(static_cast<std::size_t>(z.n_units()));
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] = z.crossover(i);
  return out;
}

inline CrossoverTimes crossover_times(const BinaryRows& z, const DesignSpec& spec) {
  return crossover_times(AssignmentMatrix::from_rows(z, spec));
}

// |Z| = N! / (N_1! ... N_T!)
inline BigInt space_size(const DesignSpec& spec) {
  BigInt result = 1;
  int remaining = spec.n_units();
  for (int c : spec.counts()) {
    // multiply by C(remaining, c)
    BigInt binom = 1;
    for (int j = 1; j <= c; ++j) {
      binom *= remaining - c + j;
      binom /= j;
    }
    result *= binom;
    remaining -= c;
  }
  return result;
}

// pi_t(z_t | z_[t-1]) = N_t! (N - N_[t])! / (N - N_[t-1])!
inline Rational step_conditional_prob(const DesignSpec& spec, int t) {
  if (t < 1 || t > spec.n_times()) throw std::out_of_range("time index outside 1..T");
  int before = 0;
  for (int s = 1; s < t; ++s) before += spec.count(s);
  const int pool = spec.n_units() - before;
  const int take = spec.count(t);
  BigInt binom = 1;
  for (int j = 1; j <= take; ++j) {
    binom *= pool - take + j;
    binom /= j;
  }
  return Rational(BigInt(1), binom);
}

// Uniform draw from Z: shuffle the multiset of column labels.
template <class Gen>
AssignmentMatrix sample_assignment(const DesignSpec& spec, Gen& gen) {
  CrossoverTimes times;
  times.a.reserve(static_cast<std::size_t>(spec.n_units()));
  for (int t = 1; t <= spec.n_times(); ++t) times.a.insert(times.a.end(), static_cast<std::size_t>(spec.count(t)), t);
  shuffle(times.a.begin(), times.a.end(), gen);
  return AssignmentMatrix::from_times(times, spec);
}

// All of Z in lexicographic order of crossover-time vectors.  Only for small
// designs; throws if |Z| exceeds `limit`.
inline std::vector<CrossoverTimes> enumerate_assignments(const DesignSpec& spec,
                                                         std::size_t limit = 1'000'000) {
  if (space_size(spec) > limit) throw std::length_error("assignment space too large to enumerate");
  CrossoverTimes times;
  for (int t = 1; t <= spec.n_times(); ++t) times.a.insert(times.a.end(), static_cast<std::size_t>(spec.count(t)), t);
  std::vector<CrossoverTimes> out;
  do {
    out.push_back(times);
  } while (std::next_permutation(times.a.begin(), times.a.end()));
  return out;
}

}  // namespace swmcrt
