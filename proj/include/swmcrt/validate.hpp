#pragma once

// Executable checks of the joint-validity conditions for several conditional
// randomization tests on a finite, enumerated assignment space.
//
// Elements of the space are opaque indices 0..|Z|-1.  Probabilities are exact
// rationals so that dominance bounds can be checked without tolerance.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "swmcrt/design.hpp"
#include "swmcrt/mcrt.hpp"
#include "swmcrt/rng.hpp"

namespace swmcrt {

using Cell = std::vector<std::size_t>;  // sorted element indices

struct FiniteAssignmentSpace {
  std::vector<std::string> labels;
  std::vector<Rational> probs;

  std::size_t size() const noexcept { return probs.size(); }

  static FiniteAssignmentSpace make(std::vector<std::string> labels, std::vector<Rational> probs) {
    if (probs.empty()) throw std::invalid_argument("assignment space is empty");
    if (!labels.empty() && labels.size() != probs.size())
      throw std::invalid_argument("label count does not match probability count");
    Rational total = 0;
    for (std::size_t z = 0; z < probs.size(); ++z) {
      if (probs[z] <= 0) throw std::invalid_argument("probability of element " + std::to_string(z) + " is not positive");
      total += probs[z];
    }
    if (total != 1) throw std::invalid_argument("probabilities do not sum to one");
    if (labels.empty())
      for (std::size_t z = 0; z < probs.size(); ++z) labels.push_back(std::to_string(z));
    return FiniteAssignmentSpace{std::move(labels), std::move(probs)};
  }

  static FiniteAssignmentSpace uniform(std::size_t n, std::vector<std::string> labels = {}) {
    if (n == 0) throw std::invalid_argument("assignment space is empty");
    return make(std::move(labels), std::vector<Rational>(n, Rational(1, static_cast<long>(n))));
  }

  Rational mass(const Cell& c) const {
    Rational m = 0;
    for (auto z : c) m += probs.at(z);
    return m;
  }
};

// A partition stored as a cell label per element.  Labels are normalised to
// 0..n_cells-1 in order of first appearance.
class Partition {
 public:
  Partition() = default;

  template <class Label>
  static Partition from_labels(const std::vector<Label>& labels) {
    std::map<Label, std::size_t> ids;
    Partition p;
    p.cell_of_.reserve(labels.size());
    for (const auto& l : labels) {
      auto [it, inserted] = ids.emplace(l, ids.size());
      p.cell_of_.push_back(it->second);
    }
    p.n_cells_ = ids.size();
    return p;
  }

  std::size_t size() const noexcept { return cell_of_.size(); }
  std::size_t n_cells() const noexcept { return n_cells_; }
  std::size_t cell_of(std::size_t z) const { return cell_of_.at(z); }

  std::vector<Cell> cells() const {
    std::vector<Cell> out(n_cells_);
    for (std::size_t z = 0; z < cell_of_.size(); ++z) out[cell_of_[z]].push_back(z);
    return out;
  }

  Cell cell_containing(std::size_t z) const {
    Cell c;
    const auto id = cell_of_.at(z);
    for (std::size_t e = 0; e < cell_of_.size(); ++e)
      if (cell_of_[e] == id) c.push_back(e);
    return c;
  }

 private:
  std::vector<std::size_t> cell_of_;
  std::size_t n_cells_ = 0;
};

struct PartitionFamily {
  std::vector<Partition> partitions;

  std::size_t size() const noexcept { return partitions.size(); }
};

// W: outcome of every unit at every time under every element.
class PotentialOutcomeTable {
 public:
  PotentialOutcomeTable() = default;
  PotentialOutcomeTable(std::size_t n_elements, std::size_t n_units, std::size_t n_times)
      : n_elements_(n_elements), n_units_(n_units), n_times_(n_times), data_(n_elements * n_units * n_times, 0.0) {}

  // Effect-free schedule: Y(z) = y for every z.
  static PotentialOutcomeTable constant(std::size_t n_elements, const OutcomePanel& y) {
    PotentialOutcomeTable w(n_elements, y.n_units(), y.n_cols());
    for (std::size_t z = 0; z < n_elements; ++z)
      for (std::size_t i = 0; i < y.n_units(); ++i)
        for (std::size_t t = 0; t < y.n_cols(); ++t) w.at(z, i, t) = y.at(i, t);
    return w;
  }

  std::size_t n_elements() const noexcept { return n_elements_; }
  std::size_t n_units() const noexcept { return n_units_; }
  std::size_t n_times() const noexcept { return n_times_; }
  double& at(std::size_t z, std::size_t i, std::size_t t) { return data_.at((z * n_units_ + i) * n_times_ + t); }
  double at(std::size_t z, std::size_t i, std::size_t t) const { return data_.at((z * n_units_ + i) * n_times_ + t); }

 private:
  std::size_t n_elements_ = 0, n_units_ = 0, n_times_ = 0;
  std::vector<double> data_;
};

// Deterministic statistic T(z, W).
using StatisticFn = std::function<double(std::size_t, const PotentialOutcomeTable&)>;

// ---------------------------------------------------------------------------
// Partitions, nestedness, refinement and coarsening

struct PartitionCheck {
  bool ok = true;
  std::optional<std::size_t> witness;  // element covered twice or never
  std::string detail;
};

inline PartitionCheck is_partition(std::size_t space_size, const std::vector<Cell>& cells) {
  std::vector<int> hits(space_size, 0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (cells[c].empty()) return {false, std::nullopt, "cell " + std::to_string(c) + " is empty"};
    for (auto z : cells[c]) {
      if (z >= space_size) return {false, z, "element " + std::to_string(z) + " is outside the space"};
      if (++hits[z] > 1) return {false, z, "element " + std::to_string(z) + " lies in two cells"};
    }
  }
  for (std::size_t z = 0; z < space_size; ++z)
    if (hits[z] == 0) return {false, z, "element " + std::to_string(z) + " is not covered"};
  return {};
}

inline PartitionCheck is_partition(const FiniteAssignmentSpace& space, const std::vector<Cell>& cells) {
  return is_partition(space.size(), cells);
}

struct NestedCheck {
  bool ok = true;
  std::size_t j = 0, k = 0;
  std::optional<std::pair<Cell, Cell>> counterexample;  // overlapping, non-nested pair
};

inline bool is_subset(const Cell& a, const Cell& b) { return std::includes(b.begin(), b.end(), a.begin(), a.end()); }

// Every cell of partition j and every cell of partition k are disjoint or
// nested.  Checked per element: S_z^(j) and S_z^(k) must be comparable.
inline NestedCheck pairwise_nested_check(const PartitionFamily& family, std::size_t j, std::size_t k) {
  if (j >= family.size() || k >= family.size()) throw std::out_of_range("partition index out of range");
  const auto& pj = family.partitions[j];
  const auto& pk = family.partitions[k];
  const auto cj = pj.cells();
  const auto ck = pk.cells();
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t z = 0; z < pj.size(); ++z) {
    const auto key = std::make_pair(pj.cell_of(z), pk.cell_of(z));
    if (!seen.insert(key).second) continue;
    const auto& a = cj[key.first];
    const auto& b = ck[key.second];
    if (!is_subset(a, b) && !is_subset(b, a)) return {false, j, k, std::make_pair(a, b)};
  }
  return {true, j, k, std::nullopt};
}

inline NestedCheck all_pairs_nested(const PartitionFamily& family) {
  for (std::size_t j = 0; j < family.size(); ++j)
    for (std::size_t k = j + 1; k < family.size(); ++k)
      if (auto r = pairwise_nested_check(family, j, k); !r.ok) return r;
  return {};
}

namespace detail {

inline std::vector<Cell> dedup_cells(std::vector<Cell> cells) {
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

inline void check_subset_indices(const PartitionFamily& family, const std::vector<std::size_t>& J) {
  if (J.empty()) throw std::invalid_argument("index set must be nonempty");
  for (auto j : J)
    if (j >= family.size()) throw std::out_of_range("partition index out of range");
}

}  // namespace detail

// Cells  S_z^(j1) ∩ ... ∩ S_z^(jr)  for every z, deduplicated.
inline std::vector<Cell> refinement(const PartitionFamily& family, const std::vector<std::size_t>& J) {
  detail::check_subset_indices(family, J);
  const std::size_t n = family.partitions[J.front()].size();
  std::map<std::vector<std::size_t>, Cell> groups;
  for (std::size_t z = 0; z < n; ++z) {
    std::vector<std::size_t> key;
    for (auto j : J) key.push_back(family.partitions[j].cell_of(z));
    groups[key].push_back(z);
  }
  std::vector<Cell> out;
  for (auto& [key, c] : groups) out.push_back(std::move(c));
  return detail::dedup_cells(std::move(out));
}

// Cells  S_z^(j1) ∪ ... ∪ S_z^(jr)  for every z, deduplicated.  These need not
// form a partition when the family is not nested.
inline std::vector<Cell> coarsening(const PartitionFamily& family, const std::vector<std::size_t>& J) {
  detail::check_subset_indices(family, J);
  const std::size_t n = family.partitions[J.front()].size();
  std::vector<std::vector<Cell>> cells;
  for (auto j : J) cells.push_back(family.partitions[j].cells());
  std::set<std::vector<std::size_t>> keys;
  std::vector<Cell> out;
  for (std::size_t z = 0; z < n; ++z) {
    std::vector<std::size_t> key;
    for (auto j : J) key.push_back(family.partitions[j].cell_of(z));
    if (!keys.insert(key).second) continue;
    Cell u;
    for (std::size_t q = 0; q < J.size(); ++q) {
      Cell merged;
      const auto& c = cells[q][key[q]];
      std::set_union(u.begin(), u.end(), c.begin(), c.end(), std::back_inserter(merged));
      u = std::move(merged);
    }
    out.push_back(std::move(u));
  }
  return detail::dedup_cells(std::move(out));
}

// The union R^[K] of all cells, as distinct sets, with the tests using each.
inline std::vector<std::pair<Cell, std::vector<std::size_t>>> union_of_cells(const PartitionFamily& family) {
  std::map<Cell, std::vector<std::size_t>> m;
  for (std::size_t k = 0; k < family.size(); ++k)
    for (auto& c : family.partitions[k].cells()) m[c].push_back(k);
  return {m.begin(), m.end()};
}

// ---------------------------------------------------------------------------
// Hasse diagram of R^[K] under strict inclusion

struct HasseNode {
  Cell cell;
  std::vector<std::size_t> tests;  // K(S)
  std::vector<std::size_t> parents, children, ancestors, descendants;
};

struct HasseDiagram {
  std::vector<HasseNode> nodes;  // ordered by (size desc, cell)
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // parent -> child
  std::size_t n_tests = 0;

  std::vector<std::size_t> roots() const {
    std::vector<std::size_t> r;
    for (std::size_t v = 0; v < nodes.size(); ++v)
      if (nodes[v].parents.empty()) r.push_back(v);
    return r;
  }
};

class NestednessError : public std::runtime_error {
 public:
  explicit NestednessError(NestedCheck c)
      : std::runtime_error("partitions " + std::to_string(c.j) + " and " + std::to_string(c.k) +
                           " have overlapping cells that are not nested"),
        check(std::move(c)) {}
  NestedCheck check;
};

namespace detail {

inline std::vector<std::size_t> tests_of(const HasseDiagram& h, const std::vector<std::size_t>& nodes) {
  std::set<std::size_t> s;
  for (auto v : nodes) s.insert(h.nodes[v].tests.begin(), h.nodes[v].tests.end());
  return {s.begin(), s.end()};
}

}  // namespace detail

// Verifies the structural lemmas on the diagram; returns an empty string when
// all hold, otherwise a description of the first failure.
inline std::string check_hasse_structure(const HasseDiagram& h) {
  std::vector<std::size_t> all_tests(h.n_tests);
  for (std::size_t k = 0; k < h.n_tests; ++k) all_tests[k] = k;
  for (std::size_t v = 0; v < h.nodes.size(); ++v) {
    const auto& node = h.nodes[v];
    if (!node.children.empty()) {
      std::vector<Cell> ch;
      for (auto c : node.children) ch.push_back(h.nodes[c].cell);
      std::size_t total = 0;
      Cell merged;
      for (const auto& c : ch) {
        total += c.size();
        Cell tmp;
        std::set_union(merged.begin(), merged.end(), c.begin(), c.end(), std::back_inserter(tmp));
        merged = std::move(tmp);
      }
      if (merged != node.cell || total != node.cell.size())
        return "children of node " + std::to_string(v) + " do not partition it";
    }
    const auto an = detail::tests_of(h, node.ancestors);
    const auto de = detail::tests_of(h, node.descendants);
    std::vector<std::size_t> joined;
    joined.insert(joined.end(), an.begin(), an.end());
    joined.insert(joined.end(), node.tests.begin(), node.tests.end());
    joined.insert(joined.end(), de.begin(), de.end());
    std::sort(joined.begin(), joined.end());
    if (joined != all_tests)
      return "K(an), K(S), K(de) do not partition the tests at node " + std::to_string(v);
    for (auto c : node.children) {
      auto with_self = node.ancestors;
      with_self.push_back(v);
      if (detail::tests_of(h, h.nodes[c].ancestors) != detail::tests_of(h, with_self))
        return "K(an(child)) != K(an(S) + S) at edge " + std::to_string(v) + " -> " + std::to_string(c);
      auto child_down = h.nodes[c].descendants;
      child_down.push_back(c);
      if (detail::tests_of(h, child_down) != de)
        return "K(child + de(child)) != K(de(S)) at edge " + std::to_string(v) + " -> " + std::to_string(c);
    }
  }
  return {};
}

inline HasseDiagram build_hasse(const PartitionFamily& family) {
  if (auto r = all_pairs_nested(family); !r.ok) throw NestednessError(std::move(r));
  HasseDiagram h;
  h.n_tests = family.size();
  auto cells = union_of_cells(family);
  std::stable_sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
    return a.first < b.first;
  });
  for (auto& [c, ks] : cells) h.nodes.push_back(HasseNode{c, ks, {}, {}, {}, {}});
  const std::size_t n = h.nodes.size();
  auto strict_superset = [&](std::size_t a, std::size_t b) {
    return h.nodes[a].cell.size() > h.nodes[b].cell.size() && is_subset(h.nodes[b].cell, h.nodes[a].cell);
  };
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b && strict_superset(a, b)) {
        h.nodes[a].descendants.push_back(b);
        h.nodes[b].ancestors.push_back(a);
      }
  for (std::size_t a = 0; a < n; ++a) {
    for (auto b : h.nodes[a].descendants) {
      bool covered = true;
      for (auto mid : h.nodes[a].descendants)
        if (mid != b && strict_superset(mid, b)) {
          covered = false;
          break;
        }
      if (covered) {
        h.nodes[a].children.push_back(b);
        h.nodes[b].parents.push_back(a);
        h.edges.emplace_back(a, b);
      }
    }
  }
  if (auto err = check_hasse_structure(h); !err.empty()) throw std::logic_error(err);
  return h;
}

// ---------------------------------------------------------------------------
// Exact CRT p-values and the joint dominance bound

// P(z) = pi{z* in S_z : T(z*) <= T(z)} / pi(S_z) for every z.
inline std::vector<Rational> crt_pvalues(const FiniteAssignmentSpace& space, const Partition& part,
                                         const StatisticFn& stat, const PotentialOutcomeTable& w) {
  std::vector<double> t(space.size());
  for (std::size_t z = 0; z < space.size(); ++z) t[z] = stat(z, w);
  std::vector<Rational> p(space.size());
  for (const auto& cell : part.cells()) {
    std::vector<std::size_t> order(cell);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return t[a] < t[b]; });
    const Rational total = space.mass(cell);
    Rational cum = 0;
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j < order.size() && t[order[j]] == t[order[i]]) cum += space.probs[order[j++]];
      for (std::size_t q = i; q < j; ++q) p[order[q]] = cum / total;
      i = j;
    }
  }
  return p;
}

struct DominanceEntry {
  std::vector<Rational> alphas;
  Rational joint;  // P{P^(k) <= alpha_k for all k}
  Rational bound;  // prod alpha_k
  bool holds = true;
};

struct DominanceReport {
  bool conditions_verified = false;  // nestedness holds for every pair
  bool exact = true;
  std::size_t n_draws = 0;
  std::vector<DominanceEntry> entries;
  bool marginal_holds = true;
  // Conditional bound given each coarsening cell; unset when the coarsening
  // cells do not form a partition.
  std::optional<bool> conditional_holds;
  double worst_conditional_ratio = 0.0;  // max over cells and alphas of P/bound
  double max_stderr = 0.0;               // Monte-Carlo mode only

  bool holds() const { return marginal_holds && conditional_holds.value_or(true); }
};

inline std::vector<std::vector<Rational>> alpha_product_grid(const std::vector<Rational>& values, std::size_t k) {
  std::vector<std::vector<Rational>> out{{}};
  for (std::size_t d = 0; d < k; ++d) {
    std::vector<std::vector<Rational>> next;
    for (const auto& prefix : out)
      for (const auto& v : values) {
        auto row = prefix;
        row.push_back(v);
        next.push_back(std::move(row));
      }
    out = std::move(next);
  }
  return out;
}

namespace detail {

inline bool all_below(const std::vector<std::vector<Rational>>& p, std::size_t z, const std::vector<Rational>& a) {
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k][z] > a[k]) return false;
  return true;
}

}  // namespace detail

// Exact when n_draws == 0 (full enumeration under pi); otherwise the joint
// probability is estimated from n_draws draws z ~ pi and compared with the
// bound plus three standard errors.
inline DominanceReport joint_dominance_check(const FiniteAssignmentSpace& space, const PartitionFamily& family,
                                             const PotentialOutcomeTable& w, const std::vector<StatisticFn>& stats,
                                             const std::vector<std::vector<Rational>>& alphas,
                                             std::size_t n_draws = 0, std::uint64_t seed = default_seed) {
  if (stats.size() != family.size()) throw std::invalid_argument("need one statistic per partition");
  DominanceReport rep;
  rep.conditions_verified = all_pairs_nested(family).ok;
  rep.exact = n_draws == 0;
  rep.n_draws = n_draws;

  std::vector<std::vector<Rational>> p;
  for (std::size_t k = 0; k < family.size(); ++k) p.push_back(crt_pvalues(space, family.partitions[k], stats[k], w));

  std::vector<std::size_t> draws;
  if (!rep.exact) {
    std::vector<double> cdf(space.size());
    double acc = 0.0;
    for (std::size_t z = 0; z < space.size(); ++z) cdf[z] = acc += space.probs[z].convert_to<double>();
    SplitMix64 gen(seed);
    for (std::size_t d = 0; d < n_draws; ++d) {
      const double u = uniform01(gen) * acc;
      draws.push_back(static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()));
      if (draws.back() >= space.size()) draws.back() = space.size() - 1;
    }
  }

  for (const auto& a : alphas) {
    if (a.size() != family.size()) throw std::invalid_argument("alpha vector length must equal the number of tests");
    DominanceEntry e{a, 0, 1, true};
    for (const auto& x : a) e.bound *= x;
    if (rep.exact) {
      for (std::size_t z = 0; z < space.size(); ++z)
        if (detail::all_below(p, z, a)) e.joint += space.probs[z];
      e.holds = e.joint <= e.bound;
    } else {
      std::size_t hits = 0;
      for (auto z : draws) hits += detail::all_below(p, z, a);
      e.joint = Rational(static_cast<long>(hits), static_cast<long>(n_draws));
      const double ph = e.joint.convert_to<double>();
      const double se = std::sqrt(std::max(ph * (1 - ph), 1e-300) / static_cast<double>(n_draws));
      rep.max_stderr = std::max(rep.max_stderr, se);
      e.holds = ph <= e.bound.convert_to<double>() + 3.0 * se;
    }
    rep.marginal_holds = rep.marginal_holds && e.holds;
    rep.entries.push_back(std::move(e));
  }

  // conditional bound given each coarsening cell of all K tests
  std::vector<std::size_t> all(family.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  const auto coarse = coarsening(family, all);
  if (rep.exact && is_partition(space, coarse).ok) {
    bool ok = true;
    double worst = 0.0;
    for (const auto& cell : coarse) {
      const Rational mass = space.mass(cell);
      for (const auto& e : rep.entries) {
        Rational hit = 0;
        for (auto z : cell)
          if (detail::all_below(p, z, e.alphas)) hit += space.probs[z];
        const Rational cond = hit / mass;
        if (cond > e.bound) ok = false;
        if (e.bound > 0) worst = std::max(worst, (cond / e.bound).convert_to<double>());
      }
    }
    rep.conditional_holds = ok;
    rep.worst_conditional_ratio = worst;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Conditional independence of two statistics given the refinement cells

struct CondIndepReport {
  bool independent = true;  // gap < 1e-12
  double max_tv_gap = 0.0;
  std::optional<Cell> worst_cell;
};

inline CondIndepReport cond_indep_check(const FiniteAssignmentSpace& space, const PartitionFamily& family,
                                        const PotentialOutcomeTable& w, const std::vector<StatisticFn>& stats,
                                        std::size_t j, std::size_t k) {
  if (j >= stats.size() || k >= stats.size()) throw std::out_of_range("statistic index out of range");
  CondIndepReport rep;
  Rational worst = 0;
  for (const auto& cell : refinement(family, {j, k})) {
    const Rational mass = space.mass(cell);
    std::map<std::pair<double, double>, Rational> joint;
    std::map<double, Rational> mj, mk;
    for (auto z : cell) {
      const double a = stats[j](z, w), b = stats[k](z, w);
      const Rational q = space.probs[z] / mass;
      joint[{a, b}] += q;
      mj[a] += q;
      mk[b] += q;
    }
    Rational tv = 0;
    for (const auto& [a, pa] : mj)
      for (const auto& [b, pb] : mk) {
        auto it = joint.find({a, b});
        const Rational pab = it == joint.end() ? Rational(0) : it->second;
        const Rational d = pab - pa * pb;
        tv += d < 0 ? Rational(-d) : d;
      }
    tv /= 2;
    if (tv > worst) {
      worst = tv;
      rep.worst_cell = cell;
    }
  }
  rep.max_tv_gap = worst.convert_to<double>();
  rep.independent = rep.max_tv_gap < 1e-12;
  return rep;
}

// ---------------------------------------------------------------------------
// Stepped-wedge scenarios: the enumerated assignment space together with the
// conditioning partitions and difference-in-means statistics of either the
// MCRT construction or the naive per-time construction.

enum class Conditioning { mcrt, naive };

inline std::string to_string(Conditioning c) { return c == Conditioning::mcrt ? "mcrt" : "naive"; }

struct SteppedWedgeScenario {
  DesignSpec spec;
  int lag = 0;
  Conditioning conditioning = Conditioning::mcrt;
  std::vector<CrossoverTimes> elements;
  FiniteAssignmentSpace space;
  PartitionFamily family;
  std::vector<LagTestGroup> tests;  // one per partition; unit sets filled for element 0
  PotentialOutcomeTable outcomes;
  std::vector<StatisticFn> stats;
};

namespace detail {

// Difference in means at time k + lag between units crossing over at k and
// units crossing over at one of `control_times`, under element z.
inline StatisticFn swd_statistic(std::shared_ptr<const std::vector<CrossoverTimes>> elements, int k, int lag,
                                 std::vector<int> control_times) {
  return [elements, k, lag, ctl = std::move(control_times)](std::size_t z, const PotentialOutcomeTable& w) {
    const auto& a = elements->at(z);
    double s1 = 0.0, s0 = 0.0;
    std::size_t n1 = 0, n0 = 0;
    const auto t = static_cast<std::size_t>(k + lag);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == k) {
        s1 += w.at(z, i, t);
        ++n1;
      } else if (std::find(ctl.begin(), ctl.end(), a[i]) != ctl.end()) {
        s0 += w.at(z, i, t);
        ++n0;
      }
    }
    if (n1 == 0 || n0 == 0) return 0.0;
    return s1 / static_cast<double>(n1) - s0 / static_cast<double>(n0);
  };
}

}  // namespace detail

// `y` is the effect-free outcome panel (N x (T+1)) shared by every element.
inline SteppedWedgeScenario build_stepped_wedge_scenario(const DesignSpec& spec, int lag, Conditioning cond,
                                                         const OutcomePanel& y) {
  const int T = spec.n_times();
  if (lag < 0 || lag > T - 2) throw std::invalid_argument("lag out of range for this design");
  if (y.n_units() != static_cast<std::size_t>(spec.n_units()) || y.n_cols() < static_cast<std::size_t>(T) + 1)
    throw std::invalid_argument("outcome panel must be N x (T+1)");
  auto elements = std::make_shared<const std::vector<CrossoverTimes>>(enumerate_assignments(spec));
  SteppedWedgeScenario sc{spec, lag, cond, *elements, {}, {}, {}, {}, {}};
  std::vector<std::string> labels;
  for (const auto& a : sc.elements) {
    std::string l;
    for (int t : a.a) l += std::to_string(t);
    labels.push_back(std::move(l));
  }
  sc.space = FiniteAssignmentSpace::uniform(sc.elements.size(), std::move(labels));
  sc.outcomes = PotentialOutcomeTable::constant(sc.elements.size(), y);

  if (cond == Conditioning::mcrt) {
    const auto schedule = build_schedule(T, lag);
    std::vector<int> subset_of(static_cast<std::size_t>(T) + 1, 0);
    for (std::size_t j = 0; j < schedule.subsets.size(); ++j)
      for (int t : schedule.subsets[j]) subset_of[static_cast<std::size_t>(t)] = static_cast<int>(j + 1);
    sc.tests = build_groups(sc.elements.front(), schedule);
    // Test k conditions on the subset label of every unit and on the
    // crossover times already realised before k.
    for (const auto& g : sc.tests) {
      std::vector<std::vector<int>> keys;
      for (const auto& a : sc.elements) {
        std::vector<int> key;
        for (int t : a.a) {
          key.push_back(subset_of[static_cast<std::size_t>(t)]);
          key.push_back(t < g.k ? t : 0);
        }
        keys.push_back(std::move(key));
      }
      sc.family.partitions.push_back(Partition::from_labels(keys));
      sc.stats.push_back(detail::swd_statistic(elements, g.k, lag, g.control_times));
    }
  } else {
    // Tests t = 1..T-lag; test t conditions on the set of units crossing
    // over at t or after t+lag.  The last test has no control times.
    sc.tests = build_naive_groups(sc.elements.front(), T, lag);
    sc.tests.push_back(detail::make_group(sc.elements.front(), T - lag, 0, lag, {}));
    for (const auto& g : sc.tests) {
      std::vector<std::vector<int>> keys;
      for (const auto& a : sc.elements) {
        std::vector<int> key;
        for (int t : a.a) key.push_back(t == g.k || t > g.k + lag ? 1 : 0);
        keys.push_back(std::move(key));
      }
      sc.family.partitions.push_back(Partition::from_labels(keys));
      sc.stats.push_back(detail::swd_statistic(elements, g.k, lag, g.control_times));
    }
  }
  return sc;
}

}  // namespace swmcrt
