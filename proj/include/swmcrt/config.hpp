#pragma once

// JSON study configs and validation scenarios.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <iterator>
#include <ostream>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "swmcrt/design.hpp"
#include "swmcrt/sim.hpp"
#include "swmcrt/validate.hpp"

namespace swmcrt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
T get_field(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": key '" + key + "' is missing or has the wrong type");
  }
}

template <class T>
void read_opt(const json& j, const std::string& key, T& out, const std::string& where) {
  if (j.contains(key)) out = get_field<T>(j, key, where);
}

inline json parse_json(std::istream& in, const std::string& what) {
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline Rational parse_rational(const json& v, const std::string& where) {
  if (v.is_number_integer()) return Rational(v.get<long long>());
  if (!v.is_string()) throw ConfigError(where + ": probabilities and alphas must be integers or \"a/b\" strings");
  const auto s = v.get<std::string>();
  try {
    const auto slash = s.find('/');
    if (slash == std::string::npos) return Rational(BigInt(s));
    const BigInt num(s.substr(0, slash)), den(s.substr(slash + 1));
    if (den == 0) throw ConfigError(where + ": zero denominator in '" + s + "'");
    return Rational(num, den);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError(where + ": cannot parse '" + s + "' as a fraction");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Study config

struct StudyConfig {
  enum class Kind { power, coverage } kind = Kind::power;
  PowerStudyConfig power;
  CoverageStudyConfig coverage;
};

inline StudyConfig study_preset(const std::string& name) {
  StudyConfig c;
  if (name == "sim1-desk" || name == "sim1-full") {
    c.kind = StudyConfig::Kind::power;
    c.power = sim1_preset(name == "sim1-full");
  } else if (name == "sim2-desk" || name == "sim2-full") {
    c.kind = StudyConfig::Kind::coverage;
    c.coverage = sim2_preset(name == "sim2-full");
  } else {
    throw ConfigError("unknown preset '" + name + "' (sim1-desk, sim1-full, sim2-desk, sim2-full)");
  }
  return c;
}

inline StudyConfig parse_study_config(const nlohmann::json& j) {
  using detail::read_opt;
  const std::string where = "study config";
  detail::reject_unknown_keys(j, {"study", "preset", "replicates", "seed", "budget", "alpha", "cells", "N", "T",
                                  "taus", "interactions", "lags", "methods", "level"},
                              where);
  StudyConfig c;
  if (j.contains("preset")) c = study_preset(detail::get_field<std::string>(j, "preset", where));
  if (j.contains("study")) {
    const auto s = detail::get_field<std::string>(j, "study", where);
    if (s == "power") c.kind = StudyConfig::Kind::power;
    else if (s == "coverage") c.kind = StudyConfig::Kind::coverage;
    else throw ConfigError(where + ": study must be 'power' or 'coverage'");
  } else if (!j.contains("preset")) {
    throw ConfigError(where + ": need 'study' or 'preset'");
  }
  const bool power = c.kind == StudyConfig::Kind::power;
  const std::set<std::string> power_only{"alpha", "cells"};
  const std::set<std::string> coverage_only{"N", "T", "taus", "interactions", "lags", "methods", "level"};
  for (const auto& [key, value] : j.items())
    if ((power && coverage_only.count(key)) || (!power && power_only.count(key)))
      throw ConfigError(where + ": key '" + key + "' does not apply to a " + (power ? "power" : "coverage") + " study");

  std::size_t replicates = power ? c.power.replicates : c.coverage.replicates;
  std::uint64_t seed = power ? c.power.seed : c.coverage.seed;
  std::size_t budget = power ? c.power.budget : c.coverage.budget;
  if (j.contains("replicates")) {
    const auto r = detail::get_field<long long>(j, "replicates", where);
    if (r < 1) throw ConfigError(where + ": replicates must be >= 1");
    replicates = static_cast<std::size_t>(r);
  }
  read_opt(j, "seed", seed, where);
  if (j.contains("budget")) {
    const auto b = detail::get_field<long long>(j, "budget", where);
    if (b < 1) throw ConfigError(where + ": budget must be >= 1");
    budget = static_cast<std::size_t>(b);
  }

  if (power) {
    auto& p = c.power;
    p.replicates = replicates;
    p.seed = seed;
    p.budget = budget;
    read_opt(j, "alpha", p.alpha, where);
    if (j.contains("cells")) {
      p.cells.clear();
      const auto& cells = j.at("cells");
      if (!cells.is_array()) throw ConfigError(where + ": cells must be an array");
      for (std::size_t q = 0; q < cells.size(); ++q) {
        const std::string w = where + ": cells[" + std::to_string(q) + "]";
        detail::reject_unknown_keys(cells[q], {"study", "N", "T", "lag", "tau"}, w);
        PowerCell cell;
        read_opt(cells[q], "study", cell.study, w);
        cell.N = detail::get_field<int>(cells[q], "N", w);
        cell.T = detail::get_field<int>(cells[q], "T", w);
        cell.lag = detail::get_field<int>(cells[q], "lag", w);
        cell.tau = detail::get_field<double>(cells[q], "tau", w);
        p.cells.push_back(cell);
      }
    }
    if (p.cells.empty()) throw ConfigError(where + ": no cells");
    try {
      validate(p);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + ": " + e.what());
    }
  } else {
    auto& v = c.coverage;
    v.replicates = replicates;
    v.seed = seed;
    v.budget = budget;
    read_opt(j, "N", v.N, where);
    read_opt(j, "T", v.T, where);
    read_opt(j, "taus", v.taus, where);
    read_opt(j, "interactions", v.interactions, where);
    read_opt(j, "lags", v.lags, where);
    read_opt(j, "level", v.level, where);
    if (j.contains("methods")) {
      v.methods.clear();
      for (const auto& m : detail::get_field<std::vector<std::string>>(j, "methods", where)) {
        try {
          v.methods.push_back(parse_combiner(m));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(where + ": " + e.what());
        }
      }
    }
    try {
      validate(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return c;
}

inline StudyConfig read_study_config(std::istream& in) {
  return parse_study_config(detail::parse_json(in, "study config"));
}

// ---------------------------------------------------------------------------
// Validation scenarios

enum class Check { partition, nested, hasse, dominance, cond_indep };

inline std::string to_string(Check c) {
  switch (c) {
    case Check::partition: return "partition";
    case Check::nested: return "nested";
    case Check::hasse: return "hasse";
    case Check::dominance: return "dominance";
    case Check::cond_indep: return "cond_indep";
  }
  return {};
}

inline Check parse_check(const std::string& s) {
  if (s == "partition") return Check::partition;
  if (s == "nested") return Check::nested;
  if (s == "hasse") return Check::hasse;
  if (s == "dominance") return Check::dominance;
  if (s == "cond_indep") return Check::cond_indep;
  throw ConfigError("unknown check '" + s + "'");
}

struct Scenario {
  std::string name;
  FiniteAssignmentSpace space;
  PartitionFamily family;
  PotentialOutcomeTable outcomes;
  std::vector<StatisticFn> stats;
  std::vector<std::vector<Rational>> alphas;  // alpha vectors for the dominance check
  std::vector<Check> checks;
  std::size_t draws = 0;  // 0: exact
  std::uint64_t seed = default_seed;
  std::vector<std::string> test_labels;
};

namespace detail {

inline std::vector<std::vector<Rational>> parse_alphas(const json& j, std::size_t k, const std::string& where) {
  if (!j.contains("alphas")) return alpha_product_grid({Rational(1, 10), Rational(1, 4), Rational(1, 2)}, k);
  const auto& a = j.at("alphas");
  if (!a.is_array() || a.empty()) throw ConfigError(where + ": alphas must be a nonempty array");
  std::vector<Rational> values;
  for (const auto& v : a) {
    const Rational r = parse_rational(v, where + ": alphas");
    if (r <= 0 || r > 1) throw ConfigError(where + ": alphas must lie in (0, 1]");
    values.push_back(r);
  }
  return alpha_product_grid(values, k);
}

inline std::vector<Check> parse_checks(const json& j, const std::string& where) {
  std::vector<Check> out;
  if (!j.contains("checks"))
    return {Check::partition, Check::nested, Check::hasse, Check::dominance, Check::cond_indep};
  for (const auto& s : get_field<std::vector<std::string>>(j, "checks", where)) {
    try {
      out.push_back(parse_check(s));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return out;
}

inline Scenario parse_stepped_wedge(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"kind", "name", "counts", "lag", "conditioning", "outcomes", "outcome_seed", "alphas",
                          "checks", "draws", "seed"},
                      where);
  const auto counts = get_field<std::vector<int>>(j, "counts", where);
  const int lag = get_field<int>(j, "lag", where);
  Conditioning cond = Conditioning::mcrt;
  if (j.contains("conditioning")) {
    const auto s = get_field<std::string>(j, "conditioning", where);
    if (s == "naive") cond = Conditioning::naive;
    else if (s != "mcrt") throw ConfigError(where + ": conditioning must be 'mcrt' or 'naive'");
  }
  DesignSpec spec({1});
  try {
    spec = DesignSpec(counts);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  const auto n = static_cast<std::size_t>(spec.n_units());
  const auto cols = static_cast<std::size_t>(spec.n_times()) + 1;
  OutcomePanel y(n, cols);
  if (j.contains("outcomes")) {
    const auto rows = get_field<std::vector<std::vector<double>>>(j, "outcomes", where);
    if (rows.size() != n) throw ConfigError(where + ": outcomes needs one row per unit");
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i].size() != cols) throw ConfigError(where + ": outcomes row " + std::to_string(i) + " needs T+1 values");
      for (std::size_t t = 0; t < cols; ++t) y.at(i, t) = rows[i][t];
    }
  } else {
    std::uint64_t s = default_seed;
    read_opt(j, "outcome_seed", s, where);
    SplitMix64 gen(s);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < cols; ++t) y.at(i, t) = standard_normal(gen);
  }
  SteppedWedgeScenario sw = [&] {
    try {
      return build_stepped_wedge_scenario(spec, lag, cond, y);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + ": " + e.what());
    } catch (const std::length_error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }();
  Scenario sc;
  read_opt(j, "name", sc.name, where);
  sc.space = std::move(sw.space);
  sc.family = std::move(sw.family);
  sc.outcomes = std::move(sw.outcomes);
  sc.stats = std::move(sw.stats);
  for (const auto& g : sw.tests) sc.test_labels.push_back("k=" + std::to_string(g.k));
  sc.alphas = parse_alphas(j, sc.family.size(), where);
  sc.checks = parse_checks(j, where);
  return sc;
}

inline Scenario parse_explicit(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"kind", "name", "elements", "probs", "partitions", "statistics", "alphas", "checks", "draws",
                          "seed"},
                      where);
  const auto elements = get_field<std::vector<std::string>>(j, "elements", where);
  if (elements.empty()) throw ConfigError(where + ": elements is empty");
  Scenario sc;
  read_opt(j, "name", sc.name, where);
  try {
    if (!j.contains("probs") || (j.at("probs").is_string() && j.at("probs").get<std::string>() == "uniform")) {
      sc.space = FiniteAssignmentSpace::uniform(elements.size(), elements);
    } else {
      const auto& p = j.at("probs");
      if (!p.is_array() || p.size() != elements.size())
        throw ConfigError(where + ": probs must be \"uniform\" or one value per element");
      std::vector<Rational> probs;
      for (const auto& v : p) probs.push_back(parse_rational(v, where + ": probs"));
      sc.space = FiniteAssignmentSpace::make(elements, std::move(probs));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  const auto parts = get_field<std::vector<std::vector<long long>>>(j, "partitions", where);
  if (parts.empty()) throw ConfigError(where + ": partitions is empty");
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (parts[k].size() != elements.size())
      throw ConfigError(where + ": partitions[" + std::to_string(k) + "] needs one label per element");
    sc.family.partitions.push_back(Partition::from_labels(parts[k]));
    sc.test_labels.push_back("partition " + std::to_string(k));
  }
  if (j.contains("statistics")) {
    const auto tab = get_field<std::vector<std::vector<double>>>(j, "statistics", where);
    if (tab.size() != parts.size()) throw ConfigError(where + ": statistics needs one row per partition");
    for (std::size_t k = 0; k < tab.size(); ++k) {
      if (tab[k].size() != elements.size())
        throw ConfigError(where + ": statistics[" + std::to_string(k) + "] needs one value per element");
      sc.stats.push_back([row = tab[k]](std::size_t z, const PotentialOutcomeTable&) { return row.at(z); });
    }
  }
  sc.alphas = parse_alphas(j, sc.family.size(), where);
  sc.checks = parse_checks(j, where);
  if (sc.stats.empty())
    for (auto c : sc.checks)
      if (c == Check::dominance || c == Check::cond_indep)
        throw ConfigError(where + ": check '" + to_string(c) + "' needs statistics");
  return sc;
}

}  // namespace detail

inline Scenario parse_scenario(const nlohmann::json& j) {
  const std::string where = "scenario";
  if (!j.is_object() || j.empty()) throw ConfigError(where + ": empty scenario");
  const auto kind = detail::get_field<std::string>(j, "kind", where);
  Scenario sc;
  if (kind == "stepped_wedge") sc = detail::parse_stepped_wedge(j, where);
  else if (kind == "explicit") sc = detail::parse_explicit(j, where);
  else throw ConfigError(where + ": kind must be 'stepped_wedge' or 'explicit'");
  if (j.contains("draws")) {
    const auto d = detail::get_field<long long>(j, "draws", where);
    if (d < 0) throw ConfigError(where + ": draws must be >= 0");
    sc.draws = static_cast<std::size_t>(d);
  }
  detail::read_opt(j, "seed", sc.seed, where);
  return sc;
}

inline Scenario read_scenario(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ConfigError("scenario: file is empty");
  try {
    return parse_scenario(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

namespace detail {

inline std::string describe_cell(const Scenario& sc, const Cell& c) {
  std::string s = "{";
  for (std::size_t q = 0; q < c.size(); ++q) s += (q ? ", " : "") + sc.space.labels.at(c[q]);
  return s + "}";
}

inline std::string rational_str(const Rational& r) {
  return numerator(r).str() + (denominator(r) == 1 ? "" : "/" + denominator(r).str());
}

}  // namespace detail

// Runs the requested checks, writing one block per check.  Returns true iff
// every check passed.
inline bool run_scenario_checks(const Scenario& sc, std::ostream& os) {
  bool all_ok = true;
  auto verdict = [&](const std::string& name, bool ok) {
    os << name << ": " << (ok ? "PASS" : "FAIL") << '\n';
    all_ok = all_ok && ok;
  };
  os << "scenario " << (sc.name.empty() ? "(unnamed)" : sc.name) << ": " << sc.space.size() << " elements, "
     << sc.family.size() << " tests\n";
  for (auto check : sc.checks) {
    switch (check) {
      case Check::partition: {
        bool ok = true;
        for (std::size_t k = 0; k < sc.family.size(); ++k) {
          if (sc.family.partitions[k].size() != sc.space.size()) {
            os << "  partition " << k << " labels " << sc.family.partitions[k].size() << " elements\n";
            ok = false;
            continue;
          }
          const auto r = is_partition(sc.space, sc.family.partitions[k].cells());
          if (!r.ok) {
            os << "  partition " << k << ": " << r.detail << '\n';
            ok = false;
          }
        }
        verdict("partition", ok);
        break;
      }
      case Check::nested: {
        bool ok = true;
        for (std::size_t j = 0; j < sc.family.size(); ++j)
          for (std::size_t k = j + 1; k < sc.family.size(); ++k) {
            const auto r = pairwise_nested_check(sc.family, j, k);
            if (!r.ok) {
              ok = false;
              os << "  tests " << sc.test_labels.at(j) << " and " << sc.test_labels.at(k)
                 << " have overlapping cells that are not nested:\n    " << detail::describe_cell(sc, r.counterexample->first)
                 << "\n    " << detail::describe_cell(sc, r.counterexample->second) << '\n';
            }
          }
        verdict("nested", ok);
        break;
      }
      case Check::hasse: {
        try {
          const auto h = build_hasse(sc.family);
          os << "  " << h.nodes.size() << " nodes, " << h.edges.size() << " edges, " << h.roots().size() << " roots\n";
          verdict("hasse", true);
        } catch (const NestednessError& e) {
          os << "  " << sc.test_labels.at(e.check.j) << " and " << sc.test_labels.at(e.check.k)
             << " are not nested; no Hasse diagram\n";
          verdict("hasse", false);
        } catch (const std::logic_error& e) {
          os << "  " << e.what() << '\n';
          verdict("hasse", false);
        }
        break;
      }
      case Check::dominance: {
        const auto r = joint_dominance_check(sc.space, sc.family, sc.outcomes, sc.stats, sc.alphas, sc.draws, sc.seed);
        double worst = 0.0;
        const DominanceEntry* worst_e = nullptr;
        for (const auto& e : r.entries) {
          const double ratio = (e.joint / e.bound).convert_to<double>();
          if (!worst_e || ratio > worst) {
            worst = ratio;
            worst_e = &e;
          }
        }
        os << "  " << r.entries.size() << " alpha vectors, " << (r.exact ? "exact" : "Monte Carlo");
        if (!r.exact) os << " (" << r.n_draws << " draws, max se " << format_double(r.max_stderr) << ")";
        os << '\n';
        if (worst_e) {
          os << "  largest P/bound = " << format_double(worst) << " at alpha = (";
          for (std::size_t q = 0; q < worst_e->alphas.size(); ++q)
            os << (q ? ", " : "") << detail::rational_str(worst_e->alphas[q]);
          os << "): P = " << (r.exact ? detail::rational_str(worst_e->joint) : format_double(worst_e->joint.convert_to<double>()))
             << ", bound = " << detail::rational_str(worst_e->bound) << '\n';
        }
        if (r.conditional_holds)
          os << "  conditional bound per coarsening cell: " << (*r.conditional_holds ? "holds" : "violated") << '\n';
        if (!r.conditions_verified) os << "  conditions unverified: family is not nested\n";
        verdict("dominance", r.holds());
        break;
      }
      case Check::cond_indep: {
        bool ok = true;
        for (std::size_t j = 0; j < sc.family.size(); ++j)
          for (std::size_t k = j + 1; k < sc.family.size(); ++k) {
            const auto r = cond_indep_check(sc.space, sc.family, sc.outcomes, sc.stats, j, k);
            os << "  " << sc.test_labels.at(j) << " vs " << sc.test_labels.at(k) << ": max TV gap "
               << format_double(r.max_tv_gap) << '\n';
            ok = ok && r.independent;
          }
        verdict("cond_indep", ok);
        break;
      }
    }
  }
  return all_ok;
}

}  // namespace swmcrt
