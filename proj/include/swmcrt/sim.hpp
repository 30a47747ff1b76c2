#pragma once

// Simulation studies: size/power of the combined lag tests against a
// Bonferroni baseline, and coverage of inverted-test confidence intervals
// under covariate-by-time interactions.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "swmcrt/ci.hpp"
#include "swmcrt/combine.hpp"
#include "swmcrt/design.hpp"
#include "swmcrt/mcrt.hpp"
#include "swmcrt/parallel.hpp"
#include "swmcrt/rng.hpp"

namespace swmcrt {

struct OutcomeModel {
  double var_mu = 0.25;
  double var_x = 0.25;
  double var_eps = 0.1;
  int interaction = 0;       // m in 0..3
  std::vector<double> taus;  // taus[l]: effect l steps after crossover
};

inline double interaction_f(int m, double x) {
  switch (m) {
    case 0: return 0.0;
    case 1: return x * x;
    case 2: return 2.0 * std::exp(x / 2.0);
    case 3: return 5.0 * std::tanh(x);
    default: throw std::invalid_argument("interaction must be 0, 1, 2 or 3");
  }
}

inline void validate_model(const OutcomeModel& m) {
  if (m.var_mu < 0.0 || m.var_x < 0.0 || m.var_eps < 0.0) throw std::invalid_argument("variances must be non-negative");
  interaction_f(m.interaction, 0.0);
}

// Y_it = mu_i + 0.5 (1 - 0.1 [m != 0]) (X_i + t) + 0.1 f_m(X_i + t)
//        + tau_{t - A_i} [t >= A_i] + eps_it,   t = 0..T.
template <class Gen>
TrialData generate_trial(const DesignSpec& spec, const OutcomeModel& model, Gen& gen) {
  validate_model(model);
  auto z = sample_assignment(spec, gen);
  const auto n = static_cast<std::size_t>(spec.n_units());
  const int T = spec.n_times();
  OutcomePanel y(n, static_cast<std::size_t>(T) + 1);
  const double slope = model.interaction == 0 ? 0.5 : 0.45;
  const double sd_mu = std::sqrt(model.var_mu), sd_x = std::sqrt(model.var_x), sd_eps = std::sqrt(model.var_eps);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = sd_mu * standard_normal(gen);
    const double x = sd_x * standard_normal(gen);
    const int a = z.crossover(i);
    for (int t = 0; t <= T; ++t) {
      const double xt = x + t;
      double v = mu + slope * xt + 0.1 * interaction_f(model.interaction, xt);
      const int l = t - a;
      if (l >= 0 && static_cast<std::size_t>(l) < model.taus.size()) v += model.taus[static_cast<std::size_t>(l)];
      v += sd_eps * standard_normal(gen);
      y.at(i, static_cast<std::size_t>(t)) = v;
    }
  }
  return TrialData(std::move(z), std::move(y));
}

struct Sim1Config {
  int N = 100;
  int T = 6;
  int lag = 0;
  double tau = 0.0;
  double var_mu = 0.25;
  double var_x = 0.25;
  double var_eps = 0.1;
};

inline void validate(const Sim1Config& c) {
  if (c.T < 2) throw std::invalid_argument("T must be at least 2");
  if (c.N < c.T) throw std::invalid_argument("N must be at least T");
  if (c.lag < 0 || c.lag > c.T - 2) throw std::invalid_argument("lag must lie in 0..T-2");
  if (!(c.var_mu > 0.0 && c.var_x > 0.0 && c.var_eps > 0.0)) throw std::invalid_argument("variances must be positive");
}

// Only the tested lag carries an effect.
inline OutcomeModel sim1_model(const Sim1Config& c) {
  OutcomeModel m{c.var_mu, c.var_x, c.var_eps, 0, std::vector<double>(static_cast<std::size_t>(c.lag) + 1, 0.0)};
  m.taus.back() = c.tau;
  return m;
}

template <class Gen>
TrialData gen_outcomes_sim1(const Sim1Config& c, Gen& gen) {
  validate(c);
  return generate_trial(DesignSpec::balanced(c.N, c.T), sim1_model(c), gen);
}

struct Sim2Config {
  int N = 200;
  int T = 8;
  std::vector<double> taus{0.1, 0.3, 0.6, 0.4, 0.2, 0.0, 0.0, 0.0};
  int interaction = 0;
  double level = 0.9;
};

inline void validate(const Sim2Config& c) {
  if (c.T < 2 || c.N < c.T) throw std::invalid_argument("need 2 <= T <= N");
  if (!(c.level > 0.0 && c.level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  interaction_f(c.interaction, 0.0);
}

template <class Gen>
TrialData gen_outcomes_sim2(const Sim2Config& c, Gen& gen) {
  validate(c);
  return generate_trial(DesignSpec::balanced(c.N, c.T), OutcomeModel{0.25, 0.25, 0.1, c.interaction, c.taus}, gen);
}

// ---------------------------------------------------------------------------
// Power / size

enum class PowerMethod { mcrt_fisher, mcrt_weighted_z, bonferroni };
inline constexpr std::array<PowerMethod, 3> power_methods{PowerMethod::mcrt_fisher, PowerMethod::mcrt_weighted_z,
                                                          PowerMethod::bonferroni};

inline std::string to_string(PowerMethod m) {
  switch (m) {
    case PowerMethod::mcrt_fisher: return "mcrt_fisher";
    case PowerMethod::mcrt_weighted_z: return "mcrt_weighted_z";
    case PowerMethod::bonferroni: return "bonferroni";
  }
  return {};
}

struct PowerCell {
  std::string study = "custom";  // label for the axis being varied
  int N = 100;
  int T = 6;
  int lag = 0;
  double tau = 0.0;
};

struct PowerStudyConfig {
  std::vector<PowerCell> cells;
  std::size_t replicates = 300;
  std::uint64_t seed = default_seed;
  std::size_t budget = 499;
  double alpha = 0.05;
  unsigned threads = 1;
};

struct PowerRow {
  std::string study;
  int N = 0, T = 0, lag = 0;
  double tau = 0.0;
  std::string method;
  std::size_t replicates = 0;
  std::size_t rejections = 0;
  double rate = 0.0;
  double stderr_ = 0.0;

  friend bool operator==(const PowerRow&, const PowerRow&) = default;
};

struct PowerCellResult {
  PowerCell cell;
  std::string skipped;  // reason, empty when the cell ran
  // decisions[method][replicate]: 1 if rejected
  std::array<std::vector<std::uint8_t>, 3> decisions;
  std::size_t empty_families = 0;  // replicates where every test of a family was skipped
};

struct PowerStudyResult {
  std::vector<PowerCellResult> cells;

  std::vector<PowerRow> rows() const {
    std::vector<PowerRow> out;
    for (const auto& c : cells) {
      if (!c.skipped.empty()) continue;
      for (std::size_t q = 0; q < power_methods.size(); ++q) {
        PowerRow r{c.cell.study, c.cell.N, c.cell.T, c.cell.lag, c.cell.tau, to_string(power_methods[q]), 0, 0, 0.0, 0.0};
        r.replicates = c.decisions[q].size();
        for (auto d : c.decisions[q]) r.rejections += d;
        if (r.replicates > 0) {
          r.rate = static_cast<double>(r.rejections) / static_cast<double>(r.replicates);
          r.stderr_ = std::sqrt(r.rate * (1.0 - r.rate) / static_cast<double>(r.replicates));
        }
        out.push_back(std::move(r));
      }
    }
    return out;
  }
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

inline std::uint64_t replicate_seed(std::uint64_t seed, std::size_t rep) { return derive_seed(seed, {rep}); }

// One replicate: the three two-sided decisions at level alpha.  The Fisher and
// weighted-Z combiners read the same per-test p-values.
inline std::array<std::uint8_t, 3> power_replicate(const PowerCell& cell, const PowerStudyConfig& cfg, std::size_t rep,
                                                   std::size_t* empty_families = nullptr) {
  const Sim1Config sc{cell.N, cell.T, cell.lag, cell.tau};
  const std::uint64_t rs = replicate_seed(cfg.seed, rep);
  SplitMix64 gen(derive_seed(rs, {0}));
  const TrialData data = gen_outcomes_sim1(sc, gen);
  TestConfig tc;
  tc.budget = cfg.budget;
  tc.seed = derive_seed(rs, {1});
  std::array<std::uint8_t, 3> out{0, 0, 0};
  const auto mcrt = run_mcrts(data, cell.lag, tc);
  if (!mcrt.tests.empty()) {
    out[0] = combine_result(mcrt, Combiner::fisher, Alternative::two_sided).p <= cfg.alpha;
    out[1] = combine_result(mcrt, Combiner::weighted_z, Alternative::two_sided).p <= cfg.alpha;
  } else if (empty_families) {
    ++*empty_families;
  }
  const auto naive = run_naive_tests(data, cell.lag, tc);
  if (!naive.tests.empty())
    out[2] = combine_result(naive, Combiner::bonferroni, Alternative::two_sided).p <= cfg.alpha;
  else if (empty_families)
    ++*empty_families;
  return out;
}

inline void validate(const PowerStudyConfig& cfg) {
  if (cfg.replicates == 0) throw std::invalid_argument("replicates must be >= 1");
  if (cfg.budget == 0) throw std::invalid_argument("budget must be >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

inline PowerStudyResult power_study(const PowerStudyConfig& cfg, const ProgressFn& progress = {}) {
  validate(cfg);
  PowerStudyResult res;
  std::size_t total = 0;
  for (const auto& cell : cfg.cells) {
    PowerCellResult r;
    r.cell = cell;
    try {
      validate(Sim1Config{cell.N, cell.T, cell.lag, cell.tau});
      total += cfg.replicates;
    } catch (const std::invalid_argument& e) {
      r.skipped = e.what();
    }
    res.cells.push_back(std::move(r));
  }
  std::size_t done = 0;
  for (auto& r : res.cells) {
    if (!r.skipped.empty()) continue;
    std::vector<std::array<std::uint8_t, 3>> d(cfg.replicates);
    std::vector<std::size_t> empties(cfg.replicates, 0);
    parallel_for(cfg.replicates, cfg.threads,
                 [&](std::size_t rep) { d[rep] = power_replicate(r.cell, cfg, rep, &empties[rep]); });
    for (std::size_t q = 0; q < 3; ++q) {
      r.decisions[q].resize(cfg.replicates);
      for (std::size_t rep = 0; rep < cfg.replicates; ++rep) r.decisions[q][rep] = d[rep][q];
    }
    for (auto e : empties) r.empty_families += e;
    done += cfg.replicates;
    if (progress) progress(done, total);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Coverage

struct CoverageStudyConfig {
  int N = 200;
  int T = 8;
  std::vector<double> taus{0.1, 0.3, 0.6, 0.4, 0.2, 0.0, 0.0, 0.0};
  std::vector<int> interactions{0, 1, 2, 3};
  std::vector<int> lags{0, 1, 2, 3, 4};
  std::vector<Combiner> methods{Combiner::fisher, Combiner::weighted_z};
  double level = 0.9;
  std::size_t replicates = 300;
  std::uint64_t seed = default_seed;
  std::size_t budget = 499;
  unsigned threads = 1;
};

struct CoverageRow {
  int interaction = 0;
  int lag = 0;
  double tau = 0.0;
  std::string method;
  double level = 0.0;
  std::size_t replicates = 0;
  std::size_t covered = 0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_length = 0.0;
  double length_se = 0.0;
  std::size_t bracket_failures = 0;

  friend bool operator==(const CoverageRow&, const CoverageRow&) = default;
};

struct IntervalOutcome {
  bool ok = false;  // false: inversion failed (counted as not covering)
  double lo = 0.0, hi = 0.0;
};

struct CoverageStudyResult {
  std::vector<CoverageRow> rows;
  // outcomes[row][replicate]
  std::vector<std::vector<IntervalOutcome>> outcomes;
};

inline void validate(const CoverageStudyConfig& cfg) {
  if (cfg.replicates == 0) throw std::invalid_argument("replicates must be >= 1");
  if (cfg.budget == 0) throw std::invalid_argument("budget must be >= 1");
  if (cfg.methods.empty()) throw std::invalid_argument("no methods requested");
  if (cfg.lags.empty() || cfg.interactions.empty()) throw std::invalid_argument("empty lag or interaction grid");
  for (auto c : cfg.methods)
    if (c == Combiner::bonferroni) throw std::invalid_argument("coverage study supports fisher and weighted_z only");
  for (int m : cfg.interactions) validate(Sim2Config{cfg.N, cfg.T, cfg.taus, m, cfg.level});
  for (int l : cfg.lags) {
    if (l < 0 || l > cfg.T - 2) throw std::invalid_argument("lag " + std::to_string(l) + " must lie in 0..T-2");
    if (static_cast<std::size_t>(l) >= cfg.taus.size())
      throw std::invalid_argument("no tau given for lag " + std::to_string(l));
  }
}

inline CoverageStudyResult coverage_study(const CoverageStudyConfig& cfg, const ProgressFn& progress = {}) {
  validate(cfg);
  CoverageStudyResult res;
  const std::size_t per_m = cfg.lags.size() * cfg.methods.size();
  const std::size_t total = cfg.interactions.size() * cfg.replicates;
  std::size_t done = 0;
  for (std::size_t mi = 0; mi < cfg.interactions.size(); ++mi) {
    const int m = cfg.interactions[mi];
    const Sim2Config sc{cfg.N, cfg.T, cfg.taus, m, cfg.level};
    std::vector<std::vector<IntervalOutcome>> out(per_m, std::vector<IntervalOutcome>(cfg.replicates));
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t rep) {
      const std::uint64_t rs = derive_seed(cfg.seed, {static_cast<std::uint64_t>(m), rep});
      SplitMix64 gen(derive_seed(rs, {0}));
      const TrialData data = gen_outcomes_sim2(sc, gen);
      for (std::size_t li = 0; li < cfg.lags.size(); ++li) {
        const int lag = cfg.lags[li];
        TestConfig tc;
        tc.budget = cfg.budget;
        tc.seed = derive_seed(rs, {1, static_cast<std::uint64_t>(lag)});
        const auto prep = prepare_mcrts(data, lag, tc);
        for (std::size_t ci = 0; ci < cfg.methods.size(); ++ci) {
          CIConfig cc;
          cc.alpha = 1.0 - cfg.level;
          cc.budget = cfg.budget;
          IntervalOutcome o;
          try {
            const auto iv = invert_prepared(prep, cc, cfg.methods[ci]);
            o = {true, iv.lo, iv.hi};
          } catch (const InversionError&) {
          } catch (const std::invalid_argument&) {
          }
          out[li * cfg.methods.size() + ci][rep] = o;
        }
      }
    });
    for (std::size_t li = 0; li < cfg.lags.size(); ++li) {
      const int lag = cfg.lags[li];
      const double tau = cfg.taus[static_cast<std::size_t>(lag)];
      for (std::size_t ci = 0; ci < cfg.methods.size(); ++ci) {
        auto& v = out[li * cfg.methods.size() + ci];
        CoverageRow r;
        r.interaction = m;
        r.lag = lag;
        r.tau = tau;
        r.method = to_string(cfg.methods[ci]);
        r.level = cfg.level;
        r.replicates = v.size();
        double s = 0.0, ss = 0.0;
        std::size_t n_ok = 0;
        for (const auto& o : v) {
          if (!o.ok) {
            ++r.bracket_failures;
            continue;
          }
          r.covered += o.lo <= tau && tau <= o.hi;
          const double len = o.hi - o.lo;
          s += len;
          ss += len * len;
          ++n_ok;
        }
        r.coverage = static_cast<double>(r.covered) / static_cast<double>(r.replicates);
        r.coverage_se = std::sqrt(r.coverage * (1.0 - r.coverage) / static_cast<double>(r.replicates));
        if (n_ok > 0) {
          r.mean_length = s / static_cast<double>(n_ok);
          if (n_ok > 1) {
            const double var = std::max(0.0, (ss - s * s / static_cast<double>(n_ok)) / static_cast<double>(n_ok - 1));
            r.length_se = std::sqrt(var / static_cast<double>(n_ok));
          }
        }
        res.rows.push_back(r);
        res.outcomes.push_back(std::move(v));
      }
    }
    done += cfg.replicates;
    if (progress) progress(done, total);
  }
  return res;
}

// ---------------------------------------------------------------------------
// CSV tables

inline const char* power_csv_header = "study,N,T,lag,tau,method,replicates,rejections,rate,stderr";
inline const char* coverage_csv_header =
    "interaction,lag,tau,method,level,replicates,covered,coverage,coverage_se,mean_length,length_se,bracket_failures";

// Shortest representation that round-trips.
inline std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

template <class T>
T parse_number(const std::string& s, std::size_t line, const char* column) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw std::runtime_error("line " + std::to_string(line) + ": bad value '" + s + "' in column " + column);
  return v;
}

inline void expect_header(std::istream& in, const char* header) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("line 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw std::runtime_error("line 1: unexpected header '" + line + "'");
}

}  // namespace detail

inline void write_power_csv(std::ostream& os, const std::vector<PowerRow>& rows) {
  os << power_csv_header << '\n';
  for (const auto& r : rows)
    os << r.study << ',' << r.N << ',' << r.T << ',' << r.lag << ',' << format_double(r.tau) << ',' << r.method << ','
       << r.replicates << ',' << r.rejections << ',' << format_double(r.rate) << ',' << format_double(r.stderr_)
       << '\n';
}

inline std::vector<PowerRow> read_power_csv(std::istream& in) {
  detail::expect_header(in, power_csv_header);
  std::vector<PowerRow> rows;
  std::string line;
  for (std::size_t ln = 2; std::getline(in, line); ++ln) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 10) throw std::runtime_error("line " + std::to_string(ln) + ": expected 10 fields");
    rows.push_back(PowerRow{f[0], detail::parse_number<int>(f[1], ln, "N"), detail::parse_number<int>(f[2], ln, "T"),
                            detail::parse_number<int>(f[3], ln, "lag"), detail::parse_number<double>(f[4], ln, "tau"),
                            f[5], detail::parse_number<std::size_t>(f[6], ln, "replicates"),
                            detail::parse_number<std::size_t>(f[7], ln, "rejections"),
                            detail::parse_number<double>(f[8], ln, "rate"),
                            detail::parse_number<double>(f[9], ln, "stderr")});
  }
  return rows;
}

inline void write_coverage_csv(std::ostream& os, const std::vector<CoverageRow>& rows) {
  os << coverage_csv_header << '\n';
  for (const auto& r : rows)
    os << r.interaction << ',' << r.lag << ',' << format_double(r.tau) << ',' << r.method << ','
       << format_double(r.level) << ',' << r.replicates << ',' << r.covered << ',' << format_double(r.coverage) << ','
       << format_double(r.coverage_se) << ',' << format_double(r.mean_length) << ',' << format_double(r.length_se)
       << ',' << r.bracket_failures << '\n';
}

inline std::vector<CoverageRow> read_coverage_csv(std::istream& in) {
  detail::expect_header(in, coverage_csv_header);
  std::vector<CoverageRow> rows;
  std::string line;
  for (std::size_t ln = 2; std::getline(in, line); ++ln) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 12) throw std::runtime_error("line " + std::to_string(ln) + ": expected 12 fields");
    CoverageRow r;
    r.interaction = detail::parse_number<int>(f[0], ln, "interaction");
    r.lag = detail::parse_number<int>(f[1], ln, "lag");
    r.tau = detail::parse_number<double>(f[2], ln, "tau");
    r.method = f[3];
    r.level = detail::parse_number<double>(f[4], ln, "level");
    r.replicates = detail::parse_number<std::size_t>(f[5], ln, "replicates");
    r.covered = detail::parse_number<std::size_t>(f[6], ln, "covered");
    r.coverage = detail::parse_number<double>(f[7], ln, "coverage");
    r.coverage_se = detail::parse_number<double>(f[8], ln, "coverage_se");
    r.mean_length = detail::parse_number<double>(f[9], ln, "mean_length");
    r.length_se = detail::parse_number<double>(f[10], ln, "length_se");
    r.bracket_failures = detail::parse_number<std::size_t>(f[11], ln, "bracket_failures");
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string power_csv(const std::vector<PowerRow>& rows) {
  std::ostringstream os;
  write_power_csv(os, rows);
  return os.str();
}

inline std::string coverage_csv(const std::vector<CoverageRow>& rows) {
  std::ostringstream os;
  write_coverage_csv(os, rows);
  return os.str();
}

// ---------------------------------------------------------------------------
// Presets

// The one-factor-at-a-time grid: N, T and lag varied around (300, 8, 2) at
// tau in {0, 0.03}, and tau varied in 0.01..0.05.
inline std::vector<PowerCell> sim1_grid() {
  std::vector<PowerCell> cells;
  for (double tau : {0.0, 0.03}) {
    for (int n : {100, 200, 300, 400, 500}) cells.push_back({"N", n, 8, 2, tau});
    for (int t : {4, 6, 8, 10, 12}) cells.push_back({"T", 300, t, 2, tau});
    for (int l : {0, 1, 2, 3, 4}) cells.push_back({"lag", 300, 8, l, tau});
  }
  for (double tau : {0.01, 0.02, 0.03, 0.04, 0.05}) cells.push_back({"tau", 300, 8, 2, tau});
  return cells;
}

inline PowerStudyConfig sim1_preset(bool full) {
  PowerStudyConfig c;
  c.cells = sim1_grid();
  c.replicates = full ? 1000 : 300;
  c.budget = full ? 1000 : 499;
  return c;
}

inline CoverageStudyConfig sim2_preset(bool full) {
  CoverageStudyConfig c;
  c.N = full ? 200 : 100;
  c.replicates = full ? 1000 : 300;
  c.budget = full ? 1000 : 499;
  return c;
}

}  // namespace swmcrt
