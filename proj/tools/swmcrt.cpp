// swmcrt: stepped-wedge lagged-effect tests from the command line.
//
//   swmcrt schedule --T 8 --lag 1
//   swmcrt analyze --input trial.csv --lag 2 [--combiner weighted_z] [--level 0.9]
//   swmcrt simulate (--preset sim1-desk | --config study.json) [--out DIR]
//   swmcrt validate scenario.json
//
// Exit codes: 0 success, 1 usage or parse error, 2 data error, 3 check failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "swmcrt/swmcrt.hpp"

namespace {

enum Exit { ok = 0, usage = 1, data = 2, check_failed = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

swmcrt::GridSpec parse_grid(const std::string& s) {
  swmcrt::GridSpec g;
  char c1 = 0, c2 = 0;
  std::istringstream is(s);
  if (!(is >> g.lo >> c1 >> g.hi >> c2 >> g.step) || c1 != ':' || c2 != ':' || !is.eof())
    throw UsageError("--grid expects lo:hi:step, got '" + s + "'");
  return g;
}

// ---------------------------------------------------------------------------

struct ScheduleOpts {
  int T = 0;
  int lag = 0;
  std::string format = "csv";
};

int cmd_schedule(const ScheduleOpts& o) {
  swmcrt::LagSchedule s;
  try {
    s = swmcrt::build_schedule(o.T, o.lag);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (o.format == "csv") {
    swmcrt::write_schedule_csv(std::cout, s);
  } else {
    std::cout << "T = " << s.n_times << ", lag = " << s.lag << ", J = " << s.n_subsets() << '\n';
    for (std::size_t j = 0; j < s.subsets.size(); ++j) {
      std::cout << "C" << j + 1 << " = {";
      for (std::size_t q = 0; q < s.subsets[j].size(); ++q) std::cout << (q ? ", " : "") << s.subsets[j][q];
      std::cout << "}\n";
    }
  }
  return ok;
}

// ---------------------------------------------------------------------------

struct AnalyzeOpts {
  std::string input;
  int lag = 0;
  std::string combiner = "weighted_z";
  std::string alternative = "greater";
  std::string statistic = "diff_in_means";
  double alpha = 0.05;
  double level = 0.9;
  bool no_ci = false;
  std::string grid;
  std::size_t budget = 999;
  std::size_t min_arm = 2;
  std::uint64_t seed = swmcrt::default_seed;
  unsigned threads = 1;
  std::string out;
  std::string tests_out;
};

int cmd_analyze(const AnalyzeOpts& o) {
  using namespace swmcrt;
  Combiner combiner;
  Alternative alt;
  try {
    combiner = parse_combiner(o.combiner);
    alt = parse_alternative(o.alternative);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (o.statistic != "diff_in_means" && o.statistic != "rank_sum") throw UsageError("--statistic must be diff_in_means or rank_sum");
  const Statistic stat = o.statistic == "rank_sum" ? Statistic::rank_sum : Statistic::diff_in_means;
  if (!(o.level > 0.0 && o.level < 1.0)) throw UsageError("--level must lie in (0, 1)");
  if (stat == Statistic::rank_sum && !o.no_ci) throw UsageError("confidence intervals need --statistic diff_in_means (or pass --no-ci)");

  auto in = open_input(o.input);
  std::optional<TrialData> data;
  try {
    data.emplace(read_trial_csv(in));
  } catch (const CsvError& e) {
    throw DataError(o.input + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(o.input + ": " + e.what());
  }
  TestConfig tc;
  tc.statistic = stat;
  tc.budget = o.budget;
  tc.seed = o.seed;
  tc.threads = o.threads;
  tc.min_arm = o.min_arm;
  PreparedTests prep;
  try {
    prep = combiner == Combiner::bonferroni ? prepare_naive_tests(*data, o.lag, tc) : prepare_mcrts(*data, o.lag, tc);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  const auto result = summarize(prep);
  std::cout << "N = " << data->n_units() << ", T = " << data->n_times() << ", lag = " << o.lag << ", "
            << result.tests.size() << " test(s)";
  if (!result.skipped.empty()) std::cout << ", " << result.skipped.size() << " skipped";
  std::cout << '\n';
  for (const auto& s : result.skipped) std::cout << "  skipped k=" << s.k << ": " << s.reason << '\n';
  if (result.tests.empty()) throw DataError("every test was skipped; nothing to combine");

  std::vector<double> weights;
  try {
    if (combiner == Combiner::weighted_z) weights = weights_from_result(result).weights;
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  std::cout << "  k  subset  n1  n0  estimate  p_less  p_greater" << (weights.empty() ? "" : "  weight") << '\n';
  for (std::size_t q = 0; q < result.tests.size(); ++q) {
    const auto& t = result.tests[q];
    std::cout << "  " << t.group.k << "  " << t.group.subset << "  " << t.n_treated << "  " << t.n_control << "  "
              << format_double(t.mean_treated - t.mean_control) << "  " << format_double(t.result.p_less) << "  "
              << format_double(t.result.p_greater);
    if (!weights.empty()) std::cout << "  " << format_double(weights[q]);
    std::cout << '\n';
  }
  const auto combined = combine_result(result, combiner, alt);
  std::cout << to_string(combiner) << " (" << to_string(alt) << "): statistic " << format_double(combined.statistic)
            << ", p = " << format_double(combined.p) << (combined.p <= o.alpha ? "  reject" : "  do not reject")
            << " at alpha " << format_double(o.alpha) << '\n';

  AnalysisRecord rec{o.lag, to_string(combiner), to_string(alt), combined.statistic, combined.p, std::nullopt};
  int rc = ok;
  if (!o.no_ci) {
    CIConfig cc;
    cc.alpha = 1.0 - o.level;
    cc.budget = o.budget;
    cc.threads = o.threads;
    if (!o.grid.empty()) cc.grid = parse_grid(o.grid);
    try {
      rec.ci = invert_prepared(prep, cc, combiner);
      std::cout << format_double(o.level * 100) << "% CI for the lag-" << o.lag << " effect: [" << format_double(rec.ci->lo)
                << ", " << format_double(rec.ci->hi) << "]\n";
    } catch (const InversionError& e) {
      std::cerr << "swmcrt: confidence interval not found: " << e.what() << '\n';
      rc = Exit::data;
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (!o.out.empty()) {
    std::ostringstream os;
    write_result_csv(os, {rec});
    write_file(o.out, os.str());
  }
  if (!o.tests_out.empty()) {
    std::ostringstream os;
    write_tests_csv(os, result, weights);
    write_file(o.tests_out, os.str());
  }
  return rc;
}

// ---------------------------------------------------------------------------

struct SimulateOpts {
  std::string config;
  std::string preset;
  std::optional<long long> replicates;
  std::optional<std::uint64_t> seed;
  std::optional<long long> budget;
  unsigned threads = 1;
  std::string out = ".";
  bool quiet = false;
};

int cmd_simulate(const SimulateOpts& o) {
  using namespace swmcrt;
  if (o.config.empty() == o.preset.empty()) throw UsageError("give exactly one of --config or --preset");
  StudyConfig sc;
  try {
    if (!o.preset.empty()) {
      sc = study_preset(o.preset);
    } else {
      auto in = open_input(o.config);
      sc = read_study_config(in);
    }
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (o.replicates && *o.replicates < 1) throw UsageError("--replicates must be >= 1");
  if (o.budget && *o.budget < 1) throw UsageError("--budget must be >= 1");
  auto apply = [&](auto& c) {
    if (o.replicates) c.replicates = static_cast<std::size_t>(*o.replicates);
    if (o.seed) c.seed = *o.seed;
    if (o.budget) c.budget = static_cast<std::size_t>(*o.budget);
    c.threads = o.threads;
  };
  std::mutex mu;
  ProgressFn progress;
  if (!o.quiet)
    progress = [&](std::size_t done, std::size_t total) {
      std::lock_guard lock(mu);
      std::cerr << "progress: " << done << "/" << total << " replicates\n";
    };
  std::error_code ec;
  std::filesystem::create_directories(o.out, ec);
  if (sc.kind == StudyConfig::Kind::power) {
    apply(sc.power);
    const auto res = power_study(sc.power, progress);
    for (const auto& c : res.cells)
      if (!c.skipped.empty())
        std::cerr << "skipped cell N=" << c.cell.N << " T=" << c.cell.T << " lag=" << c.cell.lag << ": " << c.skipped
                  << '\n';
    const auto path = (std::filesystem::path(o.out) / "power.csv").string();
    write_file(path, power_csv(res.rows()));
    std::cout << "wrote " << path << '\n';
  } else {
    apply(sc.coverage);
    const auto res = coverage_study(sc.coverage, progress);
    const auto path = (std::filesystem::path(o.out) / "coverage.csv").string();
    write_file(path, coverage_csv(res.rows));
    std::cout << "wrote " << path << '\n';
  }
  return ok;
}

// ---------------------------------------------------------------------------

struct ValidateOpts {
  std::string scenario;
  std::optional<long long> draws;
  std::optional<std::uint64_t> seed;
};

int cmd_validate(const ValidateOpts& o) {
  using namespace swmcrt;
  auto in = open_input(o.scenario);
  Scenario sc;
  try {
    sc = read_scenario(in);
  } catch (const ConfigError& e) {
    throw UsageError(o.scenario + ": " + e.what());
  }
  if (o.draws) {
    if (*o.draws < 0) throw UsageError("--draws must be >= 0");
    sc.draws = static_cast<std::size_t>(*o.draws);
  }
  if (o.seed) sc.seed = *o.seed;
  return run_scenario_checks(sc, std::cout) ? ok : check_failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple conditional randomization tests for lagged effects in stepped-wedge trials"};
  app.require_subcommand(1);
  const unsigned default_threads = swmcrt::default_thread_count();

  ScheduleOpts so;
  auto* sched = app.add_subcommand("schedule", "Print the interleaved crossover-time subsets for a lag");
  sched->add_option("--T", so.T, "Number of crossover times")->required();
  sched->add_option("--lag", so.lag, "Lag l")->required();
  sched->add_option("--format", so.format, "csv or text")->check(CLI::IsMember({"csv", "text"}));

  AnalyzeOpts ao;
  ao.threads = default_threads;
  auto* an = app.add_subcommand("analyze", "Test and estimate a lagged effect from a trial CSV");
  an->add_option("--input,-i", ao.input, "Trial CSV: unit,crossover_time,y0..yT")->required();
  an->add_option("--lag", ao.lag, "Lag l")->required();
  an->add_option("--combiner", ao.combiner, "weighted_z, fisher or bonferroni (naive groups)");
  an->add_option("--alternative", ao.alternative, "greater, less or two_sided");
  an->add_option("--statistic", ao.statistic, "diff_in_means or rank_sum");
  an->add_option("--alpha", ao.alpha, "Test level for the reject decision");
  an->add_option("--level", ao.level, "Confidence level of the interval");
  an->add_flag("--no-ci", ao.no_ci, "Skip the confidence interval");
  an->add_option("--grid", ao.grid, "Grid lo:hi:step for the interval search");
  an->add_option("--budget,-B", ao.budget, "Monte-Carlo relabelings per test")->check(CLI::PositiveNumber);
  an->add_option("--min-arm", ao.min_arm, "Skip tests with fewer units in an arm");
  an->add_option("--seed", ao.seed, "Random seed");
  an->add_option("--threads", ao.threads, "Worker threads (default SWMCRT_THREADS or all cores)");
  an->add_option("--out,-o", ao.out, "Write the result CSV here");
  an->add_option("--tests-out", ao.tests_out, "Write the per-test CSV here");

  SimulateOpts mo;
  mo.threads = default_threads;
  auto* sim = app.add_subcommand("simulate", "Run a size/power or coverage study");
  sim->add_option("--config,-c", mo.config, "Study config (JSON)");
  sim->add_option("--preset", mo.preset, "sim1-desk, sim1-full, sim2-desk or sim2-full");
  sim->add_option("--replicates", mo.replicates, "Override the replicate count");
  sim->add_option("--seed", mo.seed, "Override the master seed");
  sim->add_option("--budget,-B", mo.budget, "Override the relabelings per test");
  sim->add_option("--threads", mo.threads, "Worker threads (default SWMCRT_THREADS or all cores)");
  sim->add_option("--out,-o", mo.out, "Output directory");
  sim->add_flag("--quiet,-q", mo.quiet, "No progress on stderr");

  ValidateOpts vo;
  auto* val = app.add_subcommand("validate", "Check the joint-validity conditions on a finite scenario");
  val->add_option("scenario", vo.scenario, "Scenario file (JSON)")->required();
  val->add_option("--draws", vo.draws, "Monte-Carlo draws for the dominance check (0 = exact)");
  val->add_option("--seed", vo.seed, "Seed for Monte-Carlo draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : usage;
  }
  try {
    if (*sched) return cmd_schedule(so);
    if (*an) return cmd_analyze(ao);
    if (*sim) return cmd_simulate(mo);
    if (*val) return cmd_validate(vo);
  } catch (const UsageError& e) {
    std::cerr << "swmcrt: " << e.what() << '\n';
    return usage;
  } catch (const DataError& e) {
    std::cerr << "swmcrt: " << e.what() << '\n';
    return data;
  } catch (const std::exception& e) {
    std::cerr << "swmcrt: " << e.what() << '\n';
    return data;
  }
  return usage;
}
