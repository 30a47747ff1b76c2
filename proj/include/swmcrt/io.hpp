#pragma once

// CSV readers and writers for trial data, schedules and analysis results.
//
// Trial CSV:    unit,crossover_time,y0,y1,...,yT   (one row per unit)
// Schedule CSV: one line per subset, comma-separated crossover times
// Result CSV:   lag,method,alternative,statistic,p_value,level,delta_lo,delta_hi

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "swmcrt/ci.hpp"
#include "swmcrt/combine.hpp"
#include "swmcrt/design.hpp"
#include "swmcrt/mcrt.hpp"
#include "swmcrt/sim.hpp"

namespace swmcrt {

class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

inline TrialData read_trial_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError(1, "empty file; expected header unit,crossover_time,y0..yT");
  auto header = detail::split_csv_line(line);
  if (header.size() < 4 || header[0] != "unit" || header[1] != "crossover_time")
    throw CsvError(1, "header must be unit,crossover_time,y0,...,yT with T >= 1");
  for (std::size_t c = 2; c < header.size(); ++c)
    if (header[c] != "y" + std::to_string(c - 2))
      throw CsvError(1, "column " + std::to_string(c + 1) + " should be y" + std::to_string(c - 2));
  const int T = static_cast<int>(header.size()) - 3;

  std::vector<std::string> ids;
  CrossoverTimes a;
  std::vector<std::vector<double>> rows;
  std::size_t ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw CsvError(ln, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    if (f[0].empty()) throw CsvError(ln, "empty unit id");
    if (std::find(ids.begin(), ids.end(), f[0]) != ids.end()) throw CsvError(ln, "duplicate unit id '" + f[0] + "'");
    int t = 0;
    try {
      t = detail::parse_number<int>(f[1], ln, "crossover_time");
    } catch (const std::runtime_error&) {
      throw CsvError(ln, "crossover_time '" + f[1] + "' is not an integer");
    }
    if (t < 1 || t > T) throw CsvError(ln, "crossover_time " + std::to_string(t) + " outside 1.." + std::to_string(T));
    std::vector<double> y;
    for (std::size_t c = 2; c < f.size(); ++c) {
      double v = 0.0;
      try {
        v = detail::parse_number<double>(f[c], ln, header[c].c_str());
      } catch (const std::runtime_error&) {
        throw CsvError(ln, "value '" + f[c] + "' in column " + header[c] + " is not a number");
      }
      if (!std::isfinite(v)) throw CsvError(ln, "value in column " + header[c] + " is not finite");
      y.push_back(v);
    }
    ids.push_back(f[0]);
    a.a.push_back(t);
    rows.push_back(std::move(y));
  }
  if (rows.empty()) throw CsvError(ln, "no data rows");
  std::vector<int> counts(static_cast<std::size_t>(T), 0);
  for (int t : a.a) ++counts[static_cast<std::size_t>(t - 1)];
  for (int t = 1; t <= T; ++t)
    if (counts[static_cast<std::size_t>(t - 1)] == 0)
      throw CsvError(ln, "no unit crosses over at time " + std::to_string(t));
  const DesignSpec spec(std::move(counts));
  OutcomePanel y(rows.size(), static_cast<std::size_t>(T) + 1);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t t = 0; t < rows[i].size(); ++t) y.at(i, t) = rows[i][t];
  return TrialData(AssignmentMatrix::from_times(a, spec), std::move(y), std::move(ids));
}

inline void write_trial_csv(std::ostream& os, const TrialData& d) {
  os << "unit,crossover_time";
  for (int t = 0; t <= d.n_times(); ++t) os << ",y" << t;
  os << '\n';
  for (std::size_t i = 0; i < static_cast<std::size_t>(d.n_units()); ++i) {
    os << (d.unit_ids.empty() ? std::to_string(i + 1) : d.unit_ids[i]) << ',' << d.z.crossover(i);
    for (int t = 0; t <= d.n_times(); ++t) os << ',' << format_double(d.y.at(i, static_cast<std::size_t>(t)));
    os << '\n';
  }
}

inline void write_schedule_csv(std::ostream& os, const LagSchedule& s) {
  for (const auto& c : s.subsets) {
    for (std::size_t q = 0; q < c.size(); ++q) os << (q ? "," : "") << c[q];
    os << '\n';
  }
}

inline LagSchedule read_schedule_csv(std::istream& in, int n_times, int lag) {
  LagSchedule s{n_times, lag, {}};
  std::string line;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<int> c;
    for (const auto& f : detail::split_csv_line(line)) c.push_back(detail::parse_number<int>(f, ln, "time"));
    s.subsets.push_back(std::move(c));
  }
  return s;
}

struct AnalysisRecord {
  int lag = 0;
  std::string method;
  std::string alternative;
  double statistic = 0.0;
  double p_value = 1.0;
  std::optional<ConfidenceInterval> ci;
};

inline const char* result_csv_header = "lag,method,alternative,statistic,p_value,level,delta_lo,delta_hi";

inline void write_result_csv(std::ostream& os, const std::vector<AnalysisRecord>& recs) {
  os << result_csv_header << '\n';
  for (const auto& r : recs) {
    os << r.lag << ',' << r.method << ',' << r.alternative << ',' << format_double(r.statistic) << ','
       << format_double(r.p_value) << ',';
    if (r.ci)
      os << format_double(r.ci->level) << ',' << format_double(r.ci->lo) << ',' << format_double(r.ci->hi);
    else
      os << ",,";
    os << '\n';
  }
}

inline const char* tests_csv_header =
    "lag,k,subset,outcome_time,n_treated,n_control,mean_treated,mean_control,statistic,p_less,p_greater,resamples,"
    "exact,weight";

inline void write_tests_csv(std::ostream& os, const McrtResult& r, const std::vector<double>& weights) {
  os << tests_csv_header << '\n';
  for (std::size_t q = 0; q < r.tests.size(); ++q) {
    const auto& t = r.tests[q];
    os << r.lag << ',' << t.group.k << ',' << t.group.subset << ',' << t.group.outcome_time << ',' << t.n_treated
       << ',' << t.n_control << ',' << format_double(t.mean_treated) << ',' << format_double(t.mean_control) << ','
       << format_double(t.result.stat_obs) << ',' << format_double(t.result.p_less) << ','
       << format_double(t.result.p_greater) << ',' << t.result.n_resamples << ',' << (t.result.exact ? 1 : 0) << ','
       << (q < weights.size() ? format_double(weights[q]) : std::string()) << '\n';
  }
}

}  // namespace swmcrt
