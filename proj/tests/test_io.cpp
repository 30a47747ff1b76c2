#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "swmcrt/config.hpp"
#include "swmcrt/io.hpp"

using namespace swmcrt;

namespace {

std::size_t error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    read_trial_csv(in);
  } catch (const CsvError& e) {
    return e.line;
  }
  return 0;
}

nlohmann::json parse(const std::string& s) { return nlohmann::json::parse(s); }

}  // namespace

TEST(TrialCsv, RoundTrip) {
  SplitMix64 g(1);
  const auto d = gen_outcomes_sim1(Sim1Config{12, 3, 0, 0.4}, g);
  std::ostringstream os;
  write_trial_csv(os, d);
  std::istringstream in(os.str());
  const auto back = read_trial_csv(in);
  EXPECT_EQ(back.z, d.z);
  EXPECT_EQ(back.y, d.y);
  std::ostringstream again;
  write_trial_csv(again, back);
  EXPECT_EQ(again.str(), os.str());
}

TEST(TrialCsv, ErrorsCarryLineNumbers) {
  const std::string head = "unit,crossover_time,y0,y1,y2\n";
  EXPECT_EQ(error_line(""), 1u);
  EXPECT_EQ(error_line("unit,time,y0,y1\n"), 1u);
  EXPECT_EQ(error_line("unit,crossover_time,y0,y2\n"), 1u);
  EXPECT_EQ(error_line(head + "a,1,0,0,0\nb,2,0,0\n"), 3u);
  EXPECT_EQ(error_line(head + "a,1,0,0,0\nb,x,0,0,0\n"), 3u);
  EXPECT_EQ(error_line(head + "a,1,0,0,0\nb,3,0,0,0\n"), 3u);
  EXPECT_EQ(error_line(head + "a,1,0,0,0\nb,2,0,oops,0\n"), 3u);
  EXPECT_EQ(error_line(head + "a,1,0,0,0\na,2,0,0,0\n"), 3u);
  EXPECT_EQ(error_line(head + "a,1,0,0,0\nb,2,0,nan,0\n"), 3u);
  EXPECT_EQ(error_line(head + "a,1,0,0,0\nb,1,0,0,0\n"), 3u);  // nobody at time 2
  EXPECT_EQ(error_line(head), 1u);
  EXPECT_EQ(error_line(head + "a,1,0,0,0\r\nb,2,0,1,2\r\n"), 0u);
}

TEST(ScheduleCsv, RoundTrip) {
  const auto s = build_schedule(8, 1);
  std::ostringstream os;
  write_schedule_csv(os, s);
  EXPECT_EQ(os.str(), "1,3,5,7\n2,4,6,8\n");
  std::istringstream in(os.str());
  EXPECT_EQ(read_schedule_csv(in, 8, 1), s);
}

TEST(ResultCsv, Layout) {
  AnalysisRecord a{2, "weighted_z", "two_sided", 1.5, 0.25, ConfidenceInterval{}};
  a.ci->lo = -0.5;
  a.ci->hi = 1.25;
  a.ci->level = 0.9;
  AnalysisRecord b{2, "fisher", "greater", 3.0, 0.5, std::nullopt};
  std::ostringstream os;
  write_result_csv(os, {a, b});
  EXPECT_EQ(os.str(), std::string(result_csv_header) +
                          "\n2,weighted_z,two_sided,1.5,0.25,0.9,-0.5,1.25\n2,fisher,greater,3,0.5,,,\n");
}

TEST(StudyConfig, PresetsAndOverrides) {
  const auto c = parse_study_config(parse(R"({"preset": "sim1-desk", "replicates": 7, "seed": 3})"));
  EXPECT_EQ(c.kind, StudyConfig::Kind::power);
  EXPECT_EQ(c.power.replicates, 7u);
  EXPECT_EQ(c.power.seed, 3u);
  EXPECT_FALSE(c.power.cells.empty());
  const auto d = parse_study_config(parse(R"({"study": "coverage", "N": 40, "lags": [0, 1], "level": 0.8})"));
  EXPECT_EQ(d.kind, StudyConfig::Kind::coverage);
  EXPECT_EQ(d.coverage.N, 40);
  EXPECT_EQ(d.coverage.lags, (std::vector<int>{0, 1}));
  EXPECT_DOUBLE_EQ(d.coverage.level, 0.8);
  const auto e = parse_study_config(
      parse(R"({"study": "power", "cells": [{"study": "N", "N": 50, "T": 5, "lag": 1, "tau": 0.1}]})"));
  ASSERT_EQ(e.power.cells.size(), 1u);
  EXPECT_EQ(e.power.cells[0].N, 50);
  EXPECT_DOUBLE_EQ(e.power.cells[0].tau, 0.1);
}

TEST(StudyConfig, Rejections) {
  auto msg = [](const std::string& s) -> std::string {
    try {
      parse_study_config(parse(s));
    } catch (const ConfigError& e) {
      return e.what();
    }
    return {};
  };
  EXPECT_NE(msg(R"({"study": "power", "replicats": 3})").find("replicats"), std::string::npos);
  EXPECT_NE(msg(R"({"study": "power", "level": 0.9})").find("level"), std::string::npos);
  EXPECT_NE(msg(R"({"study": "coverage", "alpha": 0.1})").find("alpha"), std::string::npos);
  EXPECT_FALSE(msg(R"({"study": "power", "replicates": 0})").empty());
  EXPECT_FALSE(msg(R"({"preset": "sim3"})").empty());
  EXPECT_FALSE(msg(R"({"replicates": 5})").empty());
  EXPECT_FALSE(msg(R"({"study": "power", "cells": [{"N": 50}]})").empty());
}

TEST(Scenario, ShippedFiles) {
  for (const auto& [file, ok] : std::vector<std::pair<std::string, bool>>{
           {"nested-lag0.json", true}, {"naive-lag1.json", false}, {"explicit-chain.json", true}}) {
    std::ifstream in(std::string(SWMCRT_DATA_DIR) + "/scenarios/" + file);
    ASSERT_TRUE(in) << file;
    const auto sc = read_scenario(in);
    std::ostringstream os;
    EXPECT_EQ(run_scenario_checks(sc, os), ok) << file << '\n' << os.str();
  }
}

TEST(Scenario, Rejections) {
  std::istringstream empty("  \n");
  EXPECT_THROW(read_scenario(empty), ConfigError);
  EXPECT_THROW(parse_scenario(parse("{}")), ConfigError);
  EXPECT_THROW(parse_scenario(parse(R"({"kind": "other"})")), ConfigError);
  EXPECT_THROW(parse_scenario(parse(R"({"kind": "stepped_wedge", "counts": [1, 1], "lag": 0, "colour": 1})")),
               ConfigError);
  EXPECT_THROW(parse_scenario(parse(R"({"kind": "explicit", "elements": ["a", "b"], "probs": ["1/2", "1/3"],
                                        "partitions": [[0, 0]]})")),
               std::exception);
  std::istringstream broken("{\"kind\": ");
  EXPECT_THROW(read_scenario(broken), ConfigError);
}

TEST(Scenario, ReportsCounterexampleLabels) {
  std::ifstream in(std::string(SWMCRT_DATA_DIR) + "/scenarios/naive-lag1.json");
  const auto sc = read_scenario(in);
  std::ostringstream os;
  run_scenario_checks(sc, os);
  const auto text = os.str();
  EXPECT_NE(text.find("nested: FAIL"), std::string::npos);
  EXPECT_NE(text.find("not nested"), std::string::npos);
  EXPECT_NE(text.find("{"), std::string::npos);
}
