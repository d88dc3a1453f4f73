#include <gtest/gtest.h>

#include <json.hpp>

#include "ebstab/ebstab.hpp"

namespace ebstab {
namespace {

AnalysisOptions quick() {
  AnalysisOptions o;
  o.samples = 64;
  o.levels = 4;
  return o;
}

Report analysis_report(const std::string& text) {
  const ProblemFile p = parse_problem(text);
  return Report{"report", 0, p, analyze_problem(p, quick())};
}

TEST(EmitReport, SweepCsvHeaderAndRows) {
  const ProblemFile p = parse_problem("dim 1\nexpr (exp1d 0 -1)\n");
  const SweepResult s =
      run_perturbation_sweep(p, Vector::Zero(1), {Vector::Constant(1, -1.0)}, {0.1, 0.0}, std::nullopt, quick());
  const std::string csv = emit_report(Report{"perturb", 0, p, s}, ReportFormat::Csv);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epsilon,u_star,beta_before,beta_after,tau_local,tau_global,verdict");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("0,-1,-1,-1,", 0), 0u) << line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("0.1,-1,-1,-0.9,", 0), 0u) << line;
  EXPECT_NE(line.find(",,stable"), std::string::npos) << line;
}

TEST(EmitReport, UnstableVerdictHasWitnesses) {
  const auto j = nlohmann::json::parse(emit_json(analysis_report("dim 1\nexpr (possq 0)\npoint [0]\n")));
  EXPECT_EQ(j["schema"], "eb-report/1");
  EXPECT_EQ(j["command"], "report");
  EXPECT_EQ(j["seed"], 0);
  const auto& v = j["results"]["local"]["verdict"];
  EXPECT_EQ(v["verdict"], "unstable");
  ASSERT_TRUE(v["witnesses"].is_array());
  EXPECT_FALSE(v["witnesses"].empty());
  EXPECT_EQ(v["witnesses"][0]["kind"], "destabilizing-direction");
}

TEST(EmitReport, GlobalUnstableVerdictHasWitnesses) {
  const auto j =
      nlohmann::json::parse(emit_json(analysis_report("dim 1\nexpr (exp1d 0 -1)\nbox -50..2\ntau 0.5\n")));
  const auto& v = j["results"]["global"]["verdict"];
  EXPECT_EQ(v["verdict"], "unstable");
  EXPECT_FALSE(v["witnesses"].empty());
}

TEST(EmitReport, VacuousEtaIsInfinityMarker) {
  // f <= 0 on the whole box: no infeasible samples
  const ProblemFile p = parse_problem("dim 1\nexpr (exp1d 0 -10)\n");
  GlobalAnalysis g;
  g.tau = 1.0;
  g.box = Box::cube(1, -1.0, 1.0);
  g.modulus = eta_global(p.function(), g.box);
  ASSERT_TRUE(g.modulus.vacuous);
  ProblemAnalysis a;
  a.global = g;
  const auto j = nlohmann::json::parse(emit_json(Report{"analyze-global", 0, p, a}));
  EXPECT_EQ(j["results"]["global"]["modulus"]["eta"], "inf");
  EXPECT_EQ(j["results"]["global"]["modulus"]["tau"], 0);
}

TEST(EmitReport, ProblemSourceRoundTrips) {
  const std::string text = "name disc\ndim 2\nexpr (sum 1 (norm) 1 (const -1))\npoint [1, 0]\n";
  const auto j = nlohmann::json::parse(emit_json(analysis_report(text)));
  EXPECT_EQ(parse_problem(j["problem"]["source"].get<std::string>()), parse_problem(text));
  EXPECT_EQ(j["problem"]["name"], "disc");
}

TEST(EmitReport, ScenarioFormats) {
  const auto results = reproduce("REM10");
  const Report r{"reproduce", 0, std::nullopt, results};
  const std::string csv = emit_csv(r);
  EXPECT_EQ(csv.rfind("scenario,check,value,relation,target,tolerance,passed\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(emit_human(r).find("REM10: PASS"), std::string::npos);
  const auto j = nlohmann::json::parse(emit_json(r));
  EXPECT_TRUE(j["problem"].is_null());
  EXPECT_EQ(j["results"][0]["scenario"], "REM10");
  EXPECT_TRUE(j["results"][0]["passed"].get<bool>());
}

TEST(EmitReport, DeterministicAcrossRuns) {
  const std::string text =
      "name square\ndim 2\nexpr (max (sum 1 (abs 0) 1 (const -1)) (sum 1 (abs 1) 1 (const -1)))\n"
      "point [1, 0]\nbox -2..2\ntau 0.5\n";
  const std::string a = emit_json(analysis_report(text));
  const std::string b = emit_json(analysis_report(text));
  EXPECT_EQ(a, b);
  EXPECT_EQ(emit_human(analysis_report(text)), emit_human(analysis_report(text)));
}

TEST(EmitReport, ParseFormat) {
  EXPECT_EQ(parse_report_format("json"), ReportFormat::Json);
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::Csv);
  EXPECT_EQ(parse_report_format("human"), ReportFormat::Human);
  EXPECT_THROW(parse_report_format("xml"), Error);
}

}  // namespace
}  // namespace ebstab
