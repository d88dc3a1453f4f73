#include <gtest/gtest.h>

#include <cmath>

#include "ebstab/analysis.hpp"
#include "ebstab/scenarios.hpp"
#include "support/test_support.hpp"

namespace ebstab {
namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

std::string describe(const ScenarioResult& r) {
  std::string s;
  for (const auto& c : r.checks) {
    s += (c.passed ? "  ok   " : "  FAIL ") + c.label + ": " + format_number(c.value) + " " + c.relation + " " +
         format_number(c.target) + "\n";
  }
  return s;
}

TEST(Sweep, ZeroEpsilonLeavesBetaAndVerdictUnchanged) {
  const ProblemFile p = parse_problem("dim 2\nexpr (max (abs 0) (abs 1))\n");
  const Vector zero = Vector::Zero(2);
  Vector u(2);
  u << 0.6, 0.8;
  AnalysisOptions opt;
  opt.samples = 64;
  opt.levels = 4;
  const SweepResult r = run_perturbation_sweep(p, zero, {u}, {0.0}, std::nullopt, opt);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].beta_after, r.rows[0].beta_before);
  EXPECT_EQ(r.rows[0].verdict, classify_local_stability(p.function(), zero).verdict);
  EXPECT_FALSE(r.rows[0].tau_global.has_value());
}

TEST(Sweep, RowsOrderedByEpsilonAndConsistent) {
  const ProblemFile p = parse_problem("dim 2\nexpr (sum 1 (norm) 1 (const -1))\n");
  Vector x(2);
  x << 1.0, 0.0;
  std::vector<Vector> dirs;
  testing::ExprGenerator gen(5);
  for (int k = 0; k < 3; ++k) dirs.push_back(gen.vec(2).normalized() * gen.uniform(0.1, 1.0));
  AnalysisOptions opt;
  opt.samples = 64;
  opt.levels = 4;
  const SweepResult r =
      run_perturbation_sweep(p, x, dirs, {0.3, 0.0, 0.1, 0.05}, Box::cube(2, -2.0, 2.0), opt);
  ASSERT_EQ(r.rows.size(), 12u);
  for (std::size_t k = 1; k < r.rows.size(); ++k) EXPECT_LE(r.rows[k - 1].epsilon, r.rows[k].epsilon);
  EXPECT_TRUE(sweep_rows_consistent(r));
  for (const auto& row : r.rows) {
    ASSERT_TRUE(row.tau_global.has_value());
    EXPECT_LE(std::abs(row.beta_after - row.beta_before), row.epsilon * row.u.norm() + 1e-9);
  }
}

TEST(Sweep, RejectsCenterOffTheBoundary) {
  const ProblemFile p = parse_problem("dim 1\nexpr (exp1d 0 -1)\n");
  EXPECT_THROW(run_perturbation_sweep(p, v1(1.0), {v1(1.0)}, {0.1}, std::nullopt), Error);
}

// e^x - 1 tilted by -eps x: global modulus over [-1000/eps, 2] at least 1/(2 eps).
TEST(Sweep, TiltedExponentialGlobalModulus) {
  const ProblemFile p = parse_problem("dim 1\nexpr (exp1d 0 -1)\n");
  for (double eps : {0.1, 0.01}) {
    const Box box{v1(-1e3 / eps), v1(2.0)};
    const SweepResult r = run_perturbation_sweep(p, v1(0.0), {v1(-1.0)}, {eps}, box);
    EXPECT_GE(*r.rows[0].tau_global, 1.0 / (2.0 * eps)) << eps;
    EXPECT_NEAR(r.rows[0].beta_after, -(1.0 - eps), 1e-15);
    EXPECT_EQ(r.rows[0].verdict, Verdict::Stable);
  }
}

// (max(x,0))^2 + eps x near 0+: d(x, S_g) / g(x) = 1/(x + eps), about 1/eps.
TEST(Sweep, PositivePartSquareLocalModulus) {
  const ProblemFile p = parse_problem("dim 1\nexpr (possq 0)\n");
  const double eps = 0.01;
  const SweepResult r = run_perturbation_sweep(p, v1(0.0), {v1(1.0)}, {eps}, std::nullopt);
  const double x = 1e-6;
  const double brute = x / (x * x + eps * x);
  EXPECT_GE(brute, 1.0 / (2.0 * eps));
  EXPECT_GE(r.rows[0].tau_local, 1.0 / (2.0 * eps));
  EXPECT_LE(r.rows[0].tau_local, brute * 1.05);
}

TEST(Analysis, FamilyReportsActiveSet) {
  const ProblemFile p = parse_problem(
      "dim 2\n"
      "family finite [(sum 1 (abs 0) 1 (const -1)), (sum 1 (abs 1) 1 (const -1))]\n"
      "point [1, 1]\nbox -2..2\ntau 0.5\n");
  AnalysisOptions opt;
  opt.samples = 64;
  opt.levels = 4;
  const ProblemAnalysis a = analyze_problem(p, opt);
  ASSERT_TRUE(a.local && a.global);
  EXPECT_EQ(*a.local->active_set, "{1, 2}");
  EXPECT_EQ(a.local->verdict.verdict, Verdict::Stable);
  EXPECT_NEAR(a.local->beta.beta, -std::sqrt(0.5), 1e-12);
  EXPECT_FALSE(a.local->destabilized.has_value());
  // corner slope 1/sqrt(2) clears the threshold 0.5; the modulus sits on the
  // diagonal rays where both members are active
  EXPECT_EQ(a.global->verdict.verdict, Verdict::Stable);
  EXPECT_NEAR(a.global->modulus.tau, std::sqrt(2.0), 1e-6);
}

// A solution set with empty interior still admits a distance anchor.
TEST(Analysis, GlobalModulusWithSingletonSolutionSet) {
  const ProblemFile p = parse_problem("dim 2\nfamily finite [abs 0, abs 1]\n");
  GlobalModulusOptions go;
  go.samples = 64;
  const ModulusReport r = eta_global(p.function(), Box::cube(2, -1.0, 1.0), go);
  EXPECT_NEAR(r.tau, std::sqrt(2.0), 1e-6);
}

TEST(Analysis, UnstablePointCarriesDestabilizedModulus) {
  const ProblemFile p = parse_problem("dim 1\nexpr (possq 0)\npoint [0]\n");
  const ProblemAnalysis a = analyze_problem(p);
  ASSERT_TRUE(a.local.has_value());
  EXPECT_FALSE(a.global.has_value());
  EXPECT_EQ(a.local->verdict.verdict, Verdict::Unstable);
  ASSERT_TRUE(a.local->destabilized.has_value());
  EXPECT_GE(a.local->destabilized->tau, 50.0);
}

class ScenarioTest : public ::testing::TestWithParam<std::string> {};

TEST_P(ScenarioTest, Passes) {
  const auto results = reproduce(GetParam());
  ASSERT_EQ(results.size(), 1u);
  EXPECT_TRUE(results[0].passed) << describe(results[0]);
  EXPECT_FALSE(results[0].checks.empty());
}

INSTANTIATE_TEST_SUITE_P(All, ScenarioTest, ::testing::ValuesIn(scenario_names()),
                         [](const auto& info) {
                           std::string s = info.param;
                           for (auto& c : s) {
                             if (c == '-') c = '_';
                           }
                           return s;
                         });

TEST(Scenarios, UnknownNameThrows) { EXPECT_THROW(reproduce("REM99"), Error); }

// The planar polyhedral comparison uses an independent test-side projection
// oracle too.
TEST(Scenarios, PolygonDistanceAgreesWithTestOracle) {
  testing::ExprGenerator gen(11);
  for (int k = 0; k < 50; ++k) {
    Matrix a(4, 2);
    for (int i = 0; i < 4; ++i) a.row(i) = gen.vec(2).transpose();
    const Vector b = gen.vec(4, 0.5, 1.5);
    const Vector x = gen.vec(2, -3.0, 3.0);
    EXPECT_NEAR(detail::polygon_distance(a, b, x), testing::polygon_distance(a, b, x), 1e-12);
  }
}

}  // namespace
}  // namespace ebstab
