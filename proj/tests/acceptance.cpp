// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ebstab/ebstab.hpp"
#include "support/test_support.hpp"

#ifndef EBSTAB_PROBLEM_DIR
#error "EBSTAB_PROBLEM_DIR must point at the reference problem suite"
#endif

namespace {

using namespace ebstab;

struct Outcome {
  bool passed = true;
  std::string detail;

  void fail(const std::string& why) {
    if (passed) detail = why;
    passed = false;
  }
};

std::vector<std::filesystem::path> suite_files() {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(EBSTAB_PROBLEM_DIR)) {
    if (e.path().extension() == ".eb") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ProblemFile load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

Outcome beta_matches_min_norm() {
  Outcome o;
  testing::ExprGenerator gen(7001);
  int checked = 0;
  double worst = 0.0;
  while (checked < 200) {
    const auto m = static_cast<Eigen::Index>(gen.integer(1, 4));
    const auto c = gen.representable_case(m);
    const double b = beta(c.f, c.x).beta;
    if (b >= 0.0) continue;
    ++checked;
    const double err = std::abs(-b - testing::set_distance_by_enumeration(subdifferential(c.f, c.x)));
    worst = std::max(worst, err);
    if (err > 1e-8) o.fail("case " + std::to_string(checked) + " off by " + format_number(err));
  }
  if (o.passed) o.detail = "200 cases, worst error " + format_number(worst);
  return o;
}

Outcome quotients_and_support() {
  Outcome o;
  testing::ExprGenerator gen(7002);
  const std::vector<double> ts{1.0, 0.3, 0.1, 0.03, 0.01, 1e-3, 1e-4, 1e-5};
  for (int rep = 0; rep < 200; ++rep) {
    const auto m = static_cast<Eigen::Index>(gen.integer(1, 4));
    const auto c = gen.representable_case(m);
    const Vector h = gen.vec(m).normalized();
    const double dd = directional_derivative(c.f, c.x, h);
    const auto q = dd_quotient_scan(c.f, c.x, h, ts);
    for (std::size_t k = 0; k < q.size(); ++k) {
      if (k > 0 && q[k] > q[k - 1] + 1e-9) o.fail("quotients increase in case " + std::to_string(rep));
      if (q[k] < dd - 1e-9) o.fail("quotient below derivative in case " + std::to_string(rep));
    }
    if (std::abs(dd - support(subdifferential(c.f, c.x), h)) > 1e-9) {
      o.fail("support identity fails in case " + std::to_string(rep));
    }
  }
  if (o.passed) o.detail = "200 triples";
  return o;
}

Outcome max_formula() {
  Outcome o;
  testing::ExprGenerator gen(7003);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto m = static_cast<Eigen::Index>(gen.integer(1, 4));
    const Vector x = gen.point(m);
    std::vector<ConvexExpr> members;
    const int k = gen.integer(1, 5);
    for (int j = 0; j < k; ++j) {
      const ConvexExpr e = gen.representable_case(m, 2).f;
      const double shift = gen.coin(0.5) ? 0.0 : -gen.uniform(0.01, 1.0);
      members.push_back(ConvexExpr::sum({{1.0, e}, {1.0, ConvexExpr::constant(m, shift - eval(e, x))}}));
    }
    const IndexedFamily fam = IndexedFamily::finite(std::move(members));
    const Vector h = gen.vec(m).normalized();
    const double err = std::abs(dd_max_formula(fam, x, h) - directional_derivative(fam.materialize(), x, h));
    worst = std::max(worst, err);
    if (err > 1e-10) o.fail("family " + std::to_string(rep) + " off by " + format_number(err));
  }
  if (o.passed) o.detail = "200 families, worst error " + format_number(worst);
  return o;
}

Outcome scenario(const std::string& name) {
  Outcome o;
  const ScenarioResult r = reproduce(name).front();
  for (const auto& c : r.checks) {
    if (!c.passed) o.fail(c.label + ": " + format_number(c.value) + " " + c.relation + " " + format_number(c.target));
  }
  if (o.passed) o.detail = std::to_string(r.checks.size()) + " checks";
  return o;
}

// Independent of the built-in scenario: own draws, test-side projection oracle.
Outcome hoffman() {
  Outcome o = scenario("HOFFMAN");
  testing::ExprGenerator gen(7008);
  for (int k = 0; k < 20; ++k) {
    const auto m = static_cast<Eigen::Index>(gen.integer(1, 4));
    Vector a = gen.vec(m, -2.0, 2.0);
    while (a.norm() < 0.2) a = gen.vec(m, -2.0, 2.0);
    const ConvexExpr f = ConvexExpr::affine(a, gen.uniform(-1.0, 1.0));
    GlobalModulusOptions go;
    go.samples = 128;
    const double tau = eta_global(f, Box::cube(m, -3.0, 3.0), go).tau;
    if (std::abs(tau - 1.0 / a.norm()) > 1e-10) o.fail("independent affine #" + std::to_string(k));
  }
  const Box box = Box::cube(2, -3.0, 3.0);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const int n = gen.integer(2, 5);
    Matrix a(n, 2);
    for (int i = 0; i < n; ++i) {
      const double angle = gen.uniform(-M_PI, M_PI);
      a.row(i) << std::cos(angle), std::sin(angle);
      a.row(i) *= gen.uniform(0.5, 2.0);
    }
    const Vector b = gen.vec(n, 0.5, 1.5);
    const double tau = eta_global(testing::polyhedral(a, b), box).tau;
    double oracle = 0.0;
    const int grid = 241;
    for (int i = 0; i < grid; ++i) {
      for (int j = 0; j < grid; ++j) {
        Vector x(2);
        x << -3.0 + 6.0 * i / (grid - 1), -3.0 + 6.0 * j / (grid - 1);
        const double fx = (a * x - b).maxCoeff();
        if (fx > 1e-12) oracle = std::max(oracle, testing::polygon_distance(a, b, x) / fx);
      }
    }
    const double rel = std::abs(tau - oracle) / oracle;
    worst = std::max(worst, rel);
    if (rel > 0.1) o.fail("independent polyhedral #" + std::to_string(k) + " relative gap " + format_number(rel));
  }
  if (o.passed) o.detail += "; independent draws within " + format_number(100.0 * worst) + "% of the grid oracle";
  return o;
}

Outcome dichotomy() {
  Outcome o;
  const double eps = 0.01;
  int stable = 0;
  int unstable = 0;
  for (const auto& path : suite_files()) {
    const ProblemFile p = load(path);
    if (!p.point) continue;
    const std::string tag = path.filename().string();
    const double b = beta(p.function(), *p.point).beta;
    const StabilityVerdict v = classify_local_stability(p.function(), *p.point, eps);
    const bool expect_stable = std::abs(b) > kBetaZeroThreshold;
    if ((v.verdict == Verdict::Stable) != expect_stable || v.verdict == Verdict::Undetermined) {
      o.fail(tag + ": verdict disagrees with beta " + format_number(b));
      continue;
    }
    if (expect_stable) {
      ++stable;
      continue;
    }
    ++unstable;
    if (!v.destabilizer) {
      o.fail(tag + ": unstable without a destabilizing perturbation");
      continue;
    }
    const double tau = eta_local(v.destabilizer->perturbed, *p.point).tau;
    if (!(tau > 1.0 / (2.0 * eps))) o.fail(tag + ": destabilized modulus " + format_number(tau) + " <= 50");
  }
  if (stable == 0 || unstable == 0) o.fail("suite lacks a stable or an unstable problem");
  if (o.passed) o.detail = std::to_string(stable) + " stable, " + std::to_string(unstable) + " unstable";
  return o;
}

std::string suite_json() {
  std::string out;
  for (const auto& path : suite_files()) {
    const ProblemFile p = load(path);
    out += emit_json(Report{"report", 0, p, analyze_problem(p)});
  }
  out += emit_json(Report{"reproduce all", 0, std::nullopt, reproduce("all")});
  return out;
}

Outcome determinism() {
  Outcome o;
  const std::string first = suite_json();
  const std::string second = suite_json();
  if (first != second) o.fail("reports differ between runs");
  if (o.passed) o.detail = std::to_string(first.size()) + " bytes identical";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"negative beta equals minus the min-norm distance", beta_matches_min_norm},
      {"quotient monotonicity and support identity", quotients_and_support},
      {"max formula matches the materialized max", max_formula},
      {"exponential tilt scenario", [] { return scenario("REM8"); }},
      {"vanishing exponential slope scenario", [] { return scenario("REM10"); }},
      {"dropped active index scenario", [] { return scenario("REM12A"); }},
      {"added active index scenario", [] { return scenario("REM12B"); }},
      {"affine and polyhedral moduli against oracles", hoffman},
      {"stability dichotomy on the problem suite", dichotomy},
      {"deterministic JSON reports", determinism},
  };
  int failures = 0;
  int n = 0;
  for (const auto& [label, run] : criteria) {
    ++n;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    if (!o.passed) ++failures;
    std::cout << "criterion " << n << ": " << (o.passed ? "PASS" : "FAIL") << " " << label;
    if (!o.detail.empty()) std::cout << " (" << o.detail << ")";
    std::cout << "\n";
  }
  return failures == 0 ? 0 : 1;
}
