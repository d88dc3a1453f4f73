#pragma once

// Canned end-to-end scenarios. Each one rebuilds a worked example, measures
// the quantities it makes claims about, and checks the stated inequality.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ebstab/analysis.hpp"
#include "ebstab/moduli.hpp"
#include "ebstab/semi_infinite.hpp"
#include "ebstab/sphere.hpp"

namespace ebstab {

struct ScenarioCheck {
  std::string label;
  double value = 0.0;
  double target = 0.0;
  std::string relation;  // ">=", "~=", "=="
  double tolerance = 0.0;
  bool passed = false;
};

struct ScenarioResult {
  std::string name;
  bool passed = true;
  std::vector<ScenarioCheck> checks;
  std::vector<std::string> notes;

  void at_least(std::string label, double value, double bound, double rel_slack = 0.0) {
    const double target = bound * (1.0 - rel_slack);
    add({std::move(label), value, bound, ">=", rel_slack, value >= target});
  }
  void near(std::string label, double value, double expected, double tol) {
    add({std::move(label), value, expected, "~=", tol, std::abs(value - expected) <= tol});
  }
  void holds(std::string label, bool ok) { add({std::move(label), ok ? 1.0 : 0.0, 1.0, "==", 0.0, ok}); }

 private:
  void add(ScenarioCheck c) {
    passed = passed && c.passed;
    checks.push_back(std::move(c));
  }
};

struct ScenarioOptions {
  std::uint64_t seed = 0;
  std::size_t samples = 256;
};

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"REM8", "REM10", "REM12A", "REM12B", "HOFFMAN", "T32-ZERO-BETA"};
  return names;
}

namespace detail {

inline Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

inline Vector vec1(double a) { return Vector::Constant(1, a); }

inline std::string eps_label(double eps) { return "eps=" + format_number(eps); }

/// d(x, {y in R^2 : A y <= b}) by enumerating the faces the projection can
/// land on: x itself, the foot on each edge line, each vertex.
inline double polygon_distance(const Matrix& a, const Vector& b, const Vector& x) {
  auto feasible = [&](const Vector& y) { return ((a * y - b).array() <= 1e-9 * (1.0 + y.norm())).all(); };
  if (feasible(x)) return 0.0;
  double best = kInf;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Vector ai = a.row(i).transpose();
    const Vector foot = x - (ai.dot(x) - b[i]) / ai.squaredNorm() * ai;
    if (feasible(foot)) best = std::min(best, (foot - x).norm());
    for (Eigen::Index j = i + 1; j < a.rows(); ++j) {
      Eigen::Matrix2d m2;
      m2.row(0) = a.row(i);
      m2.row(1) = a.row(j);
      if (std::abs(m2.determinant()) < 1e-12) continue;
      const Vector v = m2.inverse() * Eigen::Vector2d(b[i], b[j]);
      if (feasible(v)) best = std::min(best, (v - x).norm());
    }
  }
  return best;
}

/// sup of d(x, S) / f(x) over an n x n grid of the box.
inline double polyhedral_ratio_on_grid(const Matrix& a, const Vector& b, const Box& box, int n) {
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vector x = vec2(box.lo[0] + (box.hi[0] - box.lo[0]) * i / (n - 1),
                            box.lo[1] + (box.hi[1] - box.lo[1]) * j / (n - 1));
      const double fx = (a * x - b).maxCoeff();
      if (fx <= 1e-12) continue;
      best = std::max(best, polygon_distance(a, b, x) / fx);
    }
  }
  return best;
}

inline ConvexExpr affine_max(const Matrix& a, const Vector& b) {
  std::vector<ConvexExpr> kids;
  for (Eigen::Index i = 0; i < a.rows(); ++i) kids.push_back(ConvexExpr::affine(a.row(i).transpose(), -b[i]));
  return kids.size() == 1 ? kids.front() : ConvexExpr::max(std::move(kids));
}

inline ProblemFile wrap(std::string name, ConvexExpr f) {
  ProblemFile p;
  p.name = std::move(name);
  p.dim = f.dim();
  p.expr = std::move(f);
  return p;
}

// Lower bound on the local modulus of g from one witness point z:
// a certified lower bound on d(z, S_g) over g(z).
inline double witness_ratio(const ConvexExpr& g, const Vector& z, const Vector& anchor) {
  DistanceOptions o;
  o.anchor = anchor;
  return distance_to_solution_set(g, z, o).lower_bound / eval(g, z);
}

}  // namespace detail

/// e^x - 1: unit slope at the boundary, yet the tilted family
/// g_eps(x) = e^x - 1 - eps x has modulus at least 1/(2 eps), and the
/// qualification condition fails on the far-left feasible set.
inline ScenarioResult reproduce_rem8(const ScenarioOptions& opt = {}) {
  ScenarioResult r;
  r.name = "REM8";
  const ConvexExpr f = ConvexExpr::exp1d(1, 0, -1.0);
  const Vector zero = detail::vec1(0.0);
  r.near("beta(f, 0)", beta(f, zero).beta, -1.0, 0.0);
  const ProblemFile p = detail::wrap("exp minus one", f);
  AnalysisOptions aopt;
  aopt.seed = opt.seed;
  aopt.samples = opt.samples;
  for (double eps : {0.1, 0.01}) {
    const Vector u = detail::vec1(-1.0);
    const ConvexExpr g = linear_perturbation(f, u, eps, zero);
    const Vector x = detail::vec1(-1e3 / eps);
    r.at_least("ratio d(x,S_g)/g(x) at x=-1000/eps, " + detail::eps_label(eps), detail::witness_ratio(g, x, zero),
               1.0 / (2.0 * eps));
    const Box box{detail::vec1(-1e3 / eps), detail::vec1(2.0)};
    const SweepResult sweep = run_perturbation_sweep(p, zero, {u}, {eps}, box, aopt);
    r.at_least("tau_global(g) over [-1000/eps, 2], " + detail::eps_label(eps), *sweep.rows.front().tau_global,
               1.0 / (2.0 * eps));
  }
  const Box qc_box{detail::vec1(-50.0), detail::vec1(2.0)};
  const QcSearch qc = qc_witness_search(f, 0.5, qc_box, opt.samples, opt.seed);
  r.at_least("qualification-condition witnesses over [-50, 2] at tau=0.5", static_cast<double>(qc.witnesses.size()),
             1.0);
  return r;
}

/// beta(e^x - 1, -k) = -e^{-k}: the slope vanishes along the feasible set.
inline ScenarioResult reproduce_rem10(const ScenarioOptions& = {}) {
  ScenarioResult r;
  r.name = "REM10";
  const ConvexExpr f = ConvexExpr::exp1d(1, 0, -1.0);
  for (int k : {1, 5, 10, 20}) {
    const double expected = -std::exp(-static_cast<double>(k));
    r.near("beta(f, -" + std::to_string(k) + ")", beta(f, detail::vec1(-k)).beta, expected, 1e-9);
  }
  return r;
}

/// max(|x1|, |x2|) is stable at 0 (beta = sqrt(2)/2), but the perturbed system
/// {|x1| + eps|x2|, |x2| - eps} drops index 2 from the active set and has
/// modulus at least 1/eps.
inline ScenarioResult reproduce_rem12a(const ScenarioOptions& = {}) {
  ScenarioResult r;
  r.name = "REM12A";
  const Vector zero = Vector::Zero(2);
  const IndexedFamily F = IndexedFamily::finite({ConvexExpr::abs_coord(2, 0), ConvexExpr::abs_coord(2, 1)});
  r.near("beta(max F, 0)", system_beta(F, zero).beta, std::sqrt(2.0) / 2.0, 1e-12);
  for (double eps : {0.1, 0.01}) {
    const IndexedFamily G = IndexedFamily::finite(
        {ConvexExpr::sum({{1.0, ConvexExpr::abs_coord(2, 0)}, {eps, ConvexExpr::abs_coord(2, 1)}}),
         ConvexExpr::sum({{1.0, ConvexExpr::abs_coord(2, 1)}, {1.0, ConvexExpr::constant(2, -eps)}})});
    const ConvexExpr g = G.materialize();
    const double delta = eps / 2.0;
    const Vector z = detail::vec2(0.0, delta);
    DistanceOptions o;
    o.anchor = zero;
    const DistanceEstimate d = distance_to_solution_set(g, z, o);
    r.near("d(z_delta, S_G), " + detail::eps_label(eps), d.distance, delta, 1e-12);
    r.near("g(z_delta), " + detail::eps_label(eps), eval(g, z), eps * delta, 1e-15);
    // 1e-12 relative slack absorbs the last-bit rounding of delta / (eps delta)
    r.at_least("modulus lower bound at z_delta, " + detail::eps_label(eps), d.lower_bound / eval(g, z), 1.0 / eps,
               1e-12);
    const HypothesisCheck h = check_active_set_hypotheses(F, G, zero);
    r.holds("active-set violation I_f not in I_g, " + detail::eps_label(eps),
            h.violated == HypothesisSide::FNotInG);
  }
  return r;
}

/// max(x1, -x1 + |x2| - 1) has beta = -1 at 0, yet the perturbed system
/// {x1 + eps|x2|, -x1 + eps|x2|} activates index 2 and has modulus >= 1/eps.
inline ScenarioResult reproduce_rem12b(const ScenarioOptions& = {}) {
  ScenarioResult r;
  r.name = "REM12B";
  r.notes.push_back("the second member is read as f2(x) = -x1 + |x2| - 1");
  const Vector zero = Vector::Zero(2);
  const IndexedFamily F = IndexedFamily::finite(
      {ConvexExpr::affine(detail::vec2(1.0, 0.0), 0.0),
       ConvexExpr::sum({{1.0, ConvexExpr::affine(detail::vec2(-1.0, 0.0), -1.0)}, {1.0, ConvexExpr::abs_coord(2, 1)}})});
  r.near("beta(max F, 0)", system_beta(F, zero).beta, -1.0, 0.0);
  for (double eps : {0.1, 0.01}) {
    const IndexedFamily G = IndexedFamily::finite(
        {ConvexExpr::sum({{1.0, ConvexExpr::affine(detail::vec2(1.0, 0.0), 0.0)}, {eps, ConvexExpr::abs_coord(2, 1)}}),
         ConvexExpr::sum({{1.0, ConvexExpr::affine(detail::vec2(-1.0, 0.0), 0.0)}, {eps, ConvexExpr::abs_coord(2, 1)}})});
    const ConvexExpr g = G.materialize();
    const double delta = eps / 2.0;
    const Vector z = detail::vec2(0.0, delta);
    DistanceOptions o;
    o.anchor = zero;
    const DistanceEstimate d = distance_to_solution_set(g, z, o);
    r.near("d(z_delta, S_G), " + detail::eps_label(eps), d.distance, delta, 1e-12);
    r.near("g(z_delta), " + detail::eps_label(eps), eval(g, z), eps * delta, 1e-15);
    r.at_least("modulus lower bound at z_delta, " + detail::eps_label(eps), d.lower_bound / eval(g, z), 1.0 / eps,
               1e-12);
    const HypothesisCheck h = check_active_set_hypotheses(F, G, zero);
    r.holds("active-set violation I_g not in I_f, " + detail::eps_label(eps),
            h.violated == HypothesisSide::GNotInF);
  }
  return r;
}

/// Affine systems: a single inequality has modulus exactly 1/||a||; for
/// polyhedral systems in the plane the sampled global modulus is compared
/// with a grid search of d(x, S)/f(x) using exact polygon projections.
inline ScenarioResult reproduce_hoffman(const ScenarioOptions& opt = {}) {
  ScenarioResult r;
  r.name = "HOFFMAN";
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 4);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Index m = dim(rng);
    Vector a(m);
    do {
      for (Eigen::Index i = 0; i < m; ++i) a[i] = 2.0 * unit(rng);
    } while (a.norm() < 0.2);
    const double b = unit(rng);
    const ConvexExpr f = ConvexExpr::affine(a, -b);
    const Vector xbar = b / a.squaredNorm() * a;
    const double expected = 1.0 / a.norm();
    LocalModulusOptions lo;
    lo.seed = opt.seed;
    lo.samples_per_level = opt.samples;
    GlobalModulusOptions go;
    go.seed = opt.seed;
    go.samples = opt.samples;
    const Box box = Box::cube(m, -3.0, 3.0);
    const std::string tag = "affine #" + std::to_string(k);
    r.near(tag + " tau_global", eta_global(f, box, go).tau, expected, 1e-10);
    r.near(tag + " tau_local", eta_local(f, xbar, lo).tau, expected, 1e-10);
  }
  std::uniform_int_distribution<int> members(2, 5);
  std::uniform_real_distribution<double> offset(0.5, 1.5);
  const Box box = Box::cube(2, -3.0, 3.0);
  for (int k = 0; k < 10; ++k) {
    const int n = members(rng);
    Matrix a(n, 2);
    Vector b(n);
    for (int i = 0; i < n; ++i) {
      const double angle = std::acos(-1.0) * unit(rng);
      const double len = 0.5 + 1.5 * (unit(rng) + 1.0) / 2.0;
      a.row(i) << len * std::cos(angle), len * std::sin(angle);
      b[i] = offset(rng);
    }
    const ConvexExpr f = detail::affine_max(a, b);
    GlobalModulusOptions go;
    go.seed = opt.seed;
    go.samples = opt.samples;
    const double tau = eta_global(f, box, go).tau;
    const double oracle = detail::polyhedral_ratio_on_grid(a, b, box, 301);
    const std::string tag = "polyhedral #" + std::to_string(k) + " (" + std::to_string(n) + " members)";
    r.near(tag + " tau_global vs grid oracle", tau, oracle, 0.1 * oracle);
  }
  return r;
}

/// (max(x, 0))^2 has beta = 0 at 0; the destabilizing tilt of size eps gives
/// local modulus near 1/eps.
inline ScenarioResult reproduce_t32_zero_beta(const ScenarioOptions& opt = {}) {
  ScenarioResult r;
  r.name = "T32-ZERO-BETA";
  const double eps = 0.01;
  const ConvexExpr f = ConvexExpr::pos_part_square(1, 0);
  const Vector zero = detail::vec1(0.0);
  const StabilityVerdict v = classify_local_stability(f, zero, eps);
  r.near("beta(f, 0)", v.beta, 0.0, 0.0);
  r.holds("local verdict is unstable", v.verdict == Verdict::Unstable && v.destabilizer.has_value());
  if (!v.destabilizer) return r;
  LocalModulusOptions lo;
  lo.seed = opt.seed;
  lo.samples_per_level = opt.samples;
  r.at_least("tau_local of the destabilizing perturbation", eta_local(v.destabilizer->perturbed, zero, lo).tau,
             1.0 / (2.0 * eps));
  const ConvexExpr g = linear_perturbation(f, detail::vec1(1.0), eps, zero);
  r.at_least("ratio d(x,S_g)/g(x) at x=1e-6 for u=+1", detail::witness_ratio(g, detail::vec1(1e-6), zero),
             1.0 / (2.0 * eps));
  AnalysisOptions aopt;
  aopt.seed = opt.seed;
  aopt.samples = opt.samples;
  const SweepResult sweep =
      run_perturbation_sweep(detail::wrap("positive part squared", f), zero, {detail::vec1(1.0)}, {eps}, std::nullopt, aopt);
  r.at_least("sweep tau_local for u=+1", sweep.rows.front().tau_local, 1.0 / (2.0 * eps));
  return r;
}

/// Runs one named scenario, or all of them for "all".
inline std::vector<ScenarioResult> reproduce(const std::string& name, const ScenarioOptions& opt = {}) {
  if (name == "all") {
    std::vector<ScenarioResult> out;
    for (const auto& n : scenario_names()) out.push_back(reproduce(n, opt).front());
    return out;
  }
  if (name == "REM8") return {reproduce_rem8(opt)};
  if (name == "REM10") return {reproduce_rem10(opt)};
  if (name == "REM12A") return {reproduce_rem12a(opt)};
  if (name == "REM12B") return {reproduce_rem12b(opt)};
  if (name == "HOFFMAN") return {reproduce_hoffman(opt)};
  if (name == "T32-ZERO-BETA") return {reproduce_t32_zero_beta(opt)};
  throw Error(ErrorCode::Precondition, "unknown scenario '" + name + "'");
}

}  // namespace ebstab
