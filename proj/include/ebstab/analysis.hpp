#pragma once

// Whole-problem analysis and epsilon-linear perturbation sweeps.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ebstab/moduli.hpp"
#include "ebstab/problem.hpp"
#include "ebstab/semi_infinite.hpp"
#include "ebstab/sphere.hpp"

namespace ebstab {

struct AnalysisOptions {
  std::uint64_t seed = 0;
  std::size_t samples = 256;
  int levels = 8;
  double tolerance = 1e-8;
  double epsilon = 0.01;  // size of the destabilizing perturbation
};

struct LocalAnalysis {
  Vector point;
  BetaCertificate beta;
  StabilityVerdict verdict;
  ModulusReport modulus;
  std::optional<ModulusReport> destabilized;  // modulus of the destabilizing perturbation
  std::optional<std::string> active_set;
};

struct GlobalAnalysis {
  double tau = 0.0;
  Box box;
  ModulusReport modulus;
  StabilityVerdict verdict;
  std::optional<std::string> active_set;
};

struct ProblemAnalysis {
  std::string name;
  std::optional<LocalAnalysis> local;
  std::optional<GlobalAnalysis> global;
};

namespace detail {

inline LocalModulusOptions local_options(const AnalysisOptions& opt) {
  LocalModulusOptions o;
  o.levels = opt.levels;
  o.samples_per_level = opt.samples;
  o.seed = opt.seed;
  o.tolerance = opt.tolerance;
  return o;
}

inline GlobalModulusOptions global_options(const ProblemFile& p, const AnalysisOptions& opt) {
  GlobalModulusOptions o;
  o.samples = opt.samples;
  o.seed = opt.seed;
  o.slater = p.slater;
  o.tolerance = opt.tolerance;
  return o;
}

}  // namespace detail

inline LocalAnalysis analyze_local(const ProblemFile& p, const Vector& at, const AnalysisOptions& opt = {}) {
  require_dim(at.size(), p.dim, "reference point");
  const ConvexExpr f = p.function();
  LocalAnalysis a;
  a.point = at;
  a.beta = beta(f, at);
  if (p.family) {
    SystemVerdict sv = classify_system_stability_local(*p.family, at, opt.epsilon);
    a.verdict = std::move(sv.verdict);
    a.active_set = describe_active_set(*p.family, sv.active);
  } else {
    a.verdict = classify_local_stability(f, at, opt.epsilon);
  }
  a.modulus = eta_local(f, at, detail::local_options(opt));
  if (a.verdict.destabilizer) a.destabilized = eta_local(a.verdict.destabilizer->perturbed, at, detail::local_options(opt));
  return a;
}

inline GlobalAnalysis analyze_global(const ProblemFile& p, double tau, const Box& box, const AnalysisOptions& opt = {}) {
  require_dim(box.dim(), p.dim, "box");
  const ConvexExpr f = p.function();
  GlobalAnalysis a;
  a.tau = tau;
  a.box = box;
  a.modulus = eta_global(f, box, detail::global_options(p, opt));
  GlobalStabilityOptions gopt;
  gopt.samples = opt.samples;
  gopt.seed = opt.seed;
  if (p.family) {
    SystemVerdict sv = classify_system_stability_global(*p.family, tau, box, gopt);
    a.verdict = std::move(sv.verdict);
    if (!sv.active.indices.empty()) a.active_set = describe_active_set(*p.family, sv.active);
  } else {
    a.verdict = classify_global_stability(f, tau, box, gopt);
  }
  return a;
}

/// Local analysis at the declared point, global analysis over the declared
/// box with the declared tau; each part only when its inputs are present.
inline ProblemAnalysis analyze_problem(const ProblemFile& p, const AnalysisOptions& opt = {}) {
  ProblemAnalysis a;
  a.name = p.name;
  if (p.point) a.local = analyze_local(p, *p.point, opt);
  if (p.box && p.tau) a.global = analyze_global(p, *p.tau, *p.box, opt);
  return a;
}

// -- perturbation sweeps --------------------------------------------------------

struct SweepRow {
  double epsilon = 0.0;
  Vector u;
  double beta_before = 0.0;
  double beta_after = 0.0;
  double tau_local = 0.0;
  std::optional<double> tau_global;  // only with a box
  Verdict verdict = Verdict::Undetermined;
};

struct SweepResult {
  std::string problem;
  Vector center;
  std::uint64_t seed = 0;
  std::vector<SweepRow> rows;
};

/// One row per (epsilon, u): beta of g = f + eps <u, . - xbar> at xbar, its
/// local modulus, its global modulus over the box, and the local verdict.
/// Rows are ordered by epsilon, then by the order of `directions`.
inline SweepResult run_perturbation_sweep(const ProblemFile& p, const Vector& xbar, const std::vector<Vector>& directions,
                                          std::vector<double> epsilons, const std::optional<Box>& box,
                                          const AnalysisOptions& opt = {}) {
  require_dim(xbar.size(), p.dim, "sweep center");
  if (directions.empty() || epsilons.empty()) throw Error(ErrorCode::Precondition, "empty sweep");
  const ConvexExpr f = p.function();
  if (std::abs(eval(f, xbar)) > kBoundaryTolerance) {
    throw Error(ErrorCode::Precondition, "sweep center must satisfy f(xbar) = 0");
  }
  for (double e : epsilons) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw Error(ErrorCode::Precondition, "epsilon must be finite and >= 0");
  }
  std::stable_sort(epsilons.begin(), epsilons.end());
  SweepResult r;
  r.problem = p.name;
  r.center = xbar;
  r.seed = opt.seed;
  const double before = beta(f, xbar).beta;
  for (double eps : epsilons) {
    for (const auto& u : directions) {
      require_dim(u.size(), p.dim, "sweep direction");
      const ConvexExpr g = linear_perturbation(f, u, eps, xbar);
      SweepRow row;
      row.epsilon = eps;
      row.u = u;
      row.beta_before = before;
      row.beta_after = beta_of_linear_perturbation(f, xbar, u, eps, xbar).beta;
      row.tau_local = eta_local(g, xbar, detail::local_options(opt)).tau;
      if (box) {
        ProblemFile q = p;
        q.slater.reset();
        row.tau_global = eta_global(g, *box, detail::global_options(q, opt)).tau;
      }
      row.verdict = classify_local_stability(g, xbar, opt.epsilon).verdict;
      r.rows.push_back(std::move(row));
    }
  }
  return r;
}

/// |beta_after - beta_before| <= eps ||u|| + 1e-9 on every row.
inline bool sweep_rows_consistent(const SweepResult& r) {
  return std::all_of(r.rows.begin(), r.rows.end(), [](const SweepRow& row) {
    return std::abs(row.beta_after - row.beta_before) <= row.epsilon * row.u.norm() + 1e-9;
  });
}

}  // namespace ebstab
