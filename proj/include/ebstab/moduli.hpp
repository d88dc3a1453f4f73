#pragma once

// Error-bound moduli: distance to the solution set S_f = {f <= 0}, boundary
// sampling, local and global estimates of eta and tau = 1/eta, and the
// stability verdicts built from beta.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ebstab/convex_expr.hpp"
#include "ebstab/polytope.hpp"
#include "ebstab/sphere.hpp"
#include "ebstab/types.hpp"

namespace ebstab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kFeasibilityTolerance = 1e-10;
inline constexpr double kBoundaryTolerance = 1e-9;
inline constexpr double kQcRatioFactor = 0.1;
inline constexpr double kVerdictMargin = 0.05;

/// tau = 1/eta, with 1/0 = inf and 1/inf = 0.
inline double tau_from_eta(double eta) {
  if (eta == 0.0) return kInf;
  if (std::isinf(eta)) return 0.0;
  return 1.0 / eta;
}

/// d(0, df(x)).
inline double subgradient_distance(const ConvexExpr& f, const Vector& x) {
  return min_norm_point(subdifferential(f, x)).distance;
}

/// d(0, df(x)), or nothing when df(x) has no conv(G) + rB form.
inline std::optional<double> try_subgradient_distance(const ConvexExpr& f, const Vector& x) {
  try {
    return subgradient_distance(f, x);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnsupportedSubdiff) throw;
    return std::nullopt;
  }
}

// -- distance to the solution set ---------------------------------------------

struct DistanceOptions {
  std::optional<Vector> anchor;  // any point with f <= 0
  std::optional<Box> search_box;
  std::uint64_t seed = 0;
  int max_iterations = 100;
  double tolerance = 1e-8;
};

struct DistanceEstimate {
  double distance = 0.0;     // to a feasible point actually found
  double lower_bound = 0.0;  // certified by an outer polyhedral approximation
  Vector nearest;
  int iterations = 0;
};

namespace detail {

// Feasible point on [x, s] closest to x, for f(x) > 0 >= f(s).
inline Vector segment_crossing(const ConvexExpr& f, const Vector& x, const Vector& s) {
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (eval(f, x + mid * (s - x)) <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return x + hi * (s - x);
}

struct Cut {
  Vector g;
  double c;  // <g, z> <= c
};

// Projects x onto {z : <g_j, z> <= c_j} by a primal active-set method started
// at a point z0 satisfying every cut. Returns the dual value of the final
// multipliers, a lower bound on half the squared distance.
inline double project_onto_cuts(const std::vector<Cut>& cuts, const Vector& x, const Vector& z0, Vector& z) {
  const Eigen::Index m = x.size();
  z = z0;
  std::vector<std::size_t> work;
  Vector mu;
  auto working_matrix = [&]() {
    Matrix gw(m, static_cast<Eigen::Index>(work.size()));
    for (std::size_t k = 0; k < work.size(); ++k) gw.col(static_cast<Eigen::Index>(k)) = cuts[work[k]].g;
    return gw;
  };
  for (int it = 0; it < 1000; ++it) {
    const Matrix gw = working_matrix();
    Vector p = x - z;
    if (!work.empty()) {
      Eigen::CompleteOrthogonalDecomposition<Matrix> cod(gw);
      p -= gw * cod.solve(p);
    }
    if (p.norm() <= 1e-14 * (1.0 + (x - z).norm())) {
      if (work.empty()) break;
      mu = Eigen::CompleteOrthogonalDecomposition<Matrix>(gw).solve(x - z);
      Eigen::Index worst = 0;
      if (mu.minCoeff(&worst) >= -1e-14) break;
      work.erase(work.begin() + worst);
      continue;
    }
    double alpha = 1.0;
    std::size_t block = cuts.size();
    for (std::size_t j = 0; j < cuts.size(); ++j) {
      if (std::find(work.begin(), work.end(), j) != work.end()) continue;
      const double gp = cuts[j].g.dot(p);
      if (gp <= 1e-300) continue;
      const double a = std::max(cuts[j].c - cuts[j].g.dot(z), 0.0) / gp;
      if (a < alpha) {
        alpha = a;
        block = j;
      }
    }
    z += alpha * p;
    if (block < cuts.size()) work.push_back(block);
  }
  std::vector<double> lambda(cuts.size(), 0.0);
  if (!work.empty()) {
    mu = Eigen::CompleteOrthogonalDecomposition<Matrix>(working_matrix()).solve(x - z);
    for (std::size_t k = 0; k < work.size(); ++k) lambda[work[k]] = std::max(mu[static_cast<Eigen::Index>(k)], 0.0);
  }
  Vector agg = Vector::Zero(m);
  double dual = 0.0;
  for (std::size_t j = 0; j < cuts.size(); ++j) {
    agg += lambda[j] * cuts[j].g;
    dual += lambda[j] * (cuts[j].g.dot(x) - cuts[j].c);
  }
  return dual - 0.5 * agg.squaredNorm();
}

inline Cut cut_at(const ConvexExpr& f, const Vector& y, double fy) {
  Vector g = subgradient(f, y);
  return Cut{g, g.dot(y) - fy};
}

}  // namespace detail

/// A point with f < 0: a 1024-point scan of the box, then subgradient
/// projection steps y <- y - (f(y) + delta) / |g|^2 g from the best scanned
/// point. Falls back to a point with f <= 1e-10.
inline std::optional<Vector> find_feasible_point(const ConvexExpr& f, const Box& box, std::uint64_t seed) {
  require_dim(box.dim(), f.dim(), "find_feasible_point");
  Vector best;
  double best_f = kInf;
  for (const auto& p : box_points(box, 1024, seed)) {
    const double v = eval(f, p);
    if (v < best_f) {
      best_f = v;
      best = p;
    }
  }
  if (best_f < 0.0) return best;
  const double delta = 1e-6 * (1.0 + best_f);
  Vector y = best;
  double fy = best_f;
  for (int k = 0; k < 1000 && best_f >= 0.0; ++k) {
    const Vector g = subgradient(f, y);
    const double gg = g.squaredNorm();
    if (gg == 0.0) break;
    y -= ((fy + delta) / gg) * g;
    fy = eval(f, y);
    if (fy < best_f) {
      best_f = fy;
      best = y;
    }
  }
  if (best_f <= 0.0) return best;
  // exact projection steps reach solution sets with empty interior
  y = best;
  fy = best_f;
  for (int k = 0; k < 1000 && fy > 0.0; ++k) {
    const Vector g = subgradient(f, y);
    const double gg = g.squaredNorm();
    if (gg == 0.0) break;
    y -= (fy / gg) * g;
    fy = eval(f, y);
  }
  if (fy <= kFeasibilityTolerance) return y;
  return std::nullopt;
}

/// d(x, S_f): an upper bound from the best feasible point found and a lower
/// bound from cutting planes, refined until they agree to the tolerance.
inline DistanceEstimate distance_to_solution_set(const ConvexExpr& f, const Vector& x,
                                                 const DistanceOptions& opt = {}) {
  require_dim(x.size(), f.dim(), "distance_to_solution_set");
  const double fx = eval(f, x);
  if (fx <= 0.0) return {0.0, 0.0, x, 0};

  Vector anchor;
  if (opt.anchor) {
    anchor = *opt.anchor;
    require_dim(anchor.size(), f.dim(), "distance anchor");
    if (eval(f, anchor) > kFeasibilityTolerance) {
      throw Error(ErrorCode::NoSlaterPoint, "declared anchor point is infeasible");
    }
  } else {
    const Box box = opt.search_box ? *opt.search_box
                                   : Box{x.array() - 10.0 * (1.0 + x.cwiseAbs().maxCoeff()),
                                         x.array() + 10.0 * (1.0 + x.cwiseAbs().maxCoeff())};
    auto found = find_feasible_point(f, box, opt.seed);
    if (!found) throw Error(ErrorCode::NoSlaterPoint, "no feasible point found in the search box");
    anchor = *found;
  }

  DistanceEstimate est;
  est.nearest = detail::segment_crossing(f, x, anchor);
  est.distance = (est.nearest - x).norm();

  std::vector<detail::Cut> cuts{detail::cut_at(f, x, fx)};
  Vector z;
  auto offer = [&](const Vector& y) {
    if (eval(f, y) <= kFeasibilityTolerance) {
      const double d = (y - x).norm();
      if (d < est.distance) {
        est.distance = d;
        est.nearest = y;
      }
    }
  };

  for (int it = 0; it < opt.max_iterations; ++it) {
    est.iterations = it + 1;
    const double dual = detail::project_onto_cuts(cuts, x, est.nearest, z);
    est.lower_bound = std::max(est.lower_bound, std::sqrt(std::max(dual, 0.0) * 2.0));
    est.lower_bound = std::min(est.lower_bound, est.distance);
    if (est.distance - est.lower_bound <= opt.tolerance * (1.0 + est.distance)) break;

    const double fz = eval(f, z);
    if (fz <= kFeasibilityTolerance) {
      offer(z);
      continue;
    }
    cuts.push_back(detail::cut_at(f, z, fz));
    // subgradient-projection steps toward the boundary, each adding a cut
    Vector y = z;
    double fy = fz;
    for (int k = 0; k < 20 && fy > kFeasibilityTolerance; ++k) {
      const Vector g = subgradient(f, y);
      const double gg = g.squaredNorm();
      if (gg == 0.0) break;
      y -= (fy / gg) * g;
      fy = eval(f, y);
      if (fy > kFeasibilityTolerance) cuts.push_back(detail::cut_at(f, y, fy));
    }
    offer(y);
    offer(detail::segment_crossing(f, z, est.nearest));
    offer(detail::segment_crossing(f, z, anchor));

    if (cuts.size() > 64) cuts.erase(cuts.begin() + 1, cuts.begin() + static_cast<std::ptrdiff_t>(cuts.size() - 48));
  }
  return est;
}

// -- boundary sampling ----------------------------------------------------------

struct BoundaryPoint {
  Vector point;
  Vector inside;   // segment endpoint with f < 0
  Vector outside;  // segment endpoint with f > 0
  int iterations = 0;
};

struct BoundarySample {
  std::vector<BoundaryPoint> points;
  std::size_t rejected = 0;
};

/// n points of bdry(S_f) by bisection on segments joining sampled points with
/// f < 0 and f > 0.
inline BoundarySample boundary_sample(const ConvexExpr& f, const Box& box, std::size_t n, std::uint64_t seed) {
  require_dim(box.dim(), f.dim(), "boundary_sample");
  std::vector<Vector> neg;
  std::vector<Vector> pos;
  for (const auto& p : box_points(box, std::max<std::size_t>(4 * n, 256), seed)) {
    const double v = eval(f, p);
    if (v < 0.0) neg.push_back(p);
    if (v > 0.0) pos.push_back(p);
  }
  if (neg.empty() || pos.empty()) {
    throw Error(ErrorCode::NoSignChange, "box contains no sign change of f");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_neg(0, neg.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_pos(0, pos.size() - 1);
  BoundarySample out;
  for (std::size_t k = 0; k < n; ++k) {
    BoundaryPoint bp;
    bp.inside = neg[pick_neg(rng)];
    bp.outside = pos[pick_pos(rng)];
    Vector lo = bp.inside;
    Vector hi = bp.outside;
    Vector mid = lo;
    double fm = eval(f, lo);
    for (; bp.iterations < 200; ++bp.iterations) {
      mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      fm = eval(f, mid);
      if (fm == 0.0) break;
      if (fm < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    const double flo = eval(f, lo);
    bp.point = std::abs(fm) < std::abs(flo) ? mid : lo;
    const double scale = 1.0 + bp.point.cwiseAbs().maxCoeff();
    if (std::abs(eval(f, bp.point)) > kBoundaryTolerance * scale) {
      ++out.rejected;
      continue;
    }
    out.points.push_back(std::move(bp));
  }
  return out;
}

// -- modulus estimates ----------------------------------------------------------

enum class ModulusKind { Local, Global };

inline const char* to_string(ModulusKind k) { return k == ModulusKind::Local ? "local" : "global"; }

struct ShrinkLevel {
  double radius = 0.0;
  double min_distance = kInf;  // min d(0, df) over infeasible samples, inf if none
  std::size_t infeasible_count = 0;
};

struct ModulusReport {
  ModulusKind kind = ModulusKind::Global;
  Vector center;           // local
  std::optional<Box> box;  // global
  double eta = kInf;
  double tau = 0.0;
  bool vacuous = false;  // no infeasible samples: eta = inf, tau = 0
  std::size_t sample_count = 0;
  std::vector<ShrinkLevel> shrink_levels;
  double empirical_ratio = 0.0;  // sup of d(x, S_f) / f(x) over infeasible samples
  bool consistent = true;        // empirical_ratio <= 1.05 tau
  bool resample_suggested = false;
  std::vector<std::string> notes;
};

namespace detail {

inline void finish_report(ModulusReport& r) {
  r.tau = tau_from_eta(r.eta);
  if (std::isfinite(r.tau)) r.consistent = r.empirical_ratio <= r.tau * (1.0 + kVerdictMargin);
}

}  // namespace detail

namespace detail {

// Points where the leading member of a root max ties with one of its
// runners-up, reached by Newton steps on the difference of the two members.
inline std::vector<Vector> tie_points(const ConvexExpr& f, const Vector& x, std::size_t partners = 3) {
  std::vector<Vector> out;
  if (f.kind() != ExprKind::Max) return out;
  const auto& kids = f.children();
  std::vector<std::size_t> order(kids.size());
  std::vector<double> vals(kids.size());
  for (std::size_t k = 0; k < kids.size(); ++k) {
    order[k] = k;
    vals[k] = eval(kids[k], x);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
  const std::size_t lead = order.front();
  for (std::size_t r = 1; r < order.size() && r <= partners; ++r) {
    const std::size_t j = order[r];
    Vector y = x;
    for (int it = 0; it < 8; ++it) {
      const double diff = eval(kids[lead], y) - eval(kids[j], y);
      if (std::abs(diff) <= 1e-13 * (1.0 + std::abs(eval(f, y)))) break;
      const Vector gd = subgradient(kids[lead], y) - subgradient(kids[j], y);
      const double gg = gd.squaredNorm();
      if (gg == 0.0) break;
      y -= (diff / gg) * gd;
    }
    const double fy = eval(f, y);
    const double tol = 0.5 * max_active_tolerance(fy);
    if (eval(kids[lead], y) >= fy - tol && eval(kids[j], y) >= fy - tol) out.push_back(std::move(y));
  }
  return out;
}

}  // namespace detail

struct LocalModulusOptions {
  int levels = 8;
  std::size_t samples_per_level = 256;
  std::uint64_t seed = 0;
  double tolerance = 1e-8;  // relative gap for distance computations
};

/// liminf of d(0, df(x)) as x -> xbar with f(x) > 0, estimated on balls of
/// radius 2^-k.
inline ModulusReport eta_local(const ConvexExpr& f, const Vector& xbar, const LocalModulusOptions& opt = {}) {
  require_dim(xbar.size(), f.dim(), "eta_local");
  if (std::abs(eval(f, xbar)) > kBoundaryTolerance) {
    throw Error(ErrorCode::Precondition, "eta_local needs f(xbar) = 0");
  }
  if (opt.levels < 1 || opt.samples_per_level < 1) throw Error(ErrorCode::Precondition, "empty sampling plan");
  ModulusReport r;
  r.kind = ModulusKind::Local;
  r.center = xbar;
  DistanceOptions dopt;
  dopt.anchor = xbar;
  dopt.tolerance = opt.tolerance;
  double finest_lower_ratio = 0.0;
  for (int k = 0; k < opt.levels; ++k) {
    ShrinkLevel lvl;
    lvl.radius = std::ldexp(1.0, -k);
    const bool last = k + 1 == opt.levels;
    for (const auto& p :
         ball_points(xbar, lvl.radius, opt.samples_per_level, opt.seed + static_cast<std::uint64_t>(k))) {
      ++r.sample_count;
      const double fp = eval(f, p);
      if (!(fp > 0.0)) continue;
      ++lvl.infeasible_count;
      if (auto d = try_subgradient_distance(f, p)) lvl.min_distance = std::min(lvl.min_distance, *d);
      for (const auto& y : detail::tie_points(f, p)) {
        if ((y - xbar).norm() > lvl.radius || !(eval(f, y) > 0.0)) continue;
        if (auto d = try_subgradient_distance(f, y)) lvl.min_distance = std::min(lvl.min_distance, *d);
      }
      if (last) {
        const auto d = distance_to_solution_set(f, p, dopt);
        r.empirical_ratio = std::max(r.empirical_ratio, d.distance / fp);
        finest_lower_ratio = std::max(finest_lower_ratio, d.lower_bound / fp);
      }
    }
    r.shrink_levels.push_back(lvl);
  }
  const auto& levels = r.shrink_levels;
  const bool tail_empty = levels.back().infeasible_count == 0 &&
                          (levels.size() < 2 || levels[levels.size() - 2].infeasible_count == 0);
  if (tail_empty) {
    r.vacuous = true;
    r.eta = kInf;
    r.notes.push_back("no infeasible points near the reference point on the finest levels");
  } else {
    for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
      if (it->infeasible_count > 0) {
        r.eta = it->min_distance;
        break;
      }
    }
    if (finest_lower_ratio > 0.0) r.eta = std::min(r.eta, 1.0 / finest_lower_ratio);
    for (const auto& l : levels) {
      if (l.infeasible_count > 0 && r.eta > l.min_distance + 1e-9) r.resample_suggested = true;
    }
  }
  detail::finish_report(r);
  return r;
}

struct GlobalModulusOptions {
  std::size_t samples = 256;
  std::uint64_t seed = 0;
  std::optional<Vector> slater;
  double tolerance = 1e-8;
  std::size_t refine_starts = 16; // best samples used as compass-search starts
  int refine_budget = 200;        // ratio evaluations per start
};

namespace detail {

struct RatioSample {
  Vector x;
  double lower = 0.0;  // certified d(x, S) / f(x)
  double upper = 0.0;
};

// Compass search for a local maximum of the certified ratio over the box.
// Candidates are ranked with a coarse distance tolerance; the result is
// re-certified at the caller's tolerance.
inline RatioSample climb_ratio(const ConvexExpr& f, const Box& box, const DistanceOptions& dopt, RatioSample start,
                               int budget) {
  DistanceOptions coarse = dopt;
  coarse.tolerance = std::max(dopt.tolerance, 1e-4);
  auto measure = [&](const Vector& y, double fy, const DistanceOptions& o) {
    const auto est = distance_to_solution_set(f, y, o);
    return RatioSample{y, est.lower_bound / fy, est.distance / fy};
  };
  const Eigen::Index m = f.dim();
  std::vector<Vector> dirs;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (double s : {1.0, -1.0}) dirs.push_back(s * Vector::Unit(m, i));
    for (Eigen::Index j = i + 1; j < m; ++j) {
      for (double si : {1.0, -1.0}) {
        for (double sj : {1.0, -1.0}) {
          Vector d = Vector::Zero(m);
          d[i] = si;
          d[j] = sj;
          dirs.push_back(d / std::sqrt(2.0));
        }
      }
    }
  }
  const Vector width = box.hi - box.lo;
  const RatioSample origin = start;
  RatioSample best = measure(start.x, eval(f, start.x), coarse);
  double step = 1.0 / 16.0;
  while (budget > 0 && step > 1e-7) {
    bool moved = false;
    for (const auto& d : dirs) {
      if (budget <= 0) break;
      const Vector y = (best.x + step * width.cwiseProduct(d)).cwiseMax(box.lo).cwiseMin(box.hi);
      if (y == best.x) continue;
      const double fy = eval(f, y);
      if (!(fy > 0.0)) continue;
      --budget;
      RatioSample cand = measure(y, fy, coarse);
      if (cand.lower > best.lower * (1.0 + 1e-12)) {
        best = std::move(cand);
        moved = true;
        break;
      }
    }
    if (!moved) step *= 0.5;
  }
  if (best.x == origin.x) return origin;
  return measure(best.x, eval(f, best.x), dopt);
}

}  // namespace detail

/// inf of d(0, df(x)) over f(x) > 0, estimated over a box.
inline ModulusReport eta_global(const ConvexExpr& f, const Box& box, const GlobalModulusOptions& opt = {}) {
  require_dim(box.dim(), f.dim(), "eta_global");
  ModulusReport r;
  r.kind = ModulusKind::Global;
  r.box = box;
  r.notes.push_back("estimate is relative to the sampled box");
  std::vector<std::pair<Vector, double>> infeasible;
  for (const auto& p : box_points(box, opt.samples, opt.seed)) {
    ++r.sample_count;
    const double fp = eval(f, p);
    if (fp > 0.0) infeasible.emplace_back(p, fp);
  }
  if (infeasible.empty()) {
    r.vacuous = true;
    r.eta = kInf;
    r.notes.push_back("no infeasible samples in the box");
    detail::finish_report(r);
    return r;
  }
  DistanceOptions dopt;
  dopt.seed = opt.seed;
  dopt.tolerance = opt.tolerance;
  if (opt.slater) {
    dopt.anchor = *opt.slater;
  } else {
    auto anchor = find_feasible_point(f, box, opt.seed);
    if (!anchor) throw Error(ErrorCode::NoSlaterPoint, "no feasible point found in the box");
    dopt.anchor = *anchor;
  }
  double eta_sub = kInf;
  double lower_ratio = 0.0;
  std::vector<detail::RatioSample> ratios;
  for (const auto& [p, fp] : infeasible) {
    if (auto g = try_subgradient_distance(f, p)) eta_sub = std::min(eta_sub, *g);
    for (const auto& y : detail::tie_points(f, p)) {
      if (!box.contains(y) || !(eval(f, y) > 0.0)) continue;
      if (auto g = try_subgradient_distance(f, y)) eta_sub = std::min(eta_sub, *g);
    }
    const auto d = distance_to_solution_set(f, p, dopt);
    ratios.push_back({p, d.lower_bound / fp, d.distance / fp});
  }
  std::stable_sort(ratios.begin(), ratios.end(), [](const auto& a, const auto& b) { return a.lower > b.lower; });
  const std::size_t starts = std::min(opt.refine_starts, ratios.size());
  for (std::size_t k = 0; k < starts; ++k) {
    if (!(ratios[k].lower > 0.0)) break;
    const auto top = detail::climb_ratio(f, box, dopt, ratios[k], opt.refine_budget);
    if (auto g = try_subgradient_distance(f, top.x)) eta_sub = std::min(eta_sub, *g);
    ratios.push_back(top);
  }
  for (const auto& q : ratios) {
    r.empirical_ratio = std::max(r.empirical_ratio, q.upper);
    lower_ratio = std::max(lower_ratio, q.lower);
  }
  // every ratio sample bounds tau_min from below, hence eta from above
  r.eta = lower_ratio > 0.0 ? std::min(eta_sub, 1.0 / lower_ratio) : eta_sub;
  ShrinkLevel all;
  all.radius = kInf;
  all.min_distance = eta_sub;
  all.infeasible_count = infeasible.size();
  r.shrink_levels.push_back(all);
  detail::finish_report(r);
  return r;
}

// -- stability ------------------------------------------------------------------

struct BoundarySlopeCheck {
  bool holds = false;
  double inf_abs_beta = kInf;
  Vector worst_point;
};

/// inf of |beta| over the sampled boundary, compared against tau.
inline BoundarySlopeCheck check_boundary_slope_condition(const ConvexExpr& f, double tau,
                                                         const BoundarySample& boundary) {
  if (!(tau > 0.0)) throw Error(ErrorCode::Precondition, "tau must be positive");
  if (boundary.points.empty()) throw Error(ErrorCode::Precondition, "boundary sample is empty");
  BoundarySlopeCheck c;
  for (const auto& bp : boundary.points) {
    const double b = std::abs(beta(f, bp.point).beta);
    if (b < c.inf_abs_beta) {
      c.inf_abs_beta = b;
      c.worst_point = bp.point;
    }
  }
  c.holds = c.inf_abs_beta > tau;
  return c;
}

struct QcWitness {
  Vector z;  // strictly feasible
  Vector x;  // nearest sampled boundary point
  double ratio = 0.0;
  double beta_z = 0.0;
};

enum class Verdict { Stable, Unstable, Undetermined };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Stable: return "stable";
    case Verdict::Unstable: return "unstable";
    case Verdict::Undetermined: return "undetermined";
  }
  return "?";
}

struct Destabilizer {
  Vector direction;  // h0 with f'(xbar, h0) = 0
  double epsilon = 0.0;
  ConvexExpr perturbed;  // f + epsilon <h0, . - xbar>
};

struct StabilityVerdict {
  ModulusKind scope = ModulusKind::Local;
  Vector center;
  Verdict verdict = Verdict::Undetermined;
  double beta = 0.0;  // beta(f, xbar) for local scope
  double beta_inf = kInf;
  Vector worst_point;
  std::vector<QcWitness> qc_witnesses;
  std::optional<Destabilizer> destabilizer;
  std::vector<std::string> notes;
};

struct QcSearch {
  std::vector<QcWitness> witnesses;
  std::size_t feasible_count = 0;
  std::size_t boundary_count = 0;
};

inline QcSearch qc_witness_search(const ConvexExpr& f, double tau, const BoundarySample& boundary, const Box& box,
                                  std::size_t n, std::uint64_t seed) {
  if (!(tau > 0.0)) throw Error(ErrorCode::Precondition, "tau must be positive");
  QcSearch out;
  out.boundary_count = boundary.points.size();
  if (boundary.points.empty()) return out;
  for (const auto& z : box_points(box, n, seed + 1)) {
    const double fz = eval(f, z);
    if (!(fz < 0.0)) continue;
    ++out.feasible_count;
    const BoundaryPoint* nearest = nullptr;
    double dist = kInf;
    for (const auto& bp : boundary.points) {
      const double d = (bp.point - z).norm();
      if (d < dist) {
        dist = d;
        nearest = &bp;
      }
    }
    if (!(dist > 0.0)) continue;
    const double ratio = (fz - eval(f, nearest->point)) / dist;
    if (std::abs(ratio) >= kQcRatioFactor * tau) continue;
    const double bz = beta(f, z).beta;
    if (std::abs(bz) > tau) continue;
    out.witnesses.push_back({z, nearest->point, ratio, bz});
  }
  std::stable_sort(out.witnesses.begin(), out.witnesses.end(),
                   [](const QcWitness& a, const QcWitness& b) { return std::abs(a.ratio) < std::abs(b.ratio); });
  return out;
}

/// Feasible points z whose slope toward the nearest boundary point vanishes
/// while |beta(f, z)| stays at most tau.
inline QcSearch qc_witness_search(const ConvexExpr& f, double tau, const Box& box, std::size_t n,
                                  std::uint64_t seed) {
  return qc_witness_search(f, tau, boundary_sample(f, box, n, seed), box, n, seed);
}

/// Stable iff beta(f, xbar) != 0. Unstable verdicts carry a direction h0 with
/// f'(xbar, h0) = 0 and the perturbation along it.
inline StabilityVerdict classify_local_stability(const ConvexExpr& f, const Vector& xbar, double epsilon = 0.01) {
  require_dim(xbar.size(), f.dim(), "classify_local_stability");
  if (std::abs(eval(f, xbar)) > kBoundaryTolerance) {
    throw Error(ErrorCode::Precondition, "local stability needs f(xbar) = 0");
  }
  StabilityVerdict v;
  v.scope = ModulusKind::Local;
  v.center = xbar;
  const auto cert = beta(f, xbar);
  v.beta = cert.beta;
  v.beta_inf = std::abs(cert.beta);
  if (std::abs(cert.beta) > kBetaZeroThreshold) {
    v.verdict = Verdict::Stable;
  } else {
    v.verdict = Verdict::Unstable;
    v.destabilizer = Destabilizer{cert.witness, epsilon, linear_perturbation(f, cert.witness, epsilon, xbar)};
    v.notes.push_back("beta vanishes; perturbation along the witness direction destabilizes");
  }
  return v;
}

struct GlobalStabilityOptions {
  std::size_t samples = 256;
  std::uint64_t seed = 0;
};

/// Boundary slope condition plus QC scan over a box, with a 5% margin around tau.
inline StabilityVerdict classify_global_stability(const ConvexExpr& f, double tau, const Box& box,
                                                  const GlobalStabilityOptions& opt = {}) {
  if (!(tau > 0.0)) throw Error(ErrorCode::Precondition, "tau must be positive");
  StabilityVerdict v;
  v.scope = ModulusKind::Global;
  const BoundarySample boundary = boundary_sample(f, box, opt.samples, opt.seed);
  if (boundary.points.empty()) throw Error(ErrorCode::NoSignChange, "no boundary point could be resolved");
  const auto slope = check_boundary_slope_condition(f, tau, boundary);
  v.beta_inf = slope.inf_abs_beta;
  v.worst_point = slope.worst_point;
  v.qc_witnesses = qc_witness_search(f, tau, boundary, box, opt.samples, opt.seed).witnesses;
  v.notes.push_back("verdict is relative to the sampled box");
  if (!v.qc_witnesses.empty() || slope.inf_abs_beta <= tau * (1.0 - kVerdictMargin)) {
    v.verdict = Verdict::Unstable;
    if (!v.qc_witnesses.empty()) v.notes.push_back("qualification condition fails on feasible samples");
    if (slope.inf_abs_beta <= tau * (1.0 - kVerdictMargin)) {
      v.notes.push_back("boundary slope falls below tau");
    }
  } else if (slope.inf_abs_beta > tau * (1.0 + kVerdictMargin)) {
    v.verdict = Verdict::Stable;
  } else {
    v.verdict = Verdict::Undetermined;
    v.notes.push_back("boundary slope within the margin around tau");
  }
  return v;
}

}  // namespace ebstab
