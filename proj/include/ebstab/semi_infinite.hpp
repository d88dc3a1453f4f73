#pragma once

// Systems {f_i <= 0 : i in I} over a compact index set: a finite list or a
// closed interval [a, b] searched on a uniform grid with local refinement.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ebstab/convex_expr.hpp"
#include "ebstab/moduli.hpp"
#include "ebstab/polytope.hpp"
#include "ebstab/sphere.hpp"
#include "ebstab/types.hpp"

namespace ebstab {

enum class IndexKind { Finite, Interval };

class IndexedFamily {
 public:
  using Rule = std::function<ConvexExpr(double)>;

  static IndexedFamily finite(std::vector<ConvexExpr> members, std::vector<std::string> labels = {}) {
    if (members.empty()) throw Error(ErrorCode::Precondition, "a finite family needs at least one member");
    const Eigen::Index m = members.front().dim();
    for (const auto& f : members) require_dim(f.dim(), m, "family member");
    if (labels.empty()) {
      for (std::size_t i = 0; i < members.size(); ++i) labels.push_back(std::to_string(i + 1));
    }
    if (labels.size() != members.size()) throw Error(ErrorCode::Precondition, "one label per member");
    IndexedFamily fam;
    fam.kind_ = IndexKind::Finite;
    fam.dim_ = m;
    fam.members_ = std::move(members);
    fam.labels_ = std::move(labels);
    return fam;
  }

  /// i -> rule(i) on [a, b]. `parameter_lipschitz` bounds |d/di f_i(x)| on the
  /// region of interest when known; `text` is the template's source form.
  static IndexedFamily interval(double a, double b, std::size_t grid_count, Rule rule, std::string text = {},
                                std::optional<double> parameter_lipschitz = std::nullopt) {
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
      throw Error(ErrorCode::Precondition, "interval index set needs finite a < b");
    }
    if (grid_count < 2) throw Error(ErrorCode::Precondition, "interval index set needs grid_count >= 2");
    IndexedFamily fam;
    fam.kind_ = IndexKind::Interval;
    fam.a_ = a;
    fam.b_ = b;
    fam.grid_count_ = grid_count;
    fam.rule_ = std::move(rule);
    fam.text_ = std::move(text);
    fam.lipschitz_ = parameter_lipschitz;
    fam.dim_ = fam.rule_(a).dim();
    return fam;
  }

  IndexKind kind() const noexcept { return kind_; }
  Eigen::Index dim() const noexcept { return dim_; }
  double lower() const noexcept { return a_; }
  double upper() const noexcept { return b_; }
  std::size_t grid_count() const noexcept { return grid_count_; }
  const std::string& template_text() const noexcept { return text_; }
  std::optional<double> parameter_lipschitz() const noexcept { return lipschitz_; }
  const std::vector<ConvexExpr>& members() const noexcept { return members_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  /// Index points searched: 0..n-1 for a finite list, the uniform grid otherwise.
  std::vector<double> grid() const {
    std::vector<double> g;
    if (kind_ == IndexKind::Finite) {
      for (std::size_t i = 0; i < members_.size(); ++i) g.push_back(static_cast<double>(i));
    } else {
      for (std::size_t k = 0; k < grid_count_; ++k) g.push_back(grid_point(k));
    }
    return g;
  }

  double spacing() const { return kind_ == IndexKind::Finite ? 1.0 : (b_ - a_) / static_cast<double>(grid_count_ - 1); }

  ConvexExpr member(double index) const {
    if (kind_ == IndexKind::Finite) return members_.at(finite_slot(index));
    if (index < a_ || index > b_) throw Error(ErrorCode::Precondition, "index outside the interval");
    return rule_(index);
  }

  std::string label(double index) const {
    if (kind_ == IndexKind::Finite) return labels_.at(finite_slot(index));
    return format_number(index);
  }

  /// The sup function as an expression: exact for finite lists, the grid
  /// maximum for intervals.
  ConvexExpr materialize() const {
    std::vector<ConvexExpr> kids;
    for (double i : grid()) kids.push_back(member(i));
    return kids.size() == 1 ? kids.front() : ConvexExpr::max(std::move(kids));
  }

  /// The same family with every member shifted by eps <u, . - xbar>.
  IndexedFamily perturbed(const Vector& u, double eps, const Vector& xbar) const {
    if (eps == 0.0) return *this;
    IndexedFamily out = *this;
    if (kind_ == IndexKind::Finite) {
      for (auto& f : out.members_) f = linear_perturbation(f, u, eps, xbar);
    } else {
      Rule base = rule_;
      out.rule_ = [base, u, eps, xbar](double i) { return linear_perturbation(base(i), u, eps, xbar); };
      if (!text_.empty()) {
        out.text_ = "(sum 1 " + text_ + " 1 (affine " + format_vector(eps * u) + " " +
                    format_number(-eps * u.dot(xbar)) + "))";
      }
    }
    return out;
  }

  IndexedFamily with_grid(std::size_t grid_count) const {
    if (kind_ != IndexKind::Interval) return *this;
    return interval(a_, b_, grid_count, rule_, text_, lipschitz_);
  }

 private:
  IndexedFamily() = default;

  double grid_point(std::size_t k) const {
    if (k + 1 == grid_count_) return b_;
    return a_ + (b_ - a_) * static_cast<double>(k) / static_cast<double>(grid_count_ - 1);
  }

  std::size_t finite_slot(double index) const {
    const double r = std::round(index);
    if (r != index || r < 0.0 || r >= static_cast<double>(members_.size())) {
      throw Error(ErrorCode::Precondition, "index is not a member of the finite family");
    }
    return static_cast<std::size_t>(r);
  }

  IndexKind kind_ = IndexKind::Finite;
  Eigen::Index dim_ = 0;
  std::vector<ConvexExpr> members_;
  std::vector<std::string> labels_;
  double a_ = 0.0;
  double b_ = 0.0;
  std::size_t grid_count_ = 0;
  Rule rule_;
  std::string text_;
  std::optional<double> lipschitz_;
};

inline double system_active_tolerance(double fx) { return 1e-8 * (1.0 + std::abs(fx)); }

struct SupPoint {
  double value = -std::numeric_limits<double>::infinity();
  double index = 0.0;
};

namespace detail {

// Grid maximum, then golden-section refinement on the two neighbouring cells.
inline SupPoint sup_search(const IndexedFamily& fam, const Vector& x) {
  require_dim(x.size(), fam.dim(), "sup_value");
  const auto grid = fam.grid();
  std::vector<double> vals;
  vals.reserve(grid.size());
  SupPoint best;
  std::size_t arg = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    vals.push_back(eval(fam.member(grid[k]), x));
    if (vals.back() > best.value) {
      best = {vals.back(), grid[k]};
      arg = k;
    }
  }
  if (fam.kind() == IndexKind::Finite) return best;
  double lo = grid[arg == 0 ? 0 : arg - 1];
  double hi = grid[std::min(arg + 1, grid.size() - 1)];
  constexpr double kInvPhi = 0.6180339887498948482;
  auto value = [&](double t) { return eval(fam.member(t), x); };
  double c = hi - kInvPhi * (hi - lo);
  double d = lo + kInvPhi * (hi - lo);
  double fc = value(c);
  double fd = value(d);
  for (int it = 0; it < 80 && hi - lo > 1e-15 * (1.0 + std::abs(hi)); ++it) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - kInvPhi * (hi - lo);
      fc = value(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + kInvPhi * (hi - lo);
      fd = value(d);
    }
  }
  if (fc > best.value) best = {fc, c};
  if (fd > best.value) best = {fd, d};
  return best;
}

}  // namespace detail

/// f(x) = max_i f_i(x).
inline double sup_value(const IndexedFamily& fam, const Vector& x) { return detail::sup_search(fam, x).value; }

struct ActiveSet {
  std::vector<double> indices;
  double tolerance = 0.0;
  double sup_value = 0.0;

  bool contains(double i, double tol = 1e-12) const {
    return std::any_of(indices.begin(), indices.end(), [&](double j) { return std::abs(i - j) <= tol; });
  }
};

/// Indices with f_i(x) >= f(x) - tol; tol defaults to 1e-8 (1 + |f(x)|).
inline ActiveSet active_set(const IndexedFamily& fam, const Vector& x, std::optional<double> tol = std::nullopt) {
  const SupPoint sp = detail::sup_search(fam, x);
  ActiveSet s;
  s.sup_value = sp.value;
  s.tolerance = tol ? *tol : system_active_tolerance(sp.value);
  if (!(s.tolerance > 0.0)) throw Error(ErrorCode::Precondition, "active-set tolerance must be positive");
  for (double i : fam.grid()) {
    if (eval(fam.member(i), x) >= sp.value - s.tolerance) s.indices.push_back(i);
  }
  if (fam.kind() == IndexKind::Interval && !s.contains(sp.index)) {
    s.indices.insert(std::upper_bound(s.indices.begin(), s.indices.end(), sp.index), sp.index);
  }
  return s;
}

/// f'(x, h) = max over active i of f_i'(x, h).
inline double dd_max_formula(const IndexedFamily& fam, const Vector& x, const Vector& h,
                             std::optional<double> tol = std::nullopt) {
  double best = -std::numeric_limits<double>::infinity();
  for (double i : active_set(fam, x, tol).indices) best = std::max(best, directional_derivative(fam.member(i), x, h));
  return best;
}

/// conv of the union of the active members' subdifferentials.
inline SubdiffSet system_subdifferential(const IndexedFamily& fam, const Vector& x,
                                         std::optional<double> tol = std::nullopt) {
  std::vector<SubdiffSet> parts;
  for (double i : active_set(fam, x, tol).indices) parts.push_back(subdifferential(fam.member(i), x));
  return detail::hull_of_union(parts);
}

/// Every member gets the same perturbation eps <u, . - xbar>.
inline IndexedFamily perturb_system(const IndexedFamily& fam, const Vector& u, double eps, const Vector& xbar) {
  require_dim(u.size(), fam.dim(), "perturb_system direction");
  require_dim(xbar.size(), fam.dim(), "perturb_system anchor");
  if (!(eps >= 0.0)) throw Error(ErrorCode::Precondition, "perturbation size must be nonnegative");
  if (u.norm() > 1.0 + 1e-12) throw Error(ErrorCode::Precondition, "perturbation direction must have norm <= 1");
  return fam.perturbed(u, eps, xbar);
}

/// beta of the sup function at x, from the system subdifferential.
inline BetaCertificate system_beta(const IndexedFamily& fam, const Vector& x) {
  return detail::certify(system_subdifferential(fam, x), fam.materialize(), x);
}

enum class HypothesisSide { None, FNotInG, GNotInF };

inline const char* to_string(HypothesisSide s) {
  switch (s) {
    case HypothesisSide::None: return "none";
    case HypothesisSide::FNotInG: return "I_f not contained in I_g";
    case HypothesisSide::GNotInF: return "I_g not contained in I_f";
  }
  return "?";
}

struct HypothesisCheck {
  bool ok = true;
  HypothesisSide violated = HypothesisSide::None;
  double beta = 0.0;
  ActiveSet active_f;
  ActiveSet active_g;
};

/// Active-set inclusions required for a perturbed system G of F at x:
/// I_g within I_f when beta(f, x) < 0, and I_f within I_g when beta(f, x) > 0.
inline HypothesisCheck check_active_set_hypotheses(const IndexedFamily& f, const IndexedFamily& g, const Vector& x) {
  if (f.kind() != g.kind() || f.grid().size() != g.grid().size()) {
    throw Error(ErrorCode::Precondition, "families must share an index set");
  }
  HypothesisCheck c;
  c.beta = system_beta(f, x).beta;
  c.active_f = active_set(f, x);
  c.active_g = active_set(g, x);
  const double idx_tol = 1e-9 * std::max(1.0, f.spacing());
  auto subset = [idx_tol](const ActiveSet& a, const ActiveSet& b) {
    return std::all_of(a.indices.begin(), a.indices.end(), [&](double i) { return b.contains(i, idx_tol); });
  };
  if (c.beta < 0.0 && !subset(c.active_g, c.active_f)) {
    c.ok = false;
    c.violated = HypothesisSide::GNotInF;
  } else if (c.beta > 0.0 && !subset(c.active_f, c.active_g)) {
    c.ok = false;
    c.violated = HypothesisSide::FNotInG;
  }
  return c;
}

/// Largest observed |f_{i+1}(x) - f_i(x)| / spacing over the grid.
inline double parameter_lipschitz_estimate(const IndexedFamily& fam, const Vector& x) {
  const auto grid = fam.grid();
  double best = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double d = std::abs(eval(fam.member(grid[k]), x) - eval(fam.member(grid[k - 1]), x));
    best = std::max(best, d / (grid[k] - grid[k - 1]));
  }
  return best;
}

struct SystemVerdict {
  StabilityVerdict verdict;
  ActiveSet active;  // at the reference point, or at the worst boundary point
};

inline std::string describe_active_set(const IndexedFamily& fam, const ActiveSet& s) {
  std::string out = "{";
  for (std::size_t k = 0; k < s.indices.size(); ++k) {
    if (k > 0) out += ", ";
    out += fam.label(s.indices[k]);
  }
  return out + "}";
}

inline SystemVerdict classify_system_stability_local(const IndexedFamily& fam, const Vector& xbar,
                                                     double epsilon = 0.01) {
  SystemVerdict v;
  v.verdict = classify_local_stability(fam.materialize(), xbar, epsilon);
  v.active = active_set(fam, xbar);
  v.verdict.notes.push_back("active set at the reference point: " + describe_active_set(fam, v.active));
  return v;
}

inline SystemVerdict classify_system_stability_global(const IndexedFamily& fam, double tau, const Box& box,
                                                      const GlobalStabilityOptions& opt = {}) {
  SystemVerdict v;
  v.verdict = classify_global_stability(fam.materialize(), tau, box, opt);
  if (v.verdict.worst_point.size() == fam.dim()) {
    v.active = active_set(fam, v.verdict.worst_point);
    v.verdict.notes.push_back("active set at the worst boundary point: " + describe_active_set(fam, v.active));
  }
  return v;
}

}  // namespace ebstab
