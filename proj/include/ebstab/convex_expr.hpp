#pragma once

// Convex-by-construction expression trees over R^m with exact value,
// directional-derivative and subdifferential oracles.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ebstab/error.hpp"
#include "ebstab/polytope.hpp"
#include "ebstab/types.hpp"

namespace ebstab {

enum class ExprKind { Const, Affine, EuclidNorm, AbsCoord, Exp1D, Max, Sum, ComposeAffine, PosPartSquare };

/// Immutable, shareable expression handle. Every node is convex and finite on
/// all of R^m; the factories reject anything else.
class ConvexExpr {
 public:
  static ConvexExpr constant(Eigen::Index m, double c) {
    auto n = make(ExprKind::Const, m);
    n->scalar = finite_or_throw(c, "constant");
    return ConvexExpr(std::move(n));
  }

  /// x -> <a,x> + b
  static ConvexExpr affine(Vector a, double b) {
    if (a.size() < 1) throw Error(ErrorCode::DimensionMismatch, "affine: empty coefficient vector");
    if (!a.allFinite()) throw Error(ErrorCode::Precondition, "affine: non-finite coefficients");
    auto n = make(ExprKind::Affine, a.size());
    n->vec = std::move(a);
    n->scalar = finite_or_throw(b, "affine offset");
    return ConvexExpr(std::move(n));
  }

  static ConvexExpr euclid_norm(Eigen::Index m) { return ConvexExpr(make(ExprKind::EuclidNorm, m)); }

  /// x -> |x_i|
  static ConvexExpr abs_coord(Eigen::Index m, Eigen::Index i) {
    auto n = make(ExprKind::AbsCoord, m);
    n->coord = checked_coord(m, i);
    return ConvexExpr(std::move(n));
  }

  /// x -> e^{x_i} + shift
  static ConvexExpr exp1d(Eigen::Index m, Eigen::Index i, double shift) {
    auto n = make(ExprKind::Exp1D, m);
    n->coord = checked_coord(m, i);
    n->scalar = finite_or_throw(shift, "exp1d shift");
    return ConvexExpr(std::move(n));
  }

  /// x -> (max(x_i, 0))^2
  static ConvexExpr pos_part_square(Eigen::Index m, Eigen::Index i) {
    auto n = make(ExprKind::PosPartSquare, m);
    n->coord = checked_coord(m, i);
    return ConvexExpr(std::move(n));
  }

  static ConvexExpr max(std::vector<ConvexExpr> children) {
    if (children.empty()) throw Error(ErrorCode::Precondition, "max needs at least one child");
    const Eigen::Index m = children.front().dim();
    for (const auto& c : children) require_dim(c.dim(), m, "max child");
    auto n = make(ExprKind::Max, m);
    n->children = std::move(children);
    return ConvexExpr(std::move(n));
  }

  /// sum_k w_k f_k with w_k >= 0.
  static ConvexExpr sum(std::vector<std::pair<double, ConvexExpr>> terms) {
    if (terms.empty()) throw Error(ErrorCode::Precondition, "sum needs at least one term");
    const Eigen::Index m = terms.front().second.dim();
    auto n = make(ExprKind::Sum, m);
    for (auto& [w, e] : terms) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw Error(ErrorCode::ConvexityRule, "sum weight must be finite and nonnegative");
      }
      require_dim(e.dim(), m, "sum term");
      n->weights.push_back(w);
      n->children.push_back(std::move(e));
    }
    return ConvexExpr(std::move(n));
  }

  /// x -> inner(A x + c) with A of shape p x m and inner over R^p.
  static ConvexExpr compose_affine(ConvexExpr inner, Matrix a, Vector c) {
    require_dim(inner.dim(), a.rows(), "compose_affine matrix rows");
    require_dim(c.size(), a.rows(), "compose_affine offset");
    if (a.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "compose_affine: empty matrix");
    if (!a.allFinite() || !c.allFinite()) {
      throw Error(ErrorCode::Precondition, "compose_affine: non-finite data");
    }
    auto n = make(ExprKind::ComposeAffine, a.cols());
    n->mat = std::move(a);
    n->vec = std::move(c);
    n->children.push_back(std::move(inner));
    return ConvexExpr(std::move(n));
  }

  ExprKind kind() const noexcept { return node_->kind; }
  Eigen::Index dim() const noexcept { return node_->dim; }

  double constant_value() const { return node_->scalar; }
  double offset() const { return node_->scalar; }
  double shift() const { return node_->scalar; }
  const Vector& coefficients() const { return node_->vec; }
  const Vector& translation() const { return node_->vec; }
  const Matrix& matrix() const { return node_->mat; }
  Eigen::Index coord() const { return node_->coord; }
  const std::vector<ConvexExpr>& children() const { return node_->children; }
  const std::vector<double>& weights() const { return node_->weights; }
  const ConvexExpr& inner() const { return node_->children.front(); }

  friend bool operator==(const ConvexExpr& a, const ConvexExpr& b) {
    if (a.node_ == b.node_) return true;
    const Node& x = *a.node_;
    const Node& y = *b.node_;
    if (x.kind != y.kind || x.dim != y.dim || x.coord != y.coord) return false;
    if (!(x.scalar == y.scalar)) return false;
    if (x.vec.size() != y.vec.size() || x.vec != y.vec) return false;
    if (x.mat.rows() != y.mat.rows() || x.mat.cols() != y.mat.cols() || x.mat != y.mat) return false;
    return x.weights == y.weights && x.children == y.children;
  }
  friend bool operator!=(const ConvexExpr& a, const ConvexExpr& b) { return !(a == b); }

 private:
  struct Node {
    ExprKind kind = ExprKind::Const;
    Eigen::Index dim = 0;
    double scalar = 0.0;
    Eigen::Index coord = 0;
    Vector vec;
    Matrix mat;
    std::vector<ConvexExpr> children;
    std::vector<double> weights;
  };

  explicit ConvexExpr(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static std::shared_ptr<Node> make(ExprKind k, Eigen::Index m) {
    if (m < 1) throw Error(ErrorCode::DimensionMismatch, "dimension must be positive");
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->dim = m;
    return n;
  }
  static Eigen::Index checked_coord(Eigen::Index m, Eigen::Index i) {
    if (i < 0 || i >= m) throw Error(ErrorCode::DimensionMismatch, "coordinate index out of range");
    return i;
  }
  static double finite_or_throw(double v, const char* what) {
    if (!std::isfinite(v)) throw Error(ErrorCode::Precondition, std::string(what) + " must be finite");
    return v;
  }

  std::shared_ptr<const Node> node_;
};

/// Tolerance for a child of a max node to count as active at x.
inline double max_active_tolerance(double fx) { return 1e-10 * (1.0 + std::abs(fx)); }

inline double eval(const ConvexExpr& f, const Vector& x) {
  require_dim(x.size(), f.dim(), "eval");
  switch (f.kind()) {
    case ExprKind::Const: return f.constant_value();
    case ExprKind::Affine: return f.coefficients().dot(x) + f.offset();
    case ExprKind::EuclidNorm: return x.norm();
    case ExprKind::AbsCoord: return std::abs(x[f.coord()]);
    case ExprKind::Exp1D: return std::exp(x[f.coord()]) + f.shift();
    case ExprKind::PosPartSquare: {
      const double p = std::max(x[f.coord()], 0.0);
      return p * p;
    }
    case ExprKind::Max: {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& c : f.children()) best = std::max(best, eval(c, x));
      return best;
    }
    case ExprKind::Sum: {
      double s = 0.0;
      for (std::size_t k = 0; k < f.children().size(); ++k) {
        if (f.weights()[k] != 0.0) s += f.weights()[k] * eval(f.children()[k], x);
      }
      return s;
    }
    case ExprKind::ComposeAffine: return eval(f.inner(), f.matrix() * x + f.translation());
  }
  return 0.0;
}

/// Indices of the children of a max node that are active at x.
inline std::vector<std::size_t> active_children(const ConvexExpr& f, const Vector& x) {
  if (f.kind() != ExprKind::Max) throw Error(ErrorCode::Precondition, "active_children needs a max node");
  std::vector<double> vals;
  vals.reserve(f.children().size());
  for (const auto& c : f.children()) vals.push_back(eval(c, x));
  const double fx = *std::max_element(vals.begin(), vals.end());
  const double tol = max_active_tolerance(fx);
  std::vector<std::size_t> act;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (vals[i] >= fx - tol) act.push_back(i);
  }
  return act;
}

/// f'(x, h), exact by structural rules. h need not be a unit vector.
inline double directional_derivative(const ConvexExpr& f, const Vector& x, const Vector& h) {
  require_dim(x.size(), f.dim(), "directional_derivative point");
  require_dim(h.size(), f.dim(), "directional_derivative direction");
  switch (f.kind()) {
    case ExprKind::Const: return 0.0;
    case ExprKind::Affine: return f.coefficients().dot(h);
    case ExprKind::EuclidNorm: {
      const double nx = x.norm();
      return nx > 0.0 ? x.dot(h) / nx : h.norm();
    }
    case ExprKind::AbsCoord: {
      const double xi = x[f.coord()];
      const double hi = h[f.coord()];
      if (xi > 0.0) return hi;
      if (xi < 0.0) return -hi;
      return std::abs(hi);
    }
    case ExprKind::Exp1D: return std::exp(x[f.coord()]) * h[f.coord()];
    case ExprKind::PosPartSquare: return 2.0 * std::max(x[f.coord()], 0.0) * h[f.coord()];
    case ExprKind::Max: {
      double best = -std::numeric_limits<double>::infinity();
      for (auto i : active_children(f, x)) best = std::max(best, directional_derivative(f.children()[i], x, h));
      return best;
    }
    case ExprKind::Sum: {
      double s = 0.0;
      for (std::size_t k = 0; k < f.children().size(); ++k) {
        if (f.weights()[k] != 0.0) s += f.weights()[k] * directional_derivative(f.children()[k], x, h);
      }
      return s;
    }
    case ExprKind::ComposeAffine:
      return directional_derivative(f.inner(), f.matrix() * x + f.translation(), f.matrix() * h);
  }
  return 0.0;
}

/// Difference quotients (f(x+th) - f(x)) / t over a strictly decreasing positive grid.
inline std::vector<double> dd_quotient_scan(const ConvexExpr& f, const Vector& x, const Vector& h,
                                            const std::vector<double>& t_grid) {
  require_dim(x.size(), f.dim(), "dd_quotient_scan point");
  require_dim(h.size(), f.dim(), "dd_quotient_scan direction");
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (!(t_grid[k] > 0.0) || (k > 0 && !(t_grid[k] < t_grid[k - 1]))) {
      throw Error(ErrorCode::Precondition, "t grid must be positive and strictly decreasing");
    }
  }
  const double fx = eval(f, x);
  std::vector<double> q;
  q.reserve(t_grid.size());
  for (double t : t_grid) q.push_back((eval(f, x + t * h) - fx) / t);
  return q;
}

namespace detail {

inline constexpr std::size_t kMaxMinkowskiGenerators = 100000;

inline SubdiffSet minkowski_sum(const SubdiffSet& a, double wa, const SubdiffSet& b, double wb) {
  if (a.generators().size() * b.generators().size() > kMaxMinkowskiGenerators) {
    throw Error(ErrorCode::UnsupportedSubdiff, "Minkowski sum exceeds the generator budget");
  }
  std::vector<Vector> g;
  g.reserve(a.generators().size() * b.generators().size());
  for (const auto& u : a.generators()) {
    for (const auto& v : b.generators()) g.push_back(wa * u + wb * v);
  }
  return SubdiffSet(std::move(g), wa * a.ball_radius() + wb * b.ball_radius());
}

// True when every point of conv(pts) lies in `outer` (up to tol).
inline bool contains_points(const SubdiffSet& outer, const std::vector<Vector>& pts, double tol) {
  for (const auto& p : pts) {
    if (min_norm_point(outer.translated(-p)).distance > tol) return false;
  }
  return true;
}

// True when conv(inner) + r_inner*B is contained in conv(outer_gens).
inline bool ball_set_inside(const SubdiffSet& inner, const std::vector<Vector>& outer_gens, double tol) {
  const SubdiffSet outer(outer_gens, 0.0);
  for (const auto& g : inner.generators()) {
    if (boundary_distance(outer.translated(-g)).value < inner.ball_radius() - tol) return false;
  }
  return true;
}

// conv of the union of the active children's sets. Exact whenever at most one
// set has a ball part and the hull can be written as conv(G) + rB.
inline SubdiffSet hull_of_union(const std::vector<SubdiffSet>& parts) {
  if (parts.size() == 1) return parts.front();
  std::vector<std::size_t> balls;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].ball_radius() > 0.0) balls.push_back(i);
  }
  std::vector<Vector> all;
  for (const auto& p : parts) all.insert(all.end(), p.generators().begin(), p.generators().end());
  if (balls.empty()) return SubdiffSet(std::move(all), 0.0);
  if (balls.size() > 1) {
    throw Error(ErrorCode::UnsupportedSubdiff, "max node with more than one active ball component");
  }
  const SubdiffSet& ball_part = parts[balls.front()];
  const double tol = 1e-12 * std::max(1.0, ball_part.max_generator_norm() + ball_part.ball_radius());
  std::vector<Vector> others;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i == balls.front()) continue;
    others.insert(others.end(), parts[i].generators().begin(), parts[i].generators().end());
  }
  if (contains_points(ball_part, others, tol)) return ball_part;
  if (ball_set_inside(ball_part, others, tol)) return SubdiffSet(std::move(others), 0.0);
  throw Error(ErrorCode::UnsupportedSubdiff,
              "hull of a ball component and a polytope is not of the form conv(G) + rB");
}

}  // namespace detail

/// The subdifferential at x as conv(G) + rB.
inline SubdiffSet subdifferential(const ConvexExpr& f, const Vector& x) {
  require_dim(x.size(), f.dim(), "subdifferential");
  const Eigen::Index m = f.dim();
  auto unit = [m](Eigen::Index i, double s) {
    Vector e = Vector::Zero(m);
    e[i] = s;
    return e;
  };
  switch (f.kind()) {
    case ExprKind::Const: return SubdiffSet::singleton(Vector::Zero(m));
    case ExprKind::Affine: return SubdiffSet::singleton(f.coefficients());
    case ExprKind::EuclidNorm: {
      const double nx = x.norm();
      return nx > 0.0 ? SubdiffSet::singleton(x / nx) : SubdiffSet::ball(m, 1.0);
    }
    case ExprKind::AbsCoord: {
      const double xi = x[f.coord()];
      if (xi > 0.0) return SubdiffSet::singleton(unit(f.coord(), 1.0));
      if (xi < 0.0) return SubdiffSet::singleton(unit(f.coord(), -1.0));
      return SubdiffSet({unit(f.coord(), -1.0), unit(f.coord(), 1.0)}, 0.0);
    }
    case ExprKind::Exp1D: return SubdiffSet::singleton(unit(f.coord(), std::exp(x[f.coord()])));
    case ExprKind::PosPartSquare:
      return SubdiffSet::singleton(unit(f.coord(), 2.0 * std::max(x[f.coord()], 0.0)));
    case ExprKind::Max: {
      std::vector<SubdiffSet> parts;
      for (auto i : active_children(f, x)) parts.push_back(subdifferential(f.children()[i], x));
      return detail::hull_of_union(parts);
    }
    case ExprKind::Sum: {
      SubdiffSet acc = SubdiffSet::singleton(Vector::Zero(m));
      for (std::size_t k = 0; k < f.children().size(); ++k) {
        const double w = f.weights()[k];
        if (w == 0.0) continue;
        acc = detail::minkowski_sum(acc, 1.0, subdifferential(f.children()[k], x), w);
      }
      return acc;
    }
    case ExprKind::ComposeAffine: {
      const Matrix& a = f.matrix();
      const SubdiffSet in = subdifferential(f.inner(), a * x + f.translation());
      std::vector<Vector> g;
      g.reserve(in.generators().size());
      for (const auto& v : in.generators()) g.push_back(a.transpose() * v);
      double radius = 0.0;
      if (in.ball_radius() > 0.0) {
        // A^T maps the p-ball onto an m-ball only if all m singular values agree.
        if (a.rows() < a.cols()) {
          throw Error(ErrorCode::UnsupportedSubdiff, "image of a ball under A^T is degenerate");
        }
        Eigen::JacobiSVD<Matrix> svd(a);
        const auto& sv = svd.singularValues();
        const double smax = sv.maxCoeff();
        const double smin = sv.minCoeff();
        if (smax - smin > 1e-12 * std::max(1.0, smax)) {
          throw Error(ErrorCode::UnsupportedSubdiff, "image of a ball under A^T is an ellipsoid");
        }
        radius = in.ball_radius() * smax;
      }
      return SubdiffSet(std::move(g), radius);
    }
  }
  throw Error(ErrorCode::Precondition, "unknown expression kind");
}

/// One element of the subdifferential at x. Always available, unlike the full set.
inline Vector subgradient(const ConvexExpr& f, const Vector& x) {
  require_dim(x.size(), f.dim(), "subgradient");
  const Eigen::Index m = f.dim();
  Vector g = Vector::Zero(m);
  switch (f.kind()) {
    case ExprKind::Const: return g;
    case ExprKind::Affine: return f.coefficients();
    case ExprKind::EuclidNorm: {
      const double nx = x.norm();
      return nx > 0.0 ? Vector(x / nx) : g;
    }
    case ExprKind::AbsCoord: {
      const double xi = x[f.coord()];
      g[f.coord()] = xi > 0.0 ? 1.0 : (xi < 0.0 ? -1.0 : 0.0);
      return g;
    }
    case ExprKind::Exp1D: g[f.coord()] = std::exp(x[f.coord()]); return g;
    case ExprKind::PosPartSquare: g[f.coord()] = 2.0 * std::max(x[f.coord()], 0.0); return g;
    case ExprKind::Max: return subgradient(f.children()[active_children(f, x).front()], x);
    case ExprKind::Sum:
      for (std::size_t k = 0; k < f.children().size(); ++k) {
        if (f.weights()[k] != 0.0) g += f.weights()[k] * subgradient(f.children()[k], x);
      }
      return g;
    case ExprKind::ComposeAffine:
      return f.matrix().transpose() * subgradient(f.inner(), f.matrix() * x + f.translation());
  }
  return g;
}

/// f + eps * <u, . - xbar>
inline ConvexExpr linear_perturbation(const ConvexExpr& f, const Vector& u, double eps, const Vector& xbar) {
  require_dim(u.size(), f.dim(), "linear_perturbation direction");
  require_dim(xbar.size(), f.dim(), "linear_perturbation anchor");
  if (eps == 0.0) return f;
  return ConvexExpr::sum({{1.0, f}, {1.0, ConvexExpr::affine(eps * u, -eps * u.dot(xbar))}});
}

}  // namespace ebstab
