#pragma once

// Geometry of compact convex sets of the form conv(G) + r*B^m: support
// function, minimum-norm point, origin classification and the signed
// distance from the origin to the set boundary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ebstab/error.hpp"
#include "ebstab/types.hpp"

namespace ebstab {

inline constexpr double kDedupTolerance = 1e-12;
inline constexpr double kDefaultOriginTolerance = 1e-9;

/// conv(generators) + ball_radius * B^m. Generators are deduplicated at 1e-12.
class SubdiffSet {
 public:
  SubdiffSet(std::vector<Vector> generators, double ball_radius) : radius_(ball_radius) {
    if (generators.empty()) throw Error(ErrorCode::Precondition, "SubdiffSet needs a generator");
    if (!(ball_radius >= 0.0) || !std::isfinite(ball_radius)) {
      throw Error(ErrorCode::Precondition, "ball radius must be finite and nonnegative");
    }
    const Eigen::Index m = generators.front().size();
    if (m < 1) throw Error(ErrorCode::Precondition, "SubdiffSet dimension must be positive");
    gens_.reserve(generators.size());
    for (auto& g : generators) {
      require_dim(g.size(), m, "SubdiffSet generator");
      if (!g.allFinite()) throw Error(ErrorCode::Precondition, "non-finite generator");
      const bool dup = std::any_of(gens_.begin(), gens_.end(), [&](const Vector& h) {
        return (h - g).norm() <= kDedupTolerance;
      });
      if (!dup) gens_.push_back(std::move(g));
    }
  }

  static SubdiffSet singleton(Vector g) { return SubdiffSet({std::move(g)}, 0.0); }
  static SubdiffSet ball(Eigen::Index m, double r) { return SubdiffSet({Vector::Zero(m)}, r); }

  const std::vector<Vector>& generators() const noexcept { return gens_; }
  double ball_radius() const noexcept { return radius_; }
  Eigen::Index dim() const noexcept { return gens_.front().size(); }

  /// The set shifted by t.
  SubdiffSet translated(const Vector& t) const {
    require_dim(t.size(), dim(), "SubdiffSet::translated");
    std::vector<Vector> g;
    g.reserve(gens_.size());
    for (const auto& v : gens_) g.push_back(v + t);
    return SubdiffSet(std::move(g), radius_);
  }

  double max_generator_norm() const {
    double s = 0.0;
    for (const auto& g : gens_) s = std::max(s, g.norm());
    return s;
  }

 private:
  std::vector<Vector> gens_;
  double radius_;
};

enum class OriginTag { Outside, OnBoundary, Interior };

inline const char* to_string(OriginTag t) {
  switch (t) {
    case OriginTag::Outside: return "outside";
    case OriginTag::OnBoundary: return "on-boundary";
    case OriginTag::Interior: return "interior";
  }
  return "?";
}

struct OriginLocation {
  OriginTag tag = OriginTag::OnBoundary;
  double tolerance = kDefaultOriginTolerance;
};

/// max_{g in G} <g,h> + r*||h||.
inline double support(const SubdiffSet& s, const Vector& h) {
  require_dim(h.size(), s.dim(), "support");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& g : s.generators()) best = std::max(best, g.dot(h));
  return best + s.ball_radius() * h.norm();
}

struct MinNormResult {
  Vector point;         // nearest point of the full set to the origin
  double distance = 0;  // d(0, conv(G) + rB)
  Vector hull_point;    // nearest point of conv(G)
  double hull_distance = 0;
  Vector weights;       // barycentric weights of hull_point over generators()
  double residual = 0;  // max(0, -min_g <p, g - p>)
  int iterations = 0;
};

namespace detail {

inline double certificate_residual(const std::vector<Vector>& gens, const Vector& p) {
  const double pp = p.squaredNorm();
  double worst = 0.0;
  for (const auto& g : gens) worst = std::max(worst, pp - p.dot(g));
  return worst;
}

// Minimizer of ||sum a_i g_i|| over the affine hull of the selected generators.
inline Vector affine_minimizer_weights(const std::vector<Vector>& gens,
                                       const std::vector<std::size_t>& sel) {
  const auto k = static_cast<Eigen::Index>(sel.size());
  Vector alpha(k);
  if (k == 1) {
    alpha[0] = 1.0;
    return alpha;
  }
  const Vector& g0 = gens[sel[0]];
  Matrix d(g0.size(), k - 1);
  for (Eigen::Index j = 1; j < k; ++j) d.col(j - 1) = gens[sel[static_cast<std::size_t>(j)]] - g0;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(d);
  cod.setThreshold(1e-13);
  const Vector beta = cod.solve(-g0);
  alpha[0] = 1.0 - beta.sum();
  alpha.tail(k - 1) = beta;
  return alpha;
}

}  // namespace detail

/// Nearest point to the origin of conv(G) + rB, by Wolfe's active-set
/// minimum-norm-point iteration over generator subsets.
inline MinNormResult min_norm_point(const SubdiffSet& s, int max_iterations = 0) {
  const auto& gens = s.generators();
  const std::size_t n = gens.size();
  const Eigen::Index m = s.dim();
  const double scale = std::max(1.0, s.max_generator_norm());
  const double cert_tol = 1e-10 * scale * scale;
  const double pos_tol = 1e-14;
  if (max_iterations <= 0) max_iterations = 1000 + 50 * static_cast<int>(n);

  std::size_t start = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (gens[i].squaredNorm() < gens[start].squaredNorm()) start = i;
  }
  std::vector<std::size_t> sel{start};
  std::vector<double> lambda{1.0};
  Vector x = gens[start];

  auto combine = [&]() {
    Vector y = Vector::Zero(m);
    for (std::size_t i = 0; i < sel.size(); ++i) y += lambda[i] * gens[sel[i]];
    return y;
  };

  int iter = 0;
  bool converged = false;
  for (; iter < max_iterations; ++iter) {
    std::size_t j = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x.dot(gens[i]);
      if (v < best) {
        best = v;
        j = i;
      }
    }
    if (x.squaredNorm() - best <= cert_tol) {
      converged = true;
      break;
    }
    if (std::find(sel.begin(), sel.end(), j) != sel.end()) break;
    sel.push_back(j);
    lambda.push_back(0.0);

    for (int minor = 0; minor < static_cast<int>(n) + 2; ++minor) {
      const Vector alpha = detail::affine_minimizer_weights(gens, sel);
      if ((alpha.array() > pos_tol).all()) {
        for (std::size_t i = 0; i < sel.size(); ++i) lambda[i] = alpha[static_cast<Eigen::Index>(i)];
        x = combine();
        break;
      }
      double theta = 1.0;
      for (std::size_t i = 0; i < sel.size(); ++i) {
        const double a = alpha[static_cast<Eigen::Index>(i)];
        if (a <= pos_tol && lambda[i] - a > 0.0) theta = std::min(theta, lambda[i] / (lambda[i] - a));
      }
      theta = std::clamp(theta, 0.0, 1.0);
      for (std::size_t i = 0; i < sel.size(); ++i) {
        lambda[i] = theta * alpha[static_cast<Eigen::Index>(i)] + (1.0 - theta) * lambda[i];
      }
      // drop the vanishing weights; always drop at least the smallest
      std::size_t smallest = 0;
      for (std::size_t i = 1; i < sel.size(); ++i) {
        if (lambda[i] < lambda[smallest]) smallest = i;
      }
      std::vector<std::size_t> keep_sel;
      std::vector<double> keep_lambda;
      for (std::size_t i = 0; i < sel.size(); ++i) {
        if (i == smallest || lambda[i] <= pos_tol) continue;
        keep_sel.push_back(sel[i]);
        keep_lambda.push_back(lambda[i]);
      }
      if (keep_sel.empty()) {
        keep_sel.push_back(sel[smallest]);
        keep_lambda.push_back(1.0);
      }
      const double total = std::accumulate(keep_lambda.begin(), keep_lambda.end(), 0.0);
      for (auto& l : keep_lambda) l /= total;
      sel = std::move(keep_sel);
      lambda = std::move(keep_lambda);
      x = combine();
    }
  }

  const double residual = detail::certificate_residual(gens, x);
  if (!converged && residual > 10.0 * cert_tol) {
    throw NonConvergenceError("minimum-norm point did not certify", x, residual);
  }

  MinNormResult r;
  r.hull_point = x;
  r.hull_distance = x.norm();
  r.weights = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < sel.size(); ++i) r.weights[static_cast<Eigen::Index>(sel[i])] = lambda[i];
  r.residual = residual;
  r.iterations = iter;
  const double rad = s.ball_radius();
  r.distance = std::max(r.hull_distance - rad, 0.0);
  r.point = r.hull_distance > rad ? Vector(x * (1.0 - rad / r.hull_distance)) : Vector(Vector::Zero(m));
  return r;
}

/// Signed distance from the origin to the boundary together with the unit
/// direction attaining min_{|h|=1} support(S, h).
struct BoundaryDistance {
  double value = 0.0;
  Vector witness;
  MinNormResult hull;
};

namespace detail {

// Unit normal n of the hyperplane through the selected points (nullity-one case).
inline bool hyperplane_normal(const std::vector<Vector>& pts, const std::vector<std::size_t>& sel,
                              Vector& normal) {
  const Eigen::Index m = pts.front().size();
  if (m == 1) {
    normal = Vector::Ones(1);
    return true;
  }
  Matrix d(static_cast<Eigen::Index>(sel.size()) - 1, m);
  for (std::size_t k = 1; k < sel.size(); ++k) {
    d.row(static_cast<Eigen::Index>(k) - 1) = (pts[sel[k]] - pts[sel[0]]).transpose();
  }
  Eigen::JacobiSVD<Matrix> svd(d, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double top = sv.size() > 0 ? sv[0] : 0.0;
  if (top <= 0.0) return false;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] <= 1e-10 * top) return false;
  }
  normal = svd.matrixV().col(m - 1);
  return true;
}

inline void for_each_combination(std::size_t n, std::size_t k,
                                 const std::function<void(const std::vector<std::size_t>&)>& fn) {
  if (k > n) return;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    fn(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

inline double hull_support(const std::vector<Vector>& gens, const Vector& h) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& g : gens) best = std::max(best, g.dot(h));
  return best;
}

inline Vector canonical_sign(Vector v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12) {
      if (v[i] < 0) v = -v;
      break;
    }
  }
  return v;
}

// min over supporting hyperplanes spanned by m generators of the offset
// <n, g> with outward unit normal n; each such hyperplane is a vertex n/b of
// the polar polytope {y : <g,y> <= 1}.
inline void interior_by_enumeration(const std::vector<Vector>& gens, double tol, double& value,
                                    Vector& witness) {
  const Eigen::Index m = gens.front().size();
  value = std::numeric_limits<double>::infinity();
  for_each_combination(gens.size(), static_cast<std::size_t>(m), [&](const std::vector<std::size_t>& sel) {
    Vector n;
    if (!hyperplane_normal(gens, sel, n)) return;
    for (double sign : {1.0, -1.0}) {
      const Vector nn = sign * n;
      const double b = nn.dot(gens[sel[0]]);
      if (hull_support(gens, nn) <= b + tol && b < value) {
        value = b;
        witness = nn;
      }
    }
  });
}

// Bracketed estimate for m > 4: the upper bound comes from evaluating the
// support function at candidate normals and sampled directions refined by
// coordinate descent; the lower bound is the best boundary distance of a
// simplex spanned by m+1 generators that contains the origin.
inline void interior_by_brackets(const std::vector<Vector>& gens, double bracket_tol, double& value,
                                 Vector& witness) {
  const Eigen::Index m = gens.front().size();
  const std::size_t n = gens.size();
  double upper = std::numeric_limits<double>::infinity();
  double lower = 0.0;
  auto try_direction = [&](const Vector& h) {
    const double v = hull_support(gens, h);
    if (v < upper) {
      upper = v;
      witness = h;
    }
  };

  std::mt19937_64 rng(0);
  const std::size_t k = static_cast<std::size_t>(m) + 1;
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  auto try_simplex = [&](const std::vector<std::size_t>& sel) {
    Matrix a(m + 1, m + 1);
    for (std::size_t j = 0; j < k; ++j) {
      a.col(static_cast<Eigen::Index>(j)).head(m) = gens[sel[j]];
      a(m, static_cast<Eigen::Index>(j)) = 1.0;
    }
    Vector rhs = Vector::Zero(m + 1);
    rhs[m] = 1.0;
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) return;
    const Vector bary = lu.solve(rhs);
    if ((bary.array() <= 0.0).any()) return;
    double inr = std::numeric_limits<double>::infinity();
    for (std::size_t drop = 0; drop < k; ++drop) {
      std::vector<std::size_t> facet;
      for (std::size_t j = 0; j < k; ++j) {
        if (j != drop) facet.push_back(sel[j]);
      }
      Vector nrm;
      if (!hyperplane_normal(gens, facet, nrm)) return;
      if (nrm.dot(gens[sel[drop]]) > nrm.dot(gens[facet[0]])) nrm = -nrm;
      inr = std::min(inr, nrm.dot(gens[facet[0]]));
      try_direction(nrm);
    }
    lower = std::max(lower, inr);
  };
  double combos = 1.0;
  for (std::size_t j = 0; j < k; ++j) combos *= static_cast<double>(n - j) / static_cast<double>(j + 1);
  if (n >= k && combos <= 20000.0) {
    for_each_combination(n, k, try_simplex);
  } else if (n >= k) {
    for (int trial = 0; trial < 20000; ++trial) {
      std::shuffle(pool.begin(), pool.end(), rng);
      std::vector<std::size_t> sel(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(sel.begin(), sel.end());
      try_simplex(sel);
    }
  }
  for (const auto& h : sphere_points(m, 4096, 0)) try_direction(h);
  double step = 0.1;
  for (int it = 0; it < 400 && step > 1e-13; ++it) {
    bool improved = false;
    for (Eigen::Index i = 0; i < m && !improved; ++i) {
      for (double s : {step, -step}) {
        Vector h = witness;
        h[i] += s;
        h.normalize();
        if (hull_support(gens, h) < upper - 1e-15) {
          try_direction(h);
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  if (upper - lower > bracket_tol) throw UndeterminedInradiusError(lower, upper);
  value = upper;
}

}  // namespace detail

/// sigma = -d(0,S) if 0 not in S, +d(0, bdry S) if 0 in int S, 0 on the
/// boundary; equal to min_{|h|=1} support(S,h). Exact enumeration for m <= 4.
inline BoundaryDistance boundary_distance(const SubdiffSet& s, double bracket_tol = 1e-6) {
  const auto& gens = s.generators();
  const Eigen::Index m = s.dim();
  const double scale = std::max(1.0, s.max_generator_norm());
  BoundaryDistance out;
  out.hull = min_norm_point(s);
  double sigma_hull = 0.0;
  if (out.hull.hull_distance > 1e-12 * scale) {
    sigma_hull = -out.hull.hull_distance;
    out.witness = -out.hull.hull_point / out.hull.hull_distance;
  } else {
    Matrix gm(m, static_cast<Eigen::Index>(gens.size()));
    for (std::size_t j = 0; j < gens.size(); ++j) gm.col(static_cast<Eigen::Index>(j)) = gens[j];
    Eigen::JacobiSVD<Matrix> svd(gm, Eigen::ComputeFullU);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
      if (svd.singularValues()[i] > 1e-10 * scale) ++rank;
    }
    if (rank < m) {
      // the hull lies in a proper subspace through 0
      sigma_hull = 0.0;
      out.witness = detail::canonical_sign(svd.matrixU().col(m - 1));
    } else if (m <= 4) {
      detail::interior_by_enumeration(gens, 1e-10 * scale, sigma_hull, out.witness);
      if (!std::isfinite(sigma_hull)) {
        detail::interior_by_brackets(gens, bracket_tol, sigma_hull, out.witness);
      }
      sigma_hull = std::max(sigma_hull, 0.0);
    } else {
      detail::interior_by_brackets(gens, bracket_tol, sigma_hull, out.witness);
      sigma_hull = std::max(sigma_hull, 0.0);
    }
  }
  out.value = s.ball_radius() + sigma_hull;
  return out;
}

inline double signed_boundary_distance(const SubdiffSet& s) { return boundary_distance(s).value; }

/// Outside iff d(0,S) > tol; Interior iff the signed boundary distance > tol.
inline OriginLocation classify_origin(const SubdiffSet& s, double tol = kDefaultOriginTolerance) {
  if (!(tol > 0.0)) throw Error(ErrorCode::Precondition, "classify_origin needs tol > 0");
  OriginLocation loc;
  loc.tolerance = tol;
  if (min_norm_point(s).distance > tol) {
    loc.tag = OriginTag::Outside;
  } else if (signed_boundary_distance(s) > tol) {
    loc.tag = OriginTag::Interior;
  } else {
    loc.tag = OriginTag::OnBoundary;
  }
  return loc;
}

}  // namespace ebstab
