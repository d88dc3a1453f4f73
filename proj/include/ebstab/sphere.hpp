#pragma once

// beta(f, x) = min over the unit sphere of the directional derivative f'(x, .)
// computed geometrically from the subdifferential, plus a sampled oracle.

#include <cmath>
#include <cstdint>
#include <limits>

#include "ebstab/convex_expr.hpp"
#include "ebstab/polytope.hpp"
#include "ebstab/types.hpp"

namespace ebstab {

/// |beta| at or below this is reported as exactly zero.
inline constexpr double kBetaZeroThreshold = 1e-9;

struct BetaCertificate {
  double beta = 0.0;
  Vector witness;  // unit direction attaining beta
  OriginLocation origin_location;
  double residual = 0.0;  // |f'(x, witness) - beta|
};

namespace detail {

inline BetaCertificate certify(const SubdiffSet& sd, const ConvexExpr& g, const Vector& x) {
  const BoundaryDistance bd = boundary_distance(sd);
  BetaCertificate c;
  c.beta = bd.value;
  c.origin_location.tolerance = kBetaZeroThreshold;
  if (std::abs(c.beta) <= kBetaZeroThreshold) {
    c.beta = 0.0;
    c.origin_location.tag = OriginTag::OnBoundary;
  } else {
    c.origin_location.tag = c.beta < 0.0 ? OriginTag::Outside : OriginTag::Interior;
  }
  c.witness = bd.witness;
  c.residual = std::abs(directional_derivative(g, x, c.witness) - c.beta);
  return c;
}

}  // namespace detail

/// beta(f, x) with witness direction; the value is the signed boundary
/// distance of the subdifferential at x.
inline BetaCertificate beta(const ConvexExpr& f, const Vector& x) {
  return detail::certify(subdifferential(f, x), f, x);
}

/// beta of g = f + eps <u, . - xbar> at x, from the translated subdifferential.
inline BetaCertificate beta_of_linear_perturbation(const ConvexExpr& f, const Vector& x, const Vector& u,
                                                   double eps, const Vector& xbar) {
  if (!(eps >= 0.0)) throw Error(ErrorCode::Precondition, "perturbation size must be nonnegative");
  if (u.norm() > 1.0 + 1e-12) throw Error(ErrorCode::Precondition, "perturbation direction must have norm <= 1");
  const SubdiffSet sd = subdifferential(f, x).translated(eps * u);
  return detail::certify(sd, linear_perturbation(f, u, eps, xbar), x);
}

/// Sampled upper bound on beta: minimum of f'(x, h) over n low-discrepancy
/// unit directions, then 100 steps of coordinate descent on the sphere.
inline double beta_sampled(const ConvexExpr& f, const Vector& x, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::Precondition, "beta_sampled needs n >= 1");
  require_dim(x.size(), f.dim(), "beta_sampled");
  const Eigen::Index m = f.dim();
  double best = std::numeric_limits<double>::infinity();
  Vector best_h;
  for (const auto& h : sphere_points(m, n, seed)) {
    const double v = directional_derivative(f, x, h);
    if (v < best) {
      best = v;
      best_h = h;
    }
  }
  if (m == 1) return best;
  double step = 0.05;
  for (int it = 0; it < 100; ++it) {
    bool improved = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      for (double s : {step, -step}) {
        Vector h = best_h;
        h[i] += s;
        const double nh = h.norm();
        if (nh == 0.0) continue;
        h /= nh;
        const double v = directional_derivative(f, x, h);
        if (v < best) {
          best = v;
          best_h = h;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

}  // namespace ebstab
