#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ebstab/error.hpp"

namespace ebstab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Point = Eigen::VectorXd;

inline constexpr double kUnitTolerance = 1e-12;

/// A unit vector of R^m.
class Direction {
 public:
  /// Normalizes `v`; throws on a zero or non-finite vector.
  static Direction normalized(const Vector& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error(ErrorCode::Precondition, "cannot normalize a zero or non-finite direction");
    }
    return Direction(v / n);
  }

  /// Wraps an already-unit vector, checking the norm to 1e-12.
  static Direction unit(const Vector& v) {
    if (std::abs(v.norm() - 1.0) > kUnitTolerance) {
      throw Error(ErrorCode::Precondition, "direction is not a unit vector");
    }
    return Direction(v);
  }

  const Vector& vector() const noexcept { return h_; }
  Eigen::Index dim() const noexcept { return h_.size(); }

 private:
  explicit Direction(Vector h) : h_(std::move(h)) {}
  Vector h_;
};

/// Axis-aligned box [lo, hi] in R^m.
struct Box {
  Vector lo;
  Vector hi;

  Eigen::Index dim() const noexcept { return lo.size(); }

  static Box cube(Eigen::Index m, double lo, double hi) {
    return Box{Vector::Constant(m, lo), Vector::Constant(m, hi)};
  }

  bool contains(const Vector& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
};

inline void require_dim(Eigen::Index got, Eigen::Index expected, const char* what) {
  if (got != expected) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": expected dimension " +
                                                  std::to_string(expected) + ", got " +
                                                  std::to_string(got));
  }
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Shortest text that parses back to exactly `v`; "inf" and "-inf" for infinities.
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::string format_vector(const Vector& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) s += ", ";
    s += format_number(v[i]);
  }
  return s + "]";
}

/// Scrambled Halton sequence: radical inverses in the first primes with a
/// seeded Cranley-Patterson rotation. Deterministic for a fixed seed.
class HaltonSequence {
 public:
  HaltonSequence(int dim, std::uint64_t seed) : dim_(dim), shift_(static_cast<std::size_t>(dim)) {
    static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37,
                                      41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
    if (dim < 1 || dim > static_cast<int>(std::size(kPrimes))) {
      throw Error(ErrorCode::Precondition, "Halton dimension out of range");
    }
    bases_.assign(kPrimes, kPrimes + dim);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& s : shift_) s = seed == 0 ? 0.0 : unit(rng);
  }

  /// Point number `index` (index 0 is skipped internally) in [0,1)^dim.
  Vector at(std::uint64_t index) const {
    Vector u(dim_);
    for (int d = 0; d < dim_; ++d) {
      double v = radical_inverse(index + 1, bases_[static_cast<std::size_t>(d)]) +
                 shift_[static_cast<std::size_t>(d)];
      u[d] = v - std::floor(v);
    }
    return u;
  }

 private:
  static double radical_inverse(std::uint64_t n, int base) {
    double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (n > 0) {
      r += f * static_cast<double>(n % static_cast<std::uint64_t>(base));
      n /= static_cast<std::uint64_t>(base);
      f *= inv;
    }
    return r;
  }

  int dim_;
  std::vector<int> bases_;
  std::vector<double> shift_;
};

/// Low-discrepancy points in a box.
inline std::vector<Vector> box_points(const Box& box, std::size_t n, std::uint64_t seed) {
  HaltonSequence seq(static_cast<int>(box.dim()), seed);
  std::vector<Vector> pts;
  pts.reserve(n);
  const Vector width = box.hi - box.lo;
  for (std::size_t k = 0; k < n; ++k) {
    pts.push_back(box.lo + width.cwiseProduct(seq.at(k)));
  }
  return pts;
}

/// Low-discrepancy points on the unit sphere S^{m-1}, via Box-Muller on a
/// Halton sequence of even dimension.
inline std::vector<Vector> sphere_points(Eigen::Index m, std::size_t n, std::uint64_t seed) {
  std::vector<Vector> pts;
  pts.reserve(n);
  if (m == 1) {
    for (std::size_t k = 0; k < n; ++k) pts.push_back(Vector::Constant(1, k % 2 == 0 ? 1.0 : -1.0));
    return pts;
  }
  const int pairs = static_cast<int>((m + 1) / 2);
  HaltonSequence seq(2 * pairs, seed);
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  for (std::size_t k = 0; pts.size() < n; ++k) {
    const Vector u = seq.at(k);
    Vector g(2 * pairs);
    for (int p = 0; p < pairs; ++p) {
      const double u1 = std::max(u[2 * p], 1e-300);
      const double r = std::sqrt(-2.0 * std::log(u1));
      g[2 * p] = r * std::cos(kTwoPi * u[2 * p + 1]);
      g[2 * p + 1] = r * std::sin(kTwoPi * u[2 * p + 1]);
    }
    Vector h = g.head(m);
    const double nrm = h.norm();
    if (nrm < 1e-12) continue;
    pts.push_back(h / nrm);
  }
  return pts;
}

/// Low-discrepancy points in the closed ball B(center, radius).
inline std::vector<Vector> ball_points(const Vector& center, double radius, std::size_t n,
                                       std::uint64_t seed) {
  const Eigen::Index m = center.size();
  HaltonSequence seq(static_cast<int>(m), seed);
  std::vector<Vector> pts;
  pts.reserve(n);
  for (std::uint64_t k = 0; pts.size() < n && k < 64 * n + 64; ++k) {
    Vector c = 2.0 * seq.at(k) - Vector::Ones(m);
    if (c.squaredNorm() <= 1.0) pts.push_back(center + radius * c);
  }
  return pts;
}

}  // namespace ebstab
