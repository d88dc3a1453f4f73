#include <cmath>

#include <gtest/gtest.h>

#include "ebstab/sphere.hpp"
#include "support/test_support.hpp"

namespace ebstab {
namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

ConvexExpr exp_minus_one() { return ConvexExpr::exp1d(1, 0, -1.0); }

ConvexExpr linf_2d() { return ConvexExpr::max({ConvexExpr::abs_coord(2, 0), ConvexExpr::abs_coord(2, 1)}); }

TEST(Beta, ExponentialAtZero) {
  const auto c = beta(exp_minus_one(), v1(0.0));
  EXPECT_EQ(c.beta, -1.0);
  EXPECT_EQ(c.witness[0], -1.0);
  EXPECT_EQ(c.origin_location.tag, OriginTag::Outside);
  EXPECT_LE(c.residual, 1e-8);
}

TEST(Beta, MaxOfAbsoluteValuesAtOrigin) {
  const auto c = beta(linf_2d(), v2(0, 0));
  EXPECT_NEAR(c.beta, std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(std::abs(c.witness[0]), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(std::abs(c.witness[1]), std::sqrt(0.5), 1e-12);
  EXPECT_EQ(c.origin_location.tag, OriginTag::Interior);
  EXPECT_LE(c.residual, 1e-8);
}

TEST(Beta, ConstantIsZero) {
  const auto c = beta(ConvexExpr::constant(3, 0.0), Vector::Constant(3, 0.7));
  EXPECT_EQ(c.beta, 0.0);
  EXPECT_EQ(c.origin_location.tag, OriginTag::OnBoundary);
  EXPECT_NEAR(c.witness.norm(), 1.0, 1e-12);
}

TEST(BetaSampled, MaxOfAbsoluteValues) {
  const double v = beta_sampled(linf_2d(), v2(0, 0), 10000, 0);
  EXPECT_GE(v, std::sqrt(0.5) - 1e-15);
  EXPECT_LE(v, std::sqrt(0.5) + 1e-4);
}

TEST(BetaSampled, AffineAndConstant) {
  Vector a(3);
  a << 1.0, -2.0, 0.5;
  EXPECT_NEAR(beta_sampled(ConvexExpr::affine(a, 3.0), Vector::Zero(3), 10000, 1), -a.norm(), 1e-6);
  EXPECT_EQ(beta_sampled(ConvexExpr::constant(2, 1.0), v2(1, 1), 10, 1), 0.0);
  EXPECT_THROW(beta_sampled(linf_2d(), v2(0, 0), 0, 1), Error);
}

TEST(BetaOfLinearPerturbation, ZeroFunction) {
  const auto c = beta_of_linear_perturbation(ConvexExpr::constant(1, 0.0), v1(0.0), v1(1.0), 0.1, v1(0.0));
  EXPECT_NEAR(c.beta, -0.1, 1e-15);
}

TEST(BetaOfLinearPerturbation, ExponentialSignConvention) {
  // g = e^x - 1 + eps u x has g'(0) = 1 + eps u
  for (double eps : {0.1, 0.01}) {
    EXPECT_NEAR(beta_of_linear_perturbation(exp_minus_one(), v1(0.0), v1(1.0), eps, v1(0.0)).beta, -(1.0 + eps),
                1e-15);
    EXPECT_NEAR(beta_of_linear_perturbation(exp_minus_one(), v1(0.0), v1(-1.0), eps, v1(0.0)).beta, -(1.0 - eps),
                1e-15);
  }
}

TEST(BetaOfLinearPerturbation, InteriorCaseStaysPositive) {
  testing::ExprGenerator gen(5);
  for (int rep = 0; rep < 50; ++rep) {
    const Vector u = gen.uniform(0.0, 1.0) * gen.vec(2).normalized();
    const double eps = gen.uniform(0.0, 0.7);
    const auto c = beta_of_linear_perturbation(linf_2d(), v2(0, 0), u, eps, v2(0, 0));
    EXPECT_GE(c.beta, std::sqrt(0.5) - eps - 1e-12);
    EXPECT_GT(c.beta, 0.0);
  }
}

TEST(BetaOfLinearPerturbation, RejectsBadInputs) {
  EXPECT_THROW(beta_of_linear_perturbation(exp_minus_one(), v1(0), v1(2.0), 0.1, v1(0)), Error);
  EXPECT_THROW(beta_of_linear_perturbation(exp_minus_one(), v1(0), v1(1.0), -0.1, v1(0)), Error);
}

// -- randomized invariants ----------------------------------------------------

TEST(SphereProperties, NegativeBetaIsMinusTheMinNormDistance) {
  testing::ExprGenerator gen(101);
  int checked = 0;
  while (checked < 200) {
    const auto m = static_cast<Eigen::Index>(gen.integer(1, 4));
    const auto c = gen.representable_case(m);
    const auto cert = beta(c.f, c.x);
    if (cert.beta >= 0.0) continue;
    ++checked;
    EXPECT_NEAR(-cert.beta, testing::set_distance_by_enumeration(subdifferential(c.f, c.x)), 1e-8);
  }
}

TEST(SphereProperties, SampledOracleBracketsBeta) {
  testing::ExprGenerator gen(102);
  for (int rep = 0; rep < 60; ++rep) {
    const auto m = static_cast<Eigen::Index>(gen.integer(1, 3));
    const auto c = gen.representable_case(m);
    const double b = beta(c.f, c.x).beta;
    const double sampled = beta_sampled(c.f, c.x, 10000, static_cast<std::uint64_t>(rep));
    EXPECT_LE(b, sampled + 1e-9) << "case " << rep;
    EXPECT_LE(sampled, b + 1e-3) << "case " << rep;
  }
}

TEST(SphereProperties, WitnessAttainsBeta) {
  testing::ExprGenerator gen(103);
  for (int rep = 0; rep < 300; ++rep) {
    const auto m = static_cast<Eigen::Index>(gen.integer(1, 4));
    const auto c = gen.representable_case(m);
    const auto cert = beta(c.f, c.x);
    EXPECT_NEAR(cert.witness.norm(), 1.0, 1e-12);
    EXPECT_LE(cert.residual, 1e-8);
    EXPECT_NEAR(directional_derivative(c.f, c.x, cert.witness), cert.beta, 1e-8);
  }
}

TEST(SphereProperties, PerturbationShiftIsBounded) {
  testing::ExprGenerator gen(104);
  for (int rep = 0; rep < 300; ++rep) {
    const auto m = static_cast<Eigen::Index>(gen.integer(1, 4));
    const auto c = gen.representable_case(m);
    const Vector u = gen.uniform(0.0, 1.0) * gen.vec(m).normalized();
    const double eps = gen.uniform(0.0, 0.5);
    const double before = beta(c.f, c.x).beta;
    const double after = beta_of_linear_perturbation(c.f, c.x, u, eps, gen.vec(m)).beta;
    // the zero snap can move either value by up to the threshold
    EXPECT_LE(std::abs(after - before), eps * u.norm() + 2 * kBetaZeroThreshold);
  }
}

TEST(SphereProperties, PositiveScalingEquivariance) {
  testing::ExprGenerator gen(105);
  for (int rep = 0; rep < 200; ++rep) {
    const auto m = static_cast<Eigen::Index>(gen.integer(1, 4));
    const auto c = gen.representable_case(m);
    const double lambda = gen.uniform(0.1, 5.0);
    const ConvexExpr scaled = ConvexExpr::sum({{lambda, c.f}});
    const auto base = beta(c.f, c.x);
    const auto sc = beta(scaled, c.x);
    EXPECT_NEAR(sc.beta, lambda * base.beta, 1e-9 * (1.0 + lambda));
    EXPECT_NEAR(directional_derivative(scaled, c.x, base.witness), sc.beta, 1e-8 * (1.0 + lambda));
  }
}

TEST(SphereProperties, NonzeroBetaIffOriginOffTheBoundary) {
  testing::ExprGenerator gen(106);
  for (int rep = 0; rep < 300; ++rep) {
    const auto m = static_cast<Eigen::Index>(gen.integer(1, 4));
    const auto c = gen.representable_case(m);
    const auto cert = beta(c.f, c.x);
    const auto tag = classify_origin(subdifferential(c.f, c.x), kBetaZeroThreshold).tag;
    EXPECT_EQ(std::abs(cert.beta) > kBetaZeroThreshold, tag != OriginTag::OnBoundary) << "case " << rep;
    EXPECT_EQ(cert.origin_location.tag, tag);
  }
}

}  // namespace
}  // namespace ebstab
