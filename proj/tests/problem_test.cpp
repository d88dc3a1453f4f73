#include <gtest/gtest.h>

#include <cmath>

#include "ebstab/problem.hpp"
#include "support/test_support.hpp"

namespace ebstab {
namespace {

ParseError parse_error(const std::string& text) {
  try {
    parse_problem(text);
  } catch (const ParseError& e) {
    return e;
  }
  ADD_FAILURE() << "no parse error for:\n" << text;
  return ParseError(ErrorCode::Precondition, 0, 0, "");
}

TEST(ParseProblem, ExpOneDimensional) {
  const ProblemFile p = parse_problem("dim 1\nexpr (exp1d 0 -1)\n");
  EXPECT_EQ(p.dim, 1);
  ASSERT_TRUE(p.expr.has_value());
  EXPECT_EQ(*p.expr, ConvexExpr::exp1d(1, 0, -1.0));
  Vector x(1);
  x << 0.0;
  EXPECT_DOUBLE_EQ(eval(p.function(), x), 0.0);
  EXPECT_EQ(parse_problem(serialize_problem(p)), p);
}

TEST(ParseProblem, FiniteFamilyWithBareItems) {
  const ProblemFile p = parse_problem("dim 2\nfamily finite [abs 0, abs 1]\n");
  ASSERT_TRUE(p.family.has_value());
  ASSERT_EQ(p.family->members().size(), 2u);
  EXPECT_EQ(p.family->members()[0], ConvexExpr::abs_coord(2, 0));
  EXPECT_EQ(p.family->members()[1], ConvexExpr::abs_coord(2, 1));
  EXPECT_EQ(parse_problem(serialize_problem(p)), p);
}

TEST(ParseProblem, NegativeSumWeightIsConvexityRule) {
  const ParseError e = parse_error("dim 2\nexpr (sum 1 (affine [1,0] 0) -1 (abs 1))\n");
  EXPECT_EQ(e.code(), ErrorCode::ConvexityRule);
  EXPECT_EQ(e.line(), 2);
  EXPECT_EQ(e.column(), 7);
  EXPECT_NE(std::string(e.what()).find("2:7:"), std::string::npos);
}

TEST(ParseProblem, SyntaxErrorsCarryPosition) {
  auto e = parse_error("dim 2\n\nexpr (abs 0\n");
  EXPECT_EQ(e.code(), ErrorCode::Syntax);
  EXPECT_EQ(e.line(), 4);

  e = parse_error("dim 1\nexpr (frobnicate 0)\n");
  EXPECT_EQ(e.code(), ErrorCode::Syntax);
  EXPECT_EQ(e.line(), 2);
  EXPECT_EQ(e.column(), 7);

  e = parse_error("dim 1\nwhatever 3\n");
  EXPECT_EQ(e.line(), 2);
  EXPECT_EQ(e.column(), 1);

  e = parse_error("dim 1\nexpr (const 1) extra\n");
  EXPECT_EQ(e.column(), 16);

  e = parse_error("dim 1\nexpr (const 1x)\n");
  EXPECT_EQ(e.column(), 13);

  e = parse_error("expr (const 1)\n");
  EXPECT_EQ(e.line(), 1);
}

TEST(ParseProblem, DimensionMismatch) {
  EXPECT_EQ(parse_error("dim 2\nexpr (affine [1, 2, 3] 0)\n").code(), ErrorCode::DimensionMismatch);
  EXPECT_EQ(parse_error("dim 2\nexpr (abs 2)\n").code(), ErrorCode::DimensionMismatch);
  EXPECT_EQ(parse_error("dim 2\nexpr (norm)\npoint [1]\n").code(), ErrorCode::DimensionMismatch);
  EXPECT_EQ(parse_error("dim 3\nexpr (norm)\nbox -1..1 -1..1\n").code(), ErrorCode::DimensionMismatch);
  EXPECT_EQ(parse_error("dim 2\nexpr (compose [[1, 0]] [0, 0] (abs 0))\n").code(), ErrorCode::DimensionMismatch);
}

TEST(ParseProblem, InfeasibleSlaterPoint) {
  const ParseError e = parse_error("dim 1\nexpr (exp1d 0 -1)\nslater [1]\n");
  EXPECT_EQ(e.code(), ErrorCode::InfeasibleSlater);
  EXPECT_EQ(e.line(), 3);
  EXPECT_NO_THROW(parse_problem("dim 1\nexpr (exp1d 0 -1)\nslater [-1]\n"));
}

TEST(ParseProblem, OptionalFieldsAndComments) {
  const ProblemFile p = parse_problem(
      "# unit ball\n"
      "name unit ball\n"
      "dim 2\n"
      "expr (sum 1 (norm)\n"
      "          1 (const -1))   # continues while parentheses are open\n"
      "slater [0, 0]\n"
      "point [1 0]\n"
      "box -2..2\n"
      "tau 1\n");
  EXPECT_EQ(p.name, "unit ball");
  ASSERT_TRUE(p.box && p.point && p.slater && p.tau);
  EXPECT_EQ(p.box->lo, Vector::Constant(2, -2.0));
  EXPECT_EQ(p.box->hi, Vector::Constant(2, 2.0));
  EXPECT_EQ((*p.point)[0], 1.0);
  EXPECT_EQ(*p.tau, 1.0);
  EXPECT_EQ(parse_problem(serialize_problem(p)), p);
}

TEST(ParseProblem, ComposeUsesInnerDimension) {
  const ProblemFile p = parse_problem("dim 3\nexpr (compose [[1, 0, 0], [0, 1, 0]] [0, -1] (norm))\n");
  EXPECT_EQ(p.expr->inner().dim(), 2);
  Vector x(3);
  x << 3.0, 5.0, 7.0;
  EXPECT_DOUBLE_EQ(eval(p.function(), x), 5.0);
  EXPECT_EQ(parse_problem(serialize_problem(p)), p);
}

TEST(ParseProblem, IntervalFamilyTemplate) {
  const ProblemFile p = parse_problem(
      "dim 2\n"
      "family interval 0 (* 0.5 pi) 17 (affine [(cos t), (sin t)] -1)\n"
      "box -2..2 -2..2\n");
  ASSERT_TRUE(p.family.has_value());
  const IndexedFamily& fam = *p.family;
  EXPECT_EQ(fam.kind(), IndexKind::Interval);
  EXPECT_EQ(fam.grid_count(), 17u);
  EXPECT_DOUBLE_EQ(fam.upper(), std::acos(-1.0) / 2.0);
  const ConvexExpr m = fam.member(0.3);
  EXPECT_DOUBLE_EQ(m.coefficients()[0], std::cos(0.3));
  EXPECT_DOUBLE_EQ(m.coefficients()[1], std::sin(0.3));
  EXPECT_DOUBLE_EQ(m.offset(), -1.0);
  EXPECT_EQ(parse_problem(serialize_problem(p)), p);

  EXPECT_EQ(parse_error("dim 1\nexpr (affine [t] 0)\n").code(), ErrorCode::Syntax);
  EXPECT_EQ(parse_error("dim 2\nfamily interval 0 1 9 (affine [t] 0)\n").code(), ErrorCode::DimensionMismatch);
}

TEST(ParseProblem, SerializedPerturbedIntervalFamilyParses) {
  const ProblemFile p = parse_problem("dim 2\nfamily interval 0 1 9 (affine [(cos t), (sin t)] -1)\n");
  Vector u(2);
  u << 0.6, -0.8;
  ProblemFile q = p;
  q.family = p.family->perturbed(u, 0.1, Vector::Zero(2));
  const ProblemFile r = parse_problem(serialize_problem(q));
  EXPECT_EQ(r, q);
  Vector x(2);
  x << 0.4, -1.3;
  EXPECT_NEAR(eval(r.function(), x), eval(q.function(), x), 1e-14);
}

// Round-trip over randomly generated expressions, with random decimal data.
TEST(ParseProblemProperty, RoundTripRandomExpressions) {
  testing::ExprGenerator gen(31);
  for (int k = 0; k < 200; ++k) {
    const auto m = static_cast<Eigen::Index>(gen.integer(1, 4));
    const Vector x = gen.point(m);
    ProblemFile p;
    p.name = "case " + std::to_string(k);
    p.dim = m;
    if (gen.coin(0.3)) {
      std::vector<ConvexExpr> members;
      const int n = gen.integer(1, 4);
      for (int j = 0; j < n; ++j) members.push_back(gen.expr(m, 2, x));
      p.family = IndexedFamily::finite(std::move(members));
    } else {
      p.expr = gen.expr(m, 3, x);
    }
    if (gen.coin()) p.point = x;
    if (gen.coin()) p.box = Box{gen.vec(m, -3.0, -1.0), gen.vec(m, 1.0, 3.0)};
    if (gen.coin()) p.tau = gen.uniform(0.1, 10.0);
    const std::string text = serialize_problem(p);
    const ProblemFile q = parse_problem(text);
    ASSERT_EQ(q, p) << text;
    EXPECT_EQ(serialize_problem(q), text);
  }
}

}  // namespace
}  // namespace ebstab
