#include <gtest/gtest.h>

#include <random>

#include "nfoldsusy/parse.hpp"
#include "nfoldsusy/rational.hpp"
#include "nfoldsusy/zero_test.hpp"
#include "test_util.hpp"

using namespace nfs;

namespace {

Expr e_condition(const Expr& E) {
  Expr d1 = differentiate(E);
  Expr d2 = differentiate(d1);
  Expr d3 = differentiate(d2);
  return d3 + E * d2 + Expr(2) * d1 * d1 - Expr(2) * E * E * d1;
}

// Random polynomial in q and a with small integer coefficients.
Expr random_poly(std::mt19937_64& rng, int terms) {
  Expr acc(0);
  for (int t = 0; t < terms; ++t) {
    int c = static_cast<int>(rng() % 7) - 3;
    int dq = static_cast<int>(rng() % 4);
    int da = static_cast<int>(rng() % 2);
    acc = acc + Expr(c) * pow(q(), dq) * pow(Expr::param("a"), da);
  }
  return acc + Expr(1);
}

}  // namespace

TEST(Canonicalize, CancelsCommonFactor) {
  auto rf = canonicalize_rational(parse("(q^2-1)/(q-1) - (q+1)"));
  ASSERT_TRUE(rf.has_value());
  EXPECT_TRUE(rf->is_zero());
  EXPECT_TRUE(rf->den.is_one());
}

TEST(Canonicalize, TranscendentalIsNotRational) {
  EXPECT_FALSE(canonicalize_rational(parse("exp(q)")).has_value());
  EXPECT_FALSE(canonicalize_rational(parse("q + sin(a)")).has_value());
}

TEST(Canonicalize, ECondition) {
  EXPECT_TRUE(canonicalize_rational(e_condition(parse("1/q")))->is_zero());
  EXPECT_TRUE(canonicalize_rational(e_condition(parse("-3/q")))->is_zero());
  auto bad = canonicalize_rational(e_condition(parse("2/q")));
  ASSERT_TRUE(bad.has_value());
  EXPECT_FALSE(bad->is_zero());
  // Direct evaluation of the residual, for E = c/q: c(c-1)(c+3)... spot check at q = 1.
  EXPECT_NEAR(evaluate(bad->to_expr(), 1.0).real(), evaluate(e_condition(parse("2/q")), 1.0).real(), 1e-12);
}

TEST(Canonicalize, LeadingCoefficientNormalized) {
  auto rf = canonicalize_rational(parse("(3*q + 6)/(6*q^2 + 3*a)"));
  ASSERT_TRUE(rf.has_value());
  EXPECT_TRUE(rf->den.lead_coeff().is_one());
  EXPECT_EQ(rf->vars, (std::vector<std::string>{"q", "a"}));
}

TEST(Canonicalize, EquivalentFormsAgree) {
  const char* pairs[][2] = {
      {"1/(q-1) - 1/(q+1)", "2/(q^2-1)"},
      {"(q^3 - 1)/(q^2 + q + 1)", "q - 1"},
      {"a/q + 1/q^2", "(a*q + 1)/q^2"},
      {"(2i*q + 2)/(1i*q + 1)", "2"},
      {"(q^2 + 2*q + 1)/(q^2 - 1)", "(q + 1)/(q - 1)"},
  };
  for (const auto& p : pairs) {
    auto x = canonicalize_rational(parse(p[0]));
    auto y = canonicalize_rational(parse(p[1]));
    ASSERT_TRUE(x && y);
    EXPECT_EQ(x->to_string(), y->to_string()) << p[0] << " vs " << p[1];
  }
}

TEST(Canonicalize, RandomMultiplyDivide) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    Expr p = random_poly(rng, 4);
    Expr r = random_poly(rng, 3);
    if (simplify(r).is_zero()) continue;
    auto rf = canonicalize_rational(p * r / r - p);
    ASSERT_TRUE(rf.has_value());
    EXPECT_TRUE(rf->is_zero()) << to_string(p) << " ; " << to_string(r);
  }
}

TEST(Canonicalize, ZeroDivisorThrows) {
  EXPECT_THROW(canonicalize_rational(parse("1/(q - q)")), ArithmeticError);
}

TEST(IsZero, ExactIdentity) {
  auto v = is_zero(parse("(q+1)^2 - q^2 - 2*q - 1"));
  EXPECT_EQ(v.kind, ZeroKind::ProvenZero);
  EXPECT_EQ(v.method, "exact");
}

TEST(IsZero, Pythagorean) {
  SamplingPolicy policy;
  policy.samples = 64;
  auto v = is_zero(parse("sin(q)^2 + cos(q)^2 - 1"), {}, policy);
  EXPECT_EQ(v.kind, ZeroKind::NumericallyZero);
  EXPECT_EQ(v.samples_used, 64);
  EXPECT_LE(v.max_abs, 1e-12);
}

TEST(IsZero, NonZeroWitness) {
  auto v = is_zero(parse("q^3"));
  EXPECT_EQ(v.kind, ZeroKind::NonZero);
  ASSERT_TRUE(v.witness_q.has_value());
  EXPECT_GT(std::abs(v.witness_value), 1e-9);
  EXPECT_NEAR(std::abs(v.witness_value), std::pow(*v.witness_q, 3), 1e-12);
  EXPECT_GE(*v.witness_q, 0.3);
  EXPECT_LE(*v.witness_q, 2.1);
  EXPECT_TRUE(v.exact_nonzero);
}

TEST(IsZero, BoundParametersProveExactly) {
  Bindings b{{"a", Scalar(2)}};
  auto v = is_zero(parse("a*q - 2*q"), b);
  EXPECT_EQ(v.kind, ZeroKind::ProvenZero);
  EXPECT_EQ(v.method, "exact-bound");
}

TEST(IsZero, DeterministicWithSeed) {
  SamplingPolicy p;
  p.seed = 99;
  auto a = is_zero(parse("exp(q) - 1 - q"), {}, p);
  auto b = is_zero(parse("exp(q) - 1 - q"), {}, p);
  EXPECT_EQ(a.witness_q, b.witness_q);
  EXPECT_EQ(a.max_abs, b.max_abs);
}

TEST(IsZero, AvoidsDeclaredPoles) {
  SamplingPolicy p;
  p.intervals = {{-1.0, 1.0}};
  p.poles = {0.0};
  p.pole_guard = 0.05;
  auto v = is_zero(parse("exp(1/q)*q - q*exp(1/q)"), {}, p);
  EXPECT_TRUE(v.passed());
}

TEST(IsZero, AllPolesIsAnError) {
  SamplingPolicy p;
  p.intervals = {{-0.001, 0.001}};
  p.poles = {0.0};
  p.pole_guard = 0.01;
  EXPECT_THROW(is_zero(parse("exp(q)/q - 1"), {}, p), SamplingError);
}

TEST(IsZero, ExactZeroImpliesSamplingZero) {
  std::mt19937_64 rng(5150);
  for (int trial = 0; trial < 40; ++trial) {
    Expr p = random_poly(rng, 4);
    Expr r = random_poly(rng, 3);
    if (simplify(r).is_zero()) continue;
    Expr e = p * r / r - p;
    ASSERT_EQ(is_zero(e).kind, ZeroKind::ProvenZero);
    Bindings b{{"a", Scalar(Rational(7, 5))}};
    SamplingPolicy policy;
    auto sampled = nfs::detail::sample_verdict(e, b, policy);
    EXPECT_TRUE(sampled.passed()) << to_string(e);
  }
}

TEST(IsZero, UnboundParameterPropagates) {
  EXPECT_THROW(is_zero(parse("exp(a*q) - 1")), EvalError);
}
