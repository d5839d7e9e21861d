#include <gtest/gtest.h>

#include <numbers>

#include "nfoldsusy/parse.hpp"
#include "nfoldsusy/presets.hpp"
#include "test_util.hpp"

using namespace nfs;

TEST(Presets, QuadraticExample) {
  auto s = presets::make(presets::Quadratic{-0.1, 1, 0}, 4);
  EXPECT_TRUE(simplify(s.E).is_zero());
  EXPECT_TRUE(is_zero(s.W - parse("-0.1*q^2 + q"), s.bindings).passed());
  EXPECT_TRUE(s.poles.empty());
}

TEST(Presets, QuarticBreakingIsQuadratic) {
  auto a = presets::make(presets::QuarticBreaking{0.1}, 3);
  auto b = presets::make(presets::Quadratic{-0.1, 1, 0}, 3);
  for (double x : nfs::testing::sample_points(4, 16)) {
    EXPECT_EQ(evaluate(a.W, x, a.bindings), evaluate(b.W, x, b.bindings));
  }
}

TEST(Presets, CubicExample) {
  auto s = presets::make(presets::Cubic{2, 1, 0, 0}, 3);
  EXPECT_TRUE(is_zero(s.E - parse("1/q"), {}, policy_for(s)).passed());
  EXPECT_EQ(s.poles, std::vector<double>{0.0});
  // W~ = q^3; W carries the (N-1)E/2 shift.
  EXPECT_TRUE(is_zero(tilde_W(s) - parse("q^3"), s.bindings, policy_for(s)).passed());
  EXPECT_TRUE(is_zero(s.W - parse("q^3 + 1/q"), s.bindings, policy_for(s)).passed());
}

TEST(Presets, InvalidParameters) {
  EXPECT_THROW(presets::make(presets::Cubic{3, 1, 0, 0}, 2), std::invalid_argument);
  EXPECT_THROW(presets::make(presets::Periodic{0.0}, 2), std::invalid_argument);
  EXPECT_THROW(presets::make(presets::Quadratic{}, 0), std::invalid_argument);
}

TEST(Presets, CubicVariantsShareHamiltonians) {
  for (int N = 1; N <= 5; ++N) {
    presets::Cubic plus{2, 1, 0.5, 0.25};
    presets::Cubic minus{-2, 1, 0.5, 0.25};
    auto sp = presets::make(plus, N);
    auto sm = presets::make(minus, N);
    auto Hp = build_hamiltonians(sp);
    auto Hm = build_hamiltonians(sm);
    EXPECT_TRUE(is_zero(Hp.plus - Hm.plus, sp.bindings, policy_for(sp)).passed());
    EXPECT_TRUE(is_zero(Hp.minus - Hm.minus, sp.bindings, policy_for(sp)).passed());
    auto variants = presets::supercharge_variants(plus, N);
    ASSERT_EQ(variants.size(), 2u);
    for (const auto& A : variants) EXPECT_TRUE(intertwining_residual(A, Hp, sp).passed()) << N;
    // The factors differ for N > 1, yet the products coincide.
    bool factors_differ = !is_zero(type_a_factor(sp, 0) - type_a_factor(sm, 0), sp.bindings, policy_for(sp)).passed();
    EXPECT_EQ(factors_differ, N > 1) << N;
    EXPECT_TRUE(is_zero(variants[0] - variants[1], sp.bindings, policy_for(sp)).passed()) << N;
  }
}

TEST(Presets, CubicVariantShifts) {
  auto s = presets::make(presets::Cubic{2, 1, 0, 0}, 2);
  auto t = presets::make(presets::Cubic{-2, 1, 0, 0}, 2);
  auto v = presets::supercharge_variants(presets::Cubic{2, 1, 0, 0}, 2);
  SamplingPolicy p = policy_for(s);
  EXPECT_TRUE(is_zero(v[0] - supercharge_from_shifts(s.W, {Expr(0), parse("-1/q")}), s.bindings, p).passed());
  EXPECT_TRUE(is_zero(v[1] - supercharge_from_shifts(t.W, {Expr(0), parse("3/q")}), s.bindings, p).passed());
  EXPECT_THROW(presets::supercharge_variants(presets::Quadratic{}, 2), std::invalid_argument);
}

TEST(Presets, PeriodicReductionOfExponentialForm) {
  // C1 e^{E0 q} + C2 e^{-E0 q} + C3 at E0 = ig, C1 = 1/(2ig), C2 = -1/(2ig), C3 = 0.
  Expr g = Expr::param("g");
  Expr ig = Expr(Scalar::imaginary_unit()) * g;
  Expr complex_form = exp(ig * q()) / (Expr(2) * ig) - exp(-(ig * q())) / (Expr(2) * ig);
  for (int N = 1; N <= 4; ++N) {
    auto s = presets::make(presets::Periodic{1.0}, N);
    EXPECT_TRUE(is_zero(tilde_W(s) - complex_form, s.bindings).passed());
    EXPECT_TRUE(is_zero(s.E - ig, s.bindings).passed());
  }
}

TEST(Presets, PeriodicCoefficientsArePeriodic) {
  for (double gv : {1.0, 0.5}) {
    for (int N = 1; N <= 4; ++N) {
      auto s = presets::make(presets::Periodic{gv}, N);
      auto H = build_hamiltonians(s);
      double period = 2 * std::numbers::pi / gv;
      for (const DiffOp* op : {&H.plus, &H.minus}) {
        for (std::size_t k = 0; k < op->size(); ++k) {
          Expr c = op->coeff(k);
          for (double x : nfs::testing::sample_points(12, 16, -3.0, 3.0)) {
            auto a = evaluate(c, x, s.bindings);
            auto b = evaluate(c, x + period, s.bindings);
            EXPECT_LE(std::abs(a - b), 1e-10 * std::max(1.0, std::abs(a)));
          }
        }
      }
    }
  }
}

TEST(Presets, HamiltoniansAreReal) {
  for (const presets::PresetId& p : std::vector<presets::PresetId>{presets::Periodic{1.0}, presets::Exponential{}, presets::Cubic{-2}}) {
    for (int N = 1; N <= 4; ++N) {
      auto s = presets::make(p, N);
      auto H = build_hamiltonians(s);
      for (double x : nfs::testing::sample_points(13, 8)) {
        EXPECT_LE(std::abs(evaluate(H.plus.coeff(0), x, s.bindings).imag()), 1e-12);
        EXPECT_LE(std::abs(evaluate(H.minus.coeff(0), x, s.bindings).imag()), 1e-12);
      }
      EXPECT_TRUE(H.plus.coeff(1).is_zero());
    }
  }
}

TEST(Presets, Listing) {
  auto l = presets::list();
  ASSERT_EQ(l.size(), 5u);
  EXPECT_EQ(l[0].name, "quadratic");
  EXPECT_NE(l[4].parameters.find("nu in {+2, -2}"), std::string::npos);
  EXPECT_NE(l[3].family.find("real form"), std::string::npos);
}
