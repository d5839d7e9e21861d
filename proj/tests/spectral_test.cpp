#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "nfoldsusy/parse.hpp"
#include "nfoldsusy/presets.hpp"
#include "nfoldsusy/spectral.hpp"

using namespace nfs;

namespace {

FamilySpec custom(int N, const char* W, const char* E = "0") {
  FamilySpec s;
  s.N = N;
  s.W = parse(W);
  s.E = parse(E);
  s.label = W;
  return s;
}

GridProblem box(double a, double b, int n) {
  GridProblem g;
  g.a = a;
  g.b = b;
  g.n = n;
  return g;
}

// Dense cyclic Jacobi eigenvalues, used as an independent oracle.
std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> A) {
  const std::size_t n = A.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += A[i][j] * A[i][j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(A[p][q]) < 1e-300) continue;
        double theta = (A[q][q] - A[p][p]) / (2 * A[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = A[k][p], akq = A[k][q];
          A[k][p] = c * akp - s * akq;
          A[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = A[p][k], aqk = A[q][k];
          A[p][k] = c * apk - s * aqk;
          A[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = A[i][i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace

TEST(Discretize, FreeParticleOnUnitSpacing) {
  GridProblem g = box(0, 4, 3);
  SymTridiag T = discretize(g);
  ASSERT_EQ(T.diag.size(), 3u);
  ASSERT_EQ(T.off.size(), 2u);
  for (double d : T.diag) EXPECT_DOUBLE_EQ(d, 1.0);
  for (double o : T.off) EXPECT_DOUBLE_EQ(o, -0.5);
}

TEST(Discretize, HarmonicGroundState) {
  GridProblem g = box(-10, 10, 2000);
  g.potential = parse("q^2/2");
  auto e = eigen_low(discretize(g), 4);
  EXPECT_NEAR(e.values[0], 0.5, 1e-4);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(e.values[static_cast<std::size_t>(k)], 0.5 + k, 1e-3);
}

TEST(Discretize, PoleInsideIntervalIsRejected) {
  FamilySpec s = presets::make(presets::Cubic{}, 2);
  HamiltonianPair H = build_hamiltonians(s);
  GridProblem g = box(-1, 1, 200);
  g.bindings = s.bindings;
  EXPECT_THROW(discretize(H.minus, g, s.poles), SpectralError);
  EXPECT_THROW(pairing_check(s, g, 2), SpectralError);
  // Undeclared poles are still caught when a grid point lands on them.
  GridProblem hit = box(-1, 1, 19);
  hit.potential = parse("1/q");
  EXPECT_THROW(discretize(hit), SpectralError);
}

TEST(Discretize, RejectsFirstOrderTermsAndComplexPotentials) {
  GridProblem g = box(-1, 1, 32);
  EXPECT_THROW(discretize(DiffOp::d(2).scaled(Scalar(Rational(-1, 2))) + DiffOp::mul(q()) * DiffOp::d(1), g), SpectralError);
  EXPECT_THROW(discretize(DiffOp::d(2), g), SpectralError);
  g.potential = parse("1i*q");
  EXPECT_THROW(discretize(g), SpectralError);
  EXPECT_THROW(validate(box(1, 0, 32)), SpectralError);
  EXPECT_THROW(validate(box(0, 1, 15)), SpectralError);
}

TEST(EigenLow, DiagonalMatrix) {
  SymTridiag T{{1, 2, 3}, {0, 0}};
  auto e = eigen_low(T, 2);
  ASSERT_EQ(e.values.size(), 2u);
  EXPECT_NEAR(e.values[0], 1.0, 1e-14);
  EXPECT_NEAR(e.values[1], 2.0, 1e-14);
  EXPECT_NEAR(std::abs(e.vectors[0][0]), 1.0, 1e-12);
  EXPECT_THROW(eigen_low(T, 4), std::invalid_argument);
}

TEST(EigenLow, AgreesWithDenseJacobiOnRandomMatrices) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 5 + static_cast<std::size_t>(trial);
    SymTridiag T;
    std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      T.diag.push_back(u(rng));
      A[i][i] = T.diag.back();
      if (i + 1 < n) {
        T.off.push_back(trial % 5 == 0 && i % 3 == 0 ? 0.0 : u(rng));
        A[i][i + 1] = A[i + 1][i] = T.off.back();
      }
    }
    auto ref = jacobi_eigenvalues(A);
    auto e = eigen_low(T, n);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(e.values[k], ref[k], 1e-10) << "trial " << trial << " k " << k;
      // T v = lambda v and unit norm.
      const auto& v = e.vectors[k];
      double res = 0, nv = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double tv = T.diag[i] * v[i] + (i > 0 ? T.off[i - 1] * v[i - 1] : 0) + (i + 1 < n ? T.off[i] * v[i + 1] : 0);
        res += (tv - e.values[k] * v[i]) * (tv - e.values[k] * v[i]);
        nv += v[i] * v[i];
      }
      EXPECT_LT(std::sqrt(res), 1e-8);
      EXPECT_NEAR(nv, 1.0, 1e-12);
    }
  }
}

TEST(EigenLow, SusyLadderOfLinearPrepotential) {
  FamilySpec s = custom(1, "q");
  HamiltonianPair H = build_hamiltonians(s);
  GridProblem g = box(-10, 10, 2000);
  auto em = eigen_low(discretize(H.minus, g), 3);
  auto ep = eigen_low(discretize(H.plus, g), 3);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(em.values[static_cast<std::size_t>(k)], k, 1e-3);
    EXPECT_NEAR(ep.values[static_cast<std::size_t>(k)], k + 1, 1e-3);
  }
}

TEST(Pairing, LinearPrepotentialLadder) {
  auto p = pairing_check(custom(1, "q"), box(-10, 10, 2000), 5);
  ASSERT_EQ(p.rows.size(), 5u);
  EXPECT_TRUE(p.rows[0].kernel);
  EXPECT_EQ(p.kernel_flags(), 1);
  for (int l = 1; l < 5; ++l) {
    EXPECT_FALSE(p.rows[static_cast<std::size_t>(l)].kernel);
    EXPECT_LT(p.rows[static_cast<std::size_t>(l)].residual, 1e-3);
  }
  EXPECT_TRUE(p.passed());
}

TEST(Pairing, QuarticBreakingTwoFold) {
  FamilySpec s = presets::make(presets::QuarticBreaking{0.1}, 2);
  auto p = pairing_check(s, box(-8, 12, 3000), 8);
  int seen = 0;
  for (const auto& r : p.rows) {
    if (r.kernel) continue;
    EXPECT_LT(r.residual, 5e-3) << "level " << r.level;
    ++seen;
  }
  EXPECT_GE(seen, 5);
}

TEST(Pairing, NegativeControlHasOrderOneResiduals) {
  auto p = pairing_check(custom(2, "q^3+0.01*q^4"), box(-10, 10, 2000), 4);
  double worst = 0;
  for (const auto& r : p.rows) {
    EXPECT_FALSE(r.kernel);
    worst = std::max(worst, r.residual);
  }
  EXPECT_GT(worst, 0.1);
  EXPECT_FALSE(p.passed());
}

TEST(Pairing, ReportInvariants) {
  for (int N : {1, 2, 3}) {
    auto p = pairing_check(presets::make(presets::Quadratic{0, 1, 0.3}, N), box(-10, 10, 1500), 6);
    for (const auto& r : p.rows) {
      EXPECT_GE(r.residual, 0.0);
      EXPECT_EQ(r.kernel, r.image_ratio < p.kernel_threshold);
    }
    EXPECT_DOUBLE_EQ(p.kernel_threshold, 1e-3 * std::ldexp(1.0, N));
    EXPECT_DOUBLE_EQ(p.fail_threshold, 1e-2 * std::ldexp(1.0, N));
  }
}

TEST(MotherSpectral, OneFoldIsTheHamiltonian) {
  auto m = mother_spectral_check(custom(1, "q"), box(-10, 10, 2000), 5);
  for (const auto& r : m.rows) {
    EXPECT_LT(r.difference, 1e-3) << "level " << r.level;
    EXPECT_NEAR(r.polynomial, r.energy, 1e-12);
  }
  EXPECT_NEAR(m.rows[0].rayleigh, 0.0, 1e-6);
  EXPECT_NEAR(m.rows[0].polynomial, 0.0, 1e-4);
}

TEST(MotherSpectral, TwoFoldQuadraticMother) {
  auto m = mother_spectral_check(custom(2, "q"), box(-10, 10, 2000), 4);
  for (const auto& r : m.rows) {
    EXPECT_NEAR(r.polynomial, 2 * r.energy * r.energy - 0.5, 1e-9);
    EXPECT_LT(std::abs(r.rayleigh - (2 * r.energy * r.energy - 0.5)), 5e-3) << "level " << r.level;
  }
  EXPECT_TRUE(m.passed());
}

TEST(Normalizability, GaussianKernel) {
  FamilySpec s = custom(1, "q");
  auto k = kernel_basis(s);
  auto r = normalizability_probe(s, k[0], box(-10, 10, 2000));
  EXPECT_TRUE(r.normalizable);
  EXPECT_NEAR(r.windows[0].norm2, std::sqrt(M_PI), 1e-6);
}

TEST(Normalizability, QuarticBreakingKernelDiverges) {
  FamilySpec s = presets::make(presets::QuarticBreaking{0.1}, 1);
  auto k = kernel_basis(s);
  ASSERT_TRUE(k[0].symbolic);
  auto r = normalizability_probe(s, k[0], box(-10, 10, 2000));
  EXPECT_FALSE(r.normalizable);
  ASSERT_EQ(r.windows.size(), 3u);
  // The tail only shows once the window passes the barrier.
  EXPECT_LT(r.windows[0].tail_ratio, 1.0);
  EXPECT_GT(r.windows[1].tail_ratio, 1.0);
  EXPECT_GT(r.windows[2].tail_ratio, 1.0);
}

TEST(Normalizability, PeriodicKernelDependsOnTheDomain) {
  FamilySpec s = presets::make(presets::Periodic{1.0}, 1);
  auto k = kernel_basis(s);
  GridProblem period = box(-M_PI, M_PI, 2000);
  auto one = normalizability_probe(s, k[0], period, 0);
  EXPECT_TRUE(one.normalizable);
  // e^{cos q} on one period: integral of e^{2 cos q} is 2 pi I_0(2).
  EXPECT_NEAR(one.windows[0].norm2, 2 * M_PI * std::cyl_bessel_i(0.0, 2.0), 1e-5);
  auto grown = normalizability_probe(s, k[0], period, 2);
  EXPECT_FALSE(grown.normalizable);
}

TEST(Normalizability, NumericEntriesMatchClosedForms) {
  FamilySpec s = custom(1, "q");
  auto k = kernel_basis(s);
  KernelEntry numeric = k[0];
  numeric.symbolic = false;
  GridProblem g = box(-10, 10, 2000);
  auto a = normalizability_probe(s, k[0], g);
  auto b = normalizability_probe(s, numeric, g);
  EXPECT_EQ(a.normalizable, b.normalizable);
  // Same function up to the normalization at the base point.
  std::vector<double> xs;
  for (int i = -300; i <= 300; ++i) xs.push_back(i * 0.01);
  auto sym = tabulate_kernel(s, k[0], xs);
  auto num = tabulate_kernel(s, numeric, xs, 4, 0.7);
  double scale = (num[0] / sym[0]).real();
  EXPECT_NEAR(scale, std::exp(0.49 / 2), 1e-9);
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_NEAR(std::abs(num[i] - scale * sym[i]), 0.0, 1e-9 * std::abs(num[i]) + 1e-300);
}

TEST(KernelTabulation, CubicTwoFoldNumericSolutionsSpanTheClosedForms) {
  FamilySpec s = presets::make(presets::Cubic{2, 1, 0, 0}, 2);
  auto k = kernel_basis(s);
  ASSERT_EQ(k.size(), 2u);
  GridProblem g = box(0.2, 12, 2000);
  auto xs = std::vector<double>();
  for (int i = 0; i <= g.n + 1; ++i) xs.push_back(g.a + i * g.h());
  auto s0 = tabulate_kernel(s, k[0], xs);
  auto s1 = tabulate_kernel(s, k[1], xs);
  for (const auto& entry : k) {
    KernelEntry nk = entry;
    nk.symbolic = false;
    EXPECT_LT(kernel_grid_residual(s, nk, xs), 1e-6);
    auto y = tabulate_kernel(s, nk, xs);
    // Least-squares fit y ~ c0 s0 + c1 s1 (all real here).
    double a00 = 0, a01 = 0, a11 = 0, b0 = 0, b1 = 0, yy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double u0 = s0[i].real(), u1 = s1[i].real(), v = y[i].real();
      a00 += u0 * u0;
      a01 += u0 * u1;
      a11 += u1 * u1;
      b0 += u0 * v;
      b1 += u1 * v;
      yy += v * v;
    }
    double det = a00 * a11 - a01 * a01;
    double c0 = (b0 * a11 - b1 * a01) / det, c1 = (a00 * b1 - a01 * b0) / det;
    double err = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double r = y[i].real() - c0 * s0[i].real() - c1 * s1[i].real();
      err = std::max(err, std::abs(r));
      EXPECT_NEAR(y[i].imag(), 0.0, 1e-12);
    }
    double peak = 0;
    for (const auto& v : y) peak = std::max(peak, std::abs(v));
    EXPECT_LT(err / peak, 1e-6) << "entry " << entry.index;
  }
}

TEST(SpectralProperties, HarmonicErrorIsSecondOrder) {
  std::vector<double> err;
  for (int n : {500, 1000, 2000}) {
    GridProblem g = box(-10, 10, n);
    g.potential = parse("q^2/2");
    err.push_back(std::abs(eigen_low(discretize(g), 1).values[0] - 0.5));
  }
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    double ratio = err[i] / err[i + 1];
    EXPECT_GT(ratio, 3.5);
    EXPECT_LT(ratio, 4.5);
  }
}

TEST(SpectralProperties, PairingResidualsShrinkWithTheGrid) {
  struct Case {
    FamilySpec spec;
    double a, b;
  };
  std::vector<Case> cases = {
      {custom(1, "q"), -10, 10},
      {custom(2, "q"), -10, 10},
      {presets::make(presets::Quadratic{0, 1, 0.3}, 3), -10, 10},
      {presets::make(presets::QuarticBreaking{0.1}, 2), -8, 12},
      {presets::make(presets::Exponential{}, 2), -10, 10},
      {presets::make(presets::Periodic{1.0}, 1), -M_PI, M_PI},
      {presets::make(presets::Periodic{1.0}, 2), -M_PI, M_PI},
  };
  for (const auto& c : cases) {
    ASSERT_TRUE(verify_intertwining(c.spec).verdict.passed()) << c.spec.label;
    std::vector<PairingSection> ladder;
    for (int n : {500, 1000, 2000}) ladder.push_back(pairing_check(c.spec, box(c.a, c.b, n), 6));
    for (std::size_t l = 0; l < 6; ++l) {
      if (ladder[0].rows[l].kernel || ladder[1].rows[l].kernel || ladder[2].rows[l].kernel) continue;
      if (ladder[0].rows[l].residual > 1.0) continue;  // box-distorted partner of a near-kernel state
      EXPECT_LT(ladder[1].rows[l].residual, 1.05 * ladder[0].rows[l].residual) << c.spec.label << " level " << l;
      EXPECT_LT(ladder[2].rows[l].residual, 1.05 * ladder[1].rows[l].residual) << c.spec.label << " level " << l;
    }
  }
}

TEST(SpectralProperties, UnbrokenModelsFlagOneLevelPerFold) {
  for (int N : {1, 2, 3}) {
    for (const auto& spec : {custom(N, "q"), presets::make(presets::Quadratic{0, 2, 0.5}, N)}) {
      GridProblem g = box(-10, 10, 2000);
      for (const auto& k : kernel_basis(spec)) EXPECT_TRUE(normalizability_probe(spec, k, g).normalizable) << spec.label;
      for (int levels : {2, 6}) {
        auto p = pairing_check(spec, g, levels);
        EXPECT_EQ(p.kernel_flags(), std::min(N, levels)) << spec.label << " N=" << N;
        for (int l = 0; l < std::min(N, levels); ++l) EXPECT_TRUE(p.rows[static_cast<std::size_t>(l)].kernel);
        EXPECT_TRUE(p.passed()) << spec.label << " N=" << N;
      }
    }
  }
}

TEST(SpectralProperties, BrokenQuarticHasNoGenuineZeroModes) {
  GridProblem wide = box(-10, 25, 3500);
  for (int N : {1, 2}) {
    FamilySpec s = presets::make(presets::QuarticBreaking{0.1}, N);
    for (const auto& k : kernel_basis(s)) EXPECT_FALSE(normalizability_probe(s, k, box(-10, 10, 2000)).normalizable);
    // Every H- level below the grid floor has a partner level of H+ at the same
    // energy: the near-annihilated box states are tunnelling doublets, not
    // kernel states.
    auto p = pairing_check(s, wide, 6);
    for (const auto& r : p.rows) {
      if (!r.kernel) continue;
      double gap = 1e9;
      for (double e : p.plus_eigenvalues) gap = std::min(gap, std::abs(e - r.energy));
      EXPECT_LT(gap, 1e-4) << "N=" << N << " level " << r.level;
    }
  }
  // Unbroken control: the flagged level has no H+ partner.
  auto p = pairing_check(custom(1, "q"), box(-10, 10, 2000), 3);
  ASSERT_TRUE(p.rows[0].kernel);
  EXPECT_GT(std::abs(p.plus_eigenvalues[0] - p.rows[0].energy), 0.5);
}

TEST(SpectralReport, CubicDefaultDomainIsRecorded) {
  FamilySpec s = presets::make(presets::Cubic{}, 2);
  auto r = spectral_report(s, box(0.2, 12, 1000), 4);
  EXPECT_EQ(r.pairing.rows.size(), 4u);
  EXPECT_EQ(r.kernels.size(), 2u);
  ASSERT_FALSE(r.notes.empty());
  EXPECT_NE(r.notes[0].find("0.2"), std::string::npos);
}
