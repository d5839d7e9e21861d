#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfoldsusy/diffop.hpp"
#include "nfoldsusy/eigen.hpp"
#include "nfoldsusy/expr.hpp"
#include "nfoldsusy/susy.hpp"

namespace nfs {

class SpectralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dirichlet box [a, b] with n interior points. The potential is only used by
/// discretize(problem); the spectral checks take H+- from the family.
struct GridProblem {
  double a = -10.0;
  double b = 10.0;
  int n = 2000;
  Expr potential = Expr(0);
  Bindings bindings;
  std::vector<double> poles;

  double h() const { return (b - a) / (n + 1); }
  /// Interior point i = 0 .. n-1.
  double x(int i) const { return a + (i + 1) * h(); }
};

/// Spectral checks need min_n = 16; bare discretization accepts any n >= 1.
inline void validate(const GridProblem& g, int min_n = 16) {
  if (!(std::isfinite(g.a) && std::isfinite(g.b) && g.a < g.b)) throw SpectralError("grid interval must satisfy a < b");
  if (g.n < min_n) throw SpectralError("grid needs n >= " + std::to_string(min_n) + " points");
}

namespace detail {

inline void check_poles(const GridProblem& g, const std::vector<double>& extra) {
  auto test = [&](double p) {
    if (p >= g.a && p <= g.b) throw SpectralError("potential pole at q = " + std::to_string(p) + " inside the grid interval");
  };
  for (double p : g.poles) test(p);
  for (double p : extra) test(p);
}

// f at the points x, as complex values; poles become SpectralError.
inline std::vector<std::complex<double>> tabulate(const Expr& f, const std::vector<double>& xs, const Bindings& b, bool finite = true) {
  auto env = detail::numeric_env(b);
  std::vector<std::complex<double>> out;
  out.reserve(xs.size());
  for (double x : xs) {
    std::complex<double> v;
    try {
      v = detail::eval(f, x, env);
    } catch (const EvalError& err) {
      if (err.kind() == EvalError::Kind::Pole) throw SpectralError("pole of " + to_string(f) + " at q = " + std::to_string(x));
      throw;
    }
    if (finite && !(std::isfinite(v.real()) && std::isfinite(v.imag()))) throw SpectralError("non-finite value of " + to_string(f) + " at q = " + std::to_string(x));
    out.push_back(v);
  }
  return out;
}

inline std::vector<double> interior_points(const GridProblem& g) {
  std::vector<double> xs(static_cast<std::size_t>(g.n));
  for (int i = 0; i < g.n; ++i) xs[static_cast<std::size_t>(i)] = g.x(i);
  return xs;
}

// Points 0 .. n+1 including both walls.
inline std::vector<double> all_points(const GridProblem& g) {
  std::vector<double> xs(static_cast<std::size_t>(g.n) + 2);
  for (int i = 0; i <= g.n + 1; ++i) xs[static_cast<std::size_t>(i)] = g.a + i * g.h();
  xs.back() = g.b;
  return xs;
}

inline double cnorm(const std::vector<std::complex<double>>& v, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += std::norm(v[i]);
  return std::sqrt(s);
}

}  // namespace detail

/// Real potential of H = -1/2 d^2 + v on the interior grid.
inline std::vector<double> grid_potential(const DiffOp& H, const GridProblem& g, const std::vector<double>& poles = {}) {
  validate(g, 1);
  if (H.size() != 3) throw SpectralError("discretize needs a second-order operator");
  Scalar lead = Scalar(Rational(-1, 2));
  auto c2 = H.coeff_form(2).as_constant();
  if (!(c2 && *c2 == lead)) throw SpectralError("leading coefficient must be -1/2");
  if (!H.coeff_form(1).is_zero()) {
    auto v = is_zero(H.coeff(1), g.bindings);
    if (!v.passed()) throw SpectralError("first-order term present: " + to_string(H.coeff(1)));
  }
  detail::check_poles(g, poles);
  auto vals = detail::tabulate(H.coeff(0), detail::interior_points(g), g.bindings);
  std::vector<double> v;
  v.reserve(vals.size());
  for (const auto& c : vals) {
    if (std::abs(c.imag()) > 1e-12 * std::max(1.0, std::abs(c.real()))) throw SpectralError("potential is not real on the grid");
    v.push_back(c.real());
  }
  return v;
}

/// Central second differences: diagonal 1/h^2 + v(q_i), off-diagonal -1/(2h^2).
inline SymTridiag discretize(const DiffOp& H, const GridProblem& g, const std::vector<double>& poles = {}) {
  std::vector<double> v = grid_potential(H, g, poles);
  const double h = g.h();
  SymTridiag T;
  T.diag.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) T.diag[i] = 1.0 / (h * h) + v[i];
  T.off.assign(v.size() > 0 ? v.size() - 1 : 0, -0.5 / (h * h));
  return T;
}

inline SymTridiag discretize(const GridProblem& g) { return discretize(schroedinger(g.potential), g); }

// ---------------------------------------------------------------------------
// Supercharge on the grid.

/// A_N psi through the factor chain with central first differences (one-sided at
/// the walls). psi lives on the interior points; the result covers points
/// 0 .. n+1 before trimming.
inline std::vector<std::complex<double>> apply_supercharge(const FamilySpec& spec, const GridProblem& g, const std::vector<double>& psi) {
  if (static_cast<int>(psi.size()) != g.n) throw SpectralError("grid vector has the wrong length");
  auto xs = detail::all_points(g);
  const double h = g.h();
  std::vector<std::complex<double>> u(xs.size(), 0.0);
  for (int i = 0; i < g.n; ++i) u[static_cast<std::size_t>(i) + 1] = psi[static_cast<std::size_t>(i)];
  Bindings b = spec.bindings;
  for (const auto& [k, v] : g.bindings) b[k] = v;
  const std::size_t m = u.size();
  for (int k = 0; k < spec.N; ++k) {
    auto a = detail::tabulate(simplify(spec.W - Expr(k) * spec.E), xs, b);
    std::vector<std::complex<double>> w(m);
    for (std::size_t i = 0; i < m; ++i) {
      std::complex<double> du;
      if (i == 0) {
        du = (u[1] - u[0]) / h;
      } else if (i + 1 == m) {
        du = (u[m - 1] - u[m - 2]) / h;
      } else {
        du = (u[i + 1] - u[i - 1]) / (2.0 * h);
      }
      w[i] = du + a[i] * u[i];
    }
    u = std::move(w);
  }
  return u;
}

struct PairingRow {
  int level = 0;
  double energy = 0.0;         // eigenvalue of H-
  double image_ratio = 0.0;    // |A psi| / |psi|
  bool kernel = false;
  double residual = 0.0;       // |(H+ - E) A psi| / |A psi|; 0 for kernel rows
  bool passed = true;
};

struct SpectralOptions {
  double kernel_tol = 1e-3;  // scaled by 2^N
  double pair_tol = 1e-2;    // scaled by 2^N
};

struct PairingSection {
  std::vector<double> minus_eigenvalues;
  std::vector<double> plus_eigenvalues;
  std::vector<PairingRow> rows;
  double kernel_threshold = 0.0;
  double fail_threshold = 0.0;
  int kernel_flags() const {
    return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const PairingRow& r) { return r.kernel; }));
  }
  double max_residual() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.residual);
    return m;
  }
  bool passed() const {
    return std::all_of(rows.begin(), rows.end(), [](const PairingRow& r) { return r.passed; });
  }
};

namespace detail {

inline double scaled_tol(double tol, int N) { return tol * std::ldexp(1.0, N); }

struct GridImage {
  std::vector<std::complex<double>> w;
  std::size_t lo, hi;  // kept range [lo, hi)
  double ratio;
};

inline GridImage image(const FamilySpec& spec, const GridProblem& g, const std::vector<double>& psi) {
  GridImage r;
  r.w = apply_supercharge(spec, g, psi);
  std::size_t N = static_cast<std::size_t>(spec.N);
  if (r.w.size() <= 2 * N + 2) throw SpectralError("grid too small for the fold number");
  r.lo = N;
  r.hi = r.w.size() - N;
  double np = 0.0;
  for (double x : psi) np += x * x;
  r.ratio = cnorm(r.w, r.lo, r.hi) / std::sqrt(np);
  return r;
}

}  // namespace detail

/// Pairing of the lowest H- levels with H+ through A_N.
inline PairingSection pairing_check(const FamilySpec& spec, const GridProblem& g, int levels, const SpectralOptions& opt = {}) {
  validate(spec);
  validate(g);
  if (levels < 1) throw SpectralError("levels must be >= 1");
  HamiltonianPair H = build_hamiltonians(spec);
  GridProblem gb = g;
  for (const auto& [k, v] : spec.bindings) gb.bindings.emplace(k, v);
  SymTridiag Tm = discretize(H.minus, gb, spec.poles);
  SymTridiag Tp = discretize(H.plus, gb, spec.poles);
  std::vector<double> vplus = grid_potential(H.plus, gb, spec.poles);
  auto em = eigen_low(Tm, static_cast<std::size_t>(levels));
  auto ep = eigen_low(Tp, static_cast<std::size_t>(levels));

  PairingSection s;
  s.minus_eigenvalues = em.values;
  s.plus_eigenvalues = ep.values;
  s.kernel_threshold = detail::scaled_tol(opt.kernel_tol, spec.N);
  s.fail_threshold = detail::scaled_tol(opt.pair_tol, spec.N);
  const double h = g.h();
  for (int l = 0; l < levels; ++l) {
    PairingRow row;
    row.level = l;
    row.energy = em.values[static_cast<std::size_t>(l)];
    auto img = detail::image(spec, gb, em.vectors[static_cast<std::size_t>(l)]);
    row.image_ratio = img.ratio;
    row.kernel = img.ratio < s.kernel_threshold;
    if (!row.kernel) {
      // Interior of the kept range: w index i sits at interior point i-1.
      double rs = 0.0;
      for (std::size_t i = img.lo + 1; i + 1 < img.hi; ++i) {
        std::complex<double> lap = (img.w[i + 1] - 2.0 * img.w[i] + img.w[i - 1]) / (h * h);
        std::complex<double> r = -0.5 * lap + (vplus[i - 1] - row.energy) * img.w[i];
        rs += std::norm(r);
      }
      row.residual = std::sqrt(rs) / detail::cnorm(img.w, img.lo, img.hi);
      row.passed = row.residual < s.fail_threshold;
    }
    s.rows.push_back(row);
  }
  return s;
}

struct MotherRow {
  int level = 0;
  double energy = 0.0;
  double rayleigh = 0.0;    // <psi| 1/2 A^dagger A |psi> / <psi|psi>
  double polynomial = 0.0;  // P(E)
  double difference = 0.0;  // |rayleigh - P(E)|
};

struct MotherSection {
  std::vector<double> coefficients;  // real parts of a_0 .. a_N
  std::vector<MotherRow> rows;
  double fail_threshold = 0.0;       // relative to max(1, |P(E)|)
  double max_difference() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.difference);
    return m;
  }
  bool passed() const {
    return std::all_of(rows.begin(), rows.end(),
                       [&](const MotherRow& r) { return r.difference <= fail_threshold * std::max(1.0, std::abs(r.polynomial)); });
  }
};

/// Rayleigh quotient of 1/2 A^dagger A against P(E) on the lowest H- levels.
inline MotherSection mother_spectral_check(const FamilySpec& spec, const GridProblem& g, int levels,
                                           const std::optional<MotherPolynomial>& mother = std::nullopt, const SpectralOptions& opt = {}) {
  validate(spec);
  validate(g);
  if (levels < 1) throw SpectralError("levels must be >= 1");
  MotherPolynomial P = mother ? *mother : extract_mother_polynomial(spec);
  HamiltonianPair H = build_hamiltonians(spec);
  GridProblem gb = g;
  for (const auto& [k, v] : spec.bindings) gb.bindings.emplace(k, v);
  auto em = eigen_low(discretize(H.minus, gb, spec.poles), static_cast<std::size_t>(levels));
  MotherSection s;
  s.fail_threshold = detail::scaled_tol(opt.pair_tol, spec.N);
  for (const auto& c : P.values) s.coefficients.push_back(c.real());
  for (int l = 0; l < levels; ++l) {
    MotherRow row;
    row.level = l;
    row.energy = em.values[static_cast<std::size_t>(l)];
    auto img = detail::image(spec, gb, em.vectors[static_cast<std::size_t>(l)]);
    row.rayleigh = 0.5 * img.ratio * img.ratio;
    row.polynomial = P(row.energy).real();
    row.difference = std::abs(row.rayleigh - row.polynomial);
    s.rows.push_back(row);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Kernel tabulation and normalizability.

/// Kernel entry j at the points xs (ascending); overflow shows up as inf.
/// Symbolic entries are evaluated. Numeric ones solve the factor chain in
/// gauge form: chi = e^{-Phi} z_1 with Phi' = W and
/// z_k' = (k-1) E z_k + z_{k+1}, by RK4 from the grid point nearest q0
/// (default: the middle of xs) where Phi = 0 and z_{j+1} = 1.
inline std::vector<std::complex<double>> tabulate_kernel(const FamilySpec& spec, const KernelEntry& entry, const std::vector<double>& xs,
                                                         int substeps = 4, std::optional<double> q0 = std::nullopt) {
  if (xs.empty()) return {};
  if (entry.symbolic) return detail::tabulate(entry.chi, xs, spec.bindings, false);
  const int N = spec.N;
  const std::size_t dim = static_cast<std::size_t>(N) + 1;  // Phi, z_1 .. z_N
  auto env = detail::numeric_env(spec.bindings);
  using Vec = std::vector<std::complex<double>>;
  auto rhs = [&](double x, const Vec& y) {
    Vec d(dim);
    d[0] = detail::eval(spec.W, x, env);
    std::complex<double> e = detail::eval(spec.E, x, env);
    for (int k = 1; k <= N; ++k) {
      std::size_t i = static_cast<std::size_t>(k);
      d[i] = static_cast<double>(k - 1) * e * y[i] + (k < N ? y[i + 1] : 0.0);
    }
    return d;
  };
  auto step = [&](double x, double dx, Vec y) {
    Vec k1 = rhs(x, y), t(dim);
    for (std::size_t i = 0; i < dim; ++i) t[i] = y[i] + 0.5 * dx * k1[i];
    Vec k2 = rhs(x + 0.5 * dx, t);
    for (std::size_t i = 0; i < dim; ++i) t[i] = y[i] + 0.5 * dx * k2[i];
    Vec k3 = rhs(x + 0.5 * dx, t);
    for (std::size_t i = 0; i < dim; ++i) t[i] = y[i] + dx * k3[i];
    Vec k4 = rhs(x + dx, t);
    for (std::size_t i = 0; i < dim; ++i) y[i] += dx / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return y;
  };
  auto value = [](const Vec& y) { return std::exp(-y[0]) * y[1]; };
  double base = q0.value_or(0.5 * (xs.front() + xs.back()));
  std::size_t start = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), base) - xs.begin());
  if (start == xs.size()) start = xs.size() - 1;
  if (start > 0 && std::abs(xs[start - 1] - base) < std::abs(xs[start] - base)) --start;
  Vec y0(dim, 0.0);
  y0[static_cast<std::size_t>(entry.index) + 1] = 1.0;
  std::vector<std::complex<double>> out(xs.size());
  out[start] = value(y0);
  for (int dir : {1, -1}) {
    Vec y = y0;
    for (std::size_t i = start; dir > 0 ? i + 1 < xs.size() : i > 0; i = dir > 0 ? i + 1 : i - 1) {
      std::size_t j = dir > 0 ? i + 1 : i - 1;
      double span = xs[j] - xs[i];
      double rate = static_cast<double>(N - 1) * std::abs(detail::eval(spec.E, xs[i], env));
      int sub = std::max(substeps, static_cast<int>(std::ceil(4.0 * rate * std::abs(span))));
      double dx = span / sub;
      double x = xs[i];
      for (int s = 0; s < sub; ++s, x += dx) y = step(x, dx, y);
      out[j] = value(y);
    }
  }
  return out;
}

/// Integration error estimate of a numeric kernel entry: the relative gap
/// between RK4 tabulations at `substeps` and twice as many.
inline double kernel_grid_residual(const FamilySpec& spec, const KernelEntry& entry, const std::vector<double>& xs, int substeps = 4,
                                   std::optional<double> q0 = std::nullopt) {
  auto a = tabulate_kernel(spec, entry, xs, substeps, q0);
  auto b = tabulate_kernel(spec, entry, xs, 2 * substeps, q0);
  double gap = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    gap = std::max(gap, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return scale > 0 ? gap / scale : gap;
}

struct ProbeWindow {
  double a = 0.0, b = 0.0;
  double boundary = 0.0;       // max |chi| at the two walls
  double interior_max = 0.0;   // max |chi| strictly inside
  double tail_ratio = 0.0;     // boundary / interior_max
  double norm2 = 0.0;          // trapezoid integral of |chi|^2
};

struct NormalizabilityResult {
  int index = 0;
  bool symbolic = false;
  bool normalizable = true;
  std::vector<ProbeWindow> windows;
};

/// Divergent-tail heuristic: chi is flagged non-normalizable when its wall
/// value exceeds the interior maximum on the widest window and on the one
/// before it. Windows double their distance from the center on each side
/// unless a pole blocks that side.
inline NormalizabilityResult normalizability_probe(const FamilySpec& spec, const KernelEntry& entry, const GridProblem& g, int doublings = 2) {
  validate(g);
  NormalizabilityResult r;
  r.index = entry.index;
  r.symbolic = entry.symbolic;
  const double c = 0.5 * (g.a + g.b);
  std::vector<double> poles = spec.poles;
  poles.insert(poles.end(), g.poles.begin(), g.poles.end());
  double lo = g.a, hi = g.b;
  for (int w = 0; w <= doublings; ++w) {
    if (w > 0) {
      double nlo = c - 2.0 * (c - lo), nhi = c + 2.0 * (hi - c);
      bool block_lo = false, block_hi = false;
      for (double p : poles) {
        block_lo = block_lo || (p >= nlo && p <= lo);
        block_hi = block_hi || (p >= hi && p <= nhi);
      }
      if (!block_lo) lo = nlo;
      if (!block_hi) hi = nhi;
    }
    GridProblem win = g;
    win.a = lo;
    win.b = hi;
    auto xs = detail::all_points(win);
    // Keep the RK4 step no wider than on the base grid.
    int sub = std::max(1, static_cast<int>(std::ceil(4.0 * (hi - lo) / (g.b - g.a))));
    auto chi = tabulate_kernel(spec, entry, xs, sub, c);
    ProbeWindow pw;
    pw.a = lo;
    pw.b = hi;
    auto mag = [&](std::size_t i) {
      double m = std::abs(chi[i]);
      return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
    };
    pw.boundary = std::max(mag(0), mag(chi.size() - 1));
    for (std::size_t i = 1; i + 1 < chi.size(); ++i) pw.interior_max = std::max(pw.interior_max, mag(i));
    pw.tail_ratio = !std::isfinite(pw.boundary) ? std::numeric_limits<double>::infinity()
                    : pw.interior_max > 0       ? pw.boundary / pw.interior_max
                                                : 0.0;
    const double h = win.h();
    for (std::size_t i = 0; i + 1 < chi.size(); ++i) pw.norm2 += 0.5 * h * (mag(i) * mag(i) + mag(i + 1) * mag(i + 1));
    r.windows.push_back(pw);
  }
  auto diverges = [](const ProbeWindow& w) { return !(w.tail_ratio <= 1.0) || !std::isfinite(w.norm2); };
  const std::size_t m = r.windows.size();
  r.normalizable = !(diverges(r.windows[m - 1]) && (m == 1 || diverges(r.windows[m - 2])));
  return r;
}

struct SpectralReport {
  std::string label;
  GridProblem grid;
  PairingSection pairing;
  MotherSection mother;
  std::vector<NormalizabilityResult> kernels;
  std::vector<std::string> notes;
  bool passed() const { return pairing.passed() && mother.passed(); }
};

/// Pairing, mother identity and kernel probes on one grid.
inline SpectralReport spectral_report(const FamilySpec& spec, const GridProblem& g, int levels, const SpectralOptions& opt = {},
                                      const std::optional<MotherPolynomial>& mother = std::nullopt) {
  SpectralReport r;
  r.label = spec.label;
  r.grid = g;
  r.pairing = pairing_check(spec, g, levels, opt);
  r.mother = mother_spectral_check(spec, g, levels, mother, opt);
  for (const auto& k : kernel_basis(spec)) r.kernels.push_back(normalizability_probe(spec, k, g));
  if (!spec.poles.empty()) {
    r.notes.push_back("Dirichlet walls at [" + std::to_string(g.a) + ", " + std::to_string(g.b) +
                      "] next to a singular point; the box is a modelling choice, not a self-adjointness claim");
  }
  return r;
}

}  // namespace nfs
