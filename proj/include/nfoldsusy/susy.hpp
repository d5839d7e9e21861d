#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfoldsusy/diffop.hpp"
#include "nfoldsusy/expr.hpp"
#include "nfoldsusy/simplify.hpp"
#include "nfoldsusy/zero_test.hpp"

namespace nfs {

/// A type-A model: fold number N, prepotentials W and E, parameter values and
/// the real points where W or E are singular.
struct FamilySpec {
  int N = 1;
  Expr W;
  Expr E;
  Bindings bindings;
  std::vector<double> poles;
  std::string label;
};

inline void validate(const FamilySpec& spec) {
  if (spec.N < 1) throw std::invalid_argument("fold number N must be >= 1");
  for (double p : spec.poles) {
    if (!std::isfinite(p)) throw std::invalid_argument("declared poles must be finite");
  }
}

/// The policy with the family's poles added.
inline SamplingPolicy policy_for(const FamilySpec& spec, SamplingPolicy policy = {}) {
  policy.poles.insert(policy.poles.end(), spec.poles.begin(), spec.poles.end());
  return policy;
}

/// W - (N-1)/2 E.
inline Expr tilde_W(const FamilySpec& spec) {
  return simplify(spec.W - Expr(Scalar(Rational(spec.N - 1, 2))) * spec.E);
}

/// Value of a q-free expression; q-dependent ones are read at q_ref.
inline std::complex<double> constant_value(const Expr& e, const Bindings& b, double q_ref = 1.0) {
  return evaluate(e, q_ref, b);
}

// ---------------------------------------------------------------------------
// Supercharge and Hamiltonians.

/// d + W - k E.
inline DiffOp type_a_factor(const FamilySpec& spec, int k) {
  return DiffOp::d() + DiffOp::mul(spec.W - Expr(k) * spec.E);
}

/// (d + W + s_{n-1}) ... (d + W + s_0).
inline DiffOp supercharge_from_shifts(const Expr& W, const std::vector<Expr>& shifts) {
  DiffOp A = DiffOp::constant(Scalar(1));
  for (const auto& s : shifts) A = compose(DiffOp::d() + DiffOp::mul(W + s), A);
  return A;
}

/// A_N = (d + W - (N-1)E) ... (d + W - E)(d + W). P_N = (-i)^N A_N.
inline DiffOp build_supercharge(const FamilySpec& spec) {
  std::vector<Expr> shifts;
  for (int k = 0; k < spec.N; ++k) shifts.push_back(-(Expr(k) * spec.E));
  return supercharge_from_shifts(spec.W, shifts);
}

struct Potentials {
  Expr plus;
  Expr minus;
};

/// V+- = -(N-1)EW + (N-1)(2N-1)/6 E^2 - (N^2-1)/6 E' +- N(W' - (N-1)/2 E').
inline Potentials build_potentials(const FamilySpec& spec) {
  const long long N = spec.N;
  const Expr& W = spec.W;
  const Expr& E = spec.E;
  Expr dW = derivative_simplified(W);
  Expr dE = derivative_simplified(E);
  Expr common = -(Expr(static_cast<int>(N - 1)) * E * W) + Expr(Scalar(Rational((N - 1) * (2 * N - 1), 6))) * E * E -
                Expr(Scalar(Rational(N * N - 1, 6))) * dE;
  Expr odd = Expr(static_cast<int>(N)) * (dW - Expr(Scalar(Rational(N - 1, 2))) * dE);
  return {simplify(common + odd), simplify(common - odd)};
}

struct HamiltonianPair {
  DiffOp plus;
  DiffOp minus;
};

/// -1/2 d^2 + v.
inline DiffOp schroedinger(const Expr& v) { return DiffOp::d(2).scaled(Scalar(Rational(-1, 2))) + DiffOp::mul(v); }

/// H+- = 1/2(-d^2 + W^2 + V+-).
inline HamiltonianPair build_hamiltonians(const FamilySpec& spec) {
  Potentials V = build_potentials(spec);
  Expr W2 = spec.W * spec.W;
  Expr half(Scalar(Rational(1, 2)));
  return {schroedinger(half * (W2 + V.plus)), schroedinger(half * (W2 + V.minus))};
}

/// W~^2 (E^2 - 2E') - 2 W~ W~'' + W~'^2: constant whenever the W-condition
/// holds; `none` if it still depends on q after simplification.
inline Expr tilde_constant_expr(const FamilySpec& spec) {
  Expr Wt = tilde_W(spec);
  Expr d1 = derivative_simplified(Wt);
  Expr d2 = derivative_simplified(Wt, 2);
  Expr dE = derivative_simplified(spec.E);
  return simplify(Wt * Wt * (spec.E * spec.E - Expr(2) * dE) - Expr(2) * Wt * d2 + d1 * d1);
}

/// The constant A of the W~-only Hamiltonian, matched at q_ref. Symbolic when
/// the matching expression is q-free.
inline Expr match_tilde_constant(const FamilySpec& spec, double q_ref = 1.0) {
  Expr a = tilde_constant_expr(spec);
  if (!depends_on_q(a)) return a;
  return Expr(Scalar::exact_from(evaluate(a, q_ref, spec.bindings)));
}

/// 2H+- = -d^2 + W~^2 + (N^2-1)/12 (E^2 - 2E') +- N W~'. With A_const the
/// bracket becomes 2W~''/W~ - W~'^2/W~^2 + A/W~^2.
inline HamiltonianPair build_hamiltonians_tilde(const FamilySpec& spec, const std::optional<Expr>& A_const = std::nullopt) {
  const long long N = spec.N;
  Expr Wt = tilde_W(spec);
  Expr d1 = derivative_simplified(Wt);
  Expr bracket;
  if (A_const) {
    if (simplify(Wt).is_zero()) throw std::invalid_argument("W~ vanishes identically; the W~-only form is undefined");
    Expr d2 = derivative_simplified(Wt, 2);
    bracket = Expr(2) * d2 / Wt - d1 * d1 / (Wt * Wt) + *A_const / (Wt * Wt);
  } else {
    bracket = spec.E * spec.E - Expr(2) * derivative_simplified(spec.E);
  }
  Expr base = Wt * Wt + Expr(Scalar(Rational(N * N - 1, 12))) * bracket;
  Expr odd = Expr(static_cast<int>(N)) * d1;
  Expr half(Scalar(Rational(1, 2)));
  return {schroedinger(half * (base + odd)), schroedinger(half * (base - odd))};
}

/// is_zero of (a - b) after removing the constant difference seen at q_ref.
inline OperatorVerdict equal_up_to_constant(const DiffOp& a, const DiffOp& b, const FamilySpec& spec,
                                            const SamplingPolicy& policy = {}, double q_ref = 1.0) {
  DiffOp diff = a - b;
  Expr c0 = diff.coeff(0);
  Expr offset = depends_on_q(c0) ? Expr(Scalar::exact_from(evaluate(c0, q_ref, spec.bindings))) : c0;
  diff = diff - DiffOp::mul(offset);
  return is_zero(diff, spec.bindings, policy_for(spec, policy));
}

// ---------------------------------------------------------------------------
// Conditions and identities.

struct CheckItem {
  std::string name;
  bool applicable = true;
  ZeroVerdict verdict;
  Expr residual;
  bool passed() const { return !applicable || verdict.passed(); }
};

struct ConditionReport {
  CheckItem e_condition;  // N >= 3
  CheckItem w_condition;  // N >= 2
  bool passed() const { return e_condition.passed() && w_condition.passed(); }
};

/// E''' + E E'' + 2E'^2 - 2E^2 E'.
inline Expr e_condition_expr(const Expr& E) {
  Expr d1 = derivative_simplified(E);
  Expr d2 = derivative_simplified(E, 2);
  Expr d3 = derivative_simplified(E, 3);
  return simplify(d3 + E * d2 + Expr(2) * d1 * d1 - Expr(2) * E * E * d1);
}

/// u'' - E u' with u = W~' + E W~.
inline Expr w_condition_expr(const FamilySpec& spec) {
  Expr Wt = tilde_W(spec);
  Expr u = simplify(derivative_simplified(Wt) + spec.E * Wt);
  return simplify(derivative_simplified(u, 2) - spec.E * derivative_simplified(u));
}

inline ConditionReport check_conditions(const FamilySpec& spec, const SamplingPolicy& policy = {}) {
  validate(spec);
  SamplingPolicy p = policy_for(spec, policy);
  ConditionReport r;
  r.e_condition.name = "e_condition";
  r.e_condition.applicable = spec.N >= 3;
  r.e_condition.residual = e_condition_expr(spec.E);
  r.w_condition.name = "w_condition";
  r.w_condition.applicable = spec.N >= 2;
  r.w_condition.residual = w_condition_expr(spec);
  // Both residuals are always evaluated; applicability only affects passed().
  r.e_condition.verdict = is_zero(r.e_condition.residual, spec.bindings, p);
  r.w_condition.verdict = is_zero(r.w_condition.residual, spec.bindings, p);
  return r;
}

/// [W~^2 (E^2 - 2E')]' - 2 W~ W~'''.
inline Expr tilde_identity_expr(const FamilySpec& spec) {
  Expr Wt = tilde_W(spec);
  Expr inner = Wt * Wt * (spec.E * spec.E - Expr(2) * derivative_simplified(spec.E));
  return simplify(derivative_simplified(inner) - Expr(2) * Wt * derivative_simplified(Wt, 3));
}

struct RecursionCheck {
  ZeroVerdict plus;
  ZeroVerdict minus;
  bool passed() const { return plus.passed() && minus.passed(); }
};

/// V+-(N+1) - V+-(N) against -EW + (4N-1)/6 E^2 - (2N+1)/6 E' +- (W' - N E'),
/// with W and E held fixed.
inline RecursionCheck check_potential_recursion(const FamilySpec& spec, const SamplingPolicy& policy = {}) {
  FamilySpec next = spec;
  next.N = spec.N + 1;
  Potentials a = build_potentials(spec);
  Potentials b = build_potentials(next);
  const long long N = spec.N;
  Expr dE = derivative_simplified(spec.E);
  Expr common = -(spec.E * spec.W) + Expr(Scalar(Rational(4 * N - 1, 6))) * spec.E * spec.E - Expr(Scalar(Rational(2 * N + 1, 6))) * dE;
  Expr odd = derivative_simplified(spec.W) - Expr(static_cast<int>(N)) * dE;
  SamplingPolicy p = policy_for(spec, policy);
  return {is_zero(b.plus - a.plus - (common + odd), spec.bindings, p), is_zero(b.minus - a.minus - (common - odd), spec.bindings, p)};
}

// ---------------------------------------------------------------------------
// Intertwining.

struct ResidualReport {
  std::string name;
  DiffOp residual;
  OperatorVerdict verdict;
  bool passed() const { return verdict.passed(); }
};

inline ResidualReport intertwining_residual(const DiffOp& A, const HamiltonianPair& H, const FamilySpec& spec,
                                            const SamplingPolicy& policy = {}, std::string name = "intertwining") {
  DiffOp R = compose(A, H.minus) - compose(H.plus, A);
  ResidualReport r{std::move(name), R, {}};
  r.verdict = is_zero(R, spec.bindings, policy_for(spec, policy));
  return r;
}

/// R = A H- - H+ A, one verdict per coefficient. Never assumes the
/// conditions hold.
inline ResidualReport verify_intertwining(const FamilySpec& spec, const SamplingPolicy& policy = {}) {
  validate(spec);
  return intertwining_residual(build_supercharge(spec), build_hamiltonians(spec), spec, policy);
}

// ---------------------------------------------------------------------------
// Mother polynomial.

struct MotherPolynomial {
  std::vector<Expr> coefficients;                     // a_0 .. a_N
  std::vector<std::complex<double>> values;           // a_j with bindings applied
  std::vector<std::complex<double>> plus_values;      // the peel against H+
  ZeroVerdict remainder;
  ZeroVerdict side_consistency;
  DiffOp remainder_op;
  bool passed() const { return remainder.passed() && side_consistency.passed(); }
  int degree() const {
    for (std::size_t j = values.size(); j-- > 0;) {
      if (std::abs(values[j]) > 0.0) return static_cast<int>(j);
    }
    return -1;
  }
  std::complex<double> operator()(std::complex<double> x) const {
    std::complex<double> acc{};
    for (std::size_t j = values.size(); j-- > 0;) acc = acc * x + values[j];
    return acc;
  }
};

namespace detail {

class PowerCache {
 public:
  explicit PowerCache(DiffOp H) : powers_{DiffOp::constant(Scalar(1)), std::move(H)} {}
  const DiffOp& operator[](std::size_t j) {
    while (powers_.size() <= j) powers_.push_back(compose(powers_[1], powers_.back()));
    return powers_[j];
  }

 private:
  std::vector<DiffOp> powers_;
};

struct Peel {
  std::vector<Expr> coeffs;
  DiffOp remainder;
};

// Top-down peel of M against powers of H; the d^{2j} coefficient of H^j is
// (-1/2)^j.
inline Peel peel(DiffOp M, PowerCache& powers, int N, const Bindings& b, double q_ref) {
  Peel out;
  out.coeffs.assign(static_cast<std::size_t>(N) + 1, Expr(0));
  for (int j = N; j >= 0; --j) {
    const Expanded& top = M.coeff_form(static_cast<std::size_t>(2 * j));
    Expr c = to_expr(top);
    if (depends_on_q(top)) c = Expr(Scalar::exact_from(evaluate(c, q_ref, b)));
    Expr a = simplify(c / Expr(pow(Scalar(Rational(-1, 2)), static_cast<long long>(j))));
    out.coeffs[static_cast<std::size_t>(j)] = a;
    if (!a.is_zero()) M = M - powers[static_cast<std::size_t>(j)].scaled(a);
  }
  out.remainder = std::move(M);
  return out;
}

}  // namespace detail

/// 1/2 A^dagger A = Sum_j a_j H-^j, with the same a_j required against
/// 1/2 A A^dagger and H+.
inline MotherPolynomial mother_from(const DiffOp& A, const HamiltonianPair& H, const FamilySpec& spec,
                                    const SamplingPolicy& policy = {}, double q_ref = 1.0) {
  SamplingPolicy p = policy_for(spec, policy);
  DiffOp Ad = formal_adjoint(A);
  Scalar half(Rational(1, 2));
  DiffOp minus_side = compose(Ad, A).scaled(half);
  DiffOp plus_side = compose(A, Ad).scaled(half);
  detail::PowerCache pm(H.minus);
  detail::PowerCache pp(H.plus);
  detail::Peel lo = detail::peel(minus_side, pm, spec.N, spec.bindings, q_ref);
  detail::Peel hi = detail::peel(plus_side, pp, spec.N, spec.bindings, q_ref);

  MotherPolynomial m;
  m.coefficients = lo.coeffs;
  for (std::size_t j = 0; j < lo.coeffs.size(); ++j) {
    m.values.push_back(constant_value(lo.coeffs[j], spec.bindings, q_ref));
    m.plus_values.push_back(constant_value(hi.coeffs[j], spec.bindings, q_ref));
  }
  m.remainder_op = lo.remainder;
  m.remainder = is_zero(lo.remainder, spec.bindings, p).overall;

  DiffOp side = plus_side;
  for (std::size_t j = 0; j < lo.coeffs.size(); ++j) {
    if (!lo.coeffs[j].is_zero()) side = side - pp[j].scaled(lo.coeffs[j]);
  }
  std::vector<ZeroVerdict> parts{is_zero(side, spec.bindings, p).overall};
  for (std::size_t j = 0; j < lo.coeffs.size(); ++j) parts.push_back(is_zero(hi.coeffs[j] - lo.coeffs[j], spec.bindings, p));
  m.side_consistency = combine(parts);
  return m;
}

inline MotherPolynomial extract_mother_polynomial(const FamilySpec& spec, const SamplingPolicy& policy = {}, double q_ref = 1.0) {
  validate(spec);
  return mother_from(build_supercharge(spec), build_hamiltonians(spec), spec, policy, q_ref);
}

// ---------------------------------------------------------------------------
// Factorized chains.

struct ChainReport {
  std::vector<Expr> offsets;               // C(1) .. C(N)
  std::vector<DiffOp> factors;             // L^(1) .. L^(N)
  std::vector<DiffOp> h_upper;             // H>^(k), k = 1..N
  std::vector<DiffOp> h_lower;             // H<^(k-1), k = 1..N
  std::vector<ResidualReport> steps;       // H>^(k) L^(k) - L^(k) H<^(k-1)
  std::vector<Expr> mismatches;            // H>^(k) - H<^(k), k = 1..N-1
  std::vector<ZeroVerdict> mismatch_verdicts;
  ResidualReport end_to_end;               // product against H+-
  bool steps_passed() const {
    for (const auto& s : steps) {
      if (!s.passed()) return false;
    }
    return true;
  }
  bool mismatches_vanish() const {
    for (const auto& v : mismatch_verdicts) {
      if (!v.passed()) return false;
    }
    return true;
  }
};

/// (W - E/2)' + E (W - E/2) - (k-1)(E' + E^2): the q-dependent part of the
/// mismatch H>^(k) - H<^(k) before the offsets C(k) - C(k+1) are added.
inline Expr chain_mismatch_core(const FamilySpec& spec, int k) {
  Expr half(Scalar(Rational(1, 2)));
  Expr X = spec.W - half * spec.E;
  Expr dE = derivative_simplified(spec.E);
  return simplify(derivative_simplified(X) + spec.E * X - Expr(k - 1) * (dE + spec.E * spec.E));
}

/// C(1) = 0 and C(k+1) = C(k) + mismatch core at k; symbolic when q-free,
/// otherwise read at q_ref.
inline std::vector<Expr> matched_offsets(const FamilySpec& spec, double q_ref = 1.0) {
  std::vector<Expr> C{Expr(0)};
  for (int k = 1; k < spec.N; ++k) {
    Expr d = chain_mismatch_core(spec, k);
    if (depends_on_q(d)) d = Expr(Scalar::exact_from(evaluate(d, q_ref, spec.bindings)));
    C.push_back(simplify(C.back() + d));
  }
  return C;
}

inline ChainReport build_chain(const FamilySpec& spec, const std::vector<Expr>& offsets, const SamplingPolicy& policy = {}) {
  validate(spec);
  if (static_cast<int>(offsets.size()) != spec.N) throw std::invalid_argument("chain needs exactly N offsets C(1..N)");
  SamplingPolicy p = policy_for(spec, policy);
  ChainReport r;
  r.offsets = offsets;
  Expr half(Scalar(Rational(1, 2)));
  for (int k = 1; k <= spec.N; ++k) {
    Expr U = simplify(spec.W - Expr(k - 1) * spec.E);
    Expr dU = derivative_simplified(U);
    const Expr& C = offsets[static_cast<std::size_t>(k - 1)];
    DiffOp L = DiffOp::d() + DiffOp::mul(U);
    DiffOp upper = schroedinger(half * (U * U + dU) + C);
    DiffOp lower = schroedinger(half * (U * U - dU) + C);
    r.factors.push_back(L);
    r.h_upper.push_back(upper);
    r.h_lower.push_back(lower);
    r.steps.push_back(intertwining_residual(L, {upper, lower}, spec, policy, "chain_step_" + std::to_string(k)));
  }
  for (int k = 1; k < spec.N; ++k) {
    DiffOp diff = r.h_upper[static_cast<std::size_t>(k - 1)] - r.h_lower[static_cast<std::size_t>(k)];
    Expr m = diff.coeff(0);
    r.mismatches.push_back(m);
    r.mismatch_verdicts.push_back(is_zero(m, spec.bindings, p));
  }
  DiffOp product = DiffOp::constant(Scalar(1));
  for (const auto& L : r.factors) product = compose(L, product);
  r.end_to_end = intertwining_residual(product, build_hamiltonians(spec), spec, policy, "chain_end_to_end");
  return r;
}

/// c'' - E c' for a q-dependent step constant c.
inline ZeroVerdict check_generalized_chain_condition(const FamilySpec& spec, const Expr& c1, const SamplingPolicy& policy = {}) {
  Expr r = simplify(derivative_simplified(c1, 2) - spec.E * derivative_simplified(c1));
  return is_zero(r, spec.bindings, policy_for(spec, policy));
}

// ---------------------------------------------------------------------------
// Kernel of the supercharge.

/// Closed-form antiderivative for sums of c q^n, c exp(a q + b), c sin(a q + b)
/// and c cos(a q + b) with q-free a, b, c; `none` otherwise.
inline std::optional<Expr> antiderivative(const Expr& f) {
  detail::Expanded s = detail::expand(f);
  detail::Differentiator d;
  Expr acc(0);
  for (const auto& [m, c] : s.terms()) {
    int qpow = 0;
    Expr coeff(c);
    std::optional<Expr> fn;
    for (const auto& [atom, e] : m) {
      if (atom.op() == Op::Var) {
        qpow = e;
      } else if (!depends_on_q(atom)) {
        coeff = coeff * pow(atom, e);
      } else if (!fn && e == 1 && (atom.op() == Op::Exp || atom.op() == Op::Sin || atom.op() == Op::Cos)) {
        fn = atom;
      } else {
        return std::nullopt;
      }
    }
    if (!fn) {
      if (qpow == -1) {
        acc = acc + coeff * log(q());
      } else {
        acc = acc + coeff * pow(q(), qpow + 1) / Expr(qpow + 1);
      }
      continue;
    }
    if (qpow != 0) return std::nullopt;
    detail::Expanded arg = detail::expand(fn->lhs());
    detail::Expanded slope = d(arg);
    if (detail::depends_on_q(slope)) return std::nullopt;
    Expr a = detail::to_expr(slope);
    if (simplify(a).is_zero()) return std::nullopt;
    switch (fn->op()) {
      case Op::Exp:
        acc = acc + coeff * *fn / a;
        break;
      case Op::Sin:
        acc = acc - coeff * cos(fn->lhs()) / a;
        break;
      default:
        acc = acc + coeff * sin(fn->lhs()) / a;
        break;
    }
  }
  return simplify(acc);
}

struct KernelEntry {
  int index = 0;            // 0 .. N-1
  bool symbolic = false;
  Expr chi;                 // closed form when symbolic
  std::string description;
  std::optional<ZeroVerdict> annihilation;  // is_zero(A chi) for symbolic entries
};

/// Basis of ker A_N. Closed forms exist when E is 0, a constant, or c/q and
/// the integral of W is elementary; otherwise entries are described for
/// numerical integration of the factor chain.
inline std::vector<KernelEntry> kernel_basis(const FamilySpec& spec, const SamplingPolicy& policy = {}) {
  validate(spec);
  std::vector<KernelEntry> out;
  std::optional<Expr> intW = antiderivative(spec.W);
  Expr E = simplify(spec.E);
  // Powers q^{m_j} or exponentials e^{m_j q} spanning ker of prod (d - kE).
  enum class Shape { None, Power, Exponential } shape = Shape::None;
  Expr rate;
  if (!depends_on_q(E)) {
    shape = E.is_zero() ? Shape::Power : Shape::Exponential;
    rate = E.is_zero() ? Expr(1) : E;
  } else {
    Expr cq = simplify(E * q());
    if (!depends_on_q(cq)) {
      shape = Shape::Power;
      rate = simplify(Expr(1) + cq);
    }
  }
  DiffOp A = build_supercharge(spec);
  SamplingPolicy p = policy_for(spec, policy);
  for (int j = 0; j < spec.N; ++j) {
    KernelEntry k;
    k.index = j;
    if (intW && shape != Shape::None) {
      Expr gauge = exp(-*intW);
      Expr factor(1);
      if (shape == Shape::Exponential) factor = exp(Expr(j) * rate * q());
      if (shape == Shape::Power) {
        Expr m = simplify(Expr(j) * rate);
        auto n = m.is_constant() ? m.value().as_integer() : std::nullopt;
        factor = n ? pow(q(), static_cast<int>(*n)) : exp(m * log(q()));
      }
      k.symbolic = true;
      k.chi = simplify(factor * gauge);
      k.description = to_string(k.chi);
      k.annihilation = is_zero(apply(A, k.chi), spec.bindings, p);
    } else {
      k.symbolic = false;
      k.description = "numeric: chi = e^{-Phi} z_1 with Phi' = W, z_k' = (k-1) E z_k + z_{k+1}, z_" + std::to_string(j + 1) + "(q0) = 1";
    }
    out.push_back(std::move(k));
  }
  return out;
}

}  // namespace nfs
