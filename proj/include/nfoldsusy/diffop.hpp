#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nfoldsusy/expr.hpp"
#include "nfoldsusy/parse.hpp"
#include "nfoldsusy/simplify.hpp"
#include "nfoldsusy/zero_test.hpp"

namespace nfs {

/// Sum_k c_k(q) d^k with coefficients held in expanded normal form. Trailing
/// coefficients that expand to zero are dropped, so the zero operator has no
/// coefficients at all.
class DiffOp {
 public:
  using Coeff = detail::Expanded;

  DiffOp() = default;
  explicit DiffOp(std::vector<Coeff> coeffs) : c_(std::move(coeffs)) { trim(); }

  static DiffOp from_exprs(const std::vector<Expr>& coeffs) {
    std::vector<Coeff> c;
    c.reserve(coeffs.size());
    for (const auto& e : coeffs) c.push_back(detail::expand(e));
    return DiffOp(std::move(c));
  }
  /// Multiplication by f.
  static DiffOp mul(const Expr& f) { return DiffOp({detail::expand(f)}); }
  static DiffOp constant(const Scalar& s) { return DiffOp({Coeff::constant(s)}); }
  /// d^k.
  static DiffOp d(int k = 1) {
    std::vector<Coeff> c(static_cast<std::size_t>(k) + 1);
    c.back() = Coeff::constant(Scalar(1));
    return DiffOp(std::move(c));
  }

  bool is_zero() const { return c_.empty(); }
  /// Undefined (nullopt) for the zero operator.
  std::optional<int> order() const {
    if (c_.empty()) return std::nullopt;
    return static_cast<int>(c_.size()) - 1;
  }
  std::size_t size() const { return c_.size(); }
  const std::vector<Coeff>& coeffs() const { return c_; }
  /// Coefficient of d^k (zero beyond the order).
  const Coeff& coeff_form(std::size_t k) const {
    static const Coeff zero;
    return k < c_.size() ? c_[k] : zero;
  }
  Expr coeff(std::size_t k) const { return detail::to_expr(coeff_form(k)); }
  std::vector<Expr> coeff_exprs() const {
    std::vector<Expr> out;
    for (const auto& c : c_) out.push_back(detail::to_expr(c));
    return out;
  }

  friend DiffOp operator+(const DiffOp& a, const DiffOp& b) {
    std::vector<Coeff> c(std::max(a.c_.size(), b.c_.size()));
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = a.coeff_form(k) + b.coeff_form(k);
    return DiffOp(std::move(c));
  }
  friend DiffOp operator-(const DiffOp& a, const DiffOp& b) {
    std::vector<Coeff> c(std::max(a.c_.size(), b.c_.size()));
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = a.coeff_form(k) - b.coeff_form(k);
    return DiffOp(std::move(c));
  }
  friend DiffOp operator-(const DiffOp& a) { return a.scaled(Scalar(-1)); }

  DiffOp scaled(const Scalar& s) const {
    std::vector<Coeff> c;
    for (const auto& x : c_) c.push_back(x.scaled(s));
    return DiffOp(std::move(c));
  }
  /// Left multiplication by the function f: f * A.
  DiffOp scaled(const Expr& f) const {
    Coeff ff = detail::expand(f);
    std::vector<Coeff> c;
    for (const auto& x : c_) c.push_back(ff * x);
    return DiffOp(std::move(c));
  }

 private:
  void trim() {
    while (!c_.empty() && c_.back().is_zero()) c_.pop_back();
  }
  std::vector<Coeff> c_;
};

/// Sum_k c_k f^(k).
inline Expr apply(const DiffOp& A, const Expr& f) {
  detail::Differentiator d;
  detail::Expanded g = detail::expand(f);
  detail::Expanded acc;
  for (std::size_t k = 0; k < A.size(); ++k) {
    if (k > 0) g = d(g);
    if (!A.coeffs()[k].is_zero()) acc.add(A.coeffs()[k] * g);
  }
  return detail::to_expr(acc);
}

inline DiffOp add(const DiffOp& a, const DiffOp& b) { return a + b; }
inline DiffOp scale(const DiffOp& a, const Expr& s) { return a.scaled(s); }
inline DiffOp scale(const DiffOp& a, const Scalar& s) { return a.scaled(s); }

namespace detail {

inline std::vector<Rational> binomial_row(std::size_t n) {
  std::vector<Rational> row(n + 1, Rational(1));
  for (std::size_t k = 1; k < n; ++k) row[k] = row[k - 1] * Rational(static_cast<long long>(n - k + 1), static_cast<long long>(k));
  return row;
}

}  // namespace detail

/// A o B via d^i o f = Sum_l binom(i,l) f^(l) d^(i-l).
inline DiffOp compose(const DiffOp& A, const DiffOp& B) {
  if (A.is_zero() || B.is_zero()) return {};
  std::size_t na = A.size() - 1;
  std::size_t nb = B.size() - 1;
  detail::Differentiator diff;
  // derivs[j][l] = l-th derivative of b_j, up to l = na.
  std::vector<std::vector<detail::Expanded>> derivs(nb + 1);
  for (std::size_t j = 0; j <= nb; ++j) {
    derivs[j].push_back(B.coeffs()[j]);
    for (std::size_t l = 1; l <= na && !derivs[j].back().is_zero(); ++l) derivs[j].push_back(diff(derivs[j].back()));
  }
  std::vector<detail::Expanded> out(na + nb + 1);
  for (std::size_t i = 0; i <= na; ++i) {
    const auto& a = A.coeffs()[i];
    if (a.is_zero()) continue;
    auto binom = detail::binomial_row(i);
    for (std::size_t j = 0; j <= nb; ++j) {
      for (std::size_t l = 0; l <= i && l < derivs[j].size(); ++l) {
        const auto& bl = derivs[j][l];
        if (bl.is_zero()) continue;
        out[i - l + j].add(a * bl, Scalar(binom[l]));
      }
    }
  }
  return DiffOp(std::move(out));
}

inline DiffOp operator*(const DiffOp& A, const DiffOp& B) { return compose(A, B); }

inline DiffOp commutator(const DiffOp& A, const DiffOp& B) { return compose(A, B) - compose(B, A); }

/// (Sum c_k d^k)^dagger = Sum (-1)^k d^k o conj(c_k); parameters are real.
inline DiffOp formal_adjoint(const DiffOp& A) {
  if (A.is_zero()) return {};
  detail::Differentiator diff;
  std::vector<detail::Expanded> out(A.size());
  for (std::size_t k = 0; k < A.size(); ++k) {
    detail::Expanded c = detail::conj(A.coeffs()[k]);
    auto binom = detail::binomial_row(k);
    Scalar sign((k % 2 == 0) ? 1 : -1);
    for (std::size_t l = 0; l <= k && !c.is_zero(); ++l) {
      out[k - l].add(c, sign * Scalar(binom[l]));
      if (l < k) c = diff(c);
    }
  }
  return DiffOp(std::move(out));
}

/// e^{Int w} o A o e^{-Int w}: every d becomes (d - w).
inline DiffOp gauge_conjugate(const DiffOp& A, const Expr& w) {
  if (A.is_zero()) return {};
  DiffOp shifted = DiffOp::d(1) - DiffOp::mul(w);
  DiffOp power = DiffOp::constant(Scalar(1));
  DiffOp acc;
  for (std::size_t k = 0; k < A.size(); ++k) {
    if (k > 0) power = compose(shifted, power);
    if (!A.coeffs()[k].is_zero()) acc = acc + DiffOp::mul(detail::to_expr(A.coeffs()[k])) * power;
  }
  return acc;
}

namespace detail {

inline bool fully_wrapped(const std::string& s) {
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') return false;
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')' && --depth == 0 && i + 1 < s.size()) return false;
  }
  return true;
}

}  // namespace detail

/// `(c_n) d^n + ... + (c_1) d + (c_0)`; zero coefficients are omitted and the
/// zero operator prints as `0`.
inline std::string to_string(const DiffOp& A) {
  if (A.is_zero()) return "0";
  std::string out;
  for (std::size_t k = A.size(); k-- > 0;) {
    if (A.coeffs()[k].is_zero()) continue;
    if (!out.empty()) out += " + ";
    std::string c = to_string(detail::to_expr(A.coeffs()[k]));
    out += detail::fully_wrapped(c) ? c : "(" + c + ")";
    if (k == 1) out += " d";
    if (k > 1) out += " d^" + std::to_string(k);
  }
  return out;
}

inline std::ostream& operator<<(std::ostream& os, const DiffOp& A) { return os << to_string(A); }

/// Inverse of to_string(DiffOp). Offsets in errors refer to the full text.
inline DiffOp parse_operator(std::string_view text) {
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  skip();
  if (pos < text.size() && text[pos] == '0') {
    std::size_t p = pos + 1;
    while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
    if (p == text.size()) return {};
  }
  std::vector<Expr> coeffs;
  for (;;) {
    skip();
    if (pos >= text.size() || text[pos] != '(') throw ParseError(pos, "expected '(' starting a coefficient");
    std::size_t open = pos;
    int depth = 0;
    for (; pos < text.size(); ++pos) {
      if (text[pos] == '(') ++depth;
      if (text[pos] == ')' && --depth == 0) break;
    }
    if (pos >= text.size()) throw ParseError(open, "unbalanced '('");
    Expr c;
    try {
      c = parse(text.substr(open + 1, pos - open - 1));
    } catch (const ParseError& err) {
      throw ParseError(open + 1 + err.offset(), err.message());
    }
    ++pos;
    skip();
    std::size_t order = 0;
    if (pos < text.size() && text[pos] == 'd') {
      ++pos;
      order = 1;
      skip();
      if (pos < text.size() && text[pos] == '^') {
        ++pos;
        skip();
        std::size_t start = pos;
        std::size_t n = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
          n = n * 10 + static_cast<std::size_t>(text[pos++] - '0');
          if (n > 4096) throw ParseError(start, "derivative order too large");
        }
        if (pos == start) throw ParseError(start, "expected derivative order");
        order = n;
      }
    }
    if (coeffs.size() <= order) coeffs.resize(order + 1);
    coeffs[order] = coeffs[order] + c;
    skip();
    if (pos == text.size()) break;
    if (text[pos] != '+') throw ParseError(pos, "expected '+' between operator terms");
    ++pos;
  }
  return DiffOp::from_exprs(coeffs);
}

/// Per-coefficient zero test of an operator.
struct OperatorVerdict {
  std::vector<ZeroVerdict> coefficients;  // index k is the d^k coefficient
  ZeroVerdict overall;
  bool passed() const { return overall.passed(); }
};

inline OperatorVerdict is_zero(const DiffOp& A, const Bindings& bindings = {}, const SamplingPolicy& policy = {}) {
  OperatorVerdict v;
  for (std::size_t k = 0; k < A.size(); ++k) v.coefficients.push_back(is_zero(A.coeff(k), bindings, policy));
  v.overall = combine(v.coefficients);
  v.overall.policy = policy;
  if (v.coefficients.empty()) v.overall.method = "exact";
  return v;
}

}  // namespace nfs
