#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "nfoldsusy/expr.hpp"

namespace nfs {
namespace detail {

// Expanded normal form: a finite sum of `coefficient * monomial`, where a
// monomial is a product of atoms raised to nonzero integer powers. Atoms are
// q, parameters, exp/sin/cos/log of canonical arguments, and sums that could
// not be expanded (they only occur under negative powers).
//
// Canonical rules on top of plain expansion:
//   - a monomial holds at most one exp atom, always with power 1
//     (exp(a)*exp(b) -> exp(a+b), 1/exp(a) -> exp(-a));
//   - exp(n*log(x)) -> x^n for integer n and x = q or a parameter;
//   - a sum under a negative power is made primitive: common monomial factors
//     and the leading coefficient are pulled out first.

struct ExprLess {
  bool operator()(const Expr& a, const Expr& b) const { return compare(a, b) < 0; }
};

using Monomial = std::vector<std::pair<Expr, int>>;

inline int compare_monomials(const Monomial& a, const Monomial& b) {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = compare(a[i].first, b[i].first);
    if (c != 0) return c;
    if (a[i].second != b[i].second) return a[i].second > b[i].second ? -1 : 1;
  }
  if (a.size() == b.size()) return 0;
  return a.size() < b.size() ? -1 : 1;
}

struct MonomialLess {
  bool operator()(const Monomial& a, const Monomial& b) const { return compare_monomials(a, b) < 0; }
};

class Expanded {
 public:
  using Terms = std::map<Monomial, Scalar, MonomialLess>;

  Expanded() = default;
  static Expanded constant(const Scalar& c) {
    Expanded e;
    if (!c.is_zero()) e.terms_.emplace(Monomial{}, c);
    return e;
  }
  static Expanded monomial(Monomial m, const Scalar& c = Scalar(1)) {
    Expanded e;
    if (!c.is_zero()) e.terms_.emplace(std::move(m), c);
    return e;
  }

  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  std::optional<Scalar> as_constant() const {
    if (terms_.empty()) return Scalar(0);
    if (terms_.size() == 1 && terms_.begin()->first.empty()) return terms_.begin()->second;
    return std::nullopt;
  }

  void add_term(const Monomial& m, const Scalar& c) {
    if (c.is_zero()) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  void add(const Expanded& o, const Scalar& factor = Scalar(1)) {
    if (factor.is_zero()) return;
    bool unit = factor.is_one();
    for (const auto& [m, c] : o.terms_) add_term(m, unit ? c : c * factor);
  }

  Expanded scaled(const Scalar& factor) const {
    if (factor.is_zero()) return {};
    Expanded e;
    for (const auto& [m, c] : terms_) e.terms_.emplace_hint(e.terms_.end(), m, c * factor);
    return e;
  }

  friend Expanded operator+(Expanded a, const Expanded& b) {
    a.add(b);
    return a;
  }
  friend Expanded operator-(Expanded a, const Expanded& b) {
    a.add(b, Scalar(-1));
    return a;
  }
  friend Expanded operator*(const Expanded& a, const Expanded& b);

 private:
  Terms terms_;
};

Monomial normalize_monomial(Monomial m);
Expanded expand(const Expr& e);
Expr to_expr(const Expanded& s);

inline bool is_sum_atom(const Expr& a) { return a.op() == Op::Add || a.op() == Op::Sub; }

// exp(arg) as a normalized monomial factor.
inline Monomial exp_factor(const Expanded& arg) {
  Monomial out;
  Expanded rest;
  for (const auto& [m, c] : arg.terms()) {
    auto n = c.as_integer();
    if (n && m.size() == 1 && m[0].second == 1 && m[0].first.op() == Op::Log &&
        (m[0].first.lhs().op() == Op::Var || m[0].first.lhs().op() == Op::Param)) {
      out.emplace_back(m[0].first.lhs(), static_cast<int>(*n));
    } else {
      rest.add_term(m, c);
    }
  }
  if (!rest.is_zero()) out.emplace_back(Expr::make_unary(Op::Exp, to_expr(rest)), 1);
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return compare(x.first, y.first) < 0; });
  // Merge equal atoms produced by the log extraction.
  Monomial merged;
  for (auto& f : out) {
    if (!merged.empty() && compare(merged.back().first, f.first) == 0) {
      merged.back().second += f.second;
      if (merged.back().second == 0) merged.pop_back();
    } else if (f.second != 0) {
      merged.push_back(std::move(f));
    }
  }
  return merged;
}

inline Monomial normalize_monomial(Monomial m) {
  std::sort(m.begin(), m.end(), [](const auto& x, const auto& y) { return compare(x.first, y.first) < 0; });
  Monomial out;
  out.reserve(m.size());
  std::size_t exp_atoms = 0;
  bool exp_irregular = false;
  for (auto& f : m) {
    if (!out.empty() && compare(out.back().first, f.first) == 0) {
      out.back().second += f.second;
      if (out.back().second == 0) out.pop_back();
    } else if (f.second != 0) {
      out.push_back(std::move(f));
    }
  }
  for (const auto& f : out) {
    if (f.first.op() == Op::Exp) {
      ++exp_atoms;
      if (f.second != 1) exp_irregular = true;
    }
  }
  if (exp_atoms == 0 || (exp_atoms == 1 && !exp_irregular)) return out;
  Expanded arg;
  Monomial rest;
  for (auto& f : out) {
    if (f.first.op() == Op::Exp) {
      arg.add(expand(f.first.lhs()), Scalar(f.second));
    } else {
      rest.push_back(std::move(f));
    }
  }
  for (auto& f : exp_factor(arg)) rest.push_back(std::move(f));
  if (rest.size() > 1) {
    // exp_factor may have produced q or parameter powers; merge once more.
    std::sort(rest.begin(), rest.end(), [](const auto& x, const auto& y) { return compare(x.first, y.first) < 0; });
    Monomial merged;
    for (auto& f : rest) {
      if (!merged.empty() && compare(merged.back().first, f.first) == 0) {
        merged.back().second += f.second;
        if (merged.back().second == 0) merged.pop_back();
      } else {
        merged.push_back(std::move(f));
      }
    }
    return merged;
  }
  return rest;
}

inline Monomial multiply_monomials(const Monomial& a, const Monomial& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  bool has_exp_a = std::any_of(a.begin(), a.end(), [](const auto& f) { return f.first.op() == Op::Exp; });
  bool has_exp_b = std::any_of(b.begin(), b.end(), [](const auto& f) { return f.first.op() == Op::Exp; });
  if (!(has_exp_a && has_exp_b)) {
    // Sorted merge.
    Monomial out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
      if (j == b.size()) {
        out.push_back(a[i++]);
      } else if (i == a.size()) {
        out.push_back(b[j++]);
      } else {
        int c = compare(a[i].first, b[j].first);
        if (c < 0) {
          out.push_back(a[i++]);
        } else if (c > 0) {
          out.push_back(b[j++]);
        } else {
          int e = a[i].second + b[j].second;
          if (e != 0) out.emplace_back(a[i].first, e);
          ++i;
          ++j;
        }
      }
    }
    return out;
  }
  Monomial all = a;
  all.insert(all.end(), b.begin(), b.end());
  return normalize_monomial(std::move(all));
}

inline Expanded operator*(const Expanded& a, const Expanded& b) {
  Expanded out;
  if (a.is_zero() || b.is_zero()) return out;
  for (const auto& [ma, ca] : a.terms()) {
    for (const auto& [mb, cb] : b.terms()) out.add_term(multiply_monomials(ma, mb), ca * cb);
  }
  return out;
}

inline Expanded power(const Expanded& base, int n) {
  Expanded result = Expanded::constant(Scalar(1));
  if (n == 0) return result;
  if (base.size() == 1) {
    const auto& [m, c] = *base.terms().begin();
    Monomial mm = m;
    for (auto& f : mm) f.second *= n;
    return Expanded::monomial(normalize_monomial(std::move(mm)), pow(c, static_cast<long long>(n)));
  }
  Expanded b = base;
  while (n > 0) {
    if (n & 1) result = result * b;
    n >>= 1;
    if (n > 0) b = b * b;
  }
  return result;
}

// 1 / (c * m) for a single term; sums that end up with positive powers are
// multiplied out again.
inline Expanded invert_term(const Monomial& m, const Scalar& c) {
  Monomial inv;
  std::vector<std::pair<Expr, int>> positive_sums;
  for (const auto& [atom, e] : m) {
    if (is_sum_atom(atom) && -e > 0) {
      positive_sums.emplace_back(atom, -e);
    } else {
      inv.emplace_back(atom, -e);
    }
  }
  Expanded out = Expanded::monomial(normalize_monomial(std::move(inv)), Scalar(1) / c);
  for (const auto& [atom, e] : positive_sums) out = out * power(expand(atom), e);
  return out;
}

inline Expanded invert(const Expanded& s) {
  if (s.is_zero()) throw ArithmeticError("division by an expression that simplifies to zero");
  if (s.size() == 1) {
    const auto& [m, c] = *s.terms().begin();
    return invert_term(m, c);
  }
  // Common monomial factor: for each atom the lowest power over all terms
  // (absent counts as 0). Exp atoms only factor out when identical in every
  // term; unexpanded sums are left alone.
  std::map<Expr, int, ExprLess> lowest;
  for (const auto& [m, c] : s.terms()) {
    for (const auto& [atom, e] : m) {
      if (!is_sum_atom(atom)) lowest.emplace(atom, 0);
    }
  }
  for (auto& [atom, low] : lowest) {
    bool first = true;
    for (const auto& [m, c] : s.terms()) {
      auto f = std::find_if(m.begin(), m.end(), [&](const auto& p) { return compare(p.first, atom) == 0; });
      int e = f == m.end() ? 0 : f->second;
      low = first ? e : std::min(low, e);
      first = false;
    }
  }
  Monomial factor;
  for (const auto& [atom, low] : lowest) {
    if (low != 0) factor.emplace_back(atom, low);
  }
  Monomial factor_inv;
  for (const auto& [atom, e] : factor) factor_inv.emplace_back(atom, -e);
  Monomial factor_inv_norm = normalize_monomial(factor_inv);
  Expanded primitive;
  for (const auto& [m, c] : s.terms()) primitive.add_term(multiply_monomials(m, factor_inv_norm), c);
  Scalar lead = primitive.terms().begin()->second;
  primitive = primitive.scaled(Scalar(1) / lead);
  Expanded result = invert_term(normalize_monomial(factor), lead);
  if (primitive.size() == 1) return result * invert(primitive);
  Monomial sum_atom{{to_expr(primitive), -1}};
  return result * Expanded::monomial(std::move(sum_atom));
}

inline Expanded expand_inverse(const Expr& b) {
  switch (b.op()) {
    case Op::Const:
      return Expanded::constant(Scalar(1) / b.value());
    case Op::Mul:
      return expand_inverse(b.lhs()) * expand_inverse(b.rhs());
    case Op::Div:
      return expand(b.rhs()) * expand_inverse(b.lhs());
    case Op::Neg:
      return expand_inverse(b.lhs()).scaled(Scalar(-1));
    case Op::Pow:
      if (b.exponent() > 0) return power(expand_inverse(b.lhs()), b.exponent());
      return power(expand(b.lhs()), -b.exponent());
    default:
      return invert(expand(b));
  }
}

inline Expanded expand_function(Op op, const Expr& arg) {
  Expanded a = expand(arg);
  auto c = a.as_constant();
  if (c && c->is_zero()) {
    if (op == Op::Sin) return {};
    if (op == Op::Cos || op == Op::Exp) return Expanded::constant(Scalar(1));
  }
  if (op == Op::Log && c && c->is_one()) return {};
  if (op == Op::Exp) return Expanded::monomial(exp_factor(a));
  return Expanded::monomial(Monomial{{Expr::make_unary(op, to_expr(a)), 1}});
}

inline Expanded expand(const Expr& e) {
  switch (e.op()) {
    case Op::Const:
      return Expanded::constant(e.value());
    case Op::Var:
    case Op::Param:
      return Expanded::monomial(Monomial{{e, 1}});
    case Op::Neg:
      return expand(e.lhs()).scaled(Scalar(-1));
    case Op::Add:
      return expand(e.lhs()) + expand(e.rhs());
    case Op::Sub:
      return expand(e.lhs()) - expand(e.rhs());
    case Op::Mul:
      return expand(e.lhs()) * expand(e.rhs());
    case Op::Div:
      return expand(e.lhs()) * expand_inverse(e.rhs());
    case Op::Pow:
      if (e.exponent() >= 0) return power(expand(e.lhs()), e.exponent());
      return power(expand_inverse(e.lhs()), -e.exponent());
    case Op::Exp:
    case Op::Sin:
    case Op::Cos:
    case Op::Log:
      return expand_function(e.op(), e.lhs());
  }
  return {};
}

inline Expr to_expr(const Expanded& s) {
  if (s.is_zero()) return Expr(0);
  Expr acc;
  bool first = true;
  for (const auto& [m, c] : s.terms()) {
    Expr num(1);
    Expr den(1);
    for (const auto& [atom, e] : m) {
      if (e > 0) {
        num = num * pow(atom, e);
      } else {
        den = den * pow(atom, -e);
      }
    }
    bool negative = c.is_negative_real();
    Scalar mag = negative ? -c : c;
    Expr term = Expr(mag) * num;
    if (!den.is_one()) term = term / den;
    if (first) {
      acc = negative ? -term : term;
      first = false;
    } else {
      acc = negative ? acc - term : acc + term;
    }
  }
  return acc;
}

// d/dq directly on the normal form.
class Differentiator {
 public:
  Expanded operator()(const Expanded& s) {
    Expanded out;
    for (const auto& [m, c] : s.terms()) {
      for (std::size_t i = 0; i < m.size(); ++i) {
        const Expanded& da = atom_derivative(m[i].first);
        if (da.is_zero()) continue;
        Monomial rest = m;
        rest[i].second -= 1;
        if (rest[i].second == 0) rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
        Expanded part = Expanded::monomial(std::move(rest), c * Scalar(m[i].second)) * da;
        out.add(part);
      }
    }
    return out;
  }

 private:
  const Expanded& atom_derivative(const Expr& atom) {
    auto it = cache_.find(atom);
    if (it != cache_.end()) return it->second;
    Expanded d;
    switch (atom.op()) {
      case Op::Var:
        d = Expanded::constant(Scalar(1));
        break;
      case Op::Param:
        break;
      case Op::Exp:
        d = Expanded::monomial(Monomial{{atom, 1}}) * (*this)(expand(atom.lhs()));
        break;
      case Op::Sin:
        d = Expanded::monomial(Monomial{{Expr::make_unary(Op::Cos, atom.lhs()), 1}}) * (*this)(expand(atom.lhs()));
        break;
      case Op::Cos:
        d = Expanded::monomial(Monomial{{Expr::make_unary(Op::Sin, atom.lhs()), 1}}, Scalar(-1)) * (*this)(expand(atom.lhs()));
        break;
      case Op::Log: {
        Expanded inner = expand(atom.lhs());
        d = (*this)(inner) * invert(inner);
        break;
      }
      default:
        d = (*this)(expand(atom));
        break;
    }
    return cache_.emplace(atom, std::move(d)).first->second;
  }

  std::map<Expr, Expanded, ExprLess> cache_;
};

inline Expanded derivative(const Expanded& s) { return Differentiator{}(s); }

inline Expanded conj(const Expanded& s) { return expand(nfs::conj(to_expr(s))); }

inline bool depends_on_q(const Expanded& s) {
  for (const auto& [m, c] : s.terms()) {
    for (const auto& [atom, e] : m) {
      if (nfs::depends_on_q(atom)) return true;
    }
  }
  return false;
}

}  // namespace detail

/// Best-effort simplification: constant folding, expansion and like-term
/// collection. The result evaluates to the same values as the input.
inline Expr simplify(const Expr& e) { return detail::to_expr(detail::expand(e)); }

/// Derivative followed by simplification.
inline Expr derivative_simplified(const Expr& e, int order = 1) {
  detail::Expanded s = detail::expand(e);
  detail::Differentiator d;
  for (int k = 0; k < order; ++k) s = d(s);
  return detail::to_expr(s);
}

}  // namespace nfs
