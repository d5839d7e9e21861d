#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nfoldsusy/expr.hpp"
#include "nfoldsusy/simplify.hpp"

namespace nfs {

/// Multivariate polynomial over the Gaussian rationals. Exponent vectors index
/// into an external variable list; terms are kept in descending lex order so
/// that begin() is the leading term.
class MPoly {
 public:
  using Exps = std::vector<int>;
  struct LexGreater {
    bool operator()(const Exps& a, const Exps& b) const { return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end()); }
  };
  using Terms = std::map<Exps, Scalar, LexGreater>;

  MPoly() = default;
  explicit MPoly(std::size_t nvars) : nvars_(nvars) {}
  static MPoly constant(std::size_t nvars, const Scalar& c) {
    MPoly p(nvars);
    p.add_term(Exps(nvars, 0), c);
    return p;
  }

  std::size_t nvars() const { return nvars_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_one() const {
    return terms_.size() == 1 && terms_.begin()->second.is_one() &&
           std::all_of(terms_.begin()->first.begin(), terms_.begin()->first.end(), [](int e) { return e == 0; });
  }
  const Exps& lead_exps() const { return terms_.begin()->first; }
  const Scalar& lead_coeff() const { return terms_.begin()->second; }

  void add_term(const Exps& m, const Scalar& c) {
    if (c.is_zero()) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  friend MPoly operator+(MPoly a, const MPoly& b) {
    for (const auto& [m, c] : b.terms_) a.add_term(m, c);
    return a;
  }
  friend MPoly operator-(MPoly a, const MPoly& b) {
    for (const auto& [m, c] : b.terms_) a.add_term(m, -c);
    return a;
  }
  friend MPoly operator*(const MPoly& a, const MPoly& b) {
    MPoly out(a.nvars_);
    Exps m(a.nvars_);
    for (const auto& [ma, ca] : a.terms_) {
      for (const auto& [mb, cb] : b.terms_) {
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = ma[i] + mb[i];
        out.add_term(m, ca * cb);
      }
    }
    return out;
  }
  MPoly scaled(const Scalar& s) const {
    MPoly out(nvars_);
    if (s.is_zero()) return out;
    for (const auto& [m, c] : terms_) out.terms_.emplace_hint(out.terms_.end(), m, c * s);
    return out;
  }
  MPoly shifted(const Exps& by) const {
    MPoly out(nvars_);
    for (const auto& [m, c] : terms_) {
      Exps e = m;
      for (std::size_t i = 0; i < e.size(); ++i) e[i] += by[i];
      out.terms_.emplace_hint(out.terms_.end(), std::move(e), c);
    }
    return out;
  }

  /// Per-variable minimum exponent over all terms (zero polynomial: all zero).
  Exps min_exps() const {
    Exps low(nvars_, 0);
    bool first = true;
    for (const auto& [m, c] : terms_) {
      for (std::size_t i = 0; i < nvars_; ++i) low[i] = first ? m[i] : std::min(low[i], m[i]);
      first = false;
    }
    return low;
  }

  /// Variables that occur with a nonzero exponent.
  std::vector<std::size_t> support() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nvars_; ++i) {
      for (const auto& [m, c] : terms_) {
        if (m[i] != 0) {
          out.push_back(i);
          break;
        }
      }
    }
    return out;
  }

 private:
  std::size_t nvars_ = 0;
  Terms terms_;
};

inline MPoly pow(const MPoly& p, int n) {
  MPoly result = MPoly::constant(p.nvars(), Scalar(1));
  MPoly b = p;
  while (n > 0) {
    if (n & 1) result = result * b;
    n >>= 1;
    if (n > 0) b = b * b;
  }
  return result;
}

/// a / b when b divides a exactly, else nullopt.
inline std::optional<MPoly> divide_exact(MPoly a, const MPoly& b) {
  if (b.is_zero()) return std::nullopt;
  MPoly quot(a.nvars());
  const auto& lb = b.lead_exps();
  const Scalar& cb = b.lead_coeff();
  while (!a.is_zero()) {
    MPoly::Exps m = a.lead_exps();
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] -= lb[i];
      if (m[i] < 0) return std::nullopt;
    }
    Scalar c = a.lead_coeff() / cb;
    MPoly t(a.nvars());
    t.add_term(m, c);
    quot.add_term(m, c);
    a = a - t * b;
  }
  return quot;
}

namespace detail {

// Euclid in a single variable `v`; both inputs must only involve v.
inline MPoly univariate_gcd(MPoly a, MPoly b, std::size_t v) {
  auto degree = [&](const MPoly& p) { return p.lead_exps()[v]; };
  while (!b.is_zero()) {
    MPoly r = a;
    while (!r.is_zero() && degree(r) >= degree(b)) {
      MPoly::Exps m(r.nvars(), 0);
      m[v] = degree(r) - degree(b);
      MPoly t(r.nvars());
      t.add_term(m, r.lead_coeff() / b.lead_coeff());
      r = r - t * b;
    }
    a = std::move(b);
    b = std::move(r);
  }
  return a.scaled(Scalar(1) / a.lead_coeff());
}

}  // namespace detail

/// Canonical num/den pair over the variables {q, parameters...}. The
/// denominator has leading coefficient 1; the zero form is 0/1.
struct RationalForm {
  std::vector<std::string> vars;  // vars[0] == "q"
  MPoly num;
  MPoly den;

  bool is_zero() const { return num.is_zero(); }
  bool is_polynomial() const { return den.is_one(); }

  Expr poly_to_expr(const MPoly& p) const {
    Expr acc(0);
    bool first = true;
    for (const auto& [m, c] : p.terms()) {
      Expr t(1);
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] != 0) t = t * pow(i == 0 ? q() : Expr::param(vars[i]), m[i]);
      }
      bool neg = c.is_negative_real();
      Expr term = Expr(neg ? -c : c) * t;
      if (first) {
        acc = neg ? -term : term;
        first = false;
      } else {
        acc = neg ? acc - term : acc + term;
      }
    }
    return acc;
  }

  Expr to_expr() const {
    Expr n = poly_to_expr(num);
    if (den.is_one()) return n;
    return n / poly_to_expr(den);
  }
  std::string to_string() const { return nfs::to_string(to_expr()); }
};

namespace detail {

class RationalBuilder {
 public:
  explicit RationalBuilder(std::vector<std::string> vars) : vars_(std::move(vars)) {
    for (std::size_t i = 0; i < vars_.size(); ++i) index_.emplace(vars_[i], i);
  }

  struct Frac {
    MPoly num, den;
  };

  std::optional<Frac> convert(const Expanded& s) {
    // Group terms by their sum-atom signature; the remaining factors form a
    // Laurent polynomial per group.
    std::map<Monomial, MPoly, MonomialLess> groups;
    for (const auto& [m, c] : s.terms()) {
      Monomial sums;
      MPoly::Exps exps(vars_.size(), 0);
      for (const auto& [atom, e] : m) {
        if (atom.op() == Op::Var) {
          exps[0] += e;
        } else if (atom.op() == Op::Param) {
          exps[index_.at(atom.name())] += e;
        } else if (is_sum_atom(atom)) {
          sums.emplace_back(atom, e);
        } else {
          return std::nullopt;
        }
      }
      auto it = groups.try_emplace(sums, MPoly(vars_.size())).first;
      it->second.add_term(exps, c.to_exact());
    }
    Frac acc{MPoly(vars_.size()), MPoly::constant(vars_.size(), Scalar(1))};
    for (auto& [sums, laurent] : groups) {
      if (laurent.is_zero()) continue;
      Frac part = from_laurent(laurent);
      for (const auto& [atom, e] : sums) {
        auto inner = convert(expand(atom));
        if (!inner) return std::nullopt;
        if (inner->num.is_zero()) throw ArithmeticError("division by a sum that is identically zero");
        Frac p = e > 0 ? Frac{pow(inner->num, e), pow(inner->den, e)} : Frac{pow(inner->den, -e), pow(inner->num, -e)};
        part = reduce({part.num * p.num, part.den * p.den});
      }
      acc = add(acc, part);
    }
    return reduce(std::move(acc));
  }

  Frac from_laurent(const MPoly& p) const {
    MPoly::Exps low = p.min_exps();
    MPoly::Exps shift(low.size(), 0);
    MPoly::Exps den_exps(low.size(), 0);
    for (std::size_t i = 0; i < low.size(); ++i) {
      if (low[i] < 0) {
        shift[i] = -low[i];
        den_exps[i] = -low[i];
      }
    }
    MPoly den(vars_.size());
    den.add_term(den_exps, Scalar(1));
    return {p.shifted(shift), den};
  }

  Frac add(const Frac& a, const Frac& b) const {
    if (a.num.is_zero()) return b;
    if (b.num.is_zero()) return a;
    if (a.den.terms() == b.den.terms()) return reduce({a.num + b.num, a.den});
    // Monomial denominators only need the lcm.
    if (a.den.terms().size() == 1 && b.den.terms().size() == 1) {
      const auto& ea = a.den.lead_exps();
      const auto& eb = b.den.lead_exps();
      MPoly::Exps l(ea.size()), fa(ea.size()), fb(ea.size());
      for (std::size_t i = 0; i < ea.size(); ++i) {
        l[i] = std::max(ea[i], eb[i]);
        fa[i] = l[i] - ea[i];
        fb[i] = l[i] - eb[i];
      }
      MPoly den(vars_.size());
      den.add_term(l, a.den.lead_coeff() * b.den.lead_coeff());
      MPoly na = a.num.shifted(fa).scaled(b.den.lead_coeff());
      MPoly nb = b.num.shifted(fb).scaled(a.den.lead_coeff());
      return reduce({na + nb, den});
    }
    return reduce({a.num * b.den + b.num * a.den, a.den * b.den});
  }

  Frac reduce(Frac f) const {
    if (f.num.is_zero()) return {MPoly(vars_.size()), MPoly::constant(vars_.size(), Scalar(1))};
    // Common monomial content.
    MPoly::Exps ln = f.num.min_exps();
    MPoly::Exps ld = f.den.min_exps();
    MPoly::Exps cut(ln.size());
    bool any = false;
    for (std::size_t i = 0; i < ln.size(); ++i) {
      cut[i] = -std::min(ln[i], ld[i]);
      any = any || cut[i] != 0;
    }
    if (any) {
      f.num = f.num.shifted(cut);
      f.den = f.den.shifted(cut);
    }
    if (f.den.terms().size() > 1) {
      if (auto qt = divide_exact(f.num, f.den)) {
        f.num = std::move(*qt);
        f.den = MPoly::constant(vars_.size(), Scalar(1));
      } else if (auto qd = divide_exact(f.den, f.num)) {
        f.den = std::move(*qd);
        f.num = MPoly::constant(vars_.size(), Scalar(1));
      } else {
        // Shared single-variable factors. TODO: a multivariate gcd
        // (primitive PRS) would make the form canonical in all cases.
        auto sn = f.num.support();
        auto sd = f.den.support();
        if (sn.size() == 1 && sd.size() == 1 && sn[0] == sd[0]) {
          MPoly g = univariate_gcd(f.num, f.den, sn[0]);
          if (g.terms().size() > 1 || !g.is_one()) {
            f.num = *divide_exact(f.num, g);
            f.den = *divide_exact(f.den, g);
          }
        }
      }
    }
    Scalar lc = f.den.lead_coeff();
    if (!lc.is_one()) {
      Scalar inv = Scalar(1) / lc;
      f.num = f.num.scaled(inv);
      f.den = f.den.scaled(inv);
    }
    return f;
  }

 private:
  std::vector<std::string> vars_;
  std::map<std::string, std::size_t> index_;
};

inline bool is_rational_tree(const Expr& e) {
  switch (e.op()) {
    case Op::Const:
    case Op::Var:
    case Op::Param:
      return true;
    case Op::Neg:
    case Op::Pow:
      return is_rational_tree(e.lhs());
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
      return is_rational_tree(e.lhs()) && is_rational_tree(e.rhs());
    default:
      return false;
  }
}

}  // namespace detail

/// Canonical ratio of polynomials in q and the parameters, or nullopt when e
/// uses exp/sin/cos/log. Throws ArithmeticError if e divides by an
/// identically vanishing subexpression.
inline std::optional<RationalForm> canonicalize_rational(const Expr& e) {
  if (!detail::is_rational_tree(e)) return std::nullopt;
  std::vector<std::string> vars{"q"};
  for (const auto& p : parameters(e)) vars.push_back(p);
  detail::RationalBuilder builder(vars);
  auto f = builder.convert(detail::expand(e));
  if (!f) return std::nullopt;
  return RationalForm{std::move(vars), std::move(f->num), std::move(f->den)};
}

}  // namespace nfs
