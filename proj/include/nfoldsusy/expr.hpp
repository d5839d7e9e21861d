#pragma once

#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

#include "nfoldsusy/scalar.hpp"

namespace nfs {

enum class Op : unsigned char { Const, Var, Param, Neg, Add, Sub, Mul, Div, Pow, Exp, Sin, Cos, Log };

/// Parameter values, keyed by name.
using Bindings = std::map<std::string, Scalar>;

/// Evaluation failure: an unbound parameter or a pole.
class EvalError : public std::runtime_error {
 public:
  enum class Kind { UnboundParameter, Pole };
  EvalError(Kind kind, std::string what, std::string subexpr)
      : std::runtime_error(std::move(what)), kind_(kind), subexpr_(std::move(subexpr)) {}
  Kind kind() const { return kind_; }
  const std::string& subexpression() const { return subexpr_; }

 private:
  Kind kind_;
  std::string subexpr_;
};

class Expr;
std::string to_string(const Expr& e);

/// Immutable expression in the single variable q. Copies share structure.
class Expr {
 public:
  struct Node;

  Expr() : Expr(Scalar(0)) {}
  Expr(int v) : Expr(Scalar(v)) {}  // NOLINT(google-explicit-constructor)
  Expr(Scalar s);                   // NOLINT(google-explicit-constructor)

  static Expr var();
  static Expr param(std::string name);

  Op op() const;
  const Scalar& value() const;
  const std::string& name() const;
  int exponent() const;
  /// Operand of unary nodes, left operand of binary ones, base of powers.
  const Expr& lhs() const;
  const Expr& rhs() const;
  std::size_t hash() const;
  std::size_t size() const;

  bool is_constant() const { return op() == Op::Const; }
  bool is_zero() const { return is_constant() && value().is_zero(); }
  bool is_one() const { return is_constant() && value().is_one(); }
  bool same_node(const Expr& o) const { return node_ == o.node_; }

  static Expr make_unary(Op op, Expr a);
  static Expr make_binary(Op op, Expr a, Expr b);
  static Expr make_pow(Expr base, int exponent);

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

struct Expr::Node {
  Op op = Op::Const;
  Scalar value;
  std::string name;
  int exponent = 0;
  Expr a{std::shared_ptr<const Node>{}};
  Expr b{std::shared_ptr<const Node>{}};
  std::size_t hash = 0;
  std::size_t size = 1;
};

namespace detail {

inline std::size_t mix(std::size_t h, std::size_t v) {
  return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

inline std::size_t scalar_hash(const Scalar& s) {
  if (!s.is_exact()) {
    auto z = s.value();
    return mix(std::hash<double>{}(z.real()), std::hash<double>{}(z.imag()));
  }
  return mix(std::hash<double>{}(static_cast<double>(s.re())), std::hash<double>{}(static_cast<double>(s.im())) + 17);
}

// Leaf nodes shared by every expression.
inline const std::shared_ptr<const Expr::Node>& var_node() {
  static const auto n = [] {
    auto node = std::make_shared<Expr::Node>();
    node->op = Op::Var;
    node->hash = 0x51ed270b27a1c0deULL;
    return std::shared_ptr<const Expr::Node>(node);
  }();
  return n;
}

}  // namespace detail

inline Expr::Expr(Scalar s) {
  auto node = std::make_shared<Node>();
  node->value = std::move(s);
  node->hash = detail::mix(1, detail::scalar_hash(node->value));
  node_ = std::move(node);
}

inline Expr Expr::var() { return Expr(detail::var_node()); }

inline Expr Expr::param(std::string name) {
  if (name.empty()) throw std::invalid_argument("parameter name must be non-empty");
  auto node = std::make_shared<Node>();
  node->op = Op::Param;
  node->name = std::move(name);
  node->hash = detail::mix(3, std::hash<std::string>{}(node->name));
  return Expr(std::shared_ptr<const Node>(std::move(node)));
}

inline Op Expr::op() const { return node_->op; }
inline const Scalar& Expr::value() const { return node_->value; }
inline const std::string& Expr::name() const { return node_->name; }
inline int Expr::exponent() const { return node_->exponent; }
inline const Expr& Expr::lhs() const { return node_->a; }
inline const Expr& Expr::rhs() const { return node_->b; }
inline std::size_t Expr::hash() const { return node_->hash; }
inline std::size_t Expr::size() const { return node_->size; }

inline Expr Expr::make_unary(Op op, Expr a) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->hash = detail::mix(static_cast<std::size_t>(op) * 7919, a.hash());
  node->size = a.size() + 1;
  node->a = std::move(a);
  return Expr(std::shared_ptr<const Node>(std::move(node)));
}

inline Expr Expr::make_binary(Op op, Expr a, Expr b) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->hash = detail::mix(detail::mix(static_cast<std::size_t>(op) * 104729, a.hash()), b.hash());
  node->size = a.size() + b.size() + 1;
  node->a = std::move(a);
  node->b = std::move(b);
  return Expr(std::shared_ptr<const Node>(std::move(node)));
}

inline Expr Expr::make_pow(Expr base, int exponent) {
  auto node = std::make_shared<Node>();
  node->op = Op::Pow;
  node->exponent = exponent;
  node->hash = detail::mix(detail::mix(0xabcdef, base.hash()), static_cast<std::size_t>(exponent + 1000003));
  node->size = base.size() + 1;
  node->a = std::move(base);
  return Expr(std::shared_ptr<const Node>(std::move(node)));
}

// ---------------------------------------------------------------------------
// Structural order and equality.

/// Total structural order: constants < q < parameters < compound nodes.
inline int compare(const Expr& x, const Expr& y) {
  if (x.same_node(y)) return 0;
  if (x.op() != y.op()) return static_cast<int>(x.op()) < static_cast<int>(y.op()) ? -1 : 1;
  switch (x.op()) {
    case Op::Const:
      return compare(x.value(), y.value());
    case Op::Var:
      return 0;
    case Op::Param:
      return x.name() < y.name() ? -1 : (x.name() == y.name() ? 0 : 1);
    case Op::Pow:
      if (x.exponent() != y.exponent()) return x.exponent() < y.exponent() ? -1 : 1;
      return compare(x.lhs(), y.lhs());
    case Op::Neg:
    case Op::Exp:
    case Op::Sin:
    case Op::Cos:
    case Op::Log:
      return compare(x.lhs(), y.lhs());
    default: {
      int c = compare(x.lhs(), y.lhs());
      if (c != 0) return c;
      return compare(x.rhs(), y.rhs());
    }
  }
}

inline bool structurally_equal(const Expr& x, const Expr& y) {
  if (x.same_node(y)) return true;
  if (x.hash() != y.hash() || x.size() != y.size()) return false;
  return compare(x, y) == 0;
}

// ---------------------------------------------------------------------------
// Folding constructors. These perform constant folding and 0/1 elimination
// only; like-term collection lives in simplify().

inline Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr(-a.value());
  if (a.op() == Op::Neg) return a.lhs();
  return Expr::make_unary(Op::Neg, a);
}

inline Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.value() + b.value());
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (b.op() == Op::Neg) return Expr::make_binary(Op::Sub, a, b.lhs());
  return Expr::make_binary(Op::Add, a, b);
}

inline Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.value() - b.value());
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  if (b.op() == Op::Neg) return Expr::make_binary(Op::Add, a, b.lhs());
  return Expr::make_binary(Op::Sub, a, b);
}

inline Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.value() * b.value());
  if (a.is_zero() || b.is_zero()) return Expr(0);
  if (a.is_one()) return b;
  if (b.is_one()) return a;
  if (a.is_constant() && a.value() == Scalar(-1)) return -b;
  if (b.is_constant() && b.value() == Scalar(-1)) return -a;
  return Expr::make_binary(Op::Mul, a, b);
}

inline Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_zero()) throw ArithmeticError("division by the zero expression");
  if (a.is_constant() && b.is_constant()) return Expr(a.value() / b.value());
  if (b.is_one()) return a;
  if (a.is_zero()) return Expr(0);
  return Expr::make_binary(Op::Div, a, b);
}

inline Expr& operator+=(Expr& a, const Expr& b) { return a = a + b; }
inline Expr& operator-=(Expr& a, const Expr& b) { return a = a - b; }
inline Expr& operator*=(Expr& a, const Expr& b) { return a = a * b; }

inline Expr pow(const Expr& base, int n) {
  if (n == 0) return Expr(1);
  if (n == 1) return base;
  if (base.is_constant() && !(base.value().is_zero() && n < 0)) return Expr(pow(base.value(), static_cast<long long>(n)));
  if (base.op() == Op::Pow) {
    long long m = static_cast<long long>(base.exponent()) * n;
    if (m < (1 << 20) && m > -(1 << 20)) return pow(base.lhs(), static_cast<int>(m));
  }
  return Expr::make_pow(base, n);
}

inline Expr exp(const Expr& a) {
  if (a.is_zero()) return Expr(1);
  return Expr::make_unary(Op::Exp, a);
}
inline Expr sin(const Expr& a) {
  if (a.is_zero()) return Expr(0);
  return Expr::make_unary(Op::Sin, a);
}
inline Expr cos(const Expr& a) {
  if (a.is_zero()) return Expr(1);
  return Expr::make_unary(Op::Cos, a);
}
inline Expr log(const Expr& a) {
  if (a.is_one()) return Expr(0);
  return Expr::make_unary(Op::Log, a);
}

inline const Expr& q() {
  static const Expr v = Expr::var();
  return v;
}

// ---------------------------------------------------------------------------
// Printing. The output re-parses to an expression that evaluates identically.

namespace detail {

// Binding strength used to decide parenthesisation.
inline int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Add:
    case Op::Sub:
      return 1;
    case Op::Mul:
    case Op::Div:
      return 2;
    case Op::Neg:
      return 3;
    case Op::Pow:
      return 4;
    default:
      return 5;
  }
}

inline void print(const Expr& e, std::string& out);

inline void print_wrapped(const Expr& e, int min_prec, std::string& out) {
  if (precedence(e) < min_prec) {
    out += '(';
    print(e, out);
    out += ')';
  } else {
    print(e, out);
  }
}

inline const char* function_name(Op op) {
  switch (op) {
    case Op::Exp:
      return "exp";
    case Op::Sin:
      return "sin";
    case Op::Cos:
      return "cos";
    case Op::Log:
      return "log";
    default:
      return "?";
  }
}

inline void print(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::Const:
      out += e.value().to_string();
      return;
    case Op::Var:
      out += 'q';
      return;
    case Op::Param:
      out += e.name();
      return;
    case Op::Neg:
      out += '-';
      print_wrapped(e.lhs(), 3, out);
      return;
    case Op::Add:
    case Op::Sub:
      print_wrapped(e.lhs(), 1, out);
      out += e.op() == Op::Add ? " + " : " - ";
      print_wrapped(e.rhs(), 2, out);
      return;
    case Op::Mul:
    case Op::Div:
      print_wrapped(e.lhs(), 2, out);
      out += e.op() == Op::Mul ? "*" : "/";
      print_wrapped(e.rhs(), 3, out);
      return;
    case Op::Pow:
      print_wrapped(e.lhs(), 5, out);
      out += '^';
      if (e.exponent() < 0) {
        out += "(" + std::to_string(e.exponent()) + ")";
      } else {
        out += std::to_string(e.exponent());
      }
      return;
    case Op::Exp:
    case Op::Sin:
    case Op::Cos:
    case Op::Log:
      out += function_name(e.op());
      out += '(';
      print(e.lhs(), out);
      out += ')';
      return;
  }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print(e, out);
  return out;
}

inline std::ostream& operator<<(std::ostream& os, const Expr& e) { return os << to_string(e); }

// ---------------------------------------------------------------------------
// Evaluation.

namespace detail {

inline std::complex<double> ipow(std::complex<double> base, int n) {
  using C = std::complex<double>;
  C result{1.0, 0.0};
  C b = n < 0 ? C{1.0, 0.0} / base : base;
  unsigned m = static_cast<unsigned>(n < 0 ? -n : n);
  while (m > 0) {
    if (m & 1U) result *= b;
    m >>= 1U;
    if (m > 0) b *= b;
  }
  return result;
}

inline std::complex<double> eval(const Expr& e, std::complex<double> q0, const std::map<std::string, std::complex<double>>& env) {
  using C = std::complex<double>;
  switch (e.op()) {
    case Op::Const:
      return e.value().value();
    case Op::Var:
      return q0;
    case Op::Param: {
      auto it = env.find(e.name());
      if (it == env.end()) {
        throw EvalError(EvalError::Kind::UnboundParameter, "unbound parameter '" + e.name() + "'", e.name());
      }
      return it->second;
    }
    case Op::Neg:
      return -eval(e.lhs(), q0, env);
    case Op::Add:
      return eval(e.lhs(), q0, env) + eval(e.rhs(), q0, env);
    case Op::Sub:
      return eval(e.lhs(), q0, env) - eval(e.rhs(), q0, env);
    case Op::Mul:
      return eval(e.lhs(), q0, env) * eval(e.rhs(), q0, env);
    case Op::Div: {
      C den = eval(e.rhs(), q0, env);
      if (den == C{}) throw EvalError(EvalError::Kind::Pole, "division by zero in " + to_string(e), to_string(e.rhs()));
      return eval(e.lhs(), q0, env) / den;
    }
    case Op::Pow: {
      C base = eval(e.lhs(), q0, env);
      int n = e.exponent();
      if (n < 0 && base == C{}) {
        throw EvalError(EvalError::Kind::Pole, "negative power of zero in " + to_string(e), to_string(e.lhs()));
      }
      return ipow(base, n);
    }
    case Op::Exp:
      return std::exp(eval(e.lhs(), q0, env));
    case Op::Sin:
      return std::sin(eval(e.lhs(), q0, env));
    case Op::Cos:
      return std::cos(eval(e.lhs(), q0, env));
    case Op::Log: {
      C a = eval(e.lhs(), q0, env);
      if (a == C{}) throw EvalError(EvalError::Kind::Pole, "log of zero in " + to_string(e), to_string(e.lhs()));
      return std::log(a);
    }
  }
  return {};
}

// Value together with a magnitude scale: the value the expression would have
// if every sum were replaced by a sum of absolute values. Used to judge how
// much cancellation a computed residual has gone through.
struct Scaled {
  std::complex<double> value;
  double scale;
};

inline Scaled eval_scaled(const Expr& e, std::complex<double> q0, const std::map<std::string, std::complex<double>>& env) {
  switch (e.op()) {
    case Op::Const:
    case Op::Var:
    case Op::Param: {
      auto v = eval(e, q0, env);
      return {v, std::abs(v)};
    }
    case Op::Neg: {
      auto a = eval_scaled(e.lhs(), q0, env);
      return {-a.value, a.scale};
    }
    case Op::Add:
    case Op::Sub: {
      auto a = eval_scaled(e.lhs(), q0, env);
      auto b = eval_scaled(e.rhs(), q0, env);
      return {e.op() == Op::Add ? a.value + b.value : a.value - b.value, a.scale + b.scale};
    }
    case Op::Mul: {
      auto a = eval_scaled(e.lhs(), q0, env);
      auto b = eval_scaled(e.rhs(), q0, env);
      return {a.value * b.value, a.scale * b.scale};
    }
    case Op::Div: {
      auto a = eval_scaled(e.lhs(), q0, env);
      auto b = eval_scaled(e.rhs(), q0, env);
      if (b.value == std::complex<double>{}) {
        throw EvalError(EvalError::Kind::Pole, "division by zero in " + to_string(e), to_string(e.rhs()));
      }
      double den = std::abs(b.value);
      // A denominator that itself cancelled strongly inflates the error.
      double inflation = b.scale / den;
      return {a.value / b.value, a.scale / den * inflation};
    }
    case Op::Pow: {
      auto a = eval_scaled(e.lhs(), q0, env);
      int n = e.exponent();
      if (n < 0 && a.value == std::complex<double>{}) {
        throw EvalError(EvalError::Kind::Pole, "negative power of zero in " + to_string(e), to_string(e.lhs()));
      }
      std::complex<double> v = ipow(a.value, n);
      double s = n >= 0 ? std::pow(a.scale, n) : std::abs(v) * std::pow(a.scale / std::max(std::abs(a.value), 1e-300), -n);
      return {v, s};
    }
    case Op::Exp:
    case Op::Sin:
    case Op::Cos: {
      auto a = eval_scaled(e.lhs(), q0, env);
      std::complex<double> v = e.op() == Op::Exp ? std::exp(a.value) : e.op() == Op::Sin ? std::sin(a.value) : std::cos(a.value);
      double mag = e.op() == Op::Exp ? std::abs(v) : std::max(1.0, std::abs(v));
      return {v, mag * std::max(1.0, a.scale)};
    }
    case Op::Log: {
      auto a = eval_scaled(e.lhs(), q0, env);
      if (a.value == std::complex<double>{}) {
        throw EvalError(EvalError::Kind::Pole, "log of zero in " + to_string(e), to_string(e.lhs()));
      }
      std::complex<double> v = std::log(a.value);
      return {v, std::max(std::abs(v), a.scale / std::max(std::abs(a.value), 1e-300))};
    }
  }
  return {};
}

inline std::map<std::string, std::complex<double>> numeric_env(const Bindings& b) {
  std::map<std::string, std::complex<double>> env;
  for (const auto& [k, v] : b) env.emplace(k, v.value());
  return env;
}

}  // namespace detail

/// Value of e at q = q0 with parameters from `bindings`.
inline std::complex<double> evaluate(const Expr& e, std::complex<double> q0, const Bindings& bindings = {}) {
  return detail::eval(e, q0, detail::numeric_env(bindings));
}

// ---------------------------------------------------------------------------
// Structural transforms.

/// d/dq by the standard rules; parameters are constants.
inline Expr differentiate(const Expr& e) {
  switch (e.op()) {
    case Op::Const:
    case Op::Param:
      return Expr(0);
    case Op::Var:
      return Expr(1);
    case Op::Neg:
      return -differentiate(e.lhs());
    case Op::Add:
      return differentiate(e.lhs()) + differentiate(e.rhs());
    case Op::Sub:
      return differentiate(e.lhs()) - differentiate(e.rhs());
    case Op::Mul:
      return differentiate(e.lhs()) * e.rhs() + e.lhs() * differentiate(e.rhs());
    case Op::Div: {
      const Expr& f = e.lhs();
      const Expr& g = e.rhs();
      return differentiate(f) / g - f * differentiate(g) / pow(g, 2);
    }
    case Op::Pow: {
      int n = e.exponent();
      return Expr(n) * pow(e.lhs(), n - 1) * differentiate(e.lhs());
    }
    case Op::Exp:
      return e * differentiate(e.lhs());
    case Op::Sin:
      return cos(e.lhs()) * differentiate(e.lhs());
    case Op::Cos:
      return -(sin(e.lhs()) * differentiate(e.lhs()));
    case Op::Log:
      return differentiate(e.lhs()) / e.lhs();
  }
  return Expr(0);
}

inline Expr differentiate(const Expr& e, int order) {
  Expr d = e;
  for (int k = 0; k < order; ++k) d = differentiate(d);
  return d;
}

/// Rebuild e bottom-up, replacing leaves through `leaf`.
inline Expr map_leaves(const Expr& e, const std::function<Expr(const Expr&)>& leaf) {
  switch (e.op()) {
    case Op::Const:
    case Op::Var:
    case Op::Param:
      return leaf(e);
    case Op::Neg:
      return -map_leaves(e.lhs(), leaf);
    case Op::Add:
      return map_leaves(e.lhs(), leaf) + map_leaves(e.rhs(), leaf);
    case Op::Sub:
      return map_leaves(e.lhs(), leaf) - map_leaves(e.rhs(), leaf);
    case Op::Mul:
      return map_leaves(e.lhs(), leaf) * map_leaves(e.rhs(), leaf);
    case Op::Div:
      return map_leaves(e.lhs(), leaf) / map_leaves(e.rhs(), leaf);
    case Op::Pow:
      return pow(map_leaves(e.lhs(), leaf), e.exponent());
    case Op::Exp:
      return exp(map_leaves(e.lhs(), leaf));
    case Op::Sin:
      return sin(map_leaves(e.lhs(), leaf));
    case Op::Cos:
      return cos(map_leaves(e.lhs(), leaf));
    case Op::Log:
      return log(map_leaves(e.lhs(), leaf));
  }
  return e;
}

/// Complex conjugate for real q and real parameters.
inline Expr conj(const Expr& e) {
  return map_leaves(e, [](const Expr& leaf) { return leaf.is_constant() ? Expr(leaf.value().conj()) : leaf; });
}

/// Replace bound parameters by their (exact) values.
inline Expr substitute(const Expr& e, const Bindings& bindings) {
  return map_leaves(e, [&](const Expr& leaf) {
    if (leaf.op() == Op::Param) {
      auto it = bindings.find(leaf.name());
      if (it != bindings.end()) return Expr(it->second.to_exact());
    }
    return leaf;
  });
}

/// Replace q by another expression.
inline Expr substitute_q(const Expr& e, const Expr& replacement) {
  return map_leaves(e, [&](const Expr& leaf) { return leaf.op() == Op::Var ? replacement : leaf; });
}

inline void collect_parameters(const Expr& e, std::set<std::string>& out) {
  switch (e.op()) {
    case Op::Param:
      out.insert(e.name());
      return;
    case Op::Const:
    case Op::Var:
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
      collect_parameters(e.lhs(), out);
      collect_parameters(e.rhs(), out);
      return;
    default:
      collect_parameters(e.lhs(), out);
  }
}

inline std::set<std::string> parameters(const Expr& e) {
  std::set<std::string> out;
  collect_parameters(e, out);
  return out;
}

inline bool depends_on_q(const Expr& e) {
  switch (e.op()) {
    case Op::Var:
      return true;
    case Op::Const:
    case Op::Param:
      return false;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
      return depends_on_q(e.lhs()) || depends_on_q(e.rhs());
    default:
      return depends_on_q(e.lhs());
  }
}

}  // namespace nfs
