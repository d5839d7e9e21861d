#pragma once

#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>

#include "nfoldsusy/expr.hpp"

namespace nfs {

/// Malformed expression text. `offset()` is the byte offset of the problem.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& message)
      : std::runtime_error("syntax error at offset " + std::to_string(offset) + ": " + message),
        offset_(offset),
        message_(message) {}
  std::size_t offset() const { return offset_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t offset_;
  std::string message_;
};

namespace detail {

// Recursive-descent parser. Grammar:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | 'q' | ident | func '(' expr ')' | '(' expr ')'
// Numbers are decimal with an optional exponent and an optional trailing 'i'.
class ExprParser {
 public:
  explicit ExprParser(std::string_view text) : text_(text) {}

  Expr parse_all() {
    Expr e = parse_expr();
    skip_space();
    if (pos_ < text_.size()) fail(pos_, std::string("unexpected '") + text_[pos_] + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(std::size_t at, const std::string& msg) const { throw ParseError(at, msg); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + parse_term();
      } else if (accept('-')) {
        lhs = lhs - parse_term();
      } else {
        return lhs;
      }
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = lhs * parse_unary();
      } else if (accept('/')) {
        skip_space();
        std::size_t at = pos_;
        Expr rhs = parse_unary();
        if (rhs.is_zero()) fail(at, "division by the constant zero");
        lhs = lhs / rhs;
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return -parse_unary();
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (!accept('^')) return base;
    skip_space();
    std::size_t at = pos_;
    Expr exponent = parse_unary();
    if (!exponent.is_constant()) fail(at, "exponent must be an integer constant");
    auto n = exponent.value().as_integer();
    if (!n || *n > (1 << 20) || *n < -(1 << 20)) fail(at, "exponent must be an integer constant");
    if (base.is_zero() && *n < 0) fail(at, "negative power of zero");
    return pow(base, static_cast<int>(*n));
  }

  Expr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail(pos_, "unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = parse_expr();
      skip_space();
      if (!accept(')')) fail(pos_, "expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(pos_, std::string("unexpected '") + c + "'");
  }

  Expr parse_number() {
    std::size_t start = pos_;
    BigInt mantissa = 0;
    long long scale = 0;  // value = mantissa * 10^scale
    bool digits = false;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      mantissa = mantissa * 10 + (text_[pos_++] - '0');
      digits = true;
    }
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        mantissa = mantissa * 10 + (text_[pos_++] - '0');
        --scale;
        digits = true;
      }
    }
    if (!digits) fail(start, "malformed number");
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      int sign = 1;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        sign = text_[pos_] == '-' ? -1 : 1;
        ++pos_;
      }
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        long long e = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
          e = e * 10 + (text_[pos_++] - '0');
          if (e > 4000) fail(save, "exponent out of range");
        }
        scale += sign * e;
      } else {
        pos_ = save;  // 'e' starts an identifier; leave it for the caller to reject
      }
    }
    Rational value{mantissa};
    if (scale > 0) value *= Rational(boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(scale)));
    if (scale < 0) value /= Rational(boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(-scale)));
    if (pos_ < text_.size() && text_[pos_] == 'i' &&
        !(pos_ + 1 < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_ + 1])) || text_[pos_ + 1] == '_'))) {
      ++pos_;
      return Expr(Scalar(Rational(0), value));
    }
    return Expr(Scalar(value));
  }

  Expr parse_identifier() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    std::string ident(text_.substr(start, pos_ - start));
    skip_space();
    bool call = pos_ < text_.size() && text_[pos_] == '(';
    if (call) {
      Expr (*fn)(const Expr&) = nullptr;
      if (ident == "exp") fn = &nfs::exp;
      if (ident == "sin") fn = &nfs::sin;
      if (ident == "cos") fn = &nfs::cos;
      if (ident == "log") fn = &nfs::log;
      if (fn == nullptr) fail(start, "unknown function '" + ident + "'");
      ++pos_;
      Expr arg = parse_expr();
      if (!accept(')')) fail(pos_, "expected ')'");
      return fn(arg);
    }
    if (ident == "q") return q();
    if (ident == "exp" || ident == "sin" || ident == "cos" || ident == "log") {
      fail(start, "function '" + ident + "' needs an argument");
    }
    return Expr::param(ident);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parse expression text; see detail::ExprParser for the grammar.
inline Expr parse(std::string_view text) { return detail::ExprParser(text).parse_all(); }

}  // namespace nfs
