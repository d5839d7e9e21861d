#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace nfs {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// Thrown for arithmetic that has no value (division by an exact zero).
class ArithmeticError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Exact rational of a finite double (every double is a dyadic rational).
inline Rational rational_from_double(double x) {
  if (!std::isfinite(x)) throw ArithmeticError("non-finite value has no rational form");
  if (x == 0.0) return Rational(0);
  int exp2 = 0;
  double mant = std::frexp(x, &exp2);  // x = mant * 2^exp2, 0.5 <= |mant| < 1
  // 53 bits of mantissa fit exactly into an int64.
  auto m = static_cast<std::int64_t>(std::ldexp(mant, 53));
  exp2 -= 53;
  Rational r{BigInt(m)};
  if (exp2 > 0) {
    r *= Rational(BigInt(1) << exp2);
  } else if (exp2 < 0) {
    r /= Rational(BigInt(1) << -exp2);
  }
  return r;
}

/// A complex constant. Exact constants carry Gaussian-rational parts; inexact
/// ones carry a complex<double>. Any arithmetic touching an inexact operand
/// produces an inexact result.
class Scalar {
 public:
  Scalar() = default;
  Scalar(int v) : re_(v) {}        // NOLINT(google-explicit-constructor)
  Scalar(long long v) : re_(v) {}  // NOLINT(google-explicit-constructor)
  Scalar(Rational re, Rational im = 0) : re_(std::move(re)), im_(std::move(im)) {}  // NOLINT

  static Scalar inexact(std::complex<double> z) {
    Scalar s;
    s.exact_ = false;
    s.z_ = z;
    return s;
  }
  static Scalar imaginary_unit() { return Scalar(Rational(0), Rational(1)); }

  /// Exact dyadic image of a complex double.
  static Scalar exact_from(std::complex<double> z) {
    return Scalar(rational_from_double(z.real()), rational_from_double(z.imag()));
  }

  bool is_exact() const { return exact_; }
  const Rational& re() const { return re_; }
  const Rational& im() const { return im_; }

  std::complex<double> value() const {
    if (!exact_) return z_;
    return {static_cast<double>(re_), static_cast<double>(im_)};
  }

  bool is_zero() const { return exact_ ? (re_ == 0 && im_ == 0) : (z_ == std::complex<double>{}); }
  bool is_one() const { return exact_ ? (re_ == 1 && im_ == 0) : (z_ == std::complex<double>{1.0, 0.0}); }
  bool is_real() const { return exact_ ? im_ == 0 : z_.imag() == 0.0; }
  bool is_negative_real() const {
    return exact_ ? (im_ == 0 && re_ < 0) : (z_.imag() == 0.0 && z_.real() < 0.0);
  }
  double magnitude() const { return std::abs(value()); }

  std::optional<long long> as_integer() const {
    if (!exact_ || im_ != 0 || denominator(re_) != 1) return std::nullopt;
    BigInt n = numerator(re_);
    if (n > BigInt(1LL << 40) || n < -BigInt(1LL << 40)) return std::nullopt;
    return static_cast<long long>(n);
  }

  Scalar conj() const {
    if (!exact_) return inexact(std::conj(z_));
    return Scalar(re_, -im_);
  }

  /// Exact copy (inexact values are converted to their dyadic images).
  Scalar to_exact() const { return exact_ ? *this : exact_from(z_); }

  friend Scalar operator+(const Scalar& a, const Scalar& b) {
    if (a.exact_ && b.exact_) return Scalar(a.re_ + b.re_, a.im_ + b.im_);
    return inexact(a.value() + b.value());
  }
  friend Scalar operator-(const Scalar& a, const Scalar& b) {
    if (a.exact_ && b.exact_) return Scalar(a.re_ - b.re_, a.im_ - b.im_);
    return inexact(a.value() - b.value());
  }
  friend Scalar operator-(const Scalar& a) {
    if (a.exact_) return Scalar(-a.re_, -a.im_);
    return inexact(-a.z_);
  }
  friend Scalar operator*(const Scalar& a, const Scalar& b) {
    if (a.exact_ && b.exact_) {
      if (a.im_ == 0 && b.im_ == 0) return Scalar(a.re_ * b.re_);
      return Scalar(a.re_ * b.re_ - a.im_ * b.im_, a.re_ * b.im_ + a.im_ * b.re_);
    }
    return inexact(a.value() * b.value());
  }
  friend Scalar operator/(const Scalar& a, const Scalar& b) {
    if (b.is_zero()) throw ArithmeticError("division by zero constant");
    if (a.exact_ && b.exact_) {
      if (b.im_ == 0) return Scalar(a.re_ / b.re_, a.im_ / b.re_);
      Rational den = b.re_ * b.re_ + b.im_ * b.im_;
      return Scalar((a.re_ * b.re_ + a.im_ * b.im_) / den, (a.im_ * b.re_ - a.re_ * b.im_) / den);
    }
    return inexact(a.value() / b.value());
  }
  Scalar& operator+=(const Scalar& o) { return *this = *this + o; }
  Scalar& operator-=(const Scalar& o) { return *this = *this - o; }
  Scalar& operator*=(const Scalar& o) { return *this = *this * o; }

  friend Scalar pow(const Scalar& base, long long n) {
    if (n < 0) return Scalar(1) / pow(base, -n);
    Scalar result(1);
    Scalar b = base;
    while (n > 0) {
      if (n & 1) result *= b;
      n >>= 1;
      if (n > 0) b = b * b;
    }
    return result;
  }

  /// Bitwise equality of representation (exact == exact by value).
  friend bool operator==(const Scalar& a, const Scalar& b) {
    if (a.exact_ != b.exact_) return false;
    if (a.exact_) return a.re_ == b.re_ && a.im_ == b.im_;
    return a.z_ == b.z_;
  }

  /// Total order used for canonical ordering of constants.
  friend int compare(const Scalar& a, const Scalar& b) {
    if (a.exact_ != b.exact_) return a.exact_ ? -1 : 1;
    if (a.exact_) {
      if (a.re_ != b.re_) return a.re_ < b.re_ ? -1 : 1;
      if (a.im_ != b.im_) return a.im_ < b.im_ ? -1 : 1;
      return 0;
    }
    if (a.z_.real() != b.z_.real()) return a.z_.real() < b.z_.real() ? -1 : 1;
    if (a.z_.imag() != b.z_.imag()) return a.z_.imag() < b.z_.imag() ? -1 : 1;
    return 0;
  }

  /// Parseable text. Non-integers and complex values come out parenthesised
  /// so that they can be embedded in any context.
  std::string to_string() const {
    if (!exact_) {
      std::ostringstream os;
      os.precision(17);
      if (z_.imag() == 0.0) {
        os << z_.real();
        std::string s = os.str();
        return z_.real() < 0 ? "(" + s + ")" : s;
      }
      os << "(" << z_.real() << (z_.imag() < 0 ? "-" : "+") << std::abs(z_.imag()) << "i)";
      return os.str();
    }
    auto rat = [](const Rational& r) {
      std::string s = numerator(r).str();
      if (denominator(r) != 1) s += "/" + denominator(r).str();
      return s;
    };
    auto imag = [](const Rational& r) {
      Rational a = abs(r);
      std::string s = numerator(a).str() + "i";
      if (denominator(a) != 1) s += "/" + denominator(a).str();
      return s;
    };
    if (im_ == 0) {
      std::string s = rat(re_);
      bool bare = re_ >= 0 && denominator(re_) == 1;
      return bare ? s : "(" + s + ")";
    }
    if (re_ == 0) {
      std::string s = imag(im_);
      if (im_ < 0) return "(-" + s + ")";
      return denominator(im_) == 1 ? s : "(" + s + ")";
    }
    return "(" + rat(re_) + (im_ < 0 ? "-" : "+") + imag(im_) + ")";
  }

 private:
  bool exact_ = true;
  Rational re_{0};
  Rational im_{0};
  std::complex<double> z_{};
};

}  // namespace nfs
