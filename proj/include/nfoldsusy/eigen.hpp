#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace nfs {

/// Symmetric tridiagonal matrix: diag[0..n-1], off[0..n-2].
struct SymTridiag {
  std::vector<double> diag;
  std::vector<double> off;
  std::size_t size() const { return diag.size(); }
};

struct EigenPairs {
  std::vector<double> values;               // ascending
  std::vector<std::vector<double>> vectors; // unit 2-norm, largest entry positive
};

namespace detail {

// Number of eigenvalues strictly below x (Sturm count via the LDL^T pivots).
inline std::size_t sturm_count(const SymTridiag& T, double x) {
  const std::size_t n = T.size();
  std::size_t count = 0;
  double d = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double b2 = i == 0 ? 0.0 : T.off[i - 1] * T.off[i - 1];
    d = T.diag[i] - x - (i == 0 ? 0.0 : b2 / d);
    if (d == 0.0) d = -std::numeric_limits<double>::epsilon() * (std::abs(T.diag[i]) + std::abs(x) + 1.0);
    if (d < 0.0) ++count;
  }
  return count;
}

// Solve (T - shift) x = rhs by Gaussian elimination with partial pivoting on
// the tridiagonal band.
inline std::vector<double> shifted_solve(const SymTridiag& T, double shift, std::vector<double> rhs) {
  const std::size_t n = T.size();
  std::vector<double> dl(n, 0.0), d(n), du(n, 0.0), du2(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = T.diag[i] - shift;
    if (i + 1 < n) {
      du[i] = T.off[i];
      dl[i] = T.off[i];
    }
  }
  const double tiny = std::numeric_limits<double>::epsilon() * 1e-3;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::abs(d[i]) >= std::abs(dl[i])) {
      if (d[i] == 0.0) d[i] = tiny;
      double f = dl[i] / d[i];
      d[i + 1] -= f * du[i];
      rhs[i + 1] -= f * rhs[i];
      dl[i] = 0.0;
    } else {
      // Swap rows i and i+1.
      double f = d[i] / dl[i];
      d[i] = dl[i];
      double t = d[i + 1];
      d[i + 1] = du[i] - f * t;
      du[i] = t;
      if (i + 2 < n) {
        du2[i] = du[i + 1];
        du[i + 1] = -f * du2[i];
      }
      std::swap(rhs[i], rhs[i + 1]);
      rhs[i + 1] -= f * rhs[i];
    }
  }
  if (d[n - 1] == 0.0) d[n - 1] = tiny;
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = rhs[i];
    if (i + 1 < n) s -= du[i] * x[i + 1];
    if (i + 2 < n) s -= du2[i] * x[i + 2];
    x[i] = s / d[i];
  }
  return x;
}

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace detail

/// The k smallest eigenpairs by Sturm bisection and inverse iteration.
inline EigenPairs eigen_low(const SymTridiag& T, std::size_t k) {
  const std::size_t n = T.size();
  if (n == 0) throw std::invalid_argument("empty matrix");
  if (T.off.size() + 1 != n) throw std::invalid_argument("off-diagonal must have n-1 entries");
  if (k > n) throw std::invalid_argument("requested more eigenpairs than the matrix dimension");
  // Gershgorin interval.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    double r = (i > 0 ? std::abs(T.off[i - 1]) : 0.0) + (i + 1 < n ? std::abs(T.off[i]) : 0.0);
    lo = std::min(lo, T.diag[i] - r);
    hi = std::max(hi, T.diag[i] + r);
  }
  const double span = std::max(hi - lo, 1e-300);
  lo -= 1e-12 * span + 1e-300;
  hi += 1e-12 * span + 1e-300;

  EigenPairs out;
  double left = lo;
  for (std::size_t i = 0; i < k; ++i) {
    // Smallest x with count(x) > i.
    double a = left, b = hi;
    for (int it = 0; it < 200 && b - a > 4 * std::numeric_limits<double>::epsilon() * std::max({std::abs(a), std::abs(b), 1e-300}); ++it) {
      double m = 0.5 * (a + b);
      if (detail::sturm_count(T, m) > i) {
        b = m;
      } else {
        a = m;
      }
    }
    double lambda = 0.5 * (a + b);
    out.values.push_back(lambda);
    left = a;
  }

  for (std::size_t i = 0; i < k; ++i) {
    double lambda = out.values[i];
    double perturb = 1e-10 * std::max(1.0, std::abs(lambda));
    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = 1.0 + 0.1 * std::sin(0.7 * static_cast<double>(j) + static_cast<double>(i));
    for (int it = 0; it < 4; ++it) {
      v = detail::shifted_solve(T, lambda - perturb, v);
      // Keep clustered eigenvectors apart.
      for (std::size_t p = 0; p < i; ++p) {
        if (std::abs(out.values[p] - lambda) > 1e-6 * std::max(1.0, std::abs(lambda))) continue;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += v[j] * out.vectors[p][j];
        for (std::size_t j = 0; j < n; ++j) v[j] -= dot * out.vectors[p][j];
      }
      double nv = detail::norm2(v);
      for (double& x : v) x /= nv;
    }
    std::size_t big = 0;
    for (std::size_t j = 1; j < n; ++j) {
      if (std::abs(v[j]) > std::abs(v[big])) big = j;
    }
    if (v[big] < 0) {
      for (double& x : v) x = -x;
    }
    out.vectors.push_back(std::move(v));
  }
  return out;
}

}  // namespace nfs
