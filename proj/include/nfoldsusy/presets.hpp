#pragma once

#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "nfoldsusy/diffop.hpp"
#include "nfoldsusy/expr.hpp"
#include "nfoldsusy/susy.hpp"

namespace nfs::presets {

// Family constants parametrize W~ = W - (N-1)E/2; parameters stay symbolic in
// W and E and get their values from the bindings.

struct Quadratic {
  double C1 = -0.1, C2 = 1.0, C3 = 0.0;
};
struct QuarticBreaking {
  double g = 0.1;
};
struct Exponential {
  double E0 = 0.5, C1 = 0.0, C2 = 1.0, C3 = 0.0;
};
struct Periodic {
  double g = 1.0;
};
struct Cubic {
  int nu = 2;
  double C1 = 1.0, C2 = 0.0, C3 = 0.0;
};

using PresetId = std::variant<Quadratic, QuarticBreaking, Exponential, Periodic, Cubic>;

inline std::string name(const PresetId& p) {
  static const char* names[] = {"quadratic", "quartic_breaking", "exponential", "periodic", "cubic"};
  return names[p.index()];
}

namespace detail {

inline Expr par(const char* n) { return Expr::param(n); }
inline Scalar val(double x) { return Scalar::exact_from({x, 0.0}); }

inline FamilySpec from_tilde(int N, const Expr& Wt, const Expr& E, Bindings b, std::vector<double> poles, std::string label) {
  FamilySpec s;
  s.N = N;
  s.E = simplify(E);
  s.W = simplify(Wt + Expr(Scalar(Rational(N - 1, 2))) * E);
  s.bindings = std::move(b);
  s.poles = std::move(poles);
  s.label = std::move(label);
  return s;
}

inline std::string fmt(double x) {
  std::string s = std::to_string(x);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace detail

inline void check(const PresetId& p) {
  if (const auto* c = std::get_if<Cubic>(&p); c && c->nu != 2 && c->nu != -2) {
    throw std::invalid_argument("cubic family requires nu = +2 or nu = -2");
  }
  if (const auto* g = std::get_if<Periodic>(&p); g && g->g == 0.0) throw std::invalid_argument("periodic family requires g != 0");
}

/// FamilySpec of a preset at fold number N.
inline FamilySpec make(const PresetId& p, int N) {
  using detail::par;
  using detail::val;
  check(p);
  if (N < 1) throw std::invalid_argument("fold number N must be >= 1");
  if (const auto* x = std::get_if<Quadratic>(&p)) {
    Expr Wt = par("C1") * q() * q() + par("C2") * q() + par("C3");
    return detail::from_tilde(N, Wt, Expr(0), {{"C1", val(x->C1)}, {"C2", val(x->C2)}, {"C3", val(x->C3)}}, {},
                              "quadratic(" + detail::fmt(x->C1) + "," + detail::fmt(x->C2) + "," + detail::fmt(x->C3) + ")");
  }
  if (const auto* x = std::get_if<QuarticBreaking>(&p)) {
    Expr Wt = -(par("g") * q() * q()) + q();
    return detail::from_tilde(N, Wt, Expr(0), {{"g", val(x->g)}}, {}, "quartic_breaking(" + detail::fmt(x->g) + ")");
  }
  if (const auto* x = std::get_if<Exponential>(&p)) {
    Expr E0 = par("E0");
    Expr Wt = par("C1") * exp(E0 * q()) + par("C2") * exp(-(E0 * q())) + par("C3");
    return detail::from_tilde(N, Wt, E0, {{"E0", val(x->E0)}, {"C1", val(x->C1)}, {"C2", val(x->C2)}, {"C3", val(x->C3)}}, {},
                              "exponential(" + detail::fmt(x->E0) + "," + detail::fmt(x->C1) + "," + detail::fmt(x->C2) + "," +
                                  detail::fmt(x->C3) + ")");
  }
  if (const auto* x = std::get_if<Periodic>(&p)) {
    Expr g = par("g");
    Expr Wt = sin(g * q()) / g;
    Expr E = Expr(Scalar::imaginary_unit()) * g;
    return detail::from_tilde(N, Wt, E, {{"g", val(x->g)}}, {}, "periodic(" + detail::fmt(x->g) + ")");
  }
  const auto& x = std::get<Cubic>(p);
  Expr Wt = par("C1") * pow(q(), 3) + par("C2") * q() + par("C3") / q();
  Expr E = Expr(x.nu - 1) / q();
  return detail::from_tilde(N, Wt, E, {{"C1", val(x.C1)}, {"C2", val(x.C2)}, {"C3", val(x.C3)}}, {0.0},
                            "cubic(" + std::to_string(x.nu) + "," + detail::fmt(x.C1) + "," + detail::fmt(x.C2) + "," + detail::fmt(x.C3) +
                                ")");
}

/// Both factorized supercharges of a cubic model (nu = +2 and nu = -2 for the
/// same W~), which share one Hamiltonian pair. Index 0 is nu = +2.
inline std::vector<DiffOp> supercharge_variants(const PresetId& p, int N) {
  const auto* c = std::get_if<Cubic>(&p);
  if (c == nullptr) throw std::invalid_argument("supercharge variants exist only for the cubic family");
  std::vector<DiffOp> out;
  for (int nu : {2, -2}) {
    Cubic v = *c;
    v.nu = nu;
    out.push_back(build_supercharge(make(v, N)));
  }
  return out;
}

struct PresetInfo {
  std::string name;
  std::string parameters;
  std::string defaults;
  std::string family;
};

inline std::vector<PresetInfo> list() {
  return {
      {"quadratic", "C1, C2, C3", "C1=-0.1 C2=1 C3=0", "E = 0, W = C1 q^2 + C2 q + C3; supercharge (d + W)^N"},
      {"quartic_breaking", "g", "g=0.1", "quadratic with C1 = -g, C2 = 1, C3 = 0; kernel e^{-q^2/2 + g q^3/3} at N=1 is not normalizable"},
      {"exponential", "E0, C1, C2, C3", "E0=0.5 C1=0 C2=1 C3=0",
       "E = E0, W~ = C1 e^{E0 q} + C2 e^{-E0 q} + C3; W = W~ + (N-1)E0/2"},
      {"periodic", "g (g != 0)", "g=1",
       "real form of the exponential family at E0 = i g, C1 = 1/(2ig), C2 = -1/(2ig): W~ = sin(g q)/g, E = i g; period 2 pi/g"},
      {"cubic", "nu in {+2, -2}, C1, C2, C3", "nu=2 C1=1 C2=0 C3=0",
       "E = (nu-1)/q, W~ = C1 q^3 + C2 q + C3/q; pole at q = 0; nu = +2 and -2 give two supercharges for one Hamiltonian pair"},
  };
}

}  // namespace nfs::presets
