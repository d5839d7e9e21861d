#pragma once

// Batch runner: TOML config in, JSON report and exit code out. Needs the
// vendored toml++ and nlohmann/json headers on the include path.

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "nfoldsusy/parse.hpp"
#include "nfoldsusy/presets.hpp"
#include "nfoldsusy/spectral.hpp"
#include "nfoldsusy/susy.hpp"

namespace nfs::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Bad config, unknown command or malformed expression: exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command { Check, Intertwine, Mother, Chain, Spectrum, Kernels };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::Check:
      return "check";
    case Command::Intertwine:
      return "intertwine";
    case Command::Mother:
      return "mother";
    case Command::Chain:
      return "chain";
    case Command::Spectrum:
      return "spectrum";
    case Command::Kernels:
      return "kernels";
  }
  return "?";
}

inline Command parse_command(std::string_view s) {
  for (Command c : {Command::Check, Command::Intertwine, Command::Mother, Command::Chain, Command::Spectrum, Command::Kernels}) {
    if (s == to_string(c)) return c;
  }
  throw ConfigError("unknown command '" + std::string(s) + "' (expected check, intertwine, mother, chain, spectrum or kernels)");
}

struct FamilyConfig {
  std::string preset;                    // empty for a custom W/E pair
  std::map<std::string, double> params;  // preset constants or custom bindings
  std::string W_text, E_text;
  Expr W, E;                             // parsed once for the whole N range
};

struct SpectralConfig {
  std::optional<double> a, b;  // defaults depend on the family
  int n = 2000;
  int levels = 4;
  SpectralOptions options;
};

struct ChainConfig {
  std::vector<std::string> offsets;  // empty: matched constant offsets
  std::optional<std::string> c1;     // generalized step constant to test
};

struct RunConfig {
  FamilyConfig family;
  int N_min = 1;
  int N_max = 1;
  SamplingPolicy verify;
  SpectralConfig spectral;
  ChainConfig chain;
  std::string out;
};

namespace detail {

inline Expr parse_field(const std::string& text, const char* key) {
  try {
    return nfs::parse(text);
  } catch (const ParseError& e) {
    throw ConfigError(std::string(key) + ": parse error at offset " + std::to_string(e.offset()) + ": " + e.message() + " in \"" + text + "\"");
  }
}

inline double number(const toml::node& n, const std::string& key) {
  if (auto v = n.value<double>()) return *v;
  throw ConfigError(key + " must be a number");
}

inline std::optional<double> opt_number(const toml::table& t, const char* table, const char* key) {
  const toml::node* n = t.at_path(std::string(table) + "." + key).node();
  if (n == nullptr) return std::nullopt;
  return number(*n, std::string(table) + "." + key);
}

inline std::optional<long long> opt_integer(const toml::table& t, const char* table, const char* key) {
  const toml::node* n = t.at_path(std::string(table) + "." + key).node();
  if (n == nullptr) return std::nullopt;
  if (auto v = n->value_exact<int64_t>()) return *v;
  throw ConfigError(std::string(table) + "." + key + " must be an integer");
}

inline std::optional<std::string> opt_string(const toml::table& t, const char* table, const char* key) {
  const toml::node* n = t.at_path(std::string(table) + "." + key).node();
  if (n == nullptr) return std::nullopt;
  if (auto v = n->value_exact<std::string>()) return *v;
  throw ConfigError(std::string(table) + "." + key + " must be a string");
}

inline const std::map<std::string, std::vector<std::string>>& preset_params() {
  static const std::map<std::string, std::vector<std::string>> m = {
      {"quadratic", {"C1", "C2", "C3"}},
      {"quartic_breaking", {"g"}},
      {"exponential", {"E0", "C1", "C2", "C3"}},
      {"periodic", {"g"}},
      {"cubic", {"nu", "C1", "C2", "C3"}},
  };
  return m;
}

inline void check_keys(const toml::table& t, const char* section, const std::vector<std::string>& allowed) {
  for (const auto& [k, v] : t) {
    (void)v;
    if (std::find(allowed.begin(), allowed.end(), std::string(k.str())) == allowed.end()) {
      throw ConfigError("unknown key " + std::string(section) + "." + std::string(k.str()));
    }
  }
}

}  // namespace detail

/// RunConfig from TOML text. Keys: family.preset|W|E|params.*,
/// fold.N|N_min|N_max, verify.samples|tol|seed|poles,
/// spectral.a|b|n|levels|kernel_tol|pair_tol, chain.offsets|c1.
inline RunConfig parse_config(std::string_view text) {
  toml::table t;
  try {
    t = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config is not valid TOML: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(os.str());
  }
  detail::check_keys(t, "", {"family", "fold", "verify", "spectral", "chain", "output"});
  RunConfig c;

  const toml::table* fam = t["family"].as_table();
  if (fam == nullptr) throw ConfigError("missing [family] table");
  detail::check_keys(*fam, "family", {"preset", "W", "E", "params"});
  auto preset = detail::opt_string(t, "family", "preset");
  auto W = detail::opt_string(t, "family", "W");
  auto E = detail::opt_string(t, "family", "E");
  if (const toml::table* p = (*fam)["params"].as_table()) {
    for (const auto& [k, v] : *p) c.family.params[std::string(k.str())] = detail::number(v, "family.params." + std::string(k.str()));
  } else if ((*fam)["params"]) {
    throw ConfigError("family.params must be a table");
  }
  if (preset) {
    if (W || E) throw ConfigError("family.preset cannot be combined with family.W / family.E");
    auto it = detail::preset_params().find(*preset);
    if (it == detail::preset_params().end()) throw ConfigError("unknown preset '" + *preset + "'");
    for (const auto& [k, v] : c.family.params) {
      (void)v;
      if (std::find(it->second.begin(), it->second.end(), k) == it->second.end()) {
        throw ConfigError("preset " + *preset + " has no parameter '" + k + "'");
      }
    }
    c.family.preset = *preset;
  } else {
    if (!W) throw ConfigError("family needs either preset or W");
    c.family.W_text = *W;
    c.family.E_text = E.value_or("0");
    c.family.W = detail::parse_field(c.family.W_text, "family.W");
    c.family.E = detail::parse_field(c.family.E_text, "family.E");
    std::set<std::string> names = parameters(c.family.W);
    for (const auto& n : parameters(c.family.E)) names.insert(n);
    for (const auto& n : names) {
      if (!c.family.params.count(n)) throw ConfigError("parameter '" + n + "' has no value in family.params");
    }
  }

  if (const toml::table* fold = t["fold"].as_table()) {
    detail::check_keys(*fold, "fold", {"N", "N_min", "N_max"});
    auto N = detail::opt_integer(t, "fold", "N");
    auto lo = detail::opt_integer(t, "fold", "N_min");
    auto hi = detail::opt_integer(t, "fold", "N_max");
    if (N && (lo || hi)) throw ConfigError("fold.N cannot be combined with fold.N_min / fold.N_max");
    long long a = N ? *N : lo.value_or(1), b = N ? *N : hi.value_or(a);
    if (a < 1 || b < a || b > 64) throw ConfigError("fold range must satisfy 1 <= N_min <= N_max <= 64");
    c.N_min = static_cast<int>(a);
    c.N_max = static_cast<int>(b);
  }

  if (const toml::table* v = t["verify"].as_table()) {
    detail::check_keys(*v, "verify", {"samples", "tol", "seed", "poles"});
    if (auto s = detail::opt_integer(t, "verify", "samples")) {
      if (*s < 1 || *s > 100000) throw ConfigError("verify.samples must be in 1..100000");
      c.verify.samples = static_cast<int>(*s);
    }
    if (auto tol = detail::opt_number(t, "verify", "tol")) {
      if (!(*tol > 0)) throw ConfigError("verify.tol must be > 0");
      c.verify.atol = c.verify.rtol = *tol;
    }
    if (auto s = detail::opt_integer(t, "verify", "seed")) {
      if (*s < 0) throw ConfigError("verify.seed must be >= 0");
      c.verify.seed = static_cast<std::uint64_t>(*s);
    }
    if (const toml::node* p = t.at_path("verify.poles").node()) {
      const toml::array* arr = p->as_array();
      if (arr == nullptr) throw ConfigError("verify.poles must be an array of numbers");
      for (const auto& x : *arr) c.verify.poles.push_back(detail::number(x, "verify.poles"));
    }
  }

  if (const toml::table* s = t["spectral"].as_table()) {
    detail::check_keys(*s, "spectral", {"a", "b", "n", "levels", "kernel_tol", "pair_tol"});
    c.spectral.a = detail::opt_number(t, "spectral", "a");
    c.spectral.b = detail::opt_number(t, "spectral", "b");
    if (auto n = detail::opt_integer(t, "spectral", "n")) {
      if (*n < 16 || *n > 200000) throw ConfigError("spectral.n must be in 16..200000");
      c.spectral.n = static_cast<int>(*n);
    }
    if (auto l = detail::opt_integer(t, "spectral", "levels")) {
      if (*l < 1 || *l > c.spectral.n) throw ConfigError("spectral.levels must be in 1..n");
      c.spectral.levels = static_cast<int>(*l);
    }
    if (auto k = detail::opt_number(t, "spectral", "kernel_tol")) {
      if (!(*k > 0)) throw ConfigError("spectral.kernel_tol must be > 0");
      c.spectral.options.kernel_tol = *k;
    }
    if (auto p = detail::opt_number(t, "spectral", "pair_tol")) {
      if (!(*p > 0)) throw ConfigError("spectral.pair_tol must be > 0");
      c.spectral.options.pair_tol = *p;
    }
    if (c.spectral.a && c.spectral.b && !(*c.spectral.a < *c.spectral.b)) throw ConfigError("spectral.a must be < spectral.b");
  }

  if (const toml::table* ch = t["chain"].as_table()) {
    detail::check_keys(*ch, "chain", {"offsets", "c1"});
    if (const toml::node* o = t.at_path("chain.offsets").node()) {
      const toml::array* arr = o->as_array();
      if (arr == nullptr) throw ConfigError("chain.offsets must be an array of expression strings");
      for (const auto& x : *arr) {
        auto s = x.value_exact<std::string>();
        if (!s) throw ConfigError("chain.offsets must be an array of expression strings");
        detail::parse_field(*s, "chain.offsets");
        c.chain.offsets.push_back(*s);
      }
    }
    if (auto s = detail::opt_string(t, "chain", "c1")) {
      detail::parse_field(*s, "chain.c1");
      c.chain.c1 = *s;
    }
  }

  if (const toml::table* o = t["output"].as_table()) {
    detail::check_keys(*o, "output", {"path"});
    if (auto p = detail::opt_string(t, "output", "path")) c.out = *p;
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// The family at fold number N.
inline FamilySpec make_family(const RunConfig& c, int N) {
  const auto& p = c.family.params;
  auto get = [&](const char* k, double dflt) {
    auto it = p.find(k);
    return it == p.end() ? dflt : it->second;
  };
  FamilySpec s;
  try {
    const std::string& name = c.family.preset;
    if (name == "quadratic") {
      presets::Quadratic d;
      s = presets::make(presets::Quadratic{get("C1", d.C1), get("C2", d.C2), get("C3", d.C3)}, N);
    } else if (name == "quartic_breaking") {
      s = presets::make(presets::QuarticBreaking{get("g", presets::QuarticBreaking{}.g)}, N);
    } else if (name == "exponential") {
      presets::Exponential d;
      s = presets::make(presets::Exponential{get("E0", d.E0), get("C1", d.C1), get("C2", d.C2), get("C3", d.C3)}, N);
    } else if (name == "periodic") {
      s = presets::make(presets::Periodic{get("g", presets::Periodic{}.g)}, N);
    } else if (name == "cubic") {
      presets::Cubic d;
      double nu = get("nu", d.nu);
      if (nu != 2.0 && nu != -2.0) throw std::invalid_argument("cubic family requires nu = +2 or nu = -2");
      s = presets::make(presets::Cubic{static_cast<int>(nu), get("C1", d.C1), get("C2", d.C2), get("C3", d.C3)}, N);
    } else {
      s.N = N;
      s.W = c.family.W;
      s.E = c.family.E;
      for (const auto& [k, v] : p) s.bindings[k] = Scalar::exact_from({v, 0.0});
      s.label = "custom(W=" + c.family.W_text + ", E=" + c.family.E_text + ")";
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  s.poles.insert(s.poles.end(), c.verify.poles.begin(), c.verify.poles.end());
  return s;
}

/// Spectral box: configured, else [0.2, 12] for cubic, one period for
/// periodic, [-10, 10] otherwise.
inline GridProblem grid_for(const RunConfig& c) {
  GridProblem g;
  g.n = c.spectral.n;
  double a = -10, b = 10;
  if (c.family.preset == "cubic") {
    a = 0.2;
    b = 12;
  } else if (c.family.preset == "periodic") {
    auto it = c.family.params.find("g");
    double gg = std::abs(it == c.family.params.end() ? presets::Periodic{}.g : it->second);
    a = -std::numbers::pi / gg;
    b = std::numbers::pi / gg;
  }
  g.a = c.spectral.a.value_or(a);
  g.b = c.spectral.b.value_or(b);
  return g;
}

// ---------------------------------------------------------------------------
// Report.

namespace detail {

inline Json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x == 0.0 ? 0.0 : x;  // folds -0
}

inline Json cnum(std::complex<double> z) { return Json::array({num(z.real()), num(z.imag())}); }

inline Json zero_witness(const ZeroVerdict& v) {
  if (v.kind != ZeroKind::NonZero || !v.witness_q) return nullptr;
  return Json{{"q", num(*v.witness_q)}, {"value", cnum(v.witness_value)}};
}

inline Json verdict_json(const ZeroVerdict& v) {
  Json j{{"kind", to_string(v.kind)}, {"method", v.method}, {"max_residual", num(v.max_residual)}};
  if (v.method == "sampling") {
    j["samples_used"] = v.samples_used;
    j["samples_skipped"] = v.samples_skipped;
  }
  if (v.exact_nonzero) j["exact_nonzero"] = true;
  return j;
}

struct Check {
  std::string name;
  std::string relation;  // the identity or property being checked
  std::string verdict;   // pass | fail | not_applicable | info
  double max_residual = 0.0;
  Json witness = nullptr;
  Json params = Json::object();
  Json details = Json::object();
};

inline Json to_json(const Check& c) {
  Json j{{"name", c.name}, {"paper_ref", c.relation}, {"verdict", c.verdict}, {"max_residual", num(c.max_residual)}};
  if (!c.witness.is_null()) j["witness"] = c.witness;
  j["params"] = c.params;
  if (!c.details.empty()) j["details"] = c.details;
  return j;
}

inline Json operator_witness(const OperatorVerdict& v) {
  for (std::size_t k = 0; k < v.coefficients.size(); ++k) {
    const auto& c = v.coefficients[k];
    if (c.kind == ZeroKind::NonZero) {
      Json w = zero_witness(c);
      if (w.is_null()) w = Json::object();
      w["coefficient"] = static_cast<int>(k);
      return w;
    }
  }
  return nullptr;
}

inline Json operator_details(const OperatorVerdict& v) {
  Json arr = Json::array();
  for (const auto& c : v.coefficients) arr.push_back(verdict_json(c));
  return Json{{"overall", verdict_json(v.overall)}, {"coefficients", arr}};
}

inline Check zero_check(std::string name, std::string relation, const ZeroVerdict& v, bool applicable = true) {
  Check c;
  c.name = std::move(name);
  c.relation = std::move(relation);
  c.verdict = !applicable ? "not_applicable" : v.passed() ? "pass" : "fail";
  c.max_residual = v.max_residual;
  if (applicable) c.witness = zero_witness(v);
  c.details = verdict_json(v);
  return c;
}

inline Check operator_check(std::string name, std::string relation, const ResidualReport& r) {
  Check c;
  c.name = std::move(name);
  c.relation = std::move(relation);
  c.verdict = r.passed() ? "pass" : "fail";
  c.max_residual = r.verdict.overall.max_residual;
  c.witness = operator_witness(r.verdict);
  c.details = operator_details(r.verdict);
  return c;
}

inline Json exprs(const std::vector<Expr>& v) {
  Json a = Json::array();
  for (const auto& e : v) a.push_back(to_string(e));
  return a;
}

}  // namespace detail

struct Outcome {
  Json report;
  int exit_code = 0;
  std::vector<std::string> summary;  // one human-readable line per check
};

/// Run the commands for every N in the configured range. `generated_at` is
/// the only run-dependent field of the report.
inline Outcome run(const RunConfig& config, const std::vector<Command>& commands, const std::string& generated_at = "") {
  using detail::Check;
  if (commands.empty()) throw ConfigError("no command given");
  std::vector<Check> checks;
  const SamplingPolicy& policy = config.verify;
  for (int N = config.N_min; N <= config.N_max; ++N) {
    FamilySpec spec = make_family(config, N);
    Json params{{"family", spec.label},      {"N", N},
                {"seed", policy.seed},       {"samples", policy.samples},
                {"tol", detail::num(policy.atol)}};
    std::optional<MotherPolynomial> mother;
    auto add = [&](Check c) {
      Json p = params;
      for (auto& [k, v] : c.params.items()) p[k] = v;
      c.params = p;
      checks.push_back(std::move(c));
    };
    for (Command cmd : commands) {
      switch (cmd) {
        case Command::Check: {
          auto r = check_conditions(spec, policy);
          add(detail::zero_check("conditions.e_condition", "E''' + E E'' + 2E'^2 - 2E^2 E' = 0 (N >= 3)", r.e_condition.verdict,
                                 r.e_condition.applicable));
          add(detail::zero_check("conditions.w_condition", "u'' - E u' = 0 with u = W~' + E W~ (N >= 2)", r.w_condition.verdict,
                                 r.w_condition.applicable));
          // The identity follows from both conditions, whatever N is.
          bool conditions_hold = r.e_condition.verdict.passed() && r.w_condition.verdict.passed();
          Check t = detail::zero_check("identity.tilde", "[W~^2 (E^2 - 2E')]' - 2 W~ W~''' = 0 under the conditions",
                                       is_zero(tilde_identity_expr(spec), spec.bindings, policy_for(spec, policy)), conditions_hold);
          add(t);
          auto rec = check_potential_recursion(spec, policy);
          ZeroVerdict both = combine({rec.plus, rec.minus});
          add(detail::zero_check("recursion.potentials", "V+-(N+1) - V+-(N) = -EW + (4N-1)/6 E^2 - (2N+1)/6 E' +- (W' - N E')", both));
          break;
        }
        case Command::Intertwine: {
          add(detail::operator_check("intertwining", "A_N H- - H+ A_N = 0", verify_intertwining(spec, policy)));
          break;
        }
        case Command::Mother: {
          mother = extract_mother_polynomial(spec, policy);
          Check c;
          c.name = "mother.polynomial";
          c.relation = "1/2 A^dagger A = P(H-), 1/2 A A^dagger = P(H+)";
          c.verdict = mother->passed() ? "pass" : "fail";
          c.max_residual = std::max(mother->remainder.max_residual, mother->side_consistency.max_residual);
          c.witness = detail::zero_witness(mother->remainder.passed() ? mother->side_consistency : mother->remainder);
          Json vals = Json::array();
          for (const auto& v : mother->values) vals.push_back(detail::cnum(v));
          c.details = Json{{"coefficients", detail::exprs(mother->coefficients)},
                           {"values", vals},
                           {"remainder", detail::verdict_json(mother->remainder)},
                           {"side_consistency", detail::verdict_json(mother->side_consistency)}};
          add(c);
          break;
        }
        case Command::Chain: {
          std::vector<Expr> offsets;
          if (config.chain.offsets.empty()) {
            offsets = matched_offsets(spec);
          } else {
            for (const auto& s : config.chain.offsets) offsets.push_back(nfs::parse(s));
            if (static_cast<int>(offsets.size()) < N) throw ConfigError("chain.offsets has fewer than N entries");
            offsets.resize(static_cast<std::size_t>(N));
          }
          ChainReport r = build_chain(spec, offsets, policy);
          Check steps;
          steps.name = "chain.steps";
          steps.relation = "H>^(k) L^(k) = L^(k) H<^(k-1) for k = 1..N";
          steps.verdict = r.steps_passed() ? "pass" : "fail";
          Json per = Json::array();
          for (const auto& s : r.steps) {
            steps.max_residual = std::max(steps.max_residual, s.verdict.overall.max_residual);
            if (steps.witness.is_null()) steps.witness = detail::operator_witness(s.verdict);
            per.push_back(detail::verdict_json(s.verdict.overall));
          }
          Json mm = Json::array();
          for (std::size_t k = 0; k < r.mismatches.size(); ++k) {
            mm.push_back(Json{{"k", static_cast<int>(k) + 1}, {"expr", to_string(simplify(r.mismatches[k]))}, {"verdict", detail::verdict_json(r.mismatch_verdicts[k])}});
          }
          steps.details = Json{{"offsets", detail::exprs(r.offsets)}, {"steps", per}, {"mismatches", mm}, {"mismatches_vanish", r.mismatches_vanish()}};
          add(steps);
          add(detail::operator_check("chain.end_to_end", "L^(N) ... L^(1) H- = H+ L^(N) ... L^(1)", r.end_to_end));
          if (config.chain.c1) {
            Expr c1 = nfs::parse(*config.chain.c1);
            Check g = detail::zero_check("chain.generalized_condition", "c'' - E c' = 0", check_generalized_chain_condition(spec, c1, policy));
            g.params["c1"] = *config.chain.c1;
            add(g);
          }
          break;
        }
        case Command::Spectrum: {
          GridProblem g = grid_for(config);
          SpectralReport sr;
          try {
            sr = spectral_report(spec, g, config.spectral.levels, config.spectral.options, mother);
          } catch (const SpectralError& e) {
            throw ConfigError(std::string("spectrum: ") + e.what());
          }
          Json grid{{"a", detail::num(g.a)}, {"b", detail::num(g.b)}, {"n", g.n}, {"levels", config.spectral.levels}};
          Check p;
          p.name = "spectrum.pairing";
          p.relation = "(H+ - E) A psi = 0 for H- eigenpairs outside ker A";
          p.verdict = sr.pairing.passed() ? "pass" : "fail";
          p.max_residual = sr.pairing.max_residual();
          p.params = grid;
          Json rows = Json::array();
          for (const auto& r : sr.pairing.rows) {
            Json row{{"level", r.level}, {"E_minus", detail::num(r.energy)}, {"image_ratio", detail::num(r.image_ratio)}, {"kernel", r.kernel}};
            if (!r.kernel) row["residual"] = detail::num(r.residual);
            rows.push_back(row);
            if (!r.passed && p.witness.is_null()) p.witness = Json{{"level", r.level}, {"residual", detail::num(r.residual)}};
          }
          Json em = Json::array(), ep = Json::array();
          for (double x : sr.pairing.minus_eigenvalues) em.push_back(detail::num(x));
          for (double x : sr.pairing.plus_eigenvalues) ep.push_back(detail::num(x));
          p.details = Json{{"eigenvalues_minus", em},
                           {"eigenvalues_plus", ep},
                           {"kernel_threshold", detail::num(sr.pairing.kernel_threshold)},
                           {"fail_threshold", detail::num(sr.pairing.fail_threshold)},
                           {"kernel_flags", sr.pairing.kernel_flags()},
                           {"rows", rows}};
          if (!sr.notes.empty()) p.details["notes"] = sr.notes;
          add(p);
          Check m;
          m.name = "spectrum.mother";
          m.relation = "<psi| 1/2 A^dagger A |psi> = P(E)";
          m.verdict = sr.mother.passed() ? "pass" : "fail";
          m.max_residual = sr.mother.max_difference();
          m.params = grid;
          Json mrows = Json::array();
          for (const auto& r : sr.mother.rows) {
            mrows.push_back(Json{{"level", r.level}, {"E", detail::num(r.energy)}, {"rayleigh", detail::num(r.rayleigh)},
                                 {"polynomial", detail::num(r.polynomial)}, {"difference", detail::num(r.difference)}});
          }
          m.details = Json{{"fail_threshold_relative", detail::num(sr.mother.fail_threshold)}, {"rows", mrows}};
          add(m);
          break;
        }
        case Command::Kernels: {
          GridProblem g = grid_for(config);
          auto basis = kernel_basis(spec, policy);
          Check a;
          a.name = "kernels.annihilation";
          a.relation = "A_N chi = 0";
          a.verdict = "pass";
          Check n;
          n.name = "kernels.normalizability";
          n.relation = "integral of |chi|^2 finite on the configured domain";
          n.verdict = "info";
          n.params = Json{{"a", detail::num(g.a)}, {"b", detail::num(g.b)}, {"n", g.n}};
          Json entries = Json::array(), flags = Json::array();
          auto xs = nfs::detail::all_points(g);
          for (const auto& k : basis) {
            Json e{{"index", k.index}, {"symbolic", k.symbolic}, {"description", k.description}};
            if (k.symbolic && k.annihilation) {
              e["verdict"] = detail::verdict_json(*k.annihilation);
              a.max_residual = std::max(a.max_residual, k.annihilation->max_residual);
              if (!k.annihilation->passed()) {
                a.verdict = "fail";
                if (a.witness.is_null()) a.witness = detail::zero_witness(*k.annihilation);
              }
            } else {
              double res;
              try {
                res = kernel_grid_residual(spec, k, xs);
              } catch (const SpectralError& err) {
                throw ConfigError(std::string("kernels: ") + err.what());
              }
              e["grid_residual"] = detail::num(res);
              a.max_residual = std::max(a.max_residual, res);
              if (!(res < 1e-6)) a.verdict = "fail";
            }
            entries.push_back(e);
            NormalizabilityResult nr;
            try {
              nr = normalizability_probe(spec, k, g);
            } catch (const SpectralError& err) {
              throw ConfigError(std::string("kernels: ") + err.what());
            }
            Json wins = Json::array();
            for (const auto& w : nr.windows) {
              wins.push_back(Json{{"a", detail::num(w.a)}, {"b", detail::num(w.b)}, {"tail_ratio", detail::num(w.tail_ratio)}, {"norm2", detail::num(w.norm2)}});
            }
            flags.push_back(Json{{"index", k.index}, {"normalizable", nr.normalizable}, {"windows", wins}});
          }
          a.details = Json{{"entries", entries}};
          n.details = Json{{"entries", flags}};
          add(a);
          add(n);
          break;
        }
      }
    }
  }

  Outcome out;
  int passed = 0, failed = 0;
  Json arr = Json::array();
  for (const auto& c : checks) {
    arr.push_back(detail::to_json(c));
    if (c.verdict == "pass") ++passed;
    if (c.verdict == "fail") ++failed;
    std::ostringstream line;
    std::string tag = c.verdict == "pass" ? "PASS" : c.verdict == "fail" ? "FAIL" : c.verdict == "info" ? "INFO" : "N/A ";
    line << tag << "  " << c.name << "  N=" << c.params.value("N", 0) << "  " << c.params.value("family", std::string()) << "  max_residual=" << c.max_residual;
    out.summary.push_back(line.str());
  }
  out.exit_code = failed > 0 ? 1 : 0;
  Json cmds = Json::array();
  for (Command c : commands) cmds.push_back(to_string(c));
  out.report = Json{{"schema_version", kSchemaVersion},
                    {"header", Json{{"generated_at", generated_at}, {"tool", "nfoldsusy"}}},
                    {"commands", cmds},
                    {"checks", arr},
                    {"summary", Json{{"passed", passed}, {"failed", failed}, {"exit_code", out.exit_code}}}};
  return out;
}

/// Report text without the header, for byte comparisons between runs.
inline std::string canonical_body(const Json& report) {
  Json copy = report;
  copy.erase("header");
  return copy.dump(2);
}

inline std::string list_presets() {
  std::ostringstream os;
  for (const auto& p : presets::list()) {
    os << p.name << "\n  parameters: " << p.parameters << "\n  defaults:   " << p.defaults << "\n  family:     " << p.family << "\n";
  }
  return os.str();
}

/// The command-line flow after argument parsing: exit code 0 (all checks
/// pass), 1 (verification failure) or 2 (config, parse or usage error). The
/// report goes to out_path, or to `out` when no path is given; the human
/// summary goes to `out` when a path is given and to `err` otherwise.
inline int execute(const std::vector<std::string>& commands, const std::string& config_path, std::optional<std::uint64_t> seed,
                   std::string out_path, std::ostream& out, std::ostream& err, const std::string& generated_at) {
  try {
    if (commands.size() == 1 && commands[0] == "presets") {
      out << list_presets();
      return 0;
    }
    std::vector<Command> cmds;
    for (const auto& c : commands) cmds.push_back(parse_command(c));
    if (config_path.empty()) throw ConfigError("--config is required");
    RunConfig config = load_config(config_path);
    if (seed) config.verify.seed = *seed;
    if (out_path.empty()) out_path = config.out;
    Outcome outcome = run(config, cmds, generated_at);
    std::string text = outcome.report.dump(2) + "\n";
    std::ostream& human = out_path.empty() ? err : out;
    if (out_path.empty()) {
      out << text;
    } else {
      std::ofstream file(out_path, std::ios::binary);
      if (!file) throw ConfigError("cannot write report to '" + out_path + "'");
      file << text;
    }
    for (const auto& line : outcome.summary) human << line << "\n";
    human << (outcome.exit_code == 0 ? "all checks passed" : "verification failures") << "\n";
    return outcome.exit_code;
  } catch (const ParseError& e) {
    err << "error: parse error at offset " << e.offset() << ": " << e.message() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 2;
}

}  // namespace nfs::cli
