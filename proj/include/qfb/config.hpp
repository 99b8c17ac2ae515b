#pragma once

// Scenario files: one `section.key = value` per line, `#` comments.
// Numeric values accept products/quotients of numbers and `pi`
// (e.g. `pi/2`, `3*pi/4`, `0.5pi`).  Lists are comma-separated.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qfb/models.hpp"

namespace qfb {

inline constexpr const char* kVersion = "1.0.0";

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

// number | pi | number pi, combined with * and /
inline double parse_factor(const std::string& tok, const std::string& key) {
  std::string t = trim(tok);
  if (t.empty()) throw ConfigError(key + ": empty numeric value");
  double scale = 1.0;
  if (t.size() >= 2 && t.compare(t.size() - 2, 2, "pi") == 0) {
    scale = PI;
    t = trim(t.substr(0, t.size() - 2));
    if (t.empty()) return scale;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": cannot parse number '" + tok + "'");
  }
  if (used != t.size()) throw ConfigError(key + ": cannot parse number '" + tok + "'");
  return v * scale;
}

inline double parse_number(const std::string& text, const std::string& key) {
  std::string s = trim(text);
  bool negative = false;
  if (!s.empty() && s[0] == '-' && s.find_first_of("*/") != std::string::npos) {
    negative = true;
    s = s.substr(1);
  }
  double acc = 1.0;
  char op = '*';
  std::string tok;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '*' || s[i] == '/') {
      const double v = parse_factor(tok, key);
      if (op == '*') acc *= v;
      else acc /= v;
      if (i < s.size()) op = s[i];
      tok.clear();
    } else {
      tok += s[i];
    }
  }
  if (!std::isfinite(acc)) throw ConfigError(key + ": value is not finite");
  return negative ? -acc : acc;
}

}  // namespace detail

/// Raw key-value content, keeping insertion order for echoing.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text) {
    KeyValueFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty() || key.find('.') == std::string::npos || key.front() == '.' || key.back() == '.')
        throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' must look like section.key");
      if (value.empty()) throw ConfigError(key + ": missing value");
      if (kv.values_.count(key)) throw ConfigError(key + ": given more than once");
      kv.values_[key] = value;
      kv.order_.push_back(key);
    }
    return kv;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key + ": required key is missing");
    return it->second;
  }
  const std::vector<std::string>& keys() const { return order_; }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

enum class Scheme {
  none,
  simple,
  eo_tla_compound,
  eo_tla_adiabatic,
  eo_mode_adiabatic,
  eo_mode_trajectory,
  ao_tla_compound,
  ao_mode_compound,
  ao_adiabatic,
  kerr,
  jc_compound,
  jc_adiabatic
};

inline const std::vector<std::pair<std::string, Scheme>>& scheme_names() {
  static const std::vector<std::pair<std::string, Scheme>> names = {
      {"none", Scheme::none},
      {"simple", Scheme::simple},
      {"eo_tla_compound", Scheme::eo_tla_compound},
      {"eo_tla_adiabatic", Scheme::eo_tla_adiabatic},
      {"eo_mode_adiabatic", Scheme::eo_mode_adiabatic},
      {"eo_mode_trajectory", Scheme::eo_mode_trajectory},
      {"ao_tla_compound", Scheme::ao_tla_compound},
      {"ao_mode_compound", Scheme::ao_mode_compound},
      {"ao_adiabatic", Scheme::ao_adiabatic},
      {"kerr", Scheme::kerr},
      {"jc_compound", Scheme::jc_compound},
      {"jc_adiabatic", Scheme::jc_adiabatic}};
  return names;
}

inline std::string to_string(Scheme s) {
  for (const auto& [n, v] : scheme_names())
    if (v == s) return n;
  return "?";
}

inline Scheme parse_scheme(const std::string& text, const std::string& key) {
  for (const auto& [n, v] : scheme_names())
    if (n == text) return v;
  std::string all;
  for (const auto& [n, v] : scheme_names()) all += (all.empty() ? "" : ", ") + n;
  throw ConfigError(key + ": unknown scheme '" + text + "' (expected one of " + all + ")");
}

inline bool uses_ancilla(Scheme s) {
  switch (s) {
    case Scheme::eo_tla_compound:
    case Scheme::eo_mode_adiabatic:
    case Scheme::eo_mode_trajectory:
    case Scheme::ao_tla_compound:
    case Scheme::ao_mode_compound:
    case Scheme::jc_compound:
    case Scheme::jc_adiabatic:
      return true;
    default:
      return false;
  }
}

inline bool is_eo_mode(Scheme s) { return s == Scheme::eo_mode_adiabatic || s == Scheme::eo_mode_trajectory; }
inline bool is_jc(Scheme s) { return s == Scheme::jc_compound || s == Scheme::jc_adiabatic; }
inline bool is_compound(Scheme s) {
  return s == Scheme::eo_tla_compound || s == Scheme::ao_tla_compound || s == Scheme::ao_mode_compound ||
         s == Scheme::jc_compound || s == Scheme::eo_mode_trajectory;
}

enum class RunKind { steady, sweep, traj, wigner, compare };

inline RunKind parse_run_kind(const std::string& text) {
  if (text == "steady") return RunKind::steady;
  if (text == "sweep") return RunKind::sweep;
  if (text == "traj") return RunKind::traj;
  if (text == "wigner") return RunKind::wigner;
  if (text == "compare") return RunKind::compare;
  throw ConfigError("run.kind: unknown experiment '" + text + "'");
}

inline std::string to_string(RunKind k) {
  switch (k) {
    case RunKind::steady: return "steady";
    case RunKind::sweep: return "sweep";
    case RunKind::traj: return "traj";
    case RunKind::wigner: return "wigner";
    case RunKind::compare: return "compare";
  }
  return "?";
}

/// Ancilla settings as written in the file; linkage to chi fills the rest.
struct AncillaInput {
  double gamma = 1.0;
  std::optional<double> g;
  std::optional<double> epsilon;
  std::optional<double> diffusion;  // Gamma / (2 eps^2)
  std::optional<double> big_delta;  // Jaynes-Cummings Delta
  std::optional<double> detuning;
  int ancilla_dim = 8;
};

struct RunSettings {
  RunKind kind = RunKind::steady;
  std::vector<double> gammas;
  std::vector<Scheme> schemes;
  int n_traj = 2000;
  double t_final = 20.0;
  std::vector<double> sample_times;
  std::uint64_t seed = 1;
  int workers = 1;
  double tol = -1.0;
  double truncation_limit = 1e-4;
  WignerSpec wigner_grid;
};

struct ScenarioConfig {
  Scheme scheme = Scheme::simple;
  SystemParams sys;
  AncillaInput anc;
  RunSettings run;
  std::vector<std::pair<std::string, std::string>> resolved;  // for output headers

  /// Ancilla parameters for a given Gamma, with scheme linkage applied.
  AncillaParams ancilla_for(Scheme s, double gamma) const {
    AncillaParams p;
    switch (s) {
      case Scheme::eo_tla_compound:
        p = eo_tla_linked(gamma, sys.chi, anc.detuning.value_or(0.0));
        break;
      case Scheme::ao_tla_compound:
      case Scheme::ao_mode_compound:
        p = ao_linked(gamma, sys.chi, anc.ancilla_dim);
        break;
      case Scheme::eo_mode_adiabatic:
      case Scheme::eo_mode_trajectory:
        if (anc.diffusion) {
          p = eo_mode_linked(gamma, sys.chi, *anc.diffusion, anc.ancilla_dim);
        } else {
          p.gamma = gamma;
          p.epsilon = *anc.epsilon;
          p.g = gamma * sys.chi / p.epsilon;
          p.ancilla_dim = anc.ancilla_dim;
        }
        break;
      case Scheme::jc_compound:
      case Scheme::jc_adiabatic:
        if (anc.big_delta) {
          p = jc_linked(gamma, sys.chi, *anc.big_delta);
        } else {
          p.gamma = gamma;
          p.detuning = *anc.detuning;
        }
        break;
      default:
        p.gamma = gamma;
        break;
    }
    if (anc.g) p.g = *anc.g;
    if (s != Scheme::jc_compound && s != Scheme::jc_adiabatic && anc.detuning) p.detuning = *anc.detuning;
    if (s == Scheme::ao_tla_compound || s == Scheme::ao_mode_compound || is_eo_mode(s)) p.ancilla_dim = anc.ancilla_dim;
    return p;
  }
};

namespace detail {

class Reader {
 public:
  explicit Reader(const KeyValueFile& kv) : kv_(kv) {}

  bool has(const std::string& key) {
    used_.insert(key);
    return kv_.has(key);
  }
  std::string text(const std::string& key) {
    used_.insert(key);
    return kv_.raw(key);
  }
  double number(const std::string& key) { return parse_number(text(key), key); }
  int integer(const std::string& key) {
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 2e9) throw ConfigError(key + ": expected an integer");
    return static_cast<int>(v);
  }
  std::uint64_t u64(const std::string& key) {
    const std::string t = text(key);
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected an unsigned integer");
    }
  }
  std::vector<double> numbers(const std::string& key) {
    std::vector<double> out;
    for (const auto& p : split(text(key), ',')) out.push_back(parse_number(p, key));
    return out;
  }
  void reject_unused() const {
    for (const auto& k : kv_.keys())
      if (!used_.count(k)) throw ConfigError(k + ": unknown key");
  }

 private:
  const KeyValueFile& kv_;
  std::set<std::string> used_;
};

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// `kind`, when given, is the experiment requested on the command line; a
/// conflicting run.kind in the file is an error.
inline ScenarioConfig parse_config(const KeyValueFile& kv, std::optional<RunKind> kind = std::nullopt) {
  detail::Reader r(kv);
  ScenarioConfig c;
  c.scheme = parse_scheme(r.text("model.scheme"), "model.scheme");
  if (r.has("sys.lambda")) c.sys.lambda = r.number("sys.lambda");
  if (r.has("sys.chi")) c.sys.chi = r.number("sys.chi");
  if (r.has("sys.n_max")) c.sys.n_max = r.integer("sys.n_max");
  if (c.sys.n_max < 2) throw ConfigError("sys.n_max: must be >= 2");
  if (!(c.sys.lambda >= 0.0)) throw ConfigError("sys.lambda: must be >= 0");

  if (r.has("anc.gamma")) c.anc.gamma = r.number("anc.gamma");
  if (r.has("anc.g")) c.anc.g = r.number("anc.g");
  if (r.has("anc.epsilon")) c.anc.epsilon = r.number("anc.epsilon");
  if (r.has("anc.diffusion")) c.anc.diffusion = r.number("anc.diffusion");
  if (r.has("anc.big_delta")) c.anc.big_delta = r.number("anc.big_delta");
  if (r.has("anc.detuning")) c.anc.detuning = r.number("anc.detuning");
  if (r.has("anc.ancilla_dim")) c.anc.ancilla_dim = r.integer("anc.ancilla_dim");

  if (r.has("run.kind")) {
    c.run.kind = parse_run_kind(r.text("run.kind"));
    if (kind && *kind != c.run.kind)
      throw ConfigError("run.kind: file says " + to_string(c.run.kind) + " but " + to_string(*kind) + " was requested");
  } else {
    c.run.kind = kind.value_or(RunKind::steady);
  }
  if (r.has("run.gammas")) c.run.gammas = r.numbers("run.gammas");
  if (r.has("run.schemes"))
    for (const auto& s : detail::split(r.text("run.schemes"), ',')) c.run.schemes.push_back(parse_scheme(s, "run.schemes"));
  if (r.has("run.n_traj")) c.run.n_traj = r.integer("run.n_traj");
  if (r.has("run.t_final")) c.run.t_final = r.number("run.t_final");
  if (r.has("run.sample_times")) c.run.sample_times = r.numbers("run.sample_times");
  if (r.has("run.seed")) c.run.seed = r.u64("run.seed");
  if (r.has("run.workers")) c.run.workers = r.integer("run.workers");
  if (r.has("run.tol")) c.run.tol = r.number("run.tol");
  if (r.has("run.truncation_limit")) c.run.truncation_limit = r.number("run.truncation_limit");
  if (r.has("wigner.x_min")) c.run.wigner_grid.x1_min = c.run.wigner_grid.x2_min = r.number("wigner.x_min");
  if (r.has("wigner.x_max")) c.run.wigner_grid.x1_max = c.run.wigner_grid.x2_max = r.number("wigner.x_max");
  if (r.has("wigner.points")) c.run.wigner_grid.n1 = c.run.wigner_grid.n2 = r.integer("wigner.points");
  r.reject_unused();

  // Scheme / parameter compatibility.
  const Scheme s = c.scheme;
  const bool needs_anc = uses_ancilla(s) || c.run.kind == RunKind::sweep;
  if (!(c.anc.gamma > 0.0)) throw ConfigError("anc.gamma: must be > 0");
  if (is_eo_mode(s)) {
    if (!c.anc.epsilon && !c.anc.diffusion)
      throw ConfigError("anc.epsilon: required for scheme " + to_string(s) + " (or give anc.diffusion)");
    if (c.anc.epsilon && c.anc.diffusion) throw ConfigError("anc.diffusion: give either anc.epsilon or anc.diffusion");
    if (c.anc.epsilon && !(*c.anc.epsilon > 0.0)) throw ConfigError("anc.epsilon: must be > 0");
    if (c.anc.diffusion && !(*c.anc.diffusion > 0.0)) throw ConfigError("anc.diffusion: must be > 0");
  } else {
    if (c.anc.epsilon) throw ConfigError("anc.epsilon: only valid for eo_mode schemes");
    if (c.anc.diffusion) throw ConfigError("anc.diffusion: only valid for eo_mode schemes");
  }
  if (is_jc(s)) {
    if (!c.anc.big_delta && !(c.anc.detuning && c.anc.g))
      throw ConfigError("anc.big_delta: required for scheme " + to_string(s) + " (or give anc.g and anc.detuning)");
    if (c.anc.big_delta && (c.anc.g || c.anc.detuning))
      throw ConfigError("anc.big_delta: cannot be combined with anc.g or anc.detuning");
    if (c.anc.detuning && *c.anc.detuning == 0.0) throw ConfigError("anc.detuning: must be non-zero");
  } else if (c.anc.big_delta) {
    throw ConfigError("anc.big_delta: only valid for jc schemes");
  }
  if (!needs_anc && (c.anc.g || c.anc.detuning))
    throw ConfigError("anc.g: scheme " + to_string(s) + " has no ancilla");
  if (c.anc.ancilla_dim < 2) throw ConfigError("anc.ancilla_dim: must be >= 2");

  switch (c.run.kind) {
    case RunKind::sweep:
      if (!is_compound(s)) throw ConfigError("model.scheme: sweep needs a compound scheme, got " + to_string(s));
      if (c.run.gammas.empty()) throw ConfigError("run.gammas: required for sweep");
      for (double g : c.run.gammas)
        if (!(g > 0.0)) throw ConfigError("run.gammas: every value must be > 0");
      if (c.anc.g) throw ConfigError("anc.g: derived from sys.chi in sweeps; remove it");
      break;
    case RunKind::traj:
      if (s != Scheme::eo_mode_trajectory && s != Scheme::none && s != Scheme::simple && s != Scheme::kerr)
        throw ConfigError("model.scheme: traj supports eo_mode_trajectory, none, simple, kerr");
      break;
    case RunKind::compare:
      if (c.run.schemes.size() < 2) throw ConfigError("run.schemes: compare needs at least two schemes");
      for (Scheme x : c.run.schemes)
        if (x == Scheme::eo_mode_trajectory) throw ConfigError("run.schemes: eo_mode_trajectory is not a static scheme");
      break;
    case RunKind::steady:
    case RunKind::wigner:
      if (s == Scheme::eo_mode_trajectory) throw ConfigError("model.scheme: eo_mode_trajectory needs run.kind = traj or sweep");
      break;
  }
  if (c.run.kind == RunKind::traj || s == Scheme::eo_mode_trajectory) {
    if (c.run.n_traj < 1) throw ConfigError("run.n_traj: must be >= 1");
    if (!(c.run.t_final > 0.0)) throw ConfigError("run.t_final: must be > 0");
    for (double t : c.run.sample_times)
      if (t < 0.0 || t > c.run.t_final) throw ConfigError("run.sample_times: values must lie in [0, run.t_final]");
  }
  if (c.run.workers < 1) throw ConfigError("run.workers: must be >= 1");
  if (c.run.wigner_grid.n1 < 2) throw ConfigError("wigner.points: must be >= 2");
  if (!(c.run.wigner_grid.x1_max > c.run.wigner_grid.x1_min)) throw ConfigError("wigner.x_max: must exceed wigner.x_min");

  for (const auto& k : kv.keys()) c.resolved.emplace_back(k, kv.raw(k));
  return c;
}

inline ScenarioConfig load_config(const std::string& path, std::optional<RunKind> kind = std::nullopt) {
  return parse_config(KeyValueFile::load(path), kind);
}

/// Resolved numbers, as echoed into output headers.
inline std::vector<std::string> describe_config(const ScenarioConfig& c) {
  using detail::fmt;
  std::vector<std::string> out;
  out.push_back("model.scheme = " + to_string(c.scheme));
  out.push_back("sys.lambda = " + fmt(c.sys.lambda));
  out.push_back("sys.chi = " + fmt(c.sys.chi));
  out.push_back("sys.n_max = " + std::to_string(c.sys.n_max));
  out.push_back("anc.gamma = " + fmt(c.anc.gamma));
  if (c.anc.g) out.push_back("anc.g = " + fmt(*c.anc.g));
  if (c.anc.epsilon) out.push_back("anc.epsilon = " + fmt(*c.anc.epsilon));
  if (c.anc.diffusion) out.push_back("anc.diffusion = " + fmt(*c.anc.diffusion));
  if (c.anc.big_delta) out.push_back("anc.big_delta = " + fmt(*c.anc.big_delta));
  if (c.anc.detuning) out.push_back("anc.detuning = " + fmt(*c.anc.detuning));
  out.push_back("anc.ancilla_dim = " + std::to_string(c.anc.ancilla_dim));
  out.push_back("run.kind = " + to_string(c.run.kind));
  if (!c.run.gammas.empty()) {
    std::string g;
    for (double x : c.run.gammas) g += (g.empty() ? "" : ", ") + fmt(x);
    out.push_back("run.gammas = " + g);
  }
  if (!c.run.schemes.empty()) {
    std::string g;
    for (Scheme x : c.run.schemes) g += (g.empty() ? "" : ", ") + to_string(x);
    out.push_back("run.schemes = " + g);
  }
  out.push_back("run.n_traj = " + std::to_string(c.run.n_traj));
  out.push_back("run.t_final = " + fmt(c.run.t_final));
  if (!c.run.sample_times.empty()) {
    std::string g;
    for (double x : c.run.sample_times) g += (g.empty() ? "" : ", ") + fmt(x);
    out.push_back("run.sample_times = " + g);
  }
  out.push_back("run.seed = " + std::to_string(c.run.seed));
  out.push_back("run.tol = " + fmt(c.run.tol));
  out.push_back("run.truncation_limit = " + fmt(c.run.truncation_limit));
  out.push_back("wigner.x_min = " + fmt(c.run.wigner_grid.x1_min));
  out.push_back("wigner.x_max = " + fmt(c.run.wigner_grid.x1_max));
  out.push_back("wigner.points = " + std::to_string(c.run.wigner_grid.n1));
  return out;
}

}  // namespace qfb
