#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "twosided/curves.hpp"
#include "twosided/errors.hpp"
#include "twosided/schedule.hpp"
#include "twosided/topology.hpp"

namespace twosided {

enum class PolicyKind { prob2p, threshold, genie2p, eto };

inline const char* to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::prob2p: return "prob2p";
    case PolicyKind::threshold: return "threshold";
    case PolicyKind::genie2p: return "genie2p";
    case PolicyKind::eto: return "eto";
  }
  return "?";
}

inline PolicyKind parse_policy(std::string_view s) {
  if (s == "prob2p") return PolicyKind::prob2p;
  if (s == "threshold") return PolicyKind::threshold;
  if (s == "genie2p") return PolicyKind::genie2p;
  if (s == "eto") return PolicyKind::eto;
  throw ConfigError("unknown policy '" + std::string(s) + "' (expected prob2p, threshold, genie2p or eto)");
}

struct CurveSpec {
  CurveKind kind = CurveKind::demand;
  double intercept = 0.0;
  double slope = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  friend bool operator==(const CurveSpec&, const CurveSpec&) = default;
};

/// 1-based type indices, as written in config files.
struct EdgeSpec {
  std::size_t customer = 0;
  std::size_t server = 0;
  friend bool operator==(const EdgeSpec&, const EdgeSpec&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::int64_t horizon = 100000;
  std::uint64_t seed_first = 0;
  std::uint64_t seed_last = 9;
  std::vector<PolicyKind> policies{PolicyKind::prob2p, PolicyKind::threshold, PolicyKind::genie2p};
  std::vector<double> weights{0.001, 0.01};
  int checkpoints_per_decade = 10;
  double a_min = 0.01;
  std::optional<double> zeta;
  std::optional<std::int64_t> window_start;  // exponent window start, default horizon / 10
  std::string out_dir = ".";
  bool trace = false;
  Schedule schedule;
  std::vector<CurveSpec> curves;
  std::vector<EdgeSpec> edges;

  std::vector<std::uint64_t> seeds() const {
    std::vector<std::uint64_t> s;
    for (std::uint64_t k = seed_first; k <= seed_last; ++k) s.push_back(k);
    return s;
  }
  std::int64_t exponent_window_start() const {
    return window_start ? *window_start : std::max<std::int64_t>(2, horizon / 10);
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_plain_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ConfigError("cannot read " + std::string(what) + " from '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

/// Decimal number or a fraction "a/b".
inline double parse_number(std::string_view s, std::string_view what = "number") {
  const std::string t = detail::trim(s);
  const auto slash = t.find('/');
  if (slash == std::string::npos) return detail::parse_plain_double(t, what);
  const double num = detail::parse_plain_double(detail::trim(std::string_view(t).substr(0, slash)), what);
  const double den = detail::parse_plain_double(detail::trim(std::string_view(t).substr(slash + 1)), what);
  if (den == 0.0) throw ConfigError("zero denominator in " + std::string(what));
  return num / den;
}

inline std::int64_t parse_integer(std::string_view s, std::string_view what) {
  const std::string t = detail::trim(s);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec == std::errc() && ptr == t.data() + t.size()) return v;
  // Accept integral values in scientific notation such as 1e5.
  const double d = parse_number(t, what);
  if (d != std::floor(d) || std::abs(d) > 9e15) throw ConfigError(std::string(what) + " must be an integer");
  return static_cast<std::int64_t>(d);
}

/// "a..b" (inclusive) or a single seed.
inline std::pair<std::uint64_t, std::uint64_t> parse_seed_range(std::string_view s) {
  const std::string t = detail::trim(s);
  const auto dots = t.find("..");
  if (dots == std::string::npos) {
    const auto v = parse_integer(t, "seed");
    if (v < 0) throw ConfigError("seeds must be nonnegative");
    return {static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(v)};
  }
  const auto a = parse_integer(std::string_view(t).substr(0, dots), "seed range start");
  const auto b = parse_integer(std::string_view(t).substr(dots + 2), "seed range end");
  if (a < 0 || b < a) throw ConfigError("seed range must be a..b with 0 <= a <= b");
  return {static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b)};
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = 0.0;
    std::from_chars(buf, buf + std::char_traits<char>::length(buf), back);
    if (back == v) break;
  }
  return buf;
}

inline bool parse_bool(std::string_view s, std::string_view what) {
  const std::string t = detail::trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("cannot read boolean " + std::string(what) + " from '" + t + "'");
}

/// Checks the things a run needs before any slot is simulated.
inline void validate_config(const ExperimentConfig& c) {
  if (c.horizon < 1) throw ConfigError("horizon must be >= 1");
  if (c.policies.empty()) throw ConfigError("at least one policy is required");
  if (c.checkpoints_per_decade < 1) throw ConfigError("checkpoints_per_decade must be >= 1");
  if (!(c.a_min > 0.0 && c.a_min < 1.0)) throw ConfigError("a_min must lie in (0, 1)");
  if (c.zeta && !(*c.zeta > 0.0 && *c.zeta <= 1.0)) throw ConfigError("zeta must lie in (0, 1]");
  for (double w : c.weights)
    if (!(w >= 0.0)) throw ConfigError("weights must be nonnegative");
  detail::check_schedule(c.schedule);
  if (c.curves.empty() || c.edges.empty()) throw ConfigError("config needs [curve] and [edge] blocks");
}

/// Builds the market. Demand blocks become customer types and supply blocks
/// server types, each in file order.
inline Market build_market(const ExperimentConfig& c) {
  std::vector<CurvePtr> demand, supply;
  for (const CurveSpec& s : c.curves) {
    auto curve = make_linear_curve(s.kind, s.intercept, s.slope, s.p_min, s.p_max);
    (s.kind == CurveKind::demand ? demand : supply).push_back(std::move(curve));
  }
  std::vector<Edge> edges;
  for (const EdgeSpec& e : c.edges) {
    if (e.customer < 1 || e.server < 1) throw ConfigError("edge indices are 1-based");
    edges.push_back({e.customer - 1, e.server - 1});
  }
  Topology topo(demand.size(), supply.size(), std::move(edges));
  return Market(std::move(topo), std::move(demand), std::move(supply));
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  c.policies.clear();
  c.weights.clear();
  bool saw_policies = false, saw_weights = false;
  enum class Section { none, experiment, schedule, curve, edge } section = Section::none;
  std::optional<CurveSpec> curve;
  std::optional<EdgeSpec> edge;
  bool curve_kind = false, curve_intercept = false, curve_slope = false, curve_pmin = false, curve_pmax = false;
  bool edge_c = false, edge_s = false;
  std::size_t line_no = 0;

  auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
  auto close_block = [&] {
    if (curve) {
      if (!(curve_kind && curve_intercept && curve_slope && curve_pmin && curve_pmax))
        throw ConfigError(where() + "[curve] needs kind, intercept, slope, p_min and p_max");
      c.curves.push_back(*curve);
      curve.reset();
    }
    if (edge) {
      if (!(edge_c && edge_s)) throw ConfigError(where() + "[edge] needs customer and server");
      c.edges.push_back(*edge);
      edge.reset();
    }
  };

  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where() + "unterminated section header");
      close_block();
      const std::string name = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (name == "experiment") {
        section = Section::experiment;
      } else if (name == "schedule") {
        section = Section::schedule;
      } else if (name == "curve") {
        section = Section::curve;
        curve.emplace();
        curve_kind = curve_intercept = curve_slope = curve_pmin = curve_pmax = false;
      } else if (name == "edge") {
        section = Section::edge;
        edge.emplace();
        edge_c = edge_s = false;
      } else {
        throw ConfigError(where() + "unknown section [" + name + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where() + "expected key = value");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string val = detail::trim(std::string_view(line).substr(eq + 1));
    auto bad_key = [&] { return ConfigError(where() + "unknown key '" + key + "'"); };

    switch (section) {
      case Section::none:
        throw ConfigError(where() + "key outside any section");
      case Section::experiment:
        if (key == "name") {
          c.name = val;
        } else if (key == "horizon") {
          c.horizon = parse_integer(val, "horizon");
        } else if (key == "seeds") {
          std::tie(c.seed_first, c.seed_last) = parse_seed_range(val);
        } else if (key == "policies") {
          saw_policies = true;
          for (const auto& p : detail::split_list(val)) c.policies.push_back(parse_policy(p));
        } else if (key == "weights") {
          saw_weights = true;
          for (const auto& w : detail::split_list(val)) c.weights.push_back(parse_number(w, "weight"));
        } else if (key == "checkpoints_per_decade") {
          c.checkpoints_per_decade = static_cast<int>(parse_integer(val, key));
        } else if (key == "a_min") {
          c.a_min = parse_number(val, key);
        } else if (key == "zeta") {
          c.zeta = parse_number(val, key);
        } else if (key == "window_start") {
          c.window_start = parse_integer(val, key);
        } else if (key == "out") {
          c.out_dir = val;
        } else if (key == "trace") {
          c.trace = parse_bool(val, key);
        } else if (key == "arrival_order") {
          if (val != "customers-first") throw ConfigError(where() + "only arrival_order = customers-first is supported");
        } else {
          throw bad_key();
        }
        break;
      case Section::schedule:
        if (key == "gamma") {
          c.schedule.gamma = parse_number(val, key);
        } else if (key == "mode") {
          if (val == "anytime") c.schedule.mode = ScheduleMode::anytime;
          else if (val == "fixed_horizon") c.schedule.mode = ScheduleMode::fixed_horizon;
          else throw ConfigError(where() + "mode must be anytime or fixed_horizon");
        } else if (key == "eta_mult") {
          c.schedule.mult_eta = parse_number(val, key);
        } else if (key == "delta_mult") {
          c.schedule.mult_delta = parse_number(val, key);
        } else if (key == "alpha_mult") {
          c.schedule.mult_alpha = parse_number(val, key);
        } else if (key == "epsilon_mult") {
          c.schedule.mult_epsilon = parse_number(val, key);
        } else if (key == "e_override_mult") {
          c.schedule.e_override_mult = parse_number(val, key);
        } else if (key == "beta") {
          c.schedule.beta = parse_number(val, key);
        } else if (key == "alpha_rule") {
          if (val == "decaying") c.schedule.alpha_rule = AlphaRule::decaying;
          else if (val == "literal") c.schedule.alpha_rule = AlphaRule::literal;
          else throw ConfigError(where() + "alpha_rule must be decaying or literal");
        } else {
          throw bad_key();
        }
        break;
      case Section::curve:
        if (key == "kind") {
          if (val == "demand") curve->kind = CurveKind::demand;
          else if (val == "supply") curve->kind = CurveKind::supply;
          else throw ConfigError(where() + "curve kind must be demand or supply");
          curve_kind = true;
        } else if (key == "intercept") {
          curve->intercept = parse_number(val, key);
          curve_intercept = true;
        } else if (key == "slope") {
          curve->slope = parse_number(val, key);
          curve_slope = true;
        } else if (key == "p_min") {
          curve->p_min = parse_number(val, key);
          curve_pmin = true;
        } else if (key == "p_max") {
          curve->p_max = parse_number(val, key);
          curve_pmax = true;
        } else {
          throw bad_key();
        }
        break;
      case Section::edge:
        if (key == "customer") {
          edge->customer = static_cast<std::size_t>(parse_integer(val, key));
          edge_c = true;
        } else if (key == "server") {
          edge->server = static_cast<std::size_t>(parse_integer(val, key));
          edge_s = true;
        } else {
          throw bad_key();
        }
        break;
    }
  }
  close_block();
  if (!saw_policies) c.policies = ExperimentConfig{}.policies;
  if (!saw_weights) c.weights = ExperimentConfig{}.weights;
  validate_config(c);
  build_market(c);  // surfaces curve/topology errors at load time
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

inline std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[experiment]\n";
  os << "name = " << c.name << "\n";
  os << "horizon = " << c.horizon << "\n";
  os << "seeds = " << c.seed_first << ".." << c.seed_last << "\n";
  os << "policies = ";
  for (std::size_t k = 0; k < c.policies.size(); ++k) os << (k ? ", " : "") << to_string(c.policies[k]);
  os << "\nweights = ";
  for (std::size_t k = 0; k < c.weights.size(); ++k) os << (k ? ", " : "") << format_number(c.weights[k]);
  os << "\ncheckpoints_per_decade = " << c.checkpoints_per_decade << "\n";
  os << "a_min = " << format_number(c.a_min) << "\n";
  if (c.zeta) os << "zeta = " << format_number(*c.zeta) << "\n";
  if (c.window_start) os << "window_start = " << *c.window_start << "\n";
  os << "out = " << c.out_dir << "\n";
  os << "trace = " << (c.trace ? "true" : "false") << "\n";
  os << "arrival_order = customers-first\n";

  const Schedule& s = c.schedule;
  os << "\n[schedule]\n";
  os << "gamma = " << format_number(s.gamma) << "\n";
  os << "mode = " << to_string(s.mode) << "\n";
  os << "eta_mult = " << format_number(s.mult_eta) << "\n";
  os << "delta_mult = " << format_number(s.mult_delta) << "\n";
  os << "alpha_mult = " << format_number(s.mult_alpha) << "\n";
  os << "epsilon_mult = " << format_number(s.mult_epsilon) << "\n";
  if (s.e_override_mult) os << "e_override_mult = " << format_number(*s.e_override_mult) << "\n";
  if (s.beta) os << "beta = " << format_number(*s.beta) << "\n";
  os << "alpha_rule = " << to_string(s.alpha_rule) << "\n";

  for (const CurveSpec& cs : c.curves) {
    os << "\n[curve]\n";
    os << "kind = " << to_string(cs.kind) << "\n";
    os << "intercept = " << format_number(cs.intercept) << "\n";
    os << "slope = " << format_number(cs.slope) << "\n";
    os << "p_min = " << format_number(cs.p_min) << "\n";
    os << "p_max = " << format_number(cs.p_max) << "\n";
  }
  for (const EdgeSpec& e : c.edges) os << "\n[edge]\ncustomer = " << e.customer << "\nserver = " << e.server << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Built-in presets (also shipped as files under presets/)
// ---------------------------------------------------------------------------

inline constexpr const char* kSingleLinkPreset = R"(# One customer type, one server type, F(l) = 2(1 - l), G(m) = 2m.
[experiment]
name = single_link
horizon = 100000
seeds = 0..9
policies = prob2p, threshold, genie2p
weights = 0.001, 0.01
checkpoints_per_decade = 10
a_min = 0.01

[schedule]
gamma = 1/6
mode = anytime
eta_mult = 0.2
delta_mult = 0.2
alpha_mult = 0.2
epsilon_mult = 1.0
e_override_mult = 6.0
beta = 1.0
alpha_rule = decaying

[curve]
kind = demand
intercept = 2
slope = 2
p_min = 0
p_max = 2

[curve]
kind = supply
intercept = 0
slope = 2
p_min = 0
p_max = 2

[edge]
customer = 1
server = 1
)";

inline constexpr const char* kMultiLinkPreset = R"(# Three customer and three server types on a seven-edge graph.
[experiment]
name = multi_link
horizon = 1000000
seeds = 0..9
policies = prob2p, threshold, genie2p
weights = 0.001, 0.005, 0.01
checkpoints_per_decade = 10
a_min = 0.01

[schedule]
gamma = 1/6
mode = anytime
eta_mult = 0.1
delta_mult = 0.2
alpha_mult = 0.2
epsilon_mult = 1.0
e_override_mult = 8.0
beta = 1.0
alpha_rule = decaying

[curve]
kind = demand
intercept = 2
slope = 2
p_min = 0
p_max = 2

[curve]
kind = demand
intercept = 2
slope = 2
p_min = 0
p_max = 2

[curve]
kind = demand
intercept = 2
slope = 2
p_min = 0
p_max = 2

[curve]
kind = supply
intercept = 0
slope = 2
p_min = 0
p_max = 2

[curve]
kind = supply
intercept = 0
slope = 2
p_min = 0
p_max = 2

[curve]
kind = supply
intercept = 0
slope = 2
p_min = 0
p_max = 2

[edge]
customer = 1
server = 1

[edge]
customer = 1
server = 2

[edge]
customer = 1
server = 3

[edge]
customer = 2
server = 1

[edge]
customer = 2
server = 2

[edge]
customer = 3
server = 2

[edge]
customer = 3
server = 3
)";

inline ExperimentConfig single_link_preset() { return parse_config_string(kSingleLinkPreset); }
inline ExperimentConfig multi_link_preset() { return parse_config_string(kMultiLinkPreset); }

}  // namespace twosided
