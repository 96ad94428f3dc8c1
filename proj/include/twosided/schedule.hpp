#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "twosided/errors.hpp"
#include "twosided/topology.hpp"

namespace twosided {

enum class ScheduleMode { fixed_horizon, anytime };

/// How alpha scales with time. `decaying` uses exponent -gamma/2 (the regime
/// the regret bounds need); `literal` uses +gamma/2.
enum class AlphaRule { decaying, literal };

inline const char* to_string(ScheduleMode m) { return m == ScheduleMode::anytime ? "anytime" : "fixed_horizon"; }
inline const char* to_string(AlphaRule a) { return a == AlphaRule::literal ? "literal" : "decaying"; }

/// Parameter rule of the learning policies. Exponents follow gamma; each
/// parameter carries a multiplicative constant.
struct Schedule {
  double gamma = 1.0 / 6.0;
  ScheduleMode mode = ScheduleMode::fixed_horizon;
  double mult_eta = 1.0;
  double mult_delta = 1.0;
  double mult_alpha = 1.0;
  double mult_epsilon = 1.0;
  std::optional<double> e_override_mult;
  std::optional<double> beta;  // default 1/gamma - 1 (5 when gamma > 1/6)
  AlphaRule alpha_rule = AlphaRule::decaying;

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

struct ScheduleParams {
  double t = 0.0;  // time at which the rule was evaluated
  std::int64_t q_th = 0;
  double epsilon = 0.0;
  double eta = 0.0;
  double delta = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::int64_t N = 0;
  std::int64_t M = 0;
};

/// N = ceil((beta / eps^2) ln(1/eps)).
inline std::int64_t sample_count(double epsilon, double beta) {
  return static_cast<std::int64_t>(std::ceil(beta / (epsilon * epsilon) * std::log(1.0 / epsilon) - 1e-9));
}

/// M = ceil(log2(1/eps)); 0 once eps >= 1.
inline std::int64_t bisection_rounds(double epsilon) {
  const double v = std::log2(1.0 / epsilon);
  return v <= 0.0 ? 0 : static_cast<std::int64_t>(std::ceil(v - 1e-9));
}

namespace detail {

inline void check_schedule(const Schedule& s) {
  if (!(s.gamma > 0.0 && s.gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  for (double m : {s.mult_eta, s.mult_delta, s.mult_alpha, s.mult_epsilon})
    if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("schedule multipliers must be positive");
  if (s.beta && !(*s.beta > 0.0)) throw ConfigError("beta must be positive");
  if (s.e_override_mult && !(*s.e_override_mult > 0.0)) throw ConfigError("e_override_mult must be positive");
}

// Evaluation without any validity checks.
inline ScheduleParams evaluate(const Schedule& s, double t) {
  ScheduleParams p;
  p.t = t;
  p.q_th = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(std::pow(t, s.gamma) - 1e-9)));
  const bool optimal_branch = s.gamma <= 1.0 / 6.0 + 1e-15;
  const double g = optimal_branch ? s.gamma : 1.0 / 6.0;
  p.epsilon = s.mult_epsilon * std::pow(t, -2.0 * g);
  p.eta = s.mult_eta * std::pow(t, -g);
  p.delta = s.mult_delta * std::pow(t, -g);
  const double alpha_exp = s.alpha_rule == AlphaRule::literal ? g / 2.0 : -g / 2.0;
  p.alpha = s.mult_alpha * std::pow(t, alpha_exp);
  p.beta = s.beta ? *s.beta : (optimal_branch ? 1.0 / s.gamma - 1.0 : 5.0);
  if (p.epsilon > 0.0 && p.epsilon < 1.0) {
    p.N = sample_count(p.epsilon, p.beta);
    p.M = bisection_rounds(p.epsilon);
  }
  return p;
}

inline bool usable(const ScheduleParams& p, double r) {
  return p.epsilon > 0.0 && p.epsilon < std::exp(-1.0) && p.N >= 1 && p.M >= 1 && p.delta < r;
}

}  // namespace detail

/// Evaluates the schedule at horizon (or time) T. Throws ConfigError when
/// eps >= 1/e or eps >= delta.
inline ScheduleParams schedule_params(const Schedule& s, double T) {
  detail::check_schedule(s);
  if (!(T >= 1.0)) throw ConfigError("schedule time must be >= 1");
  ScheduleParams p = detail::evaluate(s, T);
  if (!(p.epsilon < std::exp(-1.0))) {
    std::ostringstream os;
    os << "derived epsilon = " << p.epsilon << " is not below 1/e at t = " << T;
    throw ConfigError(os.str());
  }
  if (!(p.epsilon < p.delta)) {
    std::ostringstream os;
    os << "derived epsilon = " << p.epsilon << " is not below delta = " << p.delta << " at t = " << T;
    throw ConfigError(os.str());
  }
  return p;
}

/// Smallest integer t at which the schedule gives eps < 1/e, N >= 1,
/// M >= 1 and delta < r. All four conditions are monotone in t.
inline double schedule_start(const Schedule& s, double r) {
  detail::check_schedule(s);
  auto ok = [&](double t) { return detail::usable(detail::evaluate(s, t), r); };
  if (ok(1.0)) return 1.0;
  double hi = 2.0;
  while (!ok(hi)) {
    hi *= 2.0;
    if (hi > 1e15) throw ConfigError("schedule never yields usable parameters (check multipliers against r)");
  }
  double lo = hi / 2.0;
  while (hi - lo > 1.0) {
    const double mid = std::floor((lo + hi) / 2.0);
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

/// Parameters a run uses at slot t. Fixed-horizon schedules are evaluated
/// once at the horizon; anytime schedules at max(t, schedule_start), where
/// eps < delta is not enforced.
class ScheduleClock {
 public:
  ScheduleClock(const Schedule& s, double horizon, double r) : schedule_(s), r_(r) {
    detail::check_schedule(s);
    if (s.mode == ScheduleMode::fixed_horizon) {
      fixed_ = schedule_params(s, horizon);
      if (!(fixed_.delta < r)) {
        std::ostringstream os;
        os << "delta = " << fixed_.delta << " is not below the inner radius r = " << r;
        throw ConfigError(os.str());
      }
    } else {
      start_ = schedule_start(s, r);
    }
  }

  const Schedule& schedule() const noexcept { return schedule_; }
  double start() const noexcept { return start_; }

  ScheduleParams at(double t) const {
    if (schedule_.mode == ScheduleMode::fixed_horizon) return fixed_;
    return detail::evaluate(schedule_, std::max(t, start_));
  }

 private:
  Schedule schedule_;
  double r_;
  double start_ = 1.0;
  ScheduleParams fixed_;
};

/// Half-widths of the price search intervals that open every outer
/// iteration after the first.
struct Margins {
  Vector customer;
  Vector server;
};

/// Literal evaluation of the margin formulas built from the curves'
/// Lipschitz constants, price ranges and the graph degrees.
inline Margins compute_margins(const Market& market, double eta, double epsilon, double delta) {
  if (eta < 0.0 || epsilon < 0.0 || delta < 0.0) throw DomainError("margin parameters must be nonnegative");
  const Topology& topo = market.topology;
  const double E = static_cast<double>(topo.edge_count());
  const double E32 = std::pow(E, 1.5);
  const double E12 = std::sqrt(E);

  auto spread = [](const Curve& c) {
    const CurveConstants k = c.constants();
    return k.lipschitz_fwd * (1.0 + k.lipschitz_inv * (c.p_max() - c.p_min()));
  };
  double spread_sum = 0.0;
  double degree_sum = 0.0;
  for (std::size_t i = 0; i < market.customers(); ++i) {
    spread_sum += spread(*market.demand[i]);
    degree_sum += static_cast<double>(topo.customer_edges(i).size()) *
                  (market.demand[i]->constants().lipschitz_fwd + market.demand[i]->p_max());
  }
  for (std::size_t j = 0; j < market.servers(); ++j) {
    spread_sum += spread(*market.supply[j]);
    degree_sum += static_cast<double>(topo.server_edges(j).size()) *
                  (market.supply[j]->constants().lipschitz_fwd + market.supply[j]->p_max());
  }
  const double bias = eta * epsilon == 0.0 ? 0.0 : 2.0 * eta * epsilon * E32 / delta * spread_sum;

  auto margin = [&](const Curve& c) {
    const double L = c.constants().lipschitz_fwd;
    return L * bias + 2.0 * epsilon * spread(c) + eta * E32 * L * degree_sum + 2.0 * delta * E12 * L;
  };
  Margins m;
  for (const auto& c : market.demand) m.customer.push_back(margin(*c));
  for (const auto& c : market.supply) m.server.push_back(margin(*c));
  return m;
}

/// Uniform margins mult * max{delta, eta, epsilon}.
inline Margins override_margins(const Market& market, double mult, double eta, double epsilon, double delta) {
  const double v = mult * std::max({delta, eta, epsilon});
  return {Vector(market.customers(), v), Vector(market.servers(), v)};
}

inline Margins margins_for(const Market& market, const Schedule& s, const ScheduleParams& p) {
  if (s.e_override_mult) return override_margins(market, *s.e_override_mult, p.eta, p.epsilon, p.delta);
  return compute_margins(market, p.eta, p.epsilon, p.delta);
}

}  // namespace twosided
