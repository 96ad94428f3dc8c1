#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "twosided/errors.hpp"
#include "twosided/fluid.hpp"
#include "twosided/policies.hpp"
#include "twosided/queueing.hpp"
#include "twosided/rng.hpp"
#include "twosided/schedule.hpp"

namespace twosided {

// ---------------------------------------------------------------------------
// Brute-force projection
// ---------------------------------------------------------------------------

struct GridOracleResult {
  MatchRates point;
  double distance = 0.0;
  double step = 0.0;
};

/// Nearest feasible point of a grid anchored at the per-edge floors.
/// Exhaustive; only for |E| <= 2.
inline GridOracleResult grid_project(const RatePolytope& polytope, std::span<const double> x, double step = 1e-3) {
  const Topology& topo = polytope.topology();
  const std::size_t E = topo.edge_count();
  if (E == 0 || E > 2) throw DomainError("grid oracle supports 1 or 2 edges");
  if (!(step > 0.0 && step <= 1e-3)) throw DomainError("grid step must lie in (0, 1e-3]");
  if (x.size() != E) throw DomainError("vector size does not match edge count");

  Vector upper(E);
  for (std::size_t e = 0; e < E; ++e) {
    const Edge& edge = topo.edge(e);
    upper[e] = std::min(polytope.customer_bounds()[edge.customer].hi, polytope.server_bounds()[edge.server].hi);
  }
  auto count = [&](std::size_t e) {
    return static_cast<std::int64_t>(std::floor((upper[e] - polytope.floor()[e]) / step + 1e-9)) + 1;
  };
  GridOracleResult best;
  best.step = step;
  best.distance = std::numeric_limits<double>::infinity();
  MatchRates y(E);
  const std::int64_t n0 = count(0);
  const std::int64_t n1 = E == 2 ? count(1) : 1;
  for (std::int64_t a = 0; a < n0; ++a) {
    y[0] = polytope.floor()[0] + static_cast<double>(a) * step;
    for (std::int64_t b = 0; b < n1; ++b) {
      if (E == 2) y[1] = polytope.floor()[1] + static_cast<double>(b) * step;
      double d = 0.0;
      for (std::size_t e = 0; e < E; ++e) d += (y[e] - x[e]) * (y[e] - x[e]);
      if (d >= best.distance) continue;
      if (!polytope.contains(y, 1e-12)) continue;
      best.distance = d;
      best.point = y;
    }
  }
  if (best.point.empty()) throw DomainError("grid contains no feasible point");
  best.distance = std::sqrt(best.distance);
  return best;
}

inline GridOracleResult grid_project(const ShrunkRegion& region, std::span<const double> x, double step = 1e-3) {
  return grid_project(region.polytope, x, step);
}

// ---------------------------------------------------------------------------
// Transportation feasibility
// ---------------------------------------------------------------------------

/// True iff some x >= 0 supported on the edges has marginals (lambda, mu).
/// Decided by a max-flow computation (Edmonds-Karp).
inline bool transportation_feasible(const Topology& topo, std::span<const double> lambda, std::span<const double> mu,
                                    double tol = 1e-9) {
  if (lambda.size() != topo.customers() || mu.size() != topo.servers()) throw DomainError("marginal sizes mismatch");
  const double total_c = std::accumulate(lambda.begin(), lambda.end(), 0.0);
  const double total_s = std::accumulate(mu.begin(), mu.end(), 0.0);
  if (std::abs(total_c - total_s) > tol) return false;
  for (double v : lambda)
    if (v < -tol) return false;
  for (double v : mu)
    if (v < -tol) return false;

  const std::size_t I = topo.customers();
  const std::size_t J = topo.servers();
  const std::size_t n = I + J + 2;
  const std::size_t src = I + J;
  const std::size_t snk = I + J + 1;
  std::vector<std::vector<double>> cap(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < I; ++i) cap[src][i] = std::max(lambda[i], 0.0);
  for (std::size_t j = 0; j < J; ++j) cap[I + j][snk] = std::max(mu[j], 0.0);
  for (const Edge& e : topo.edges()) cap[e.customer][I + e.server] = std::numeric_limits<double>::infinity();

  double flow = 0.0;
  for (;;) {
    std::vector<std::size_t> parent(n, n);
    parent[src] = src;
    std::deque<std::size_t> queue{src};
    while (!queue.empty() && parent[snk] == n) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t v = 0; v < n; ++v)
        if (parent[v] == n && cap[u][v] > 1e-15) {
          parent[v] = u;
          queue.push_back(v);
        }
    }
    if (parent[snk] == n) break;
    double push = std::numeric_limits<double>::infinity();
    for (std::size_t v = snk; v != src; v = parent[v]) push = std::min(push, cap[parent[v]][v]);
    for (std::size_t v = snk; v != src; v = parent[v]) {
      cap[parent[v]][v] -= push;
      cap[v][parent[v]] += push;
    }
    flow += push;
  }
  return flow >= total_c - tol;
}

// ---------------------------------------------------------------------------
// Noise-free bisection
// ---------------------------------------------------------------------------

/// Sampler whose "sample mean" is the exact arrival rate at the posted
/// price. Charges N slots per round so slot accounting stays comparable.
class ExactRateSampler {
 public:
  explicit ExactRateSampler(const Market& market) : market_(&market) {}

  bool collect(std::span<const double> mid_c, std::span<const double> mid_s, std::int64_t N, Vector& est_c,
               Vector& est_s) {
    est_c.resize(mid_c.size());
    est_s.resize(mid_s.size());
    for (std::size_t i = 0; i < mid_c.size(); ++i) est_c[i] = market_->demand[i]->rate_of_price(mid_c[i]);
    for (std::size_t j = 0; j < mid_s.size(); ++j) est_s[j] = market_->supply[j]->rate_of_price(mid_s[j]);
    slots_ += N;
    return true;
  }

  std::int64_t slots() const noexcept { return slots_; }

 private:
  const Market* market_;
  std::int64_t slots_ = 0;
};

struct DeterministicBisection {
  BisectionResult result;
  // Per queue: the price that realizes the target lies outside the initial interval.
  std::vector<std::uint8_t> outside_customer;
  std::vector<std::uint8_t> outside_server;
};

inline DeterministicBisection deterministic_rate_bisection(const Market& market, std::span<const double> target_c,
                                                           std::span<const double> target_s,
                                                           std::vector<PriceInterval> intervals_c,
                                                           std::vector<PriceInterval> intervals_s, std::int64_t M,
                                                           std::int64_t N = 1) {
  DeterministicBisection out;
  for (std::size_t i = 0; i < intervals_c.size(); ++i) {
    const double p = market.demand[i]->price_of_rate(target_c[i]);
    out.outside_customer.push_back(p < intervals_c[i].lo || p > intervals_c[i].hi);
  }
  for (std::size_t j = 0; j < intervals_s.size(); ++j) {
    const double p = market.supply[j]->price_of_rate(target_s[j]);
    out.outside_server.push_back(p < intervals_s[j].lo || p > intervals_s[j].hi);
  }
  ExactRateSampler sampler(market);
  out.result = run_bisection(sampler, target_c, target_s, std::move(intervals_c), std::move(intervals_s), N, M);
  return out;
}

// ---------------------------------------------------------------------------
// Useful-sample economics
// ---------------------------------------------------------------------------

struct WaldReport {
  double mean_slots = 0.0;
  std::vector<std::int64_t> slots;
};

/// Slots the probabilistic two-price rule needs to hand one customer queue
/// N useful samples when its length is pinned at `pinned_length` (the
/// interesting case is 0 < pinned_length < q_th, where each slot is useful
/// with probability 1/2).
inline WaldReport wald_count_check(std::int64_t N, std::int64_t trials, std::uint64_t seed,
                                   std::int64_t pinned_length = 1, std::int64_t q_th = 10) {
  if (N < 1 || trials < 1) throw DomainError("wald check needs N >= 1 and trials >= 1");
  if (pinned_length >= q_th) throw DomainError("pinned queue at the threshold never yields useful samples");
  const Market market = single_link_market();
  QueueState q(1, 1);
  q.customer[0] = pinned_length;
  const Vector mid_c{1.5}, mid_s{0.5};
  WaldReport report;
  PricingDecision d;
  for (std::int64_t k = 0; k < trials; ++k) {
    RngStreams streams(derive_seed(seed, StreamPurpose::policy, static_cast<std::uint64_t>(k)), 1, 1);
    std::int64_t useful = 0, slots = 0;
    while (useful < N) {
      prob_two_price_decide(market, q, mid_c, mid_s, 0.1, q_th, streams, d);
      ++slots;
      useful += d.useful_customer[0];
    }
    report.slots.push_back(slots);
  }
  double sum = 0.0;
  for (auto s : report.slots) sum += static_cast<double>(s);
  report.mean_slots = sum / static_cast<double>(trials);
  return report;
}

// ---------------------------------------------------------------------------
// Instance validation
// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool ok = true;
  bool warning_only = false;
  std::string detail;
};

/// Assumption checks and oracle cross-checks for a user instance.
inline std::vector<CheckResult> validate_instance(const Market& market, const Schedule& schedule, double a_min,
                                                  std::int64_t horizon) {
  std::vector<CheckResult> out;
  auto add = [&](std::string name, bool ok, std::string detail, bool warning_only = false) {
    out.push_back({std::move(name), ok, warning_only, std::move(detail)});
  };

  bool curves_ok = true;
  std::ostringstream curve_note;
  auto audit = [&](const Curve& c, const char* who, std::size_t k) {
    for (int g = 0; g <= 100; ++g) {
      const double x = g / 100.0;
      if (std::abs(c.rate_of_price(c.price_of_rate(x)) - x) > 1e-12) {
        curves_ok = false;
        curve_note << who << " " << k + 1 << " fails the round trip at rate " << x << "; ";
        break;
      }
    }
    if (c.rate_of_price(c.rejecting_price()) != 0.0) {
      curves_ok = false;
      curve_note << who << " " << k + 1 << " still has arrivals at its rejecting price; ";
    }
  };
  for (std::size_t i = 0; i < market.customers(); ++i) audit(*market.demand[i], "demand curve", i);
  for (std::size_t j = 0; j < market.servers(); ++j) audit(*market.supply[j], "supply curve", j);
  add("curves", curves_ok, curves_ok ? "round trip and zero-rate rejection hold" : curve_note.str());

  const bool admissible = a_min_admissible(market.topology, a_min);
  const double a_used = admissible_a_min(market.topology, a_min);
  {
    std::ostringstream os;
    os << "a_min = " << a_min;
    if (!admissible) os << " is too large for this graph; runs use " << a_used;
    add("a_min", admissible, os.str(), true);
  }
  const double r = inner_radius(market.topology, a_used);
  {
    std::ostringstream os;
    os << "r = " << r;
    add("inner radius", r > 0.0, os.str());
  }

  try {
    const ScheduleClock clock(schedule, static_cast<double>(std::max<std::int64_t>(horizon, 1)), r);
    const ScheduleParams p = clock.at(static_cast<double>(horizon));
    std::ostringstream os;
    os << "at t = " << horizon << ": q_th = " << p.q_th << ", eps = " << p.epsilon << ", eta = " << p.eta
       << ", delta = " << p.delta << ", alpha = " << p.alpha << ", N = " << p.N << ", M = " << p.M;
    if (schedule.mode == ScheduleMode::anytime) os << ", parameters usable from t = " << clock.start();
    add("schedule", true, os.str());
    if (!(p.epsilon < p.delta)) {
      std::ostringstream w;
      w << "eps >= delta at t = " << horizon;
      add("eps below delta", false, w.str(), true);
    }
    if (horizon < 2 * p.M * p.N) {
      std::ostringstream w;
      w << "horizon " << horizon << " < 2MN = " << 2 * p.M * p.N << "; few or no outer iterations complete";
      add("horizon length", false, w.str(), true);
    }
    const ShrunkRegion region = make_shrunk_region(market.topology, a_used, clock.at(1.0).delta);
    add("shrunk region", shrunk_contains(region, region.center), "center lies in the shrunk region");
    if (market.topology.edge_count() <= 2) {
      RandomStream rs(12345);
      double worst = 0.0;
      for (int k = 0; k < 20; ++k) {
        Vector z(market.topology.edge_count());
        for (double& v : z) v = 1.5 * rs.uniform() - 0.25;
        const MatchRates a = project_to_shrunk(region, z);
        const GridOracleResult b = grid_project(region, z, 1e-3);
        for (std::size_t e = 0; e < a.size(); ++e) worst = std::max(worst, std::abs(a[e] - b.point[e]));
      }
      std::ostringstream os;
      os << "max deviation from grid oracle " << worst;
      add("projection vs grid", worst <= 1e-3 + 1e-6, os.str());
    }
  } catch (const ConfigError& e) {
    add("schedule", false, e.what());
  }

  FluidOptions fo;
  fo.a_min = a_used;
  try {
    const FluidSolution s = solve_fluid(market, fo);
    std::ostringstream os;
    os << "f* = " << s.f_star << ", KKT residual = " << s.kkt_residual;
    add("fluid solution", true, os.str());
    add("interior optimum", s.interior, s.interior ? "optimum is interior" : s.interior_note, true);
    add("transportation", transportation_feasible(market.topology, s.lambda_star, s.mu_star),
        "optimal marginals admit a matching flow");
  } catch (const FluidStall& e) {
    std::ostringstream os;
    os << "solver stalled at residual " << e.residual();
    add("fluid solution", false, os.str());
  }
  return out;
}

}  // namespace twosided
