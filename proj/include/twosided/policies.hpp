#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twosided/curves.hpp"
#include "twosided/errors.hpp"
#include "twosided/fluid.hpp"
#include "twosided/queueing.hpp"
#include "twosided/rng.hpp"
#include "twosided/schedule.hpp"
#include "twosided/topology.hpp"

namespace twosided {

enum class Side { customer, server };

struct PriceInterval {
  double lo = 0.0;
  double hi = 0.0;

  double mid() const noexcept { return 0.5 * (lo + hi); }
  double width() const noexcept { return hi - lo; }
  friend bool operator==(const PriceInterval&, const PriceInterval&) = default;
};

// ---------------------------------------------------------------------------
// Per-slot pricing rules
// ---------------------------------------------------------------------------

/// Queue control applied around the bisection midpoints.
enum class QueueControl { prob_two_price, threshold };

/// At or above the threshold a queue gets its rejecting price. Between 0 and
/// the threshold a fair coin from the queue's own stream chooses between the
/// midpoint and the midpoint shifted by alpha against arrivals. Empty queues
/// always see the midpoint. Only midpoint slots are marked useful.
inline void prob_two_price_decide(const Market& market, const QueueState& q, std::span<const double> mid_c,
                                  std::span<const double> mid_s, double alpha, std::int64_t q_th,
                                  RngStreams& streams, PricingDecision& out) {
  const std::size_t I = market.customers();
  const std::size_t J = market.servers();
  out.price_customer.resize(I);
  out.price_server.resize(J);
  out.useful_customer.resize(I);
  out.useful_server.resize(J);
  for (std::size_t i = 0; i < I; ++i) {
    const Curve& c = *market.demand[i];
    const std::int64_t len = q.customer[i];
    if (len >= q_th) {
      out.price_customer[i] = c.p_max();
      out.useful_customer[i] = 0;
    } else if (len > 0 && streams.customer_coin(i).bernoulli(0.5)) {
      out.price_customer[i] = std::min(mid_c[i] + alpha, c.p_max());
      out.useful_customer[i] = 0;
    } else {
      out.price_customer[i] = mid_c[i];
      out.useful_customer[i] = 1;
    }
  }
  for (std::size_t j = 0; j < J; ++j) {
    const Curve& c = *market.supply[j];
    const std::int64_t len = q.server[j];
    if (len >= q_th) {
      out.price_server[j] = c.p_min();
      out.useful_server[j] = 0;
    } else if (len > 0 && streams.server_coin(j).bernoulli(0.5)) {
      out.price_server[j] = std::max(mid_s[j] - alpha, c.p_min());
      out.useful_server[j] = 0;
    } else {
      out.price_server[j] = mid_s[j];
      out.useful_server[j] = 1;
    }
  }
}

inline PricingDecision prob_two_price_decide(const Market& market, const QueueState& q,
                                             std::span<const double> mid_c, std::span<const double> mid_s,
                                             double alpha, std::int64_t q_th, RngStreams& streams) {
  PricingDecision d;
  prob_two_price_decide(market, q, mid_c, mid_s, alpha, q_th, streams, d);
  return d;
}

/// Midpoint below the threshold, rejecting price at or above it.
inline void threshold_policy_decide(const Market& market, const QueueState& q, std::span<const double> mid_c,
                                    std::span<const double> mid_s, std::int64_t q_th, PricingDecision& out) {
  const std::size_t I = market.customers();
  const std::size_t J = market.servers();
  out.price_customer.resize(I);
  out.price_server.resize(J);
  out.useful_customer.resize(I);
  out.useful_server.resize(J);
  for (std::size_t i = 0; i < I; ++i) {
    const bool reject = q.customer[i] >= q_th;
    out.price_customer[i] = reject ? market.demand[i]->p_max() : mid_c[i];
    out.useful_customer[i] = reject ? 0 : 1;
  }
  for (std::size_t j = 0; j < J; ++j) {
    const bool reject = q.server[j] >= q_th;
    out.price_server[j] = reject ? market.supply[j]->p_min() : mid_s[j];
    out.useful_server[j] = reject ? 0 : 1;
  }
}

inline PricingDecision threshold_policy_decide(const Market& market, const QueueState& q,
                                               std::span<const double> mid_c, std::span<const double> mid_s,
                                               std::int64_t q_th) {
  PricingDecision d;
  threshold_policy_decide(market, q, mid_c, mid_s, q_th, d);
  return d;
}

/// Known-curve two-price rule: optimal prices at empty queues; a backed-up
/// queue gets the price that lowers its own arrival rate by alpha_bar.
inline void two_price_genie_decide(const Market& market, const QueueState& q, const FluidSolution& fluid,
                                   double alpha_bar, PricingDecision& out) {
  const std::size_t I = market.customers();
  const std::size_t J = market.servers();
  out.price_customer.resize(I);
  out.price_server.resize(J);
  out.useful_customer.assign(I, 0);
  out.useful_server.assign(J, 0);
  for (std::size_t i = 0; i < I; ++i) {
    const double target = std::clamp(fluid.lambda_star[i], 0.0, 1.0);
    const double rate = q.customer[i] > 0 ? std::max(target - alpha_bar, 0.0) : target;
    out.price_customer[i] = market.demand[i]->price_of_rate(rate);
  }
  for (std::size_t j = 0; j < J; ++j) {
    const double target = std::clamp(fluid.mu_star[j], 0.0, 1.0);
    const double rate = q.server[j] > 0 ? std::max(target - alpha_bar, 0.0) : target;
    out.price_server[j] = market.supply[j]->price_of_rate(rate);
  }
}

inline PricingDecision two_price_genie_decide(const Market& market, const QueueState& q,
                                              const FluidSolution& fluid, double alpha_bar) {
  PricingDecision d;
  two_price_genie_decide(market, q, fluid, alpha_bar, d);
  return d;
}

// ---------------------------------------------------------------------------
// Bisection
// ---------------------------------------------------------------------------

/// One halving step. A customer rate above target means the price is too
/// low, so the upper half is kept; servers mirror this. Ties take the
/// else-branch.
inline PriceInterval bisection_update(PriceInterval in, double est_rate, double target_rate, Side side) {
  const double mid = in.mid();
  if (side == Side::customer) return est_rate > target_rate ? PriceInterval{mid, in.hi} : PriceInterval{in.lo, mid};
  return est_rate > target_rate ? PriceInterval{in.lo, mid} : PriceInterval{mid, in.hi};
}

struct BisectionResult {
  Vector price_customer;  // midpoints of the last round
  Vector price_server;
  std::vector<PriceInterval> final_customer;  // intervals after the last halving
  std::vector<PriceInterval> final_server;
  std::int64_t rounds = 0;
  std::int64_t slots = 0;
  bool complete = true;
};

/// Runs the system at the given midpoints until every queue has N useful
/// samples and reports the mean of exactly the first N of each.
class LiveSampler {
 public:
  LiveSampler(Simulator& sim, QueueControl control, double alpha, std::int64_t q_th)
      : sim_(&sim), control_(control), alpha_(alpha), q_th_(q_th) {
    if (q_th < 1) throw ConfigError("queue threshold must be >= 1");
  }

  void set_control(double alpha, std::int64_t q_th) {
    alpha_ = alpha;
    q_th_ = std::max<std::int64_t>(q_th, 1);
  }

  /// Returns false if the horizon ends first; estimates are then meaningless.
  bool collect(std::span<const double> mid_c, std::span<const double> mid_s, std::int64_t N, Vector& est_c,
               Vector& est_s) {
    const Market& m = sim_->market();
    const std::size_t I = m.customers();
    const std::size_t J = m.servers();
    std::vector<std::int64_t> n_c(I, 0), n_s(J, 0), sum_c(I, 0), sum_s(J, 0);
    std::size_t pending = I + J;
    while (pending > 0) {
      if (sim_->finished()) return false;
      if (control_ == QueueControl::prob_two_price)
        prob_two_price_decide(m, sim_->queues(), mid_c, mid_s, alpha_, q_th_, sim_->streams(), decision_);
      else
        threshold_policy_decide(m, sim_->queues(), mid_c, mid_s, q_th_, decision_);
      const Arrivals& a = sim_->step(decision_);
      ++slots_;
      for (std::size_t i = 0; i < I; ++i) {
        if (!decision_.useful_customer[i] || n_c[i] >= N) continue;
        sum_c[i] += a.customer[i];
        if (++n_c[i] == N) --pending;
      }
      for (std::size_t j = 0; j < J; ++j) {
        if (!decision_.useful_server[j] || n_s[j] >= N) continue;
        sum_s[j] += a.server[j];
        if (++n_s[j] == N) --pending;
      }
    }
    est_c.resize(I);
    est_s.resize(J);
    for (std::size_t i = 0; i < I; ++i) est_c[i] = static_cast<double>(sum_c[i]) / static_cast<double>(N);
    for (std::size_t j = 0; j < J; ++j) est_s[j] = static_cast<double>(sum_s[j]) / static_cast<double>(N);
    return true;
  }

  std::int64_t slots() const noexcept { return slots_; }
  Simulator& simulator() noexcept { return *sim_; }

 private:
  Simulator* sim_;
  QueueControl control_;
  double alpha_;
  std::int64_t q_th_;
  std::int64_t slots_ = 0;
  PricingDecision decision_;
};

/// M rounds of interval halving. `sampler.collect(mid_c, mid_s, N, est_c,
/// est_s)` supplies the rate estimates at each round's midpoints.
template <class Sampler>
BisectionResult run_bisection(Sampler& sampler, std::span<const double> target_c, std::span<const double> target_s,
                              std::vector<PriceInterval> intervals_c, std::vector<PriceInterval> intervals_s,
                              std::int64_t N, std::int64_t M) {
  if (intervals_c.size() != target_c.size() || intervals_s.size() != target_s.size())
    throw DomainError("bisection targets and intervals differ in size");
  if (M > 0 && N < 1) throw ConfigError("bisection needs N >= 1 samples per round");
  BisectionResult out;
  const std::int64_t slots_before = sampler.slots();
  Vector mid_c(intervals_c.size()), mid_s(intervals_s.size()), est_c, est_s;
  auto fill_mids = [&] {
    for (std::size_t i = 0; i < mid_c.size(); ++i) mid_c[i] = intervals_c[i].mid();
    for (std::size_t j = 0; j < mid_s.size(); ++j) mid_s[j] = intervals_s[j].mid();
  };
  fill_mids();
  for (std::int64_t m = 1; m <= M; ++m) {
    fill_mids();
    if (!sampler.collect(mid_c, mid_s, N, est_c, est_s)) {
      out.complete = false;
      break;
    }
    for (std::size_t i = 0; i < mid_c.size(); ++i)
      intervals_c[i] = bisection_update(intervals_c[i], est_c[i], target_c[i], Side::customer);
    for (std::size_t j = 0; j < mid_s.size(); ++j)
      intervals_s[j] = bisection_update(intervals_s[j], est_s[j], target_s[j], Side::server);
    out.rounds = m;
  }
  out.price_customer = mid_c;
  out.price_server = mid_s;
  out.final_customer = std::move(intervals_c);
  out.final_server = std::move(intervals_s);
  out.slots = sampler.slots() - slots_before;
  return out;
}

// ---------------------------------------------------------------------------
// Gradient step pieces
// ---------------------------------------------------------------------------

/// Uniform direction on the unit sphere from normalized Gaussians.
inline Vector sample_unit_direction(std::size_t dim, RandomStream& stream) {
  if (dim == 0) throw DomainError("direction dimension must be >= 1");
  Vector u(dim);
  double norm2 = 0.0;
  while (!(norm2 > 1e-24)) {
    norm2 = 0.0;
    for (double& v : u) {
      v = stream.normal();
      norm2 += v * v;
    }
  }
  const double norm = std::sqrt(norm2);
  for (double& v : u) v /= norm;
  return u;
}

/// sum_i lambda_i p_c,i - sum_j mu_j p_s,j.
inline double price_profit(std::span<const double> lambda, std::span<const double> price_c,
                           std::span<const double> mu, std::span<const double> price_s) {
  double p = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) p += lambda[i] * price_c[i];
  for (std::size_t j = 0; j < mu.size(); ++j) p -= mu[j] * price_s[j];
  return p;
}

/// Two-point estimate |E| / (2 delta) * (profit_plus - profit_minus) * u.
inline Vector gradient_estimate(double profit_plus, double profit_minus, std::span<const double> u, double delta,
                                std::size_t edge_count) {
  if (!(delta > 0.0)) throw DomainError("gradient estimate needs delta > 0");
  const double scale = static_cast<double>(edge_count) / (2.0 * delta) * (profit_plus - profit_minus);
  Vector g(u.size());
  for (std::size_t e = 0; e < u.size(); ++e) g[e] = scale * u[e];
  return g;
}

// ---------------------------------------------------------------------------
// Learning policy
// ---------------------------------------------------------------------------

struct IterationRecord {
  std::int64_t k = 0;
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;
  ScheduleParams params;
  MatchRates x;
  Vector u;
  Vector gradient;
  MatchRates x_next;
  double profit_plus = 0.0;
  double profit_minus = 0.0;
  bool complete = false;
};

struct LearningOptions {
  Schedule schedule;
  double a_min = 0.01;
  QueueControl control = QueueControl::prob_two_price;
  bool keep_detail = false;
  bool keep_iterations = false;
  std::optional<MatchRates> x_init;  // defaults to the center of the shrunk set
};

struct LearningResult {
  RunTrace trace;
  std::vector<IterationRecord> iterations;
  std::int64_t completed_iterations = 0;
  MatchRates x_final;
};

namespace detail {

inline Vector clamp_rates(Vector v) {
  for (double& r : v) r = std::clamp(r, 0.0, 1.0);
  return v;
}

inline std::vector<PriceInterval> centered_intervals(const std::vector<CurvePtr>& curves, std::span<const double> centers,
                                                     std::span<const double> half_widths) {
  std::vector<PriceInterval> out(curves.size());
  for (std::size_t k = 0; k < curves.size(); ++k)
    out[k] = {curves[k]->clamp_price(centers[k] - half_widths[k]), curves[k]->clamp_price(centers[k] + half_widths[k])};
  return out;
}

}  // namespace detail

/// Zeroth-order projected gradient ascent over match rates. Each outer
/// iteration draws a direction, prices the two probe points by bisection
/// under the chosen queue control, and steps along the two-point gradient
/// estimate. Runs until the horizon is exhausted.
inline LearningResult run_learning_policy(const Market& market, const LearningOptions& opt, std::uint64_t seed,
                                          std::int64_t horizon) {
  const Topology& topo = market.topology;
  const double a_min = admissible_a_min(topo, opt.a_min);
  const double r = inner_radius(topo, a_min);
  const ScheduleClock clock(opt.schedule, static_cast<double>(std::max<std::int64_t>(horizon, 1)), r);

  Simulator sim(market, seed, horizon, opt.keep_detail);
  ScheduleParams params = clock.at(1.0);
  ShrunkRegion region = make_shrunk_region(topo, a_min, params.delta);
  MatchRates x = opt.x_init ? *opt.x_init : region.center;
  if (!shrunk_contains(region, x)) throw ConfigError("initial match rates lie outside the shrunk region");

  Margins margins = margins_for(market, opt.schedule, params);
  const ArrivalRates start = induced_rates(topo, x);
  Vector start_c(market.customers()), start_s(market.servers());
  for (std::size_t i = 0; i < start_c.size(); ++i) start_c[i] = market.demand[i]->price_of_rate(start.customer[i]);
  for (std::size_t j = 0; j < start_s.size(); ++j) start_s[j] = market.supply[j]->price_of_rate(start.server[j]);
  const auto init_c = detail::centered_intervals(market.demand, start_c, margins.customer);
  const auto init_s = detail::centered_intervals(market.supply, start_s, margins.server);

  LiveSampler sampler(sim, opt.control, params.alpha, params.q_th);
  LearningResult result;
  BisectionResult last_plus, last_minus;
  const std::size_t E = topo.edge_count();

  for (std::int64_t k = 1; !sim.finished(); ++k) {
    IterationRecord rec;
    rec.k = k;
    rec.t_start = sim.now();
    if (k > 1 && opt.schedule.mode == ScheduleMode::anytime) {
      params = clock.at(static_cast<double>(sim.now()));
      region = make_shrunk_region(topo, a_min, params.delta);
      margins = margins_for(market, opt.schedule, params);
      x = project_to_shrunk(region, x);
    }
    sampler.set_control(params.alpha, params.q_th);
    rec.params = params;
    rec.x = x;

    const Vector u = sample_unit_direction(E, sim.streams().direction());
    MatchRates x_plus(E), x_minus(E);
    for (std::size_t e = 0; e < E; ++e) {
      x_plus[e] = x[e] + params.delta * u[e];
      x_minus[e] = x[e] - params.delta * u[e];
    }
    const ArrivalRates plus = induced_rates(topo, x_plus);
    const ArrivalRates minus = induced_rates(topo, x_minus);
    const Vector lam_p = detail::clamp_rates(plus.customer), mu_p = detail::clamp_rates(plus.server);
    const Vector lam_m = detail::clamp_rates(minus.customer), mu_m = detail::clamp_rates(minus.server);

    auto intervals = [&](const BisectionResult& prev, Side side) {
      if (k == 1) return side == Side::customer ? init_c : init_s;
      return side == Side::customer ? detail::centered_intervals(market.demand, prev.price_customer, margins.customer)
                                     : detail::centered_intervals(market.supply, prev.price_server, margins.server);
    };
    BisectionResult bp = run_bisection(sampler, lam_p, mu_p, intervals(last_plus, Side::customer),
                                       intervals(last_plus, Side::server), params.N, params.M);
    if (!bp.complete) break;
    BisectionResult bm = run_bisection(sampler, lam_m, mu_m, intervals(last_minus, Side::customer),
                                       intervals(last_minus, Side::server), params.N, params.M);
    if (!bm.complete) break;

    rec.profit_plus = price_profit(lam_p, bp.price_customer, mu_p, bp.price_server);
    rec.profit_minus = price_profit(lam_m, bm.price_customer, mu_m, bm.price_server);
    const Vector g = gradient_estimate(rec.profit_plus, rec.profit_minus, u, params.delta, E);
    MatchRates step(E);
    for (std::size_t e = 0; e < E; ++e) step[e] = x[e] + params.eta * g[e];
    x = project_to_shrunk(region, step);

    last_plus = std::move(bp);
    last_minus = std::move(bm);
    ++result.completed_iterations;
    if (opt.keep_iterations) {
      rec.u = u;
      rec.gradient = g;
      rec.x_next = x;
      rec.t_end = sim.now();
      rec.complete = true;
      result.iterations.push_back(std::move(rec));
    }
  }
  result.x_final = x;
  result.trace = sim.take_trace(opt.control == QueueControl::prob_two_price ? "prob2p" : "threshold",
                                opt.schedule.gamma);
  return result;
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

struct GenieOptions {
  Schedule schedule;
  double a_min = 0.01;
  std::optional<double> alpha_bar;  // defaults to the schedule's alpha, refreshed every slot
  bool keep_detail = false;
};

/// Static optimal prices from the fluid solution with the two-price
/// perturbation on backed-up queues. No threshold.
inline RunTrace run_genie_policy(const Market& market, const GenieOptions& opt, std::uint64_t seed,
                                 std::int64_t horizon) {
  FluidOptions fo;
  fo.a_min = opt.a_min;
  const FluidSolution fluid = solve_fluid(market, fo);
  std::optional<ScheduleClock> clock;
  if (!opt.alpha_bar) {
    const double a_min = admissible_a_min(market.topology, opt.a_min);
    clock.emplace(opt.schedule, static_cast<double>(std::max<std::int64_t>(horizon, 1)),
                  inner_radius(market.topology, a_min));
  }
  Simulator sim(market, seed, horizon, opt.keep_detail);
  PricingDecision d;
  while (!sim.finished()) {
    const double alpha_bar = opt.alpha_bar ? *opt.alpha_bar : clock->at(static_cast<double>(sim.now())).alpha;
    two_price_genie_decide(market, sim.queues(), fluid, alpha_bar, d);
    sim.step(d);
  }
  return sim.take_trace("genie2p", opt.schedule.gamma);
}

namespace detail {

// Pool-adjacent-violators fit of a nondecreasing sequence.
inline Vector isotonic_fit(std::span<const double> y, std::span<const double> w) {
  struct Block {
    double value;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (std::size_t k = 0; k < y.size(); ++k) {
    blocks.push_back({y[k], w[k], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].value > blocks.back().value) {
      Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      a.value = (a.value * a.weight + b.value * b.weight) / (a.weight + b.weight);
      a.weight += b.weight;
      a.count += b.count;
    }
  }
  Vector out;
  out.reserve(y.size());
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.value);
  return out;
}

}  // namespace detail

/// Monotone piecewise-linear curve through sample-mean rates observed at
/// `prices`, pinned to rate 0 at the rejecting price and rate 1 at the
/// opposite end of [p_min, p_max].
inline CurvePtr fit_monotone_curve(CurveKind kind, double p_min, double p_max, std::span<const double> prices,
                                   std::span<const double> rates) {
  // Order the observations so that the true rate increases along the list.
  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(kind == CurveKind::demand ? p_max : p_min, 0.0);
  for (std::size_t k = 0; k < prices.size(); ++k) pts.emplace_back(prices[k], rates[k]);
  pts.emplace_back(kind == CurveKind::demand ? p_min : p_max, 1.0);
  std::stable_sort(pts.begin() + 1, pts.end() - 1, [kind](const auto& a, const auto& b) {
    return kind == CurveKind::demand ? a.first > b.first : a.first < b.first;
  });
  Vector y, w(pts.size(), 1.0);
  for (const auto& p : pts) y.push_back(p.second);
  w.front() = w.back() = 1e9;
  const Vector fit = detail::isotonic_fit(y, w);

  std::vector<double> knot_rate{0.0}, knot_price{pts.front().first};
  for (std::size_t k = 1; k + 1 < pts.size(); ++k) {
    const double rate = fit[k];
    if (rate <= knot_rate.back() + 1e-9 || rate >= 1.0 - 1e-9) continue;
    const double price = pts[k].first;
    const bool monotone = kind == CurveKind::demand ? price < knot_price.back() : price > knot_price.back();
    if (!monotone) continue;
    knot_rate.push_back(rate);
    knot_price.push_back(price);
  }
  const double last_price = pts.back().first;
  const bool monotone = kind == CurveKind::demand ? last_price < knot_price.back() : last_price > knot_price.back();
  if (!monotone && knot_rate.size() > 1) {
    knot_rate.pop_back();
    knot_price.pop_back();
  }
  knot_rate.push_back(1.0);
  knot_price.push_back(last_price);
  return std::make_shared<PiecewiseLinearCurve>(kind, std::move(knot_rate), std::move(knot_price));
}

struct EtoOptions {
  std::optional<double> zeta;  // defaults to T^(-1/4)
  double a_min = 0.01;
  bool keep_detail = false;
};

struct EtoResult {
  RunTrace trace;
  double zeta = 0.0;
  std::int64_t grid_size = 0;
  std::int64_t slots_per_price = 0;
  std::int64_t exploration_slots = 0;  // slots actually spent exploring
  std::int64_t exploration_max_queue = 0;
  Vector price_customer;  // static prices of the exploitation phase
  Vector price_server;
  bool fluid_stalled = false;
};

/// Explore a uniform price grid without queue control, fit the curves, then
/// post the prices that are optimal for the fitted curves.
inline EtoResult run_estimate_then_optimize(const Market& market, const EtoOptions& opt, std::uint64_t seed,
                                            std::int64_t horizon) {
  EtoResult out;
  out.zeta = opt.zeta ? *opt.zeta : std::pow(static_cast<double>(std::max<std::int64_t>(horizon, 1)), -0.25);
  if (!(out.zeta > 0.0 && out.zeta <= 1.0)) throw ConfigError("zeta must lie in (0, 1]");
  out.grid_size = static_cast<std::int64_t>(std::ceil(1.0 / out.zeta - 1e-9));
  out.slots_per_price = static_cast<std::int64_t>(std::ceil(1.0 / (out.zeta * out.zeta) - 1e-9));
  const std::size_t I = market.customers();
  const std::size_t J = market.servers();
  const auto K = static_cast<std::size_t>(out.grid_size);

  auto grid_price = [&](const Curve& c, std::size_t k) {
    return c.p_min() + (static_cast<double>(k) + 0.5) * (c.p_max() - c.p_min()) / static_cast<double>(K);
  };

  Simulator sim(market, seed, horizon, opt.keep_detail);
  std::vector<Vector> sums_c(I, Vector(K, 0.0)), sums_s(J, Vector(K, 0.0));
  std::vector<std::int64_t> counts(K, 0);
  PricingDecision d(I, J);
  std::fill(d.useful_customer.begin(), d.useful_customer.end(), 1);
  std::fill(d.useful_server.begin(), d.useful_server.end(), 1);
  for (std::size_t k = 0; k < K && !sim.finished(); ++k) {
    for (std::size_t i = 0; i < I; ++i) d.price_customer[i] = grid_price(*market.demand[i], k);
    for (std::size_t j = 0; j < J; ++j) d.price_server[j] = grid_price(*market.supply[j], k);
    for (std::int64_t s = 0; s < out.slots_per_price && !sim.finished(); ++s) {
      out.exploration_max_queue = std::max(out.exploration_max_queue, sim.queues().longest());
      const Arrivals& a = sim.step(d);
      ++out.exploration_slots;
      ++counts[k];
      for (std::size_t i = 0; i < I; ++i) sums_c[i][k] += a.customer[i];
      for (std::size_t j = 0; j < J; ++j) sums_s[j][k] += a.server[j];
    }
  }
  out.exploration_max_queue = std::max(out.exploration_max_queue, sim.queues().longest());

  if (!sim.finished()) {
    std::vector<CurvePtr> demand(I), supply(J);
    auto fit = [&](const Curve& c, const Vector& sums) {
      Vector prices, rates;
      for (std::size_t k = 0; k < K; ++k) {
        if (counts[k] == 0) continue;
        prices.push_back(grid_price(c, k));
        rates.push_back(sums[k] / static_cast<double>(counts[k]));
      }
      return fit_monotone_curve(c.kind(), c.p_min(), c.p_max(), prices, rates);
    };
    for (std::size_t i = 0; i < I; ++i) demand[i] = fit(*market.demand[i], sums_c[i]);
    for (std::size_t j = 0; j < J; ++j) supply[j] = fit(*market.supply[j], sums_s[j]);
    const Market estimate(market.topology, std::move(demand), std::move(supply));
    FluidOptions fo;
    fo.a_min = opt.a_min;
    FluidSolution sol;
    try {
      sol = solve_fluid(estimate, fo);
    } catch (const FluidStall& stall) {
      sol = stall.best();
      out.fluid_stalled = true;
    }
    out.price_customer = sol.price_customer;
    out.price_server = sol.price_server;
    for (std::size_t i = 0; i < I; ++i) d.price_customer[i] = market.demand[i]->clamp_price(sol.price_customer[i]);
    for (std::size_t j = 0; j < J; ++j) d.price_server[j] = market.supply[j]->clamp_price(sol.price_server[j]);
    while (!sim.finished()) sim.step(d);
  }
  out.trace = sim.take_trace("eto", 0.0);
  return out;
}

}  // namespace twosided
