#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "twosided/errors.hpp"
#include "twosided/rng.hpp"
#include "twosided/topology.hpp"

namespace twosided {

/// Queue lengths observed at the start of slot t (t >= 1).
struct QueueState {
  std::vector<std::int64_t> customer;
  std::vector<std::int64_t> server;
  std::int64_t t = 1;

  QueueState() = default;
  QueueState(std::size_t customers, std::size_t servers) : customer(customers, 0), server(servers, 0) {}

  std::int64_t total() const {
    std::int64_t s = 0;
    for (auto q : customer) s += q;
    for (auto q : server) s += q;
    return s;
  }

  std::int64_t longest() const {
    std::int64_t m = 0;
    for (auto q : customer) m = std::max(m, q);
    for (auto q : server) m = std::max(m, q);
    return m;
  }
};

/// An edge (i, j) with both queues nonempty. Longest-queue matching never
/// leaves one behind after a completed slot.
inline std::optional<std::size_t> structural_violation(const QueueState& q, const Topology& topology) {
  for (std::size_t e = 0; e < topology.edge_count(); ++e) {
    const Edge& edge = topology.edge(e);
    if (q.customer[edge.customer] > 0 && q.server[edge.server] > 0) return e;
  }
  return std::nullopt;
}

/// Arrival indicators of one slot.
struct Arrivals {
  std::vector<std::uint8_t> customer;
  std::vector<std::uint8_t> server;
};

/// Prices posted for one slot, plus which queues saw their unperturbed
/// learning price (only those slots yield useful samples).
struct PricingDecision {
  Vector price_customer;
  Vector price_server;
  std::vector<std::uint8_t> useful_customer;
  std::vector<std::uint8_t> useful_server;

  PricingDecision() = default;
  PricingDecision(std::size_t customers, std::size_t servers)
      : price_customer(customers, 0.0),
        price_server(servers, 0.0),
        useful_customer(customers, 0),
        useful_server(servers, 0) {}
};

inline void sample_arrivals(const ArrivalRates& rates, RngStreams& streams, Arrivals& out) {
  out.customer.resize(rates.customer.size());
  out.server.resize(rates.server.size());
  for (std::size_t i = 0; i < rates.customer.size(); ++i) {
    const double p = rates.customer[i];
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("customer arrival rate outside [0, 1]");
    out.customer[i] = streams.customer_arrival(i).bernoulli(p) ? 1 : 0;
  }
  for (std::size_t j = 0; j < rates.server.size(); ++j) {
    const double p = rates.server[j];
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("server arrival rate outside [0, 1]");
    out.server[j] = streams.server_arrival(j).bernoulli(p) ? 1 : 0;
  }
}

/// Bernoulli arrivals, each queue drawing from its own substream.
inline Arrivals sample_arrivals(const ArrivalRates& rates, RngStreams& streams) {
  Arrivals a;
  sample_arrivals(rates, streams, a);
  return a;
}

/// Processes the slot's arrivals in order (customers ascending, then servers
/// ascending). An arrival matches the longest nonempty compatible opposite
/// queue, lowest index on ties, otherwise it joins its own queue. `matches`
/// receives per-edge match counts for the slot.
inline void match_step(QueueState& q, const Arrivals& arrivals, const Topology& topology,
                       std::span<std::uint8_t> matches) {
  std::fill(matches.begin(), matches.end(), std::uint8_t{0});
  for (std::size_t i = 0; i < arrivals.customer.size(); ++i) {
    if (!arrivals.customer[i]) continue;
    std::optional<std::size_t> pick;
    std::int64_t best = 0;
    for (std::size_t e : topology.customer_edges(i)) {
      const std::size_t j = topology.edge(e).server;
      const std::int64_t len = q.server[j];
      if (len > best || (len == best && len > 0 && pick && j < topology.edge(*pick).server)) {
        best = len;
        pick = e;
      }
    }
    if (pick) {
      --q.server[topology.edge(*pick).server];
      ++matches[*pick];
    } else {
      ++q.customer[i];
    }
  }
  for (std::size_t j = 0; j < arrivals.server.size(); ++j) {
    if (!arrivals.server[j]) continue;
    std::optional<std::size_t> pick;
    std::int64_t best = 0;
    for (std::size_t e : topology.server_edges(j)) {
      const std::size_t i = topology.edge(e).customer;
      const std::int64_t len = q.customer[i];
      if (len > best || (len == best && len > 0 && pick && i < topology.edge(*pick).customer)) {
        best = len;
        pick = e;
      }
    }
    if (pick) {
      --q.customer[topology.edge(*pick).customer];
      ++matches[*pick];
    } else {
      ++q.server[j];
    }
  }
  ++q.t;
}

inline std::vector<std::uint8_t> match_step(QueueState& q, const Arrivals& arrivals, const Topology& topology) {
  std::vector<std::uint8_t> matches(topology.edge_count(), 0);
  match_step(q, arrivals, topology, matches);
  return matches;
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

struct RunMeta {
  std::string policy;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  std::int64_t horizon = 0;
  std::uint64_t fingerprint = 0;
};

/// Full per-slot record, slot-major. Queue lengths are taken after the slot.
struct DetailedTrace {
  std::vector<double> price_customer;
  std::vector<double> price_server;
  std::vector<std::uint8_t> arrival_customer;
  std::vector<std::uint8_t> arrival_server;
  std::vector<std::uint8_t> useful_customer;
  std::vector<std::uint8_t> useful_server;
  std::vector<std::uint8_t> matches;
  std::vector<std::int64_t> queue_customer;
  std::vector<std::int64_t> queue_server;
};

/// What a run leaves behind. Rates are the arrival probabilities actually
/// induced by the posted prices; queue statistics are taken at the start of
/// each slot, before arrivals.
struct RunTrace {
  RunMeta meta;
  std::size_t customers = 0;
  std::size_t servers = 0;
  std::size_t edges = 0;
  std::int64_t slots = 0;
  std::vector<double> rates;  // per slot: lambda_1..lambda_I, mu_1..mu_J
  std::vector<std::int64_t> queue_total;
  std::vector<std::int64_t> queue_max;
  std::vector<double> realized_profit;
  std::int64_t structural_violations = 0;
  std::optional<DetailedTrace> detail;

  double customer_rate(std::int64_t slot_index, std::size_t i) const {
    return rates[static_cast<std::size_t>(slot_index) * (customers + servers) + i];
  }
  double server_rate(std::int64_t slot_index, std::size_t j) const {
    return rates[static_cast<std::size_t>(slot_index) * (customers + servers) + customers + j];
  }
};

struct ConservationReport {
  bool ok = true;
  std::int64_t first_bad_slot = 0;  // 1-based, 0 when ok
};

/// Replays Q(t+1) = Q(t) + A(t) - matches(t) for every queue and slot of a
/// detailed trace.
inline ConservationReport conservation_check(const RunTrace& trace, const Topology& topology) {
  if (trace.slots == 0) return {};
  if (!trace.detail) throw DomainError("conservation check needs a detailed trace");
  const DetailedTrace& d = *trace.detail;
  const std::size_t I = trace.customers;
  const std::size_t J = trace.servers;
  const std::size_t E = trace.edges;
  std::vector<std::int64_t> qc(I, 0), qs(J, 0);
  for (std::int64_t t = 0; t < trace.slots; ++t) {
    const auto st = static_cast<std::size_t>(t);
    std::vector<std::int64_t> next_c(I), next_s(J);
    for (std::size_t i = 0; i < I; ++i) next_c[i] = qc[i] + d.arrival_customer[st * I + i];
    for (std::size_t j = 0; j < J; ++j) next_s[j] = qs[j] + d.arrival_server[st * J + j];
    for (std::size_t e = 0; e < E; ++e) {
      const std::int64_t m = d.matches[st * E + e];
      next_c[topology.edge(e).customer] -= m;
      next_s[topology.edge(e).server] -= m;
    }
    for (std::size_t i = 0; i < I; ++i)
      if (next_c[i] < 0 || next_c[i] != d.queue_customer[st * I + i]) return {false, t + 1};
    for (std::size_t j = 0; j < J; ++j)
      if (next_s[j] < 0 || next_s[j] != d.queue_server[st * J + j]) return {false, t + 1};
    qc = std::move(next_c);
    qs = std::move(next_s);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Simulator
// ---------------------------------------------------------------------------

/// Owns the queue state, random streams and trace of one run. Each call to
/// step() posts one slot of prices, draws arrivals through the true curves
/// and applies the matching rule.
class Simulator {
 public:
  Simulator(const Market& market, std::uint64_t seed, std::int64_t horizon, bool keep_detail = false)
      : market_(&market),
        streams_(seed, market.customers(), market.servers()),
        state_(market.customers(), market.servers()),
        horizon_(horizon),
        rates_{Vector(market.customers()), Vector(market.servers())},
        matches_(market.topology.edge_count(), 0) {
    if (horizon < 0) throw ConfigError("horizon must be nonnegative");
    trace_.customers = market.customers();
    trace_.servers = market.servers();
    trace_.edges = market.topology.edge_count();
    trace_.meta.seed = seed;
    trace_.meta.horizon = horizon;
    trace_.meta.fingerprint = market.fingerprint();
    const auto T = static_cast<std::size_t>(horizon);
    trace_.rates.reserve(T * market.queue_count());
    trace_.queue_total.reserve(T);
    trace_.queue_max.reserve(T);
    trace_.realized_profit.reserve(T);
    if (keep_detail) trace_.detail.emplace();
  }

  const Market& market() const noexcept { return *market_; }
  std::int64_t now() const noexcept { return state_.t; }
  std::int64_t horizon() const noexcept { return horizon_; }
  bool finished() const noexcept { return state_.t > horizon_; }
  const QueueState& queues() const noexcept { return state_; }
  RngStreams& streams() noexcept { return streams_; }
  const Arrivals& last_arrivals() const noexcept { return arrivals_; }

  const Arrivals& step(const PricingDecision& d) {
    if (finished()) throw std::logic_error("simulation horizon exhausted");
    const Market& m = *market_;
    const std::size_t I = m.customers();
    const std::size_t J = m.servers();
    trace_.queue_total.push_back(state_.total());
    trace_.queue_max.push_back(state_.longest());
    for (std::size_t i = 0; i < I; ++i) rates_.customer[i] = m.demand[i]->rate_of_price(d.price_customer[i]);
    for (std::size_t j = 0; j < J; ++j) rates_.server[j] = m.supply[j]->rate_of_price(d.price_server[j]);
    sample_arrivals(rates_, streams_, arrivals_);
    match_step(state_, arrivals_, m.topology, matches_);

    double cash = 0.0;
    for (std::size_t i = 0; i < I; ++i) {
      trace_.rates.push_back(rates_.customer[i]);
      cash += arrivals_.customer[i] * d.price_customer[i];
    }
    for (std::size_t j = 0; j < J; ++j) {
      trace_.rates.push_back(rates_.server[j]);
      cash -= arrivals_.server[j] * d.price_server[j];
    }
    trace_.realized_profit.push_back(cash);
    if (structural_violation(state_, m.topology)) ++trace_.structural_violations;
    if (trace_.detail) record_detail(d);
    ++trace_.slots;
    return arrivals_;
  }

  /// Moves the trace out; the simulator must not be stepped afterwards.
  RunTrace take_trace(std::string policy, double gamma) {
    trace_.meta.policy = std::move(policy);
    trace_.meta.gamma = gamma;
    return std::move(trace_);
  }

 private:
  void record_detail(const PricingDecision& d) {
    DetailedTrace& t = *trace_.detail;
    t.price_customer.insert(t.price_customer.end(), d.price_customer.begin(), d.price_customer.end());
    t.price_server.insert(t.price_server.end(), d.price_server.begin(), d.price_server.end());
    t.useful_customer.insert(t.useful_customer.end(), d.useful_customer.begin(), d.useful_customer.end());
    t.useful_server.insert(t.useful_server.end(), d.useful_server.begin(), d.useful_server.end());
    t.arrival_customer.insert(t.arrival_customer.end(), arrivals_.customer.begin(), arrivals_.customer.end());
    t.arrival_server.insert(t.arrival_server.end(), arrivals_.server.begin(), arrivals_.server.end());
    t.matches.insert(t.matches.end(), matches_.begin(), matches_.end());
    t.queue_customer.insert(t.queue_customer.end(), state_.customer.begin(), state_.customer.end());
    t.queue_server.insert(t.queue_server.end(), state_.server.begin(), state_.server.end());
  }

  const Market* market_;
  RngStreams streams_;
  QueueState state_;
  std::int64_t horizon_;
  ArrivalRates rates_;
  Arrivals arrivals_;
  std::vector<std::uint8_t> matches_;
  RunTrace trace_;
};

}  // namespace twosided
