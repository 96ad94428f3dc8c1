#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "twosided/curves.hpp"
#include "twosided/errors.hpp"

namespace twosided {

using Vector = std::vector<double>;

/// Per-edge matching rates x, indexed like Topology::edges().
using MatchRates = Vector;

struct Edge {
  std::size_t customer = 0;
  std::size_t server = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Arrival rates of every customer type (lambda) and server type (mu).
struct ArrivalRates {
  Vector customer;
  Vector server;
};

/// Bipartite compatibility graph between customer and server types.
class Topology {
 public:
  Topology() = default;

  Topology(std::size_t customers, std::size_t servers, std::vector<Edge> edges)
      : customers_(customers), servers_(servers), edges_(std::move(edges)) {
    if (customers_ == 0 || servers_ == 0) throw ConfigError("topology needs >= 1 customer and server type");
    customer_edges_.assign(customers_, {});
    server_edges_.assign(servers_, {});
    auto sorted = edges_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConfigError("duplicate edge in topology");
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const Edge& edge = edges_[e];
      if (edge.customer >= customers_ || edge.server >= servers_) {
        std::ostringstream os;
        os << "edge (" << edge.customer + 1 << "," << edge.server + 1 << ") references an unknown type";
        throw ConfigError(os.str());
      }
      customer_edges_[edge.customer].push_back(e);
      server_edges_[edge.server].push_back(e);
    }
    for (std::size_t i = 0; i < customers_; ++i)
      if (customer_edges_[i].empty())
        throw ConfigError("customer type " + std::to_string(i + 1) + " has no compatible server");
    for (std::size_t j = 0; j < servers_; ++j)
      if (server_edges_[j].empty())
        throw ConfigError("server type " + std::to_string(j + 1) + " has no compatible customer");
    degree_bound_.resize(edges_.size());
    for (std::size_t e = 0; e < edges_.size(); ++e)
      degree_bound_[e] = std::max(customer_edges_[edges_[e].customer].size(),
                                  server_edges_[edges_[e].server].size());
  }

  std::size_t customers() const noexcept { return customers_; }
  std::size_t servers() const noexcept { return servers_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }

  /// Edge ids incident to customer type i (the servers compatible with i).
  std::span<const std::size_t> customer_edges(std::size_t i) const { return customer_edges_[i]; }
  /// Edge ids incident to server type j.
  std::span<const std::size_t> server_edges(std::size_t j) const { return server_edges_[j]; }

  /// max(|E_c,i|, |E_s,j|) for edge e = (i, j).
  std::size_t degree_bound(std::size_t e) const { return degree_bound_[e]; }

  /// Single customer type, single server type, one edge.
  static Topology single_link() { return Topology(1, 1, {{0, 0}}); }

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.customers_ == b.customers_ && a.servers_ == b.servers_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t customers_ = 0;
  std::size_t servers_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> customer_edges_;
  std::vector<std::vector<std::size_t>> server_edges_;
  std::vector<std::size_t> degree_bound_;
};

/// lambda_i = sum of x over edges of customer i, mu_j likewise for servers.
inline ArrivalRates induced_rates(const Topology& topology, std::span<const double> x) {
  if (x.size() != topology.edge_count()) {
    std::ostringstream os;
    os << "match-rate vector has " << x.size() << " entries, topology has " << topology.edge_count()
       << " edges";
    throw DomainError(os.str());
  }
  ArrivalRates rates{Vector(topology.customers(), 0.0), Vector(topology.servers(), 0.0)};
  for (std::size_t e = 0; e < x.size(); ++e) {
    rates.customer[topology.edge(e).customer] += x[e];
    rates.server[topology.edge(e).server] += x[e];
  }
  return rates;
}

/// Topology plus the demand curve of each customer type and the supply curve
/// of each server type.
struct Market {
  Topology topology;
  std::vector<CurvePtr> demand;
  std::vector<CurvePtr> supply;

  Market() = default;
  Market(Topology topo, std::vector<CurvePtr> demand_curves, std::vector<CurvePtr> supply_curves)
      : topology(std::move(topo)), demand(std::move(demand_curves)), supply(std::move(supply_curves)) {
    if (demand.size() != topology.customers() || supply.size() != topology.servers())
      throw ConfigError("curve count does not match the number of customer/server types");
    for (const auto& c : demand)
      if (!c || c->kind() != CurveKind::demand) throw ConfigError("customer curves must be demand curves");
    for (const auto& c : supply)
      if (!c || c->kind() != CurveKind::supply) throw ConfigError("server curves must be supply curves");
  }

  std::size_t customers() const noexcept { return topology.customers(); }
  std::size_t servers() const noexcept { return topology.servers(); }
  std::size_t queue_count() const noexcept { return customers() + servers(); }

  /// Identity of the instance; traces and fluid solutions carry it so that
  /// metrics can refuse to mix instances.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const std::string& s) {
      for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
      }
    };
    mix(std::to_string(customers()) + "x" + std::to_string(servers()));
    for (const auto& e : topology.edges()) mix("(" + std::to_string(e.customer) + "," + std::to_string(e.server) + ")");
    for (const auto& c : demand) mix(c->describe());
    for (const auto& c : supply) mix(c->describe());
    return h;
  }
};

/// Single-link market with F(lambda) = 2(1 - lambda) and G(mu) = 2 mu.
inline Market single_link_market() {
  return Market(Topology::single_link(), {std::make_shared<LinearCurve>(CurveKind::demand, 2.0, 2.0)},
                {std::make_shared<LinearCurve>(CurveKind::supply, 0.0, 2.0)});
}

/// Three customer and three server types, edges
/// (1,1) (1,2) (1,3) (2,1) (2,2) (3,2) (3,3), the same linear curves on every type.
inline Market multi_link_market() {
  Topology topo(3, 3, {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {2, 1}, {2, 2}});
  std::vector<CurvePtr> demand(3, std::make_shared<LinearCurve>(CurveKind::demand, 2.0, 2.0));
  std::vector<CurvePtr> supply(3, std::make_shared<LinearCurve>(CurveKind::supply, 0.0, 2.0));
  return Market(std::move(topo), std::move(demand), std::move(supply));
}

}  // namespace twosided
