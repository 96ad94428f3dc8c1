#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "twosided/errors.hpp"
#include "twosided/topology.hpp"

namespace twosided {

// ---------------------------------------------------------------------------
// Polytopes of match rates
// ---------------------------------------------------------------------------

struct NodeBounds {
  double lo = 0.0;
  double hi = 1.0;
};

struct ProjectionOptions {
  double tolerance = 1e-13;
  std::size_t max_sweeps = 100000;
};

/// { x : x_e >= floor_e, lo_i <= sum_{e in E_c,i} x_e <= hi_i,
///                       lo_j <= sum_{e in E_s,j} x_e <= hi_j }
///
/// Both the fluid feasible set and its shrunk version belong to this family.
class RatePolytope {
 public:
  RatePolytope() = default;

  RatePolytope(Topology topology, Vector floor, std::vector<NodeBounds> customer,
               std::vector<NodeBounds> server)
      : topology_(std::move(topology)),
        floor_(std::move(floor)),
        customer_(std::move(customer)),
        server_(std::move(server)) {
    if (floor_.size() != topology_.edge_count() || customer_.size() != topology_.customers() ||
        server_.size() != topology_.servers())
      throw DomainError("polytope bounds do not match the topology");
  }

  /// x >= 0 and every induced rate in [0, 1].
  static RatePolytope fluid(const Topology& topology) {
    return RatePolytope(topology, Vector(topology.edge_count(), 0.0),
                        std::vector<NodeBounds>(topology.customers(), {0.0, 1.0}),
                        std::vector<NodeBounds>(topology.servers(), {0.0, 1.0}));
  }

  const Topology& topology() const noexcept { return topology_; }
  const Vector& floor() const noexcept { return floor_; }
  const std::vector<NodeBounds>& customer_bounds() const noexcept { return customer_; }
  const std::vector<NodeBounds>& server_bounds() const noexcept { return server_; }

  /// Largest amount by which x violates any constraint (0 when feasible).
  double max_violation(std::span<const double> x) const {
    require_size(x);
    double worst = 0.0;
    for (std::size_t e = 0; e < x.size(); ++e) {
      if (!std::isfinite(x[e])) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, floor_[e] - x[e]);
    }
    const ArrivalRates sums = induced_rates(topology_, x);
    for (std::size_t i = 0; i < customer_.size(); ++i)
      worst = std::max({worst, customer_[i].lo - sums.customer[i], sums.customer[i] - customer_[i].hi});
    for (std::size_t j = 0; j < server_.size(); ++j)
      worst = std::max({worst, server_[j].lo - sums.server[j], sums.server[j] - server_[j].hi});
    return worst;
  }

  bool contains(std::span<const double> x, double tol = 1e-12) const { return max_violation(x) <= tol; }

  /// Euclidean projection by exact block-coordinate ascent on the dual: one
  /// signed multiplier per node, edges solved in closed form as
  /// x_e = max(floor_e, z_e - nu_c(e) - nu_s(e)).
  Vector project(std::span<const double> z, const ProjectionOptions& opt = {}) const {
    require_size(z);
    for (double v : z)
      if (!std::isfinite(v)) throw DomainError("cannot project a non-finite vector");
    const std::size_t n_c = topology_.customers();
    const std::size_t n_nodes = n_c + topology_.servers();
    Vector nu(n_nodes, 0.0);
    Vector x(z.size());
    std::vector<double> w;
    std::vector<double> f;

    auto edges_of = [&](std::size_t node) {
      return node < n_c ? topology_.customer_edges(node) : topology_.server_edges(node - n_c);
    };
    auto bounds_of = [&](std::size_t node) { return node < n_c ? customer_[node] : server_[node - n_c]; };
    auto other_nu = [&](std::size_t node, std::size_t e) {
      const Edge& edge = topology_.edge(e);
      return node < n_c ? nu[n_c + edge.server] : nu[edge.customer];
    };
    auto fill_x = [&] {
      for (std::size_t e = 0; e < z.size(); ++e) {
        const Edge& edge = topology_.edge(e);
        x[e] = std::max(floor_[e], z[e] - nu[edge.customer] - nu[n_c + edge.server]);
      }
    };
    auto residual = [&] {
      fill_x();
      double worst = 0.0;
      for (std::size_t node = 0; node < n_nodes; ++node) {
        double s = 0.0;
        for (std::size_t e : edges_of(node)) s += x[e];
        const NodeBounds b = bounds_of(node);
        worst = std::max({worst, b.lo - s, s - b.hi});
        if (nu[node] > 0.0) worst = std::max(worst, std::abs(s - b.hi));
        if (nu[node] < 0.0) worst = std::max(worst, std::abs(s - b.lo));
      }
      return worst;
    };

    double res = std::numeric_limits<double>::infinity();
    for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
      for (std::size_t node = 0; node < n_nodes; ++node) {
        const auto edges = edges_of(node);
        w.clear();
        f.clear();
        double s0 = 0.0;
        for (std::size_t e : edges) {
          w.push_back(z[e] - other_nu(node, e));
          f.push_back(floor_[e]);
          s0 += std::max(f.back(), w.back());
        }
        const NodeBounds b = bounds_of(node);
        if (s0 > b.hi) {
          nu[node] = solve_node(w, f, b.hi);
        } else if (s0 < b.lo) {
          nu[node] = solve_node(w, f, b.lo);
        } else {
          nu[node] = 0.0;
        }
      }
      res = residual();
      if (res <= opt.tolerance) return x;
    }
    throw NumericalError("polytope projection did not converge", res);
  }

 private:
  void require_size(std::span<const double> x) const {
    if (x.size() != topology_.edge_count()) throw DomainError("vector size does not match edge count");
  }

  // Solves sum_e max(f_e, w_e - v) = target for v. The left side is
  // continuous, nonincreasing and piecewise linear with breakpoints w_e - f_e.
  static double solve_node(const std::vector<double>& w, const std::vector<double>& f, double target) {
    const std::size_t n = w.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return w[a] - f[a] > w[b] - f[b]; });
    double floor_sum = std::accumulate(f.begin(), f.end(), 0.0);
    if (floor_sum > target + 1e-12) throw NumericalError("projection target polytope is empty", floor_sum - target);
    double active_w = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      const std::size_t e = order[k - 1];
      active_w += w[e];
      floor_sum -= f[e];
      const double v = (active_w + floor_sum - target) / static_cast<double>(k);
      const double upper = w[e] - f[e];
      const double lower = k < n ? w[order[k]] - f[order[k]] : -std::numeric_limits<double>::infinity();
      if (v <= upper && v >= lower) return v;
    }
    // target equals the floor sum: every edge sits on its floor.
    return w[order[0]] - f[order[0]];
  }

  Topology topology_;
  Vector floor_;
  std::vector<NodeBounds> customer_;
  std::vector<NodeBounds> server_;
};

// ---------------------------------------------------------------------------
// Shrunk set
// ---------------------------------------------------------------------------

namespace detail {

// c_e = (a_min + 1) / (2 N_e) and its node sums.
struct ShrinkCenter {
  Vector center;
  Vector customer_sum;
  Vector server_sum;
};

inline ShrinkCenter shrink_center(const Topology& topology, double a_min) {
  ShrinkCenter c;
  c.center.resize(topology.edge_count());
  for (std::size_t e = 0; e < topology.edge_count(); ++e)
    c.center[e] = (a_min + 1.0) / (2.0 * static_cast<double>(topology.degree_bound(e)));
  const ArrivalRates sums = induced_rates(topology, c.center);
  c.customer_sum = sums.customer;
  c.server_sum = sums.server;
  return c;
}

// Largest a_min each node tolerates: sum_e (a+1)/(2N_e) - a > 0 holds iff
// a < s/(1-s) with s = sum_e 1/(2N_e) <= 1/2.
inline double a_min_limit(const Topology& topology) {
  double limit = std::numeric_limits<double>::infinity();
  auto visit = [&](std::span<const std::size_t> edges) {
    double s = 0.0;
    for (std::size_t e : edges) s += 1.0 / (2.0 * static_cast<double>(topology.degree_bound(e)));
    limit = std::min(limit, s / (1.0 - s));
  };
  for (std::size_t i = 0; i < topology.customers(); ++i) visit(topology.customer_edges(i));
  for (std::size_t j = 0; j < topology.servers(); ++j) visit(topology.server_edges(j));
  return limit;
}

}  // namespace detail

/// True iff every node satisfies sum_e (a_min+1)/(2N_e) - a_min > 0.
inline bool a_min_admissible(const Topology& topology, double a_min) {
  return a_min > 0.0 && a_min < 1.0 && a_min < detail::a_min_limit(topology);
}

/// Returns a_min itself when admissible, otherwise a smaller admissible
/// value (half of the supremum of admissible values).
inline double admissible_a_min(const Topology& topology, double a_min) {
  if (!(a_min > 0.0 && a_min < 1.0)) throw ConfigError("a_min must lie in (0, 1)");
  if (a_min_admissible(topology, a_min)) return a_min;
  return 0.5 * std::min(detail::a_min_limit(topology), 1.0);
}

/// Inner radius r: the minimum over all edges and nodes of the five margin
/// families of the shrunk-set construction.
inline double inner_radius(const Topology& topology, double a_min) {
  if (!a_min_admissible(topology, a_min)) {
    std::ostringstream os;
    os << "a_min = " << a_min << " violates the node conditions of this topology; shrink a_min below "
       << std::min(detail::a_min_limit(topology), 1.0);
    throw ConfigError(os.str());
  }
  const auto c = detail::shrink_center(topology, a_min);
  double r = std::numeric_limits<double>::infinity();
  for (double ce : c.center) r = std::min(r, ce);
  for (std::size_t i = 0; i < topology.customers(); ++i) {
    const double deg = static_cast<double>(topology.customer_edges(i).size());
    r = std::min({r, (1.0 - c.customer_sum[i]) / deg, (c.customer_sum[i] - a_min) / deg});
  }
  for (std::size_t j = 0; j < topology.servers(); ++j) {
    const double deg = static_cast<double>(topology.server_edges(j).size());
    r = std::min({r, (1.0 - c.server_sum[j]) / deg, (c.server_sum[j] - a_min) / deg});
  }
  return r;
}

/// The shrunk feasible set for exploration radius delta. Every point x of
/// the region keeps x + delta * u inside the fluid feasible set for all
/// vectors u in the unit ball.
struct ShrunkRegion {
  double a_min = 0.0;
  double delta = 0.0;
  double r = 0.0;
  Vector center;
  RatePolytope polytope;
};

inline ShrunkRegion make_shrunk_region(const Topology& topology, double a_min, double delta) {
  ShrunkRegion region;
  region.a_min = a_min;
  region.delta = delta;
  region.r = inner_radius(topology, a_min);
  if (!(delta > 0.0 && delta < region.r)) {
    std::ostringstream os;
    os << "exploration radius delta = " << delta << " must lie in (0, r) with r = " << region.r;
    throw ConfigError(os.str());
  }
  const auto c = detail::shrink_center(topology, a_min);
  region.center = c.center;
  const double keep = 1.0 - delta / region.r;
  Vector floor(topology.edge_count());
  for (std::size_t e = 0; e < floor.size(); ++e) floor[e] = c.center[e] - keep * c.center[e];
  std::vector<NodeBounds> customer(topology.customers());
  for (std::size_t i = 0; i < customer.size(); ++i) {
    const double s = c.customer_sum[i];
    customer[i] = {s - keep * (s - a_min), s + keep * (1.0 - s)};
  }
  std::vector<NodeBounds> server(topology.servers());
  for (std::size_t j = 0; j < server.size(); ++j) {
    const double s = c.server_sum[j];
    server[j] = {s - keep * (s - a_min), s + keep * (1.0 - s)};
  }
  region.polytope = RatePolytope(topology, std::move(floor), std::move(customer), std::move(server));
  return region;
}

inline bool shrunk_contains(const ShrunkRegion& region, std::span<const double> x) {
  return region.polytope.contains(x, 1e-12);
}

inline MatchRates project_to_shrunk(const ShrunkRegion& region, std::span<const double> x) {
  return region.polytope.project(x);
}

// ---------------------------------------------------------------------------
// Fluid program
// ---------------------------------------------------------------------------

/// f(x) = sum_i lambda_i F_i(lambda_i) - sum_j mu_j G_j(mu_j).
inline double fluid_objective(const Market& market, std::span<const double> x) {
  const ArrivalRates rates = induced_rates(market.topology, x);
  double f = 0.0;
  for (std::size_t i = 0; i < market.customers(); ++i) f += market.demand[i]->revenue_rate(rates.customer[i]);
  for (std::size_t j = 0; j < market.servers(); ++j) f -= market.supply[j]->revenue_rate(rates.server[j]);
  return f;
}

/// Same objective evaluated on arrival rates directly.
inline double rate_profit(const Market& market, const ArrivalRates& rates) {
  double f = 0.0;
  for (std::size_t i = 0; i < market.customers(); ++i) f += market.demand[i]->revenue_rate(rates.customer[i]);
  for (std::size_t j = 0; j < market.servers(); ++j) f -= market.supply[j]->revenue_rate(rates.server[j]);
  return f;
}

inline Vector fluid_gradient(const Market& market, std::span<const double> x) {
  const ArrivalRates rates = induced_rates(market.topology, x);
  Vector g(x.size());
  for (std::size_t e = 0; e < x.size(); ++e) {
    const Edge& edge = market.topology.edge(e);
    g[e] = market.demand[edge.customer]->marginal_revenue(rates.customer[edge.customer]) -
           market.supply[edge.server]->marginal_revenue(rates.server[edge.server]);
  }
  return g;
}

struct FluidSolution {
  MatchRates x_star;
  Vector lambda_star;
  Vector mu_star;
  Vector price_customer;
  Vector price_server;
  double f_star = 0.0;
  // Multipliers of the balance equations, the x >= 0 constraints and the
  // rate <= 1 constraints.
  Vector kappa_customer;
  Vector kappa_server;
  Vector xi;
  Vector gamma_customer;
  Vector gamma_server;
  double kkt_residual = 0.0;
  bool interior = false;
  std::string interior_note;
  std::size_t iterations = 0;
  std::uint64_t fingerprint = 0;
};

struct FluidOptions {
  double a_min = 0.01;
  double kkt_tolerance = 1e-8;
  std::size_t max_iterations = 200000;
};

/// Error carrying the best iterate when the solver stalls above tolerance.
class FluidStall : public NumericalError {
 public:
  FluidStall(FluidSolution best)
      : NumericalError("fluid solver stalled", best.kkt_residual), best_(std::move(best)) {}
  const FluidSolution& best() const noexcept { return best_; }

 private:
  FluidSolution best_;
};

namespace detail {

// Recovers multipliers from the stationarity system
//   R_i'(lambda_i) + kappa_c,i - gamma_c,i = 0
//  -C_j'(mu_j)     + kappa_s,j - gamma_s,j = 0
//  -(kappa_c,i + kappa_s,j) + xi_ij        = 0
// choosing gamma minimal where a rate sits at 1, and scores the result.
inline void fill_duals(const Market& market, FluidSolution& s) {
  const auto& topo = market.topology;
  constexpr double saturated = 1.0 - 1e-9;
  const std::size_t I = market.customers();
  const std::size_t J = market.servers();
  Vector mr_c(I), mc_s(J);
  for (std::size_t i = 0; i < I; ++i) mr_c[i] = market.demand[i]->marginal_revenue(s.lambda_star[i]);
  for (std::size_t j = 0; j < J; ++j) mc_s[j] = market.supply[j]->marginal_revenue(s.mu_star[j]);
  s.gamma_customer.assign(I, 0.0);
  s.gamma_server.assign(J, 0.0);
  s.kappa_customer.resize(I);
  s.kappa_server.resize(J);
  for (int pass = 0; pass < 8; ++pass) {
    for (std::size_t i = 0; i < I; ++i) s.kappa_customer[i] = s.gamma_customer[i] - mr_c[i];
    for (std::size_t j = 0; j < J; ++j) s.kappa_server[j] = s.gamma_server[j] + mc_s[j];
    for (std::size_t i = 0; i < I; ++i) {
      if (s.lambda_star[i] < saturated) continue;
      double need = 0.0;
      for (std::size_t e : topo.customer_edges(i))
        need = std::max(need, mr_c[i] - s.kappa_server[topo.edge(e).server]);
      s.gamma_customer[i] = need;
    }
    for (std::size_t j = 0; j < J; ++j) {
      if (s.mu_star[j] < saturated) continue;
      double need = 0.0;
      for (std::size_t e : topo.server_edges(j))
        need = std::max(need, -mc_s[j] - s.kappa_customer[topo.edge(e).customer]);
      s.gamma_server[j] = need;
    }
  }
  for (std::size_t i = 0; i < I; ++i) s.kappa_customer[i] = s.gamma_customer[i] - mr_c[i];
  for (std::size_t j = 0; j < J; ++j) s.kappa_server[j] = s.gamma_server[j] + mc_s[j];
  s.xi.resize(topo.edge_count());
  double res = RatePolytope::fluid(topo).max_violation(s.x_star);
  for (std::size_t e = 0; e < topo.edge_count(); ++e) {
    const Edge& edge = topo.edge(e);
    s.xi[e] = s.kappa_customer[edge.customer] + s.kappa_server[edge.server];
    res = std::max({res, -s.xi[e], std::abs(s.xi[e] * s.x_star[e])});
  }
  for (std::size_t i = 0; i < I; ++i)
    res = std::max(res, std::abs(s.gamma_customer[i] * (1.0 - s.lambda_star[i])));
  for (std::size_t j = 0; j < J; ++j) res = std::max(res, std::abs(s.gamma_server[j] * (1.0 - s.mu_star[j])));
  s.kkt_residual = res;
}

inline void fill_solution(const Market& market, const FluidOptions& opt, FluidSolution& s) {
  const ArrivalRates rates = induced_rates(market.topology, s.x_star);
  s.lambda_star = rates.customer;
  s.mu_star = rates.server;
  s.price_customer.resize(market.customers());
  s.price_server.resize(market.servers());
  for (std::size_t i = 0; i < market.customers(); ++i)
    s.price_customer[i] = market.demand[i]->price_of_rate(std::min(s.lambda_star[i], 1.0));
  for (std::size_t j = 0; j < market.servers(); ++j)
    s.price_server[j] = market.supply[j]->price_of_rate(std::min(s.mu_star[j], 1.0));
  s.f_star = fluid_objective(market, s.x_star);
  fill_duals(market, s);

  std::ostringstream note;
  s.interior = true;
  for (std::size_t e = 0; e < s.x_star.size(); ++e)
    if (!(s.x_star[e] > 1e-9)) {
      s.interior = false;
      note << "x on edge " << e + 1 << " is zero; ";
    }
  auto check = [&](const Vector& v, const char* name) {
    for (std::size_t k = 0; k < v.size(); ++k)
      if (!(v[k] >= opt.a_min && v[k] < 1.0)) {
        s.interior = false;
        note << name << "[" << k + 1 << "] = " << v[k] << " outside [a_min, 1); ";
      }
  };
  check(s.lambda_star, "lambda");
  check(s.mu_star, "mu");
  s.interior_note = note.str();
  s.fingerprint = market.fingerprint();
}

}  // namespace detail

/// Maximizes the concave fluid program by projected gradient ascent with
/// Armijo backtracking over the feasible set, then certifies the result with
/// explicit multipliers.
inline FluidSolution solve_fluid(const Market& market, const FluidOptions& opt = {}) {
  const Topology& topo = market.topology;
  const RatePolytope feasible = RatePolytope::fluid(topo);
  MatchRates x(topo.edge_count());
  for (std::size_t e = 0; e < x.size(); ++e) x[e] = 1.0 / (2.0 * static_cast<double>(topo.degree_bound(e)));

  FluidSolution best;
  best.kkt_residual = std::numeric_limits<double>::infinity();
  double step = 1.0;
  double fx = fluid_objective(market, x);
  std::size_t it = 0;
  for (; it < opt.max_iterations; ++it) {
    const Vector g = fluid_gradient(market, x);
    MatchRates y;
    double fy = 0.0;
    double moved = 0.0;
    step = std::min(step * 2.0, 1e3);
    for (int backtrack = 0; backtrack < 60; ++backtrack) {
      Vector trial(x.size());
      for (std::size_t e = 0; e < x.size(); ++e) trial[e] = x[e] + step * g[e];
      y = feasible.project(trial);
      fy = fluid_objective(market, y);
      double lin = 0.0;
      moved = 0.0;
      for (std::size_t e = 0; e < x.size(); ++e) {
        lin += g[e] * (y[e] - x[e]);
        moved += (y[e] - x[e]) * (y[e] - x[e]);
      }
      if (fy >= fx + lin - moved / (2.0 * step) - 1e-15) break;
      step *= 0.5;
    }
    x = std::move(y);
    fx = fy;
    if ((it % 16) == 0 || moved == 0.0) {
      FluidSolution s;
      s.x_star = x;
      detail::fill_solution(market, opt, s);
      s.iterations = it + 1;
      if (s.kkt_residual < best.kkt_residual) best = s;
      if (best.kkt_residual <= 1e-2 * opt.kkt_tolerance || moved == 0.0) break;
    }
  }
  if (!(best.kkt_residual <= opt.kkt_tolerance)) throw FluidStall(std::move(best));
  return best;
}

}  // namespace twosided
