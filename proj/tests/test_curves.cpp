#include <gtest/gtest.h>

#include <cmath>

#include "twosided/curves.hpp"
#include "twosided/topology.hpp"

using namespace twosided;

namespace {

LinearCurve demand() { return LinearCurve(CurveKind::demand, 2.0, 2.0); }
LinearCurve supply() { return LinearCurve(CurveKind::supply, 0.0, 2.0); }

}  // namespace

TEST(LinearCurve, PriceOfRate) {
  EXPECT_DOUBLE_EQ(demand().price_of_rate(0.25), 1.5);
  EXPECT_DOUBLE_EQ(demand().price_of_rate(0.0), 2.0);
  EXPECT_DOUBLE_EQ(supply().price_of_rate(0.25), 0.5);
}

TEST(LinearCurve, RateOfPrice) {
  EXPECT_DOUBLE_EQ(demand().rate_of_price(1.5), 0.25);
  EXPECT_DOUBLE_EQ(demand().rate_of_price(2.0), 0.0);
  EXPECT_DOUBLE_EQ(supply().rate_of_price(2.0), 1.0);
}

TEST(LinearCurve, RevenueRate) {
  EXPECT_DOUBLE_EQ(demand().revenue_rate(0.25), 0.375);
  EXPECT_DOUBLE_EQ(demand().revenue_rate(0.0), 0.0);
  EXPECT_DOUBLE_EQ(supply().revenue_rate(0.0), 0.0);
  EXPECT_DOUBLE_EQ(supply().revenue_rate(0.25), 0.125);
}

TEST(LinearCurve, MarginalRevenue) {
  // d/dl [2l(1-l)] = 2 - 4l, d/dm [2m^2] = 4m
  EXPECT_DOUBLE_EQ(demand().marginal_revenue(0.25), 1.0);
  EXPECT_DOUBLE_EQ(supply().marginal_revenue(0.25), 1.0);
}

TEST(LinearCurve, RoundTripOnGrid) {
  const LinearCurve d = demand(), s = supply();
  for (const Curve* c : {static_cast<const Curve*>(&d), static_cast<const Curve*>(&s)}) {
    for (int k = 0; k <= 100; ++k) {
      const double x = k / 100.0;
      EXPECT_LE(std::abs(c->rate_of_price(c->price_of_rate(x)) - x), 1e-12);
    }
  }
}

TEST(LinearCurve, Monotone) {
  for (int k = 0; k < 100; ++k) {
    EXPECT_GT(demand().price_of_rate(k / 100.0), demand().price_of_rate((k + 1) / 100.0));
    EXPECT_LT(supply().price_of_rate(k / 100.0), supply().price_of_rate((k + 1) / 100.0));
  }
}

TEST(LinearCurve, DomainErrors) {
  EXPECT_THROW(demand().price_of_rate(1.5), DomainError);
  EXPECT_THROW(demand().price_of_rate(-0.1), DomainError);
  EXPECT_THROW(demand().rate_of_price(2.5), DomainError);
  EXPECT_THROW(supply().rate_of_price(-0.5), DomainError);
}

TEST(LinearCurve, Constants) {
  const CurveConstants k = demand().constants();
  EXPECT_DOUBLE_EQ(k.lipschitz_fwd, 2.0);
  EXPECT_DOUBLE_EQ(k.lipschitz_inv, 0.5);
  EXPECT_DOUBLE_EQ(k.min_inv_slope, 0.5);
  EXPECT_DOUBLE_EQ(k.smoothness_fwd, 0.0);
}

TEST(LinearCurve, RejectingPrice) {
  EXPECT_DOUBLE_EQ(demand().rejecting_price(), 2.0);
  EXPECT_DOUBLE_EQ(supply().rejecting_price(), 0.0);
  EXPECT_DOUBLE_EQ(demand().rate_of_price(demand().rejecting_price()), 0.0);
  EXPECT_DOUBLE_EQ(supply().rate_of_price(supply().rejecting_price()), 0.0);
}

TEST(LinearCurve, BadConstruction) {
  EXPECT_THROW(LinearCurve(CurveKind::demand, 2.0, 0.0), ConfigError);
  EXPECT_THROW(LinearCurve(CurveKind::supply, 0.0, -1.0), ConfigError);
  EXPECT_THROW(make_linear_curve(CurveKind::demand, 2.0, 2.0, 0.0, 3.0), ConfigError);
  EXPECT_NO_THROW(make_linear_curve(CurveKind::supply, 0.0, 2.0, 0.0, 2.0));
}

TEST(PiecewiseLinearCurve, InterpolatesKnots) {
  PiecewiseLinearCurve c(CurveKind::demand, {0.0, 0.5, 1.0}, {2.0, 1.5, 0.0});
  EXPECT_DOUBLE_EQ(c.p_min(), 0.0);
  EXPECT_DOUBLE_EQ(c.p_max(), 2.0);
  EXPECT_DOUBLE_EQ(c.price_of_rate(0.25), 1.75);
  EXPECT_DOUBLE_EQ(c.price_of_rate(0.75), 0.75);
  EXPECT_DOUBLE_EQ(c.rate_of_price(1.75), 0.25);
  EXPECT_DOUBLE_EQ(c.rate_of_price(0.75), 0.75);
  for (int k = 0; k <= 100; ++k) {
    const double x = k / 100.0;
    EXPECT_LE(std::abs(c.rate_of_price(c.price_of_rate(x)) - x), 1e-12);
  }
}

TEST(PiecewiseLinearCurve, SupplyKnots) {
  PiecewiseLinearCurve c(CurveKind::supply, {0.0, 0.2, 1.0}, {0.1, 0.5, 2.0});
  EXPECT_DOUBLE_EQ(c.rate_of_price(0.3), 0.1);
  EXPECT_DOUBLE_EQ(c.price_of_rate(0.6), 1.25);
}

TEST(PiecewiseLinearCurve, RejectsBadKnots) {
  EXPECT_THROW(PiecewiseLinearCurve(CurveKind::demand, {0.0, 1.0}, {1.0, 2.0}), ConfigError);
  EXPECT_THROW(PiecewiseLinearCurve(CurveKind::demand, {0.0, 0.5}, {2.0, 1.0}), ConfigError);
  EXPECT_THROW(PiecewiseLinearCurve(CurveKind::supply, {0.0, 0.5, 0.5, 1.0}, {0.0, 1.0, 1.5, 2.0}), ConfigError);
  EXPECT_THROW(PiecewiseLinearCurve(CurveKind::supply, {0.0}, {0.0}), ConfigError);
}

TEST(Topology, SingleLink) {
  const Topology t = Topology::single_link();
  EXPECT_EQ(t.edge_count(), 1u);
  EXPECT_EQ(t.degree_bound(0), 1u);
  const MatchRates x{0.25};
  const ArrivalRates r = induced_rates(t, x);
  EXPECT_DOUBLE_EQ(r.customer[0], 0.25);
  EXPECT_DOUBLE_EQ(r.server[0], 0.25);
}

TEST(Topology, MultiLinkDegrees) {
  const Market m = multi_link_market();
  const Topology& t = m.topology;
  EXPECT_EQ(t.edge_count(), 7u);
  EXPECT_EQ(t.customer_edges(0).size(), 3u);
  EXPECT_EQ(t.server_edges(1).size(), 3u);
  // edge (1,1): customer 1 has 3 servers, server 1 has 2 customers
  EXPECT_EQ(t.degree_bound(0), 3u);
  // edge (3,3): customer 3 has 2 servers, server 3 has 2 customers
  EXPECT_EQ(t.degree_bound(6), 2u);
  const ArrivalRates zero = induced_rates(t, MatchRates(7, 0.0));
  for (double v : zero.customer) EXPECT_EQ(v, 0.0);
  for (double v : zero.server) EXPECT_EQ(v, 0.0);
}

TEST(Topology, Validation) {
  EXPECT_THROW(Topology(1, 1, {{0, 0}, {0, 0}}), ConfigError);
  EXPECT_THROW(Topology(2, 1, {{0, 0}}), ConfigError);
  EXPECT_THROW(Topology(1, 1, {{0, 1}}), ConfigError);
  EXPECT_THROW(Topology(0, 1, {}), ConfigError);
  EXPECT_THROW(induced_rates(Topology::single_link(), MatchRates{0.1, 0.2}), DomainError);
}

TEST(Market, FingerprintDistinguishesInstances) {
  EXPECT_EQ(single_link_market().fingerprint(), single_link_market().fingerprint());
  EXPECT_NE(single_link_market().fingerprint(), multi_link_market().fingerprint());
  const Market shifted(Topology::single_link(), {std::make_shared<LinearCurve>(CurveKind::demand, 2.0, 2.0)},
                       {std::make_shared<LinearCurve>(CurveKind::supply, 2.0, 2.0)});
  EXPECT_NE(single_link_market().fingerprint(), shifted.fingerprint());
}

TEST(Market, CurveKindsChecked) {
  EXPECT_THROW(Market(Topology::single_link(), {std::make_shared<LinearCurve>(CurveKind::supply, 0.0, 2.0)},
                      {std::make_shared<LinearCurve>(CurveKind::supply, 0.0, 2.0)}),
               ConfigError);
}
