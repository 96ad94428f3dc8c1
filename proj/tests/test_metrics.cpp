#include <gtest/gtest.h>

#include <cmath>

#include "twosided/metrics.hpp"
#include "twosided/policies.hpp"

using namespace twosided;

namespace {

// Single-link trace posting constant rates, all queues empty.
RunTrace constant_trace(const Market& m, double lambda, double mu, std::int64_t slots) {
  RunTrace t;
  t.customers = 1;
  t.servers = 1;
  t.edges = 1;
  t.slots = slots;
  t.meta.fingerprint = m.fingerprint();
  for (std::int64_t k = 0; k < slots; ++k) {
    t.rates.push_back(lambda);
    t.rates.push_back(mu);
    t.queue_total.push_back(0);
    t.queue_max.push_back(0);
    t.realized_profit.push_back(0.0);
  }
  return t;
}

}  // namespace

TEST(ExpectedProfit, Values) {
  const Market m = single_link_market();
  EXPECT_DOUBLE_EQ(expected_profit(constant_trace(m, 0.0, 0.0, 5), m).back(), 0.0);
  const Vector p = expected_profit(constant_trace(m, 0.25, 0.25, 4), m);
  EXPECT_DOUBLE_EQ(p[0], 0.25);
  EXPECT_DOUBLE_EQ(p[3], 1.0);
  EXPECT_NEAR(expected_profit(constant_trace(m, 0.2, 0.25, 1), m)[0], 0.195, 1e-15);
}

TEST(Regret, Values) {
  const Market m = single_link_market();
  const FluidSolution f = solve_fluid(m);
  const Vector zero = regret(constant_trace(m, 0.25, 0.25, 100), m, f);
  for (double v : zero) EXPECT_NEAR(v, 0.0, 1e-9);
  const Vector r = regret(constant_trace(m, 0.2, 0.2, 100), m, f);
  for (std::size_t t = 0; t < r.size(); ++t) EXPECT_NEAR(r[t], 0.01 * static_cast<double>(t + 1), 1e-9);
}

TEST(Regret, OneBadSlotThenFlat) {
  const Market m = single_link_market();
  const FluidSolution f = solve_fluid(m);
  RunTrace t = constant_trace(m, 0.25, 0.25, 50);
  t.rates[2 * 10] = 0.2;
  const Vector r = regret(t, m, f);
  EXPECT_NEAR(r[9], 0.0, 1e-9);
  for (std::size_t k = 10; k < r.size(); ++k) EXPECT_NEAR(r[k], 0.055, 1e-9);
}

TEST(Regret, MismatchedInstance) {
  const Market m = single_link_market();
  const FluidSolution other = solve_fluid(multi_link_market());
  EXPECT_THROW(regret(constant_trace(m, 0.25, 0.25, 3), m, other), DomainError);
}

TEST(QueueMetrics, Series) {
  const Market m = single_link_market();
  RunTrace t = constant_trace(m, 0.25, 0.25, 3);
  EXPECT_EQ(queue_metrics(t).avg.back(), 0.0);
  EXPECT_EQ(queue_metrics(t).max.back(), 0);
  t.queue_total = {0, 2, 4};
  t.queue_max = {0, 2, 4};
  const QueueSeries q = queue_metrics(t);
  EXPECT_DOUBLE_EQ(q.avg[2], 2.0);
  EXPECT_EQ(q.max[2], 4);
  EXPECT_EQ(q.max[1], 2);
}

TEST(CombinedObjective, Values) {
  const Vector r{1.0, 2.0, 3.0};
  const Vector q{0.5, 0.5, 0.5};
  EXPECT_EQ(combined_objective(r, q, 0.0), r);
  Vector r100(100, 10.0), q100(100, 2.0);
  EXPECT_NEAR(combined_objective(r100, q100, 0.01)[99], 12.0, 1e-12);
  EXPECT_THROW(combined_objective(r, Vector{1.0}, 0.1), DomainError);
}

TEST(Improvement, Values) {
  EXPECT_DOUBLE_EQ(improvement_pct(100.0, 100.0), 0.0);
  EXPECT_DOUBLE_EQ(improvement_pct(78.0, 100.0), 22.0);
  EXPECT_LT(improvement_pct(120.0, 100.0), 0.0);
  EXPECT_TRUE(std::isnan(improvement_pct(1.0, 0.0)));
}

TEST(TradeoffFit, SyntheticLines) {
  const Vector g{1.0 / 12.0, 1.0 / 9.0, 1.0 / 6.0};
  Vector a, b;
  for (double x : g) {
    a.push_back(1.0 - x);
    b.push_back(x / 2.0);
  }
  const LineFit fa = tradeoff_fit(g, a);
  EXPECT_NEAR(fa.slope, -1.0, 1e-12);
  EXPECT_NEAR(fa.intercept, 1.0, 1e-12);
  const LineFit fb = tradeoff_fit(g, b);
  EXPECT_NEAR(fb.slope, 0.5, 1e-12);
  EXPECT_NEAR(fb.intercept, 0.0, 1e-12);
  EXPECT_THROW(tradeoff_fit(Vector{0.1, 0.2}, Vector{1.0, 2.0}), DomainError);
}

TEST(ConfidenceInterval, Values) {
  const ConfidenceInterval same = confidence_interval(Vector{3.0, 3.0, 3.0});
  EXPECT_DOUBLE_EQ(same.mean, 3.0);
  EXPECT_DOUBLE_EQ(same.half_width, 0.0);
  const ConfidenceInterval two = confidence_interval(Vector{0.0, 2.0});
  EXPECT_DOUBLE_EQ(two.mean, 1.0);
  EXPECT_NEAR(two.half_width, 1.96, 1e-12);
  EXPECT_THROW(confidence_interval(Vector{1.0}), DomainError);
}

TEST(GrowthExponent, PowerSeries) {
  Vector s(10000);
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = std::pow(static_cast<double>(t + 1), 0.7);
  EXPECT_NEAR(growth_exponent(s, 1000, 10000), 0.7, 1e-12);
  Vector zero(100, 0.0);
  EXPECT_TRUE(std::isnan(growth_exponent(zero, 10, 100)));
}

TEST(LogLogFit, PowerSeries) {
  Vector s(100000);
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = 3.0 * std::pow(static_cast<double>(t + 1), 0.6);
  const LineFit f = loglog_fit(s, 10000, 100000);
  EXPECT_NEAR(f.slope, 0.6, 1e-9);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-8);
  EXPECT_THROW(loglog_fit(s, 0, 10), DomainError);
}

TEST(Checkpoints, LogSpaced) {
  const auto c = log_checkpoints(1000, 1);
  EXPECT_EQ(c, (std::vector<std::int64_t>{1, 10, 100, 1000}));
  const auto d = log_checkpoints(50, 2);
  EXPECT_EQ(d, (std::vector<std::int64_t>{1, 3, 10, 32, 50}));
  EXPECT_TRUE(log_checkpoints(0, 3).empty());
}

TEST(Summarize, CheckpointsAndObjectives) {
  const Market m = single_link_market();
  const FluidSolution f = solve_fluid(m);
  RunTrace t = constant_trace(m, 0.2, 0.2, 100);
  t.meta.policy = "const";
  for (auto& q : t.queue_total) q = 1;
  const std::vector<std::int64_t> cps{10, 100, 1000};
  const std::vector<double> ws{0.0, 0.5};
  const RunSummary s = summarize(t, m, f, cps, ws, 10);
  EXPECT_EQ(s.checkpoints, (std::vector<std::int64_t>{10, 100}));
  EXPECT_NEAR(s.regret[1], 1.0, 1e-9);
  EXPECT_NEAR(s.objective[0][1], 1.0, 1e-9);
  EXPECT_NEAR(s.objective[1][1], 1.0 + 0.5 * 100.0, 1e-9);
  EXPECT_NEAR(s.regret_exponent, growth_exponent(regret(t, m, f), 10, 100), 1e-15);
}

TEST(Bookkeeping, RealizedProfitTracksExpectedProfit) {
  const Market m = single_link_market();
  const FluidSolution f = solve_fluid(m);
  GenieOptions opt;
  opt.alpha_bar = 0.05;
  Vector gaps;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RunTrace t = run_genie_policy(m, opt, seed, 100000);
    const RunSummary s = summarize(t, m, f, std::vector<std::int64_t>{100000}, Vector{}, 10000);
    gaps.push_back(s.realized_profit - s.expected_profit);
    const Vector r = regret(t, m, f);
    EXPECT_NEAR(r.back(), 100000 * f.f_star - expected_profit(t, m).back(), 1e-9);
  }
  const ConfidenceInterval ci = confidence_interval(gaps);
  const double se = ci.half_width / 1.96;
  EXPECT_LE(std::abs(ci.mean), 3.0 * se);
}
