#include <gtest/gtest.h>

#include <cmath>

#include "twosided/config.hpp"
#include "twosided/oracles.hpp"

using namespace twosided;

TEST(GridProject, InteriorPoint) {
  const ShrunkRegion reg = make_shrunk_region(Topology::single_link(), 0.01, 0.1);
  const GridOracleResult g = grid_project(reg, MatchRates{0.4});
  EXPECT_NEAR(g.point[0], 0.4, 1e-3);
}

TEST(GridProject, SingleLinkExteriorGoesToUpperBound) {
  const ShrunkRegion reg = make_shrunk_region(Topology::single_link(), 0.01, 0.1);
  const GridOracleResult g = grid_project(reg, MatchRates{0.97});
  EXPECT_NEAR(g.point[0], 0.9, 1e-3);
  EXPECT_LE(g.point[0], 0.9 + 1e-12);
}

TEST(GridProject, Preconditions) {
  const ShrunkRegion big = make_shrunk_region(multi_link_market().topology, 0.01, 0.01);
  EXPECT_THROW(grid_project(big, MatchRates(7, 0.1)), DomainError);
  const ShrunkRegion reg = make_shrunk_region(Topology::single_link(), 0.01, 0.1);
  EXPECT_THROW(grid_project(reg, MatchRates{0.5}, 0.01), DomainError);
}

TEST(Transportation, Cases) {
  EXPECT_TRUE(transportation_feasible(Topology::single_link(), Vector{0.25}, Vector{0.25}));
  const Topology t = multi_link_market().topology;
  EXPECT_TRUE(transportation_feasible(t, Vector{0.25, 0.25, 0.25}, Vector{0.25, 0.25, 0.25}));
  // customer 3 reaches servers 2 and 3 only; the cut {3} -> {2, 3} carries 0.5 < 0.6
  EXPECT_FALSE(transportation_feasible(t, Vector{0.0, 0.15, 0.6}, Vector{0.25, 0.25, 0.25}));
  EXPECT_FALSE(transportation_feasible(t, Vector{0.3, 0.3, 0.3}, Vector{0.25, 0.25, 0.25}));
}

TEST(DeterministicBisection, ContractsToTarget) {
  const Market m = single_link_market();
  const DeterministicBisection d = deterministic_rate_bisection(m, Vector{0.25}, Vector{0.25}, {{0.6, 2.0}}, {{0.0, 1.1}}, 10);
  EXPECT_NEAR(d.result.final_customer[0].width(), 1.4 / 1024.0, 1e-15);
  EXPECT_NEAR(d.result.price_customer[0], 1.5, 1.4 / 1024.0);
  EXPECT_NEAR(d.result.price_server[0], 0.5, 1.1 / 1024.0);
  EXPECT_EQ(d.result.slots, 10);
}

TEST(DeterministicBisection, TargetOnBoundary) {
  const Market m = single_link_market();
  const DeterministicBisection d = deterministic_rate_bisection(m, Vector{0.25}, Vector{0.25}, {{1.5, 2.0}}, {{0.5, 1.0}}, 12);
  EXPECT_FALSE(d.outside_customer[0]);
  EXPECT_NEAR(d.result.price_customer[0], 1.5, 0.5 / 4096.0);
  EXPECT_NEAR(d.result.price_server[0], 0.5, 0.5 / 4096.0);
}

TEST(DeterministicBisection, OutsideIsFlagged) {
  const Market m = single_link_market();
  const DeterministicBisection d = deterministic_rate_bisection(m, Vector{0.25}, Vector{0.25}, {{1.6, 2.0}}, {{0.6, 1.0}}, 10);
  EXPECT_TRUE(d.outside_customer[0]);
  EXPECT_TRUE(d.outside_server[0]);
  EXPECT_NEAR(d.result.price_customer[0], 1.6, 0.4 / 1024.0 + 1e-12);
  EXPECT_NEAR(d.result.price_server[0], 0.6, 0.4 / 1024.0 + 1e-12);
}

TEST(Wald, AlwaysUsefulWhenQueueEmpty) {
  const WaldReport r = wald_count_check(50, 5, 1, 0);
  EXPECT_DOUBLE_EQ(r.mean_slots, 50.0);
}

TEST(Wald, SingleSampleIsGeometric) {
  const WaldReport r = wald_count_check(1, 10000, 2);
  EXPECT_NEAR(r.mean_slots, 2.0, 0.2);
}

TEST(Wald, FairCoinDoublesSlots) {
  const WaldReport r = wald_count_check(231, 200, 3);
  EXPECT_GE(r.mean_slots, 438.9);
  EXPECT_LE(r.mean_slots, 485.1);
}

TEST(Wald, PinnedAtThresholdRejected) { EXPECT_THROW(wald_count_check(10, 10, 1, 10, 10), DomainError); }

TEST(ValidateInstance, PresetsPass) {
  for (const ExperimentConfig& cfg : {single_link_preset(), multi_link_preset()}) {
    const Market m = build_market(cfg);
    for (const CheckResult& c : validate_instance(m, cfg.schedule, cfg.a_min, cfg.horizon))
      EXPECT_TRUE(c.ok || c.warning_only) << c.name << ": " << c.detail;
  }
}

TEST(ValidateInstance, FlagsDegenerateOptimum) {
  const Market m(Topology::single_link(), {std::make_shared<LinearCurve>(CurveKind::demand, 2.0, 2.0)},
                 {std::make_shared<LinearCurve>(CurveKind::supply, 2.0, 2.0)});
  bool flagged = false;
  for (const CheckResult& c : validate_instance(m, single_link_preset().schedule, 0.01, 100000))
    if (c.name == "interior optimum") flagged = !c.ok;
  EXPECT_TRUE(flagged);
}
