#include <gtest/gtest.h>

#include <cmath>

#include "twosided/config.hpp"

using namespace twosided;

TEST(ParseNumber, Forms) {
  EXPECT_DOUBLE_EQ(parse_number("0.25"), 0.25);
  EXPECT_DOUBLE_EQ(parse_number(" 1/6 "), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(parse_number("1e-3"), 1e-3);
  EXPECT_THROW(parse_number("abc"), ConfigError);
  EXPECT_THROW(parse_number("1/0"), ConfigError);
  EXPECT_EQ(parse_integer("1e5", "horizon"), 100000);
  EXPECT_THROW(parse_integer("2.5", "horizon"), ConfigError);
}

TEST(ParseSeedRange, Forms) {
  EXPECT_EQ(parse_seed_range("0..9"), (std::pair<std::uint64_t, std::uint64_t>{0, 9}));
  EXPECT_EQ(parse_seed_range("4"), (std::pair<std::uint64_t, std::uint64_t>{4, 4}));
  EXPECT_THROW(parse_seed_range("5..2"), ConfigError);
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.001), "0.001");
  EXPECT_EQ(format_number(6.0), "6");
  EXPECT_EQ(parse_number(format_number(1.0 / 6.0)), 1.0 / 6.0);
}

TEST(Presets, SingleLink) {
  const ExperimentConfig c = single_link_preset();
  EXPECT_EQ(c.horizon, 100000);
  EXPECT_EQ(c.seeds().size(), 10u);
  EXPECT_DOUBLE_EQ(c.schedule.gamma, 1.0 / 6.0);
  EXPECT_EQ(c.schedule.mode, ScheduleMode::anytime);
  EXPECT_DOUBLE_EQ(c.schedule.mult_eta, 0.2);
  EXPECT_DOUBLE_EQ(c.schedule.mult_delta, 0.2);
  EXPECT_DOUBLE_EQ(c.schedule.mult_alpha, 0.2);
  EXPECT_DOUBLE_EQ(*c.schedule.e_override_mult, 6.0);
  EXPECT_DOUBLE_EQ(*c.schedule.beta, 1.0);
  EXPECT_DOUBLE_EQ(c.a_min, 0.01);
  const Market m = build_market(c);
  EXPECT_EQ(m.fingerprint(), single_link_market().fingerprint());
}

TEST(Presets, MultiLink) {
  const ExperimentConfig c = multi_link_preset();
  EXPECT_DOUBLE_EQ(c.schedule.mult_eta, 0.1);
  EXPECT_DOUBLE_EQ(c.schedule.mult_delta, 0.2);
  EXPECT_DOUBLE_EQ(*c.schedule.e_override_mult, 8.0);
  const Market m = build_market(c);
  EXPECT_EQ(m.fingerprint(), multi_link_market().fingerprint());
}

TEST(Presets, FilesMatchBuiltIns) {
  EXPECT_EQ(load_config(std::string(TWOSIDED_PRESET_DIR) + "/single_link.cfg"), single_link_preset());
  EXPECT_EQ(load_config(std::string(TWOSIDED_PRESET_DIR) + "/multi_link.cfg"), multi_link_preset());
}

TEST(Config, RoundTrip) {
  ExperimentConfig c = multi_link_preset();
  c.zeta = 0.05;
  c.window_start = 1234;
  c.trace = true;
  c.schedule.alpha_rule = AlphaRule::literal;
  c.schedule.e_override_mult.reset();
  c.weights = {0.0, 1.0 / 3.0};
  const ExperimentConfig back = parse_config_string(serialize_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Config, Errors) {
  const std::string base = kSingleLinkPreset;
  EXPECT_THROW(parse_config_string(base + "\n[bogus]\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[experiment]\nfrobnicate = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[experiment]\nhorizon\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[experiment]\npolicies = prob2p, ucb\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[experiment]\narrival_order = servers-first\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[curve]\nkind = demand\nintercept = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[schedule]\nmode = sometimes\n"), ConfigError);
}

TEST(Config, BuildMarketChecksCurves) {
  ExperimentConfig c = single_link_preset();
  c.curves[0].p_min = 0.5;
  EXPECT_THROW(build_market(c), ConfigError);
  c = single_link_preset();
  c.edges.push_back({1, 2});
  EXPECT_THROW(build_market(c), ConfigError);
}

TEST(Config, ValidateRejectsBadValues) {
  ExperimentConfig c = single_link_preset();
  c.horizon = 0;
  EXPECT_THROW(validate_config(c), ConfigError);
  c = single_link_preset();
  c.a_min = 1.5;
  EXPECT_THROW(validate_config(c), ConfigError);
  c = single_link_preset();
  c.schedule.gamma = 2.0;
  EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(Policy, Names) {
  for (PolicyKind p : {PolicyKind::prob2p, PolicyKind::threshold, PolicyKind::genie2p, PolicyKind::eto})
    EXPECT_EQ(parse_policy(to_string(p)), p);
  EXPECT_THROW(parse_policy("ucb"), ConfigError);
}
