#include <gtest/gtest.h>

#include <sstream>
#include <stdexcept>

#include "twosided/twosided.hpp"

using namespace twosided;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c = single_link_preset();
  c.horizon = 20000;
  c.seed_first = 0;
  c.seed_last = 3;
  c.policies = {PolicyKind::prob2p, PolicyKind::threshold, PolicyKind::genie2p, PolicyKind::eto};
  return c;
}

std::string summary_text(const ExperimentResult& r, const ExperimentConfig& c) {
  std::ostringstream os;
  write_summary_csv(os, r.runs, c.weights);
  return os.str();
}

}  // namespace

TEST(RunExperiment, CountsRuns) {
  const ExperimentConfig c = small_config();
  RunnerOptions ro;
  ro.threads = 2;
  const ExperimentResult r = run_experiment(c, ro);
  EXPECT_EQ(r.runs.size(), 16u);
  for (const RunSummary& s : r.runs) {
    EXPECT_EQ(s.horizon, 20000);
    EXPECT_EQ(s.structural_violations, 0);
    EXPECT_EQ(s.checkpoints.back(), 20000);
  }
  const std::string text = summary_text(r, c);
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,policy,seed,regret,avg_qlen,max_qlen,obj_w0.001,obj_w0.01");
}

TEST(RunExperiment, ThreadCountDoesNotChangeBytes) {
  const ExperimentConfig c = small_config();
  RunnerOptions serial, parallel;
  serial.threads = 1;
  parallel.threads = 4;
  EXPECT_EQ(summary_text(run_experiment(c, serial), c), summary_text(run_experiment(c, parallel), c));
}

TEST(RunExperiment, SummarySortedByPolicySeedTime) {
  const ExperimentConfig c = small_config();
  const std::string text = summary_text(run_experiment(c), c);
  std::istringstream in(text);
  std::string line, prev_key;
  std::getline(in, line);
  std::int64_t prev_t = 0;
  while (std::getline(in, line)) {
    std::istringstream f(line);
    std::string t, policy, seed;
    std::getline(f, t, ',');
    std::getline(f, policy, ',');
    std::getline(f, seed, ',');
    const std::string key = policy + "/" + seed;
    if (key == prev_key) EXPECT_GT(std::stoll(t), prev_t);
    else EXPECT_LT(prev_key, key);
    prev_key = key;
    prev_t = std::stoll(t);
  }
}

TEST(Compare, RowsAndSigns) {
  std::vector<RunSummary> runs(4);
  for (int k = 0; k < 4; ++k) {
    RunSummary& s = runs[static_cast<std::size_t>(k)];
    s.policy = k < 2 ? "prob2p" : "threshold";
    s.seed = static_cast<std::uint64_t>(k % 2);
    s.checkpoints = {10, 100};
    s.weights = {0.001};
    s.objective = {{k < 2 ? 78.0 : 100.0, k < 2 ? 50.0 + k : 100.0}};
  }
  const auto rows = compare_policies(runs, "prob2p", "threshold");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].t, 10);
  EXPECT_DOUBLE_EQ(rows[0].improvement_pct, 22.0);
  EXPECT_DOUBLE_EQ(rows[0].ci_half_width, 0.0);
  EXPECT_DOUBLE_EQ(rows[1].improvement_pct, 49.5);
  EXPECT_NEAR(rows[1].ci_half_width, confidence_interval(Vector{50.0, 49.0}).half_width, 1e-12);
  std::ostringstream os;
  write_compare_csv(os, rows);
  EXPECT_EQ(os.str(), "t,w,improvement_pct,ci_half_width\n10,0.001,22,0\n100,0.001,49.5,0.98\n");
  EXPECT_TRUE(compare_policies(runs, "prob2p", "genie2p").empty());
}

TEST(Tradeoff, ThreeGammas) {
  ExperimentConfig c = single_link_preset();
  c.horizon = 20000;
  c.seed_last = 1;
  const TradeoffResult t = run_tradeoff(c, {1.0 / 12.0, 1.0 / 9.0, 1.0 / 6.0});
  ASSERT_EQ(t.rows.size(), 3u);
  std::ostringstream os;
  write_tradeoff_csv(os, t);
  std::string text = os.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
  EXPECT_THROW(run_tradeoff(c, {0.1, 0.2}), ConfigError);
}

TEST(TraceCsv, Layout) {
  const Market m = single_link_market();
  const ExperimentConfig c = single_link_preset();
  const RunTrace t = run_policy(m, c, PolicyKind::prob2p, 1, 50, true);
  std::ostringstream os;
  write_trace_csv(os, t, m.topology);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,queue,side,price,rate,arrival,matches,q_len,useful");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 101);
  EXPECT_THROW(write_trace_csv(os, run_policy(m, c, PolicyKind::prob2p, 1, 50), m.topology), DomainError);
}

TEST(ParallelFor, CoversEveryIndexAndRethrows) {
  std::vector<int> hit(100, 0);
  parallel_for(hit.size(), 4, [&](std::size_t k) { hit[k] += 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t k) {
                              if (k == 5) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(CheckRunnable, RejectsBadSchedule) {
  ExperimentConfig c = single_link_preset();
  c.schedule.mode = ScheduleMode::fixed_horizon;
  c.schedule.mult_delta = 0.001;
  EXPECT_THROW(check_runnable(c, build_market(c)), ConfigError);
}

TEST(CsvNumber, Format) {
  EXPECT_EQ(csv_number(0.1), "0.1");
  EXPECT_EQ(csv_number(1.0 / 3.0), "0.3333333333");
  EXPECT_EQ(weight_column(0.01), "obj_w0.01");
}
