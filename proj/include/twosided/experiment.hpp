#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "twosided/config.hpp"
#include "twosided/fluid.hpp"
#include "twosided/metrics.hpp"
#include "twosided/policies.hpp"
#include "twosided/queueing.hpp"
#include "twosided/schedule.hpp"

namespace twosided {

/// One (policy, seed) run of a config. `horizon` overrides the config's.
inline RunTrace run_policy(const Market& market, const ExperimentConfig& cfg, PolicyKind policy, std::uint64_t seed,
                           std::int64_t horizon, bool keep_detail = false) {
  switch (policy) {
    case PolicyKind::prob2p:
    case PolicyKind::threshold: {
      LearningOptions opt;
      opt.schedule = cfg.schedule;
      opt.a_min = cfg.a_min;
      opt.control = policy == PolicyKind::prob2p ? QueueControl::prob_two_price : QueueControl::threshold;
      opt.keep_detail = keep_detail;
      return run_learning_policy(market, opt, seed, horizon).trace;
    }
    case PolicyKind::genie2p: {
      GenieOptions opt;
      opt.schedule = cfg.schedule;
      opt.a_min = cfg.a_min;
      opt.keep_detail = keep_detail;
      return run_genie_policy(market, opt, seed, horizon);
    }
    case PolicyKind::eto: {
      EtoOptions opt;
      opt.zeta = cfg.zeta;
      opt.a_min = cfg.a_min;
      opt.keep_detail = keep_detail;
      RunTrace t = run_estimate_then_optimize(market, opt, seed, horizon).trace;
      t.meta.gamma = cfg.schedule.gamma;
      return t;
    }
  }
  throw ConfigError("unknown policy");
}

/// Fails early on configs whose schedule cannot run on this market.
inline void check_runnable(const ExperimentConfig& cfg, const Market& market) {
  validate_config(cfg);
  const double a_min = admissible_a_min(market.topology, cfg.a_min);
  const double r = inner_radius(market.topology, a_min);
  ScheduleClock(cfg.schedule, static_cast<double>(cfg.horizon), r);
}

/// Calls `task(k)` for k in [0, count) on up to `threads` workers. The
/// first exception is rethrown after all workers stop.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      try {
        task(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

struct ExperimentResult {
  FluidSolution fluid;
  std::vector<RunSummary> runs;  // sorted by (policy order in config, seed)
};

struct RunnerOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  // Called with each finished trace before it is summarized (e.g. to write
  // a per-slot trace file). May run on worker threads.
  std::function<void(const RunTrace&)> on_trace;
  bool keep_detail = false;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunnerOptions& ro = {}) {
  const Market market = build_market(cfg);
  check_runnable(cfg, market);
  FluidOptions fo;
  fo.a_min = cfg.a_min;
  ExperimentResult out;
  out.fluid = solve_fluid(market, fo);
  const auto seeds = cfg.seeds();
  const auto checkpoints = log_checkpoints(cfg.horizon, cfg.checkpoints_per_decade);
  out.runs.resize(cfg.policies.size() * seeds.size());
  parallel_for(out.runs.size(), ro.threads, [&](std::size_t k) {
    const PolicyKind policy = cfg.policies[k / seeds.size()];
    const std::uint64_t seed = seeds[k % seeds.size()];
    RunTrace trace = run_policy(market, cfg, policy, seed, cfg.horizon, ro.keep_detail);
    if (ro.on_trace) ro.on_trace(trace);
    out.runs[k] = summarize(trace, market, out.fluid, checkpoints, cfg.weights, cfg.exponent_window_start());
  });
  return out;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// Fixed-format number text so that files are byte-identical across runs.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string weight_column(double w) { return "obj_w" + format_number(w); }

/// One row per (policy, seed, checkpoint), sorted by policy, seed, t.
inline void write_summary_csv(std::ostream& os, const std::vector<RunSummary>& runs,
                              const std::vector<double>& weights) {
  os << "t,policy,seed,regret,avg_qlen,max_qlen";
  for (double w : weights) os << "," << weight_column(w);
  os << "\n";
  std::vector<const RunSummary*> order;
  for (const auto& r : runs) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const RunSummary* a, const RunSummary* b) {
    return a->policy != b->policy ? a->policy < b->policy : a->seed < b->seed;
  });
  for (const RunSummary* r : order)
    for (std::size_t k = 0; k < r->checkpoints.size(); ++k) {
      os << r->checkpoints[k] << "," << r->policy << "," << r->seed << "," << csv_number(r->regret[k]) << ","
         << csv_number(r->avg_qlen[k]) << "," << r->max_qlen[k];
      for (std::size_t w = 0; w < r->objective.size(); ++w) os << "," << csv_number(r->objective[w][k]);
      os << "\n";
    }
}

struct CompareRow {
  std::int64_t t = 0;
  double w = 0.0;
  double improvement_pct = 0.0;
  double ci_half_width = 0.0;
};

/// Improvement of `candidate` over `baseline` at every checkpoint and
/// weight: 100 (mean_b - mean_a) / mean_b over seeds, with the 95% half
/// width of the per-seed paired improvements.
inline std::vector<CompareRow> compare_policies(const std::vector<RunSummary>& runs, const std::string& candidate,
                                                const std::string& baseline) {
  std::map<std::uint64_t, const RunSummary*> a, b;
  for (const auto& r : runs) {
    if (r.policy == candidate) a[r.seed] = &r;
    if (r.policy == baseline) b[r.seed] = &r;
  }
  std::vector<std::uint64_t> seeds;
  for (const auto& [seed, _] : a)
    if (b.count(seed)) seeds.push_back(seed);
  std::vector<CompareRow> rows;
  if (seeds.empty()) return rows;
  const RunSummary& first = *a[seeds.front()];
  for (std::size_t w = 0; w < first.weights.size(); ++w)
    for (std::size_t k = 0; k < first.checkpoints.size(); ++k) {
      double sum_a = 0.0, sum_b = 0.0;
      Vector paired;
      for (auto s : seeds) {
        const double va = a[s]->objective[w][k];
        const double vb = b[s]->objective[w][k];
        sum_a += va;
        sum_b += vb;
        paired.push_back(improvement_pct(va, vb));
      }
      CompareRow row;
      row.t = first.checkpoints[k];
      row.w = first.weights[w];
      row.improvement_pct = improvement_pct(sum_a, sum_b);
      bool finite = std::all_of(paired.begin(), paired.end(), [](double v) { return std::isfinite(v); });
      row.ci_half_width = paired.size() >= 2 && finite ? confidence_interval(paired).half_width
                                                       : std::numeric_limits<double>::quiet_NaN();
      rows.push_back(row);
    }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CompareRow& x, const CompareRow& y) { return x.w != y.w ? x.w < y.w : x.t < y.t; });
  return rows;
}

inline void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << "t,w,improvement_pct,ci_half_width\n";
  for (const auto& r : rows)
    os << r.t << "," << format_number(r.w) << "," << csv_number(r.improvement_pct) << "," << csv_number(r.ci_half_width)
       << "\n";
}

struct TradeoffRow {
  double gamma = 0.0;
  double regret_exponent = 0.0;
  double queue_exponent = 0.0;
};

struct TradeoffResult {
  std::vector<TradeoffRow> rows;
  LineFit regret_fit;
  LineFit queue_fit;
};

/// Runs the probabilistic two-price policy for each gamma and averages the
/// per-seed growth exponents of regret and AvgQLen over the window.
inline TradeoffResult run_tradeoff(const ExperimentConfig& base, const std::vector<double>& gammas,
                                   const RunnerOptions& ro = {}) {
  if (gammas.size() < 3) throw ConfigError("tradeoff needs >= 3 gamma values");
  TradeoffResult out;
  for (double g : gammas) {
    ExperimentConfig cfg = base;
    cfg.schedule.gamma = g;
    cfg.policies = {PolicyKind::prob2p};
    const ExperimentResult res = run_experiment(cfg, ro);
    TradeoffRow row;
    row.gamma = g;
    for (const auto& r : res.runs) {
      row.regret_exponent += r.regret_exponent;
      row.queue_exponent += r.queue_exponent;
    }
    row.regret_exponent /= static_cast<double>(res.runs.size());
    row.queue_exponent /= static_cast<double>(res.runs.size());
    out.rows.push_back(row);
  }
  Vector gs, re, qe;
  for (const auto& r : out.rows) {
    gs.push_back(r.gamma);
    re.push_back(r.regret_exponent);
    qe.push_back(r.queue_exponent);
  }
  out.regret_fit = tradeoff_fit(gs, re);
  out.queue_fit = tradeoff_fit(gs, qe);
  return out;
}

inline void write_tradeoff_csv(std::ostream& os, const TradeoffResult& t) {
  os << "gamma,regret_exponent,queue_exponent\n";
  for (const auto& r : t.rows)
    os << csv_number(r.gamma) << "," << csv_number(r.regret_exponent) << "," << csv_number(r.queue_exponent) << "\n";
}

/// Per-slot, per-queue trace rows; needs a detailed trace.
inline void write_trace_csv(std::ostream& os, const RunTrace& trace, const Topology& topo) {
  if (!trace.detail) throw DomainError("trace output needs a detailed trace");
  const DetailedTrace& d = *trace.detail;
  const std::size_t I = trace.customers, J = trace.servers, E = trace.edges;
  os << "t,queue,side,price,rate,arrival,matches,q_len,useful\n";
  for (std::int64_t t = 0; t < trace.slots; ++t) {
    const auto st = static_cast<std::size_t>(t);
    std::vector<int> mc(I, 0), ms(J, 0);
    for (std::size_t e = 0; e < E; ++e) {
      mc[topo.edge(e).customer] += d.matches[st * E + e];
      ms[topo.edge(e).server] += d.matches[st * E + e];
    }
    for (std::size_t i = 0; i < I; ++i)
      os << t + 1 << "," << i + 1 << ",customer," << csv_number(d.price_customer[st * I + i]) << ","
         << csv_number(trace.customer_rate(t, i)) << "," << int(d.arrival_customer[st * I + i]) << "," << mc[i] << ","
         << d.queue_customer[st * I + i] << "," << int(d.useful_customer[st * I + i]) << "\n";
    for (std::size_t j = 0; j < J; ++j)
      os << t + 1 << "," << j + 1 << ",server," << csv_number(d.price_server[st * J + j]) << ","
         << csv_number(trace.server_rate(t, j)) << "," << int(d.arrival_server[st * J + j]) << "," << ms[j] << ","
         << d.queue_server[st * J + j] << "," << int(d.useful_server[st * J + j]) << "\n";
  }
}

}  // namespace twosided
