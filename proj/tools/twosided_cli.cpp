// Command-line front end: fluid-solve, simulate, compare, tradeoff, validate.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "twosided/twosided.hpp"

namespace fs = std::filesystem;
using namespace twosided;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::int64_t> seed;
  std::string seeds;
  std::string policy;
  std::string gamma;
  std::string out;
  std::optional<std::int64_t> horizon;
  bool trace = false;
  unsigned threads = 0;
};

// A path, or the name of a built-in preset (single_link, multi_link) when no
// such file exists.
ExperimentConfig resolve_config(const std::string& path) {
  if (fs::exists(path)) return load_config(path);
  const std::string stem = fs::path(path).stem().string();
  if (stem == "single_link") return single_link_preset();
  if (stem == "multi_link") return multi_link_preset();
  throw ConfigError("config file '" + path + "' not found");
}

ExperimentConfig apply_flags(const CommonFlags& f) {
  ExperimentConfig cfg = resolve_config(f.config);
  if (f.seed) {
    if (*f.seed < 0) throw ConfigError("seed must be nonnegative");
    cfg.seed_first = cfg.seed_last = static_cast<std::uint64_t>(*f.seed);
  }
  if (!f.seeds.empty()) std::tie(cfg.seed_first, cfg.seed_last) = parse_seed_range(f.seeds);
  if (!f.policy.empty()) {
    cfg.policies.clear();
    for (const auto& p : detail::split_list(f.policy)) cfg.policies.push_back(parse_policy(p));
  }
  if (!f.gamma.empty()) cfg.schedule.gamma = parse_number(f.gamma, "gamma");
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.horizon) cfg.horizon = *f.horizon;
  if (f.trace) cfg.trace = true;
  validate_config(cfg);
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool run_flags) {
  cmd->add_option("--config", f.config, "Config file, or single_link / multi_link for a built-in preset")->required();
  if (!run_flags) return;
  auto* seed = cmd->add_option("--seed", f.seed, "Run a single seed");
  cmd->add_option("--seeds", f.seeds, "Inclusive seed range a..b")->excludes(seed);
  cmd->add_option("--policy", f.policy, "prob2p | threshold | genie2p | eto (comma list allowed)");
  cmd->add_option("--gamma", f.gamma, "Override the schedule's gamma (decimal or a/b)");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--horizon", f.horizon, "Override the horizon T");
  cmd->add_flag("--trace", f.trace, "Write per-slot trace CSVs (trace_<policy>_<seed>.csv)");
  cmd->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
}

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  const fs::path p = fs::path(cfg.out_dir) / name;
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

RunnerOptions runner(const ExperimentConfig& cfg, unsigned threads) {
  RunnerOptions ro;
  ro.threads = threads;
  if (cfg.trace) {
    ro.keep_detail = true;
    const Market market = build_market(cfg);
    ro.on_trace = [cfg, market](const RunTrace& t) {
      std::ofstream os = open_out(cfg, "trace_" + t.meta.policy + "_" + std::to_string(t.meta.seed) + ".csv");
      write_trace_csv(os, t, market.topology);
    };
  }
  return ro;
}

int cmd_fluid(const CommonFlags& f) {
  const ExperimentConfig cfg = resolve_config(f.config);
  const Market market = build_market(cfg);
  FluidOptions fo;
  fo.a_min = cfg.a_min;
  const FluidSolution s = solve_fluid(market, fo);
  nlohmann::json j;
  j["x_star"] = s.x_star;
  j["lambda_star"] = s.lambda_star;
  j["mu_star"] = s.mu_star;
  j["price_customer"] = s.price_customer;
  j["price_server"] = s.price_server;
  j["f_star"] = s.f_star;
  j["kappa_customer"] = s.kappa_customer;
  j["kappa_server"] = s.kappa_server;
  j["xi"] = s.xi;
  j["gamma_customer"] = s.gamma_customer;
  j["gamma_server"] = s.gamma_server;
  j["kkt_residual"] = s.kkt_residual;
  j["interior"] = s.interior;
  if (!s.interior) j["interior_note"] = s.interior_note;
  std::cout << j.dump() << "\n";
  return 0;
}

void print_final(const ExperimentResult& res) {
  for (const auto& r : res.runs) {
    if (r.checkpoints.empty()) continue;
    std::cout << r.policy << " seed " << r.seed << ": T = " << r.checkpoints.back()
              << " regret = " << csv_number(r.regret.back()) << " avg_qlen = " << csv_number(r.avg_qlen.back())
              << " max_qlen = " << r.max_qlen.back() << "\n";
  }
}

int cmd_simulate(const CommonFlags& f, bool compare) {
  ExperimentConfig cfg = apply_flags(f);
  if (compare && f.policy.empty()) cfg.policies = {PolicyKind::prob2p, PolicyKind::threshold, PolicyKind::genie2p};
  const ExperimentResult res = run_experiment(cfg, runner(cfg, f.threads));
  {
    std::ofstream os = open_out(cfg, "summary.csv");
    write_summary_csv(os, res.runs, cfg.weights);
  }
  const auto rows = compare_policies(res.runs, "prob2p", "threshold");
  if (compare || !rows.empty()) {
    if (rows.empty()) throw ConfigError("compare needs both prob2p and threshold runs");
    std::ofstream os = open_out(cfg, "compare.csv");
    write_compare_csv(os, rows);
    for (const auto& r : rows)
      if (r.t == cfg.horizon)
        std::cout << "w = " << format_number(r.w) << ": prob2p improves on threshold by "
                  << csv_number(r.improvement_pct) << "% (+- " << csv_number(r.ci_half_width) << ") at T\n";
  }
  print_final(res);
  return 0;
}

int cmd_tradeoff(const CommonFlags& f, const std::string& gamma_list) {
  ExperimentConfig cfg = apply_flags(f);
  std::vector<double> gammas;
  for (const auto& g : detail::split_list(gamma_list)) gammas.push_back(parse_number(g, "gamma"));
  const TradeoffResult t = run_tradeoff(cfg, gammas, runner(cfg, f.threads));
  {
    std::ofstream os = open_out(cfg, "tradeoff.csv");
    write_tradeoff_csv(os, t);
  }
  std::cout << "regret exponent = " << csv_number(t.regret_fit.slope) << " * gamma + "
            << csv_number(t.regret_fit.intercept) << "\n";
  std::cout << "queue exponent  = " << csv_number(t.queue_fit.slope) << " * gamma + "
            << csv_number(t.queue_fit.intercept) << "\n";
  std::cout << "slope ratio = " << csv_number(t.regret_fit.slope / t.queue_fit.slope) << "\n";
  return 0;
}

int cmd_validate(const CommonFlags& f) {
  const ExperimentConfig cfg = resolve_config(f.config);
  const Market market = build_market(cfg);
  bool failed = false;
  const bool round_trip = parse_config_string(serialize_config(cfg)) == cfg;
  std::cout << (round_trip ? "ok   " : "FAIL ") << "config round trip\n";
  failed |= !round_trip;
  for (const auto& c : validate_instance(market, cfg.schedule, cfg.a_min, cfg.horizon)) {
    const char* tag = c.ok ? "ok   " : (c.warning_only ? "warn " : "FAIL ");
    std::cout << tag << c.name << ": " << c.detail << "\n";
    if (!c.ok && !c.warning_only) failed = true;
  }
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-based pricing and matching for two-sided queues"};
  app.require_subcommand(1);

  CommonFlags fluid_f, sim_f, cmp_f, trade_f, val_f;
  std::string gamma_list = "1/12,1/9,1/6";

  auto* fluid = app.add_subcommand("fluid-solve", "Solve the fluid program and print the optimum as JSON");
  add_common(fluid, fluid_f, false);
  auto* sim = app.add_subcommand("simulate", "Run policies over seeds; write summary.csv");
  add_common(sim, sim_f, true);
  auto* cmp = app.add_subcommand("compare", "Run prob2p, threshold and genie2p; write summary.csv and compare.csv");
  add_common(cmp, cmp_f, true);
  auto* trade = app.add_subcommand("tradeoff", "Sweep gamma for prob2p; write tradeoff.csv and the fitted lines");
  add_common(trade, trade_f, true);
  trade->add_option("--gammas", gamma_list, "Comma-separated gammas (decimal or a/b)");
  auto* val = app.add_subcommand("validate", "Check assumptions and oracle agreement for a config");
  add_common(val, val_f, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fluid) return cmd_fluid(fluid_f);
    if (*sim) return cmd_simulate(sim_f, false);
    if (*cmp) return cmd_simulate(cmp_f, true);
    if (*trade) return cmd_tradeoff(trade_f, gamma_list);
    if (*val) return cmd_validate(val_f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
