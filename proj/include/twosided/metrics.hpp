#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "twosided/errors.hpp"
#include "twosided/fluid.hpp"
#include "twosided/queueing.hpp"

namespace twosided {

/// Cumulative rate-based profit: entry t-1 sums slots 1..t of
/// sum_i lambda_i F_i(lambda_i) - sum_j mu_j G_j(mu_j).
inline Vector expected_profit(const RunTrace& trace, const Market& market) {
  if (trace.customers != market.customers() || trace.servers != market.servers())
    throw DomainError("trace dimensions do not match the market");
  const std::size_t I = trace.customers;
  const std::size_t stride = I + trace.servers;
  Vector out(static_cast<std::size_t>(trace.slots));
  double cum = 0.0;
  for (std::size_t t = 0; t < out.size(); ++t) {
    const double* r = trace.rates.data() + t * stride;
    for (std::size_t i = 0; i < I; ++i) cum += market.demand[i]->revenue_rate(r[i]);
    for (std::size_t j = 0; j < trace.servers; ++j) cum -= market.supply[j]->revenue_rate(r[I + j]);
    out[t] = cum;
  }
  return out;
}

/// R(t) = t f* - cumulative expected profit.
inline Vector regret(const RunTrace& trace, const Market& market, const FluidSolution& fluid) {
  const std::uint64_t fp = market.fingerprint();
  if (fluid.fingerprint != fp || trace.meta.fingerprint != fp)
    throw DomainError("trace, fluid solution and market describe different instances");
  Vector r = expected_profit(trace, market);
  for (std::size_t t = 0; t < r.size(); ++t) r[t] = static_cast<double>(t + 1) * fluid.f_star - r[t];
  return r;
}

struct QueueSeries {
  Vector avg;                     // running mean of the total queue length
  std::vector<std::int64_t> max;  // running max of the longest queue
};

inline QueueSeries queue_metrics(const RunTrace& trace) {
  QueueSeries s;
  const auto n = static_cast<std::size_t>(trace.slots);
  s.avg.resize(n);
  s.max.resize(n);
  double sum = 0.0;
  std::int64_t mx = 0;
  for (std::size_t t = 0; t < n; ++t) {
    sum += static_cast<double>(trace.queue_total[t]);
    mx = std::max(mx, trace.queue_max[t]);
    s.avg[t] = sum / static_cast<double>(t + 1);
    s.max[t] = mx;
  }
  return s;
}

/// R(t) + w t AvgQLen(t).
inline Vector combined_objective(std::span<const double> regret_series, std::span<const double> avg_qlen, double w) {
  if (regret_series.size() != avg_qlen.size()) throw DomainError("series lengths differ");
  Vector out(regret_series.size());
  for (std::size_t t = 0; t < out.size(); ++t)
    out[t] = regret_series[t] + w * static_cast<double>(t + 1) * avg_qlen[t];
  return out;
}

/// 100 (baseline - candidate) / baseline; NaN when the baseline is zero.
inline double improvement_pct(double candidate, double baseline) {
  if (baseline == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * (baseline - candidate) / baseline;
}

inline Vector improvement_pct(std::span<const double> candidate, std::span<const double> baseline) {
  if (candidate.size() != baseline.size()) throw DomainError("series lengths differ");
  Vector out(candidate.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = improvement_pct(candidate[k], baseline[k]);
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y = slope x + intercept.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("line fit needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (sxx == 0.0) throw DomainError("line fit needs distinct x values");
  return {sxy / sxx, my - sxy / sxx * mx};
}

/// Fit of growth exponents against gamma; needs at least three gammas.
inline LineFit tradeoff_fit(std::span<const double> gammas, std::span<const double> exponents) {
  if (gammas.size() < 3) throw DomainError("tradeoff fit needs >= 3 gamma values");
  return fit_line(gammas, exponents);
}

/// Mean of log2 s(t) / log2 t over integer t in [t0, t1] (1-based slots).
/// Slots with s(t) <= 0 or t = 1 carry no exponent and are skipped.
inline double growth_exponent(std::span<const double> series, std::int64_t t0, std::int64_t t1) {
  t0 = std::max<std::int64_t>(t0, 2);
  t1 = std::min<std::int64_t>(t1, static_cast<std::int64_t>(series.size()));
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::int64_t t = t0; t <= t1; ++t) {
    const double v = series[static_cast<std::size_t>(t - 1)];
    if (!(v > 0.0)) continue;
    sum += std::log2(v) / std::log2(static_cast<double>(t));
    ++n;
  }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(n);
}

/// Least-squares slope of log s(t) against log t on `points` log-spaced
/// slots in [t0, t1].
inline LineFit loglog_fit(std::span<const double> series, std::int64_t t0, std::int64_t t1, int points = 101) {
  t1 = std::min<std::int64_t>(t1, static_cast<std::int64_t>(series.size()));
  if (t0 < 1 || t0 >= t1) throw DomainError("log-log fit needs 1 <= t0 < t1 <= series length");
  Vector lx, ly;
  std::int64_t last = 0;
  for (int k = 0; k < points; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(points - 1);
    const auto t = static_cast<std::int64_t>(std::llround(std::exp(std::log(t0) + f * (std::log(t1) - std::log(t0)))));
    if (t == last) continue;
    last = t;
    const double v = series[static_cast<std::size_t>(t - 1)];
    if (!(v > 0.0)) continue;
    lx.push_back(std::log(static_cast<double>(t)));
    ly.push_back(std::log(v));
  }
  return fit_line(lx, ly);
}

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
};

/// mean +- 1.96 sd / sqrt(n) with the n-1 sample standard deviation.
inline ConfidenceInterval confidence_interval(std::span<const double> values) {
  if (values.size() < 2) throw DomainError("confidence interval needs >= 2 values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n)};
}

/// Log-spaced report slots: `per_decade` points per factor of ten, always
/// including the horizon.
inline std::vector<std::int64_t> log_checkpoints(std::int64_t horizon, int per_decade) {
  if (horizon < 1) return {};
  if (per_decade < 1) throw ConfigError("checkpoints per decade must be >= 1");
  std::vector<std::int64_t> out;
  for (int k = 0;; ++k) {
    const auto t = static_cast<std::int64_t>(std::llround(std::pow(10.0, static_cast<double>(k) / per_decade)));
    if (t > horizon) break;
    if (out.empty() || out.back() != t) out.push_back(t);
  }
  if (out.back() != horizon) out.push_back(horizon);
  return out;
}

/// What a run contributes to the report files once its trace is discarded.
struct RunSummary {
  std::string policy;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  std::int64_t horizon = 0;
  std::vector<std::int64_t> checkpoints;
  Vector regret;
  Vector avg_qlen;
  std::vector<std::int64_t> max_qlen;
  std::vector<double> weights;
  std::vector<Vector> objective;  // per weight, per checkpoint
  double regret_exponent = 0.0;
  double queue_exponent = 0.0;
  double realized_profit = 0.0;
  double expected_profit = 0.0;
  std::int64_t structural_violations = 0;
};

/// Exponents use the window [t0, horizon] with t0 = max(2, window_start).
inline RunSummary summarize(const RunTrace& trace, const Market& market, const FluidSolution& fluid,
                            std::span<const std::int64_t> checkpoints, std::span<const double> weights,
                            std::int64_t window_start) {
  RunSummary s;
  s.policy = trace.meta.policy;
  s.seed = trace.meta.seed;
  s.gamma = trace.meta.gamma;
  s.horizon = trace.slots;
  const Vector r = regret(trace, market, fluid);
  const QueueSeries q = queue_metrics(trace);
  s.weights.assign(weights.begin(), weights.end());
  s.objective.assign(weights.size(), {});
  for (std::int64_t t : checkpoints) {
    if (t < 1 || t > trace.slots) continue;
    const auto k = static_cast<std::size_t>(t - 1);
    s.checkpoints.push_back(t);
    s.regret.push_back(r[k]);
    s.avg_qlen.push_back(q.avg[k]);
    s.max_qlen.push_back(q.max[k]);
    for (std::size_t w = 0; w < weights.size(); ++w)
      s.objective[w].push_back(r[k] + weights[w] * static_cast<double>(t) * q.avg[k]);
  }
  s.regret_exponent = growth_exponent(r, window_start, trace.slots);
  s.queue_exponent = growth_exponent(q.avg, window_start, trace.slots);
  s.realized_profit = std::accumulate(trace.realized_profit.begin(), trace.realized_profit.end(), 0.0);
  s.expected_profit = r.empty() ? 0.0 : static_cast<double>(r.size()) * fluid.f_star - r.back();
  s.structural_violations = trace.structural_violations;
  return s;
}

}  // namespace twosided
