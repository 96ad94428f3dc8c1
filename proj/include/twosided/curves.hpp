#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "twosided/errors.hpp"

namespace twosided {

enum class CurveKind { demand, supply };

inline const char* to_string(CurveKind kind) {
  return kind == CurveKind::demand ? "demand" : "supply";
}

// Regularity constants of a curve. `lipschitz_fwd` bounds |dp/drate|,
// `lipschitz_inv` bounds |drate/dp|, `min_inv_slope` is the lower bound
// C_L on |drate/dp|. Smoothness constants bound the change of the
// respective first derivatives.
struct CurveConstants {
  double lipschitz_fwd = 0.0;
  double lipschitz_inv = 0.0;
  double smoothness_fwd = 0.0;
  double smoothness_inv = 0.0;
  double min_inv_slope = 0.0;
};

namespace detail {

// Slack for accumulated round-off when a caller computes a boundary value.
inline constexpr double kBoundarySlack = 1e-12;

inline void require_rate(double rate) {
  if (!(rate >= -kBoundarySlack && rate <= 1.0 + kBoundarySlack)) {
    std::ostringstream os;
    os << "rate " << rate << " outside [0, 1]";
    throw DomainError(os.str());
  }
}

}  // namespace detail

/// A monotone bijection between an arrival rate in [0,1] and a posted price
/// in [p_min, p_max]. Demand curves are strictly decreasing, supply curves
/// strictly increasing. Implementations are immutable.
class Curve {
 public:
  Curve(CurveKind kind, double p_min, double p_max) : kind_(kind), p_min_(p_min), p_max_(p_max) {
    if (!(p_min < p_max)) throw ConfigError("curve requires p_min < p_max");
  }
  virtual ~Curve() = default;

  CurveKind kind() const noexcept { return kind_; }
  double p_min() const noexcept { return p_min_; }
  double p_max() const noexcept { return p_max_; }

  /// Price that induces `rate`. Throws DomainError for rate outside [0,1].
  double price_of_rate(double rate) const {
    detail::require_rate(rate);
    return std::clamp(price_of_rate_impl(std::clamp(rate, 0.0, 1.0)), p_min_, p_max_);
  }

  /// Arrival rate induced by `price`. Prices outside [p_min, p_max] are a
  /// DomainError; clamping is the caller's business.
  double rate_of_price(double price) const {
    require_price(price);
    return std::clamp(rate_of_price_impl(std::clamp(price, p_min_, p_max_)), 0.0, 1.0);
  }

  /// d price / d rate at `rate`.
  double price_slope(double rate) const {
    detail::require_rate(rate);
    return price_slope_impl(std::clamp(rate, 0.0, 1.0));
  }

  /// rate * price_of_rate(rate): revenue per slot for demand, cost for supply.
  double revenue_rate(double rate) const { return rate * price_of_rate(rate); }

  /// d/drate of revenue_rate.
  double marginal_revenue(double rate) const {
    return price_of_rate(rate) + rate * price_slope(rate);
  }

  bool contains_price(double price) const noexcept {
    return price >= p_min_ - detail::kBoundarySlack && price <= p_max_ + detail::kBoundarySlack;
  }

  double clamp_price(double price) const noexcept { return std::clamp(price, p_min_, p_max_); }

  /// Price at which this curve's arrivals stop: p_max for demand, p_min for supply.
  double rejecting_price() const noexcept { return kind_ == CurveKind::demand ? p_max_ : p_min_; }

  virtual CurveConstants constants() const = 0;
  virtual std::string describe() const = 0;

 protected:
  virtual double price_of_rate_impl(double rate) const = 0;
  virtual double rate_of_price_impl(double price) const = 0;
  virtual double price_slope_impl(double rate) const = 0;

 private:
  void require_price(double price) const {
    if (!contains_price(price)) {
      std::ostringstream os;
      os << to_string(kind_) << " price " << price << " outside [" << p_min_ << ", " << p_max_ << "]";
      throw DomainError(os.str());
    }
  }

  CurveKind kind_;
  double p_min_;
  double p_max_;
};

using CurvePtr = std::shared_ptr<const Curve>;

/// Demand: F(rate) = intercept - slope * rate on [intercept - slope, intercept].
/// Supply: G(rate) = intercept + slope * rate on [intercept, intercept + slope].
/// `slope` is the magnitude and must be positive.
class LinearCurve final : public Curve {
 public:
  LinearCurve(CurveKind kind, double intercept, double slope)
      : Curve(kind, bounds(kind, intercept, slope).first, bounds(kind, intercept, slope).second),
        intercept_(intercept),
        slope_(slope) {}

  double intercept() const noexcept { return intercept_; }
  double slope() const noexcept { return slope_; }

  CurveConstants constants() const override {
    return {slope_, 1.0 / slope_, 0.0, 0.0, 1.0 / slope_};
  }

  std::string describe() const override {
    std::ostringstream os;
    os << to_string(kind()) << " linear intercept=" << intercept_ << " slope=" << slope_;
    return os.str();
  }

 protected:
  double price_of_rate_impl(double rate) const override {
    return kind() == CurveKind::demand ? intercept_ - slope_ * rate : intercept_ + slope_ * rate;
  }
  double rate_of_price_impl(double price) const override {
    return kind() == CurveKind::demand ? (intercept_ - price) / slope_ : (price - intercept_) / slope_;
  }
  double price_slope_impl(double) const override {
    return kind() == CurveKind::demand ? -slope_ : slope_;
  }

 private:
  static std::pair<double, double> bounds(CurveKind kind, double intercept, double slope) {
    if (!(slope > 0.0) || !std::isfinite(slope) || !std::isfinite(intercept))
      throw ConfigError("linear curve slope must be positive and finite");
    return kind == CurveKind::demand ? std::pair{intercept - slope, intercept}
                                     : std::pair{intercept, intercept + slope};
  }

  double intercept_;
  double slope_;
};

/// Builds a linear curve from a declared (kind, intercept, slope, p_min, p_max)
/// record, rejecting bounds that disagree with the closed form.
inline CurvePtr make_linear_curve(CurveKind kind, double intercept, double slope, double p_min,
                                  double p_max) {
  auto curve = std::make_shared<LinearCurve>(kind, intercept, slope);
  constexpr double tol = 1e-9;
  if (std::abs(curve->p_min() - p_min) > tol || std::abs(curve->p_max() - p_max) > tol) {
    std::ostringstream os;
    os << "declared price bounds [" << p_min << ", " << p_max << "] do not match "
       << curve->describe() << " which spans [" << curve->p_min() << ", " << curve->p_max() << "]";
    throw ConfigError(os.str());
  }
  return curve;
}

/// Piecewise-linear curve through knots (rate_k, price_k) with rate_0 = 0,
/// rate_n = 1 and strictly monotone prices. Used for fitted estimates.
class PiecewiseLinearCurve final : public Curve {
 public:
  PiecewiseLinearCurve(CurveKind kind, std::vector<double> rates, std::vector<double> prices)
      : Curve(kind, checked_min(kind, rates, prices), checked_max(kind, prices)),
        rates_(std::move(rates)),
        prices_(std::move(prices)) {}

  const std::vector<double>& knot_rates() const noexcept { return rates_; }
  const std::vector<double>& knot_prices() const noexcept { return prices_; }

  CurveConstants constants() const override {
    CurveConstants c;
    c.min_inv_slope = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < rates_.size(); ++k) {
      const double s = std::abs(segment_slope(k));
      c.lipschitz_fwd = std::max(c.lipschitz_fwd, s);
      c.lipschitz_inv = std::max(c.lipschitz_inv, 1.0 / s);
      c.min_inv_slope = std::min(c.min_inv_slope, 1.0 / s);
    }
    const double kinked = rates_.size() > 2 ? std::numeric_limits<double>::infinity() : 0.0;
    c.smoothness_fwd = kinked;
    c.smoothness_inv = kinked;
    return c;
  }

  std::string describe() const override {
    std::ostringstream os;
    os << to_string(kind()) << " piecewise-linear with " << rates_.size() << " knots";
    return os.str();
  }

 protected:
  double price_of_rate_impl(double rate) const override {
    const std::size_t k = segment_of_rate(rate);
    return prices_[k] + segment_slope(k) * (rate - rates_[k]);
  }

  double rate_of_price_impl(double price) const override {
    // Prices are monotone in the knot index; search in the matching direction.
    std::size_t k = 0;
    const std::size_t last = rates_.size() - 2;
    if (kind() == CurveKind::demand) {
      while (k < last && price < prices_[k + 1]) ++k;
    } else {
      while (k < last && price > prices_[k + 1]) ++k;
    }
    return rates_[k] + (price - prices_[k]) / segment_slope(k);
  }

  double price_slope_impl(double rate) const override { return segment_slope(segment_of_rate(rate)); }

 private:
  std::size_t segment_of_rate(double rate) const {
    auto it = std::upper_bound(rates_.begin(), rates_.end(), rate);
    std::size_t k = it == rates_.begin() ? 0 : static_cast<std::size_t>(it - rates_.begin()) - 1;
    return std::min(k, rates_.size() - 2);
  }

  double segment_slope(std::size_t k) const {
    return (prices_[k + 1] - prices_[k]) / (rates_[k + 1] - rates_[k]);
  }

  static double checked_min(CurveKind kind, const std::vector<double>& rates,
                            const std::vector<double>& prices) {
    if (rates.size() < 2 || rates.size() != prices.size())
      throw ConfigError("piecewise-linear curve needs >= 2 matching knots");
    if (rates.front() != 0.0 || rates.back() != 1.0)
      throw ConfigError("piecewise-linear curve knots must span rates [0, 1]");
    for (std::size_t k = 0; k + 1 < rates.size(); ++k) {
      if (!(rates[k] < rates[k + 1])) throw ConfigError("knot rates must increase strictly");
      const bool ok = kind == CurveKind::demand ? prices[k] > prices[k + 1] : prices[k] < prices[k + 1];
      if (!ok) throw ConfigError("knot prices must be strictly monotone");
    }
    return kind == CurveKind::demand ? prices.back() : prices.front();
  }

  static double checked_max(CurveKind kind, const std::vector<double>& prices) {
    if (prices.empty()) return 0.0;
    return kind == CurveKind::demand ? prices.front() : prices.back();
  }

  std::vector<double> rates_;
  std::vector<double> prices_;
};

}  // namespace twosided
