#pragma once

// Profit risk of running a gas-fired unit through a block of hours when the
// hourly log-price forecast error is i.i.d. N(0, sigma^2):
//
//   hourly margin  C * (P_h - HR * G),      P_h = exp(mu_h + eps_h)
//   block profit   sum_h C * (P_h - HR * G) - SC   (start-up cost charged once)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dalmp/error.hpp"

namespace dalmp {

struct RiskSpec {
  double capacity_mw = 0.0;
  double heat_rate = 0.0;     // MMBtu/MWh
  double gas_price = 0.0;     // $/MMBtu
  double startup_cost = 0.0;  // $
  double sigma = 0.0;         // std. dev. of log-price forecast error
  double confidence_threshold = 0.90;

  double breakeven_price() const { return heat_rate * gas_price; }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::invalid_spec, what); };
    if (!(capacity_mw > 0.0)) fail("capacity must be > 0");
    if (!(heat_rate > 0.0)) fail("heat rate must be > 0");
    if (!(gas_price >= 0.0)) fail("gas price must be >= 0");
    if (!(startup_cost >= 0.0)) fail("start-up cost must be >= 0");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) fail("sigma must be finite and >= 0");
    if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0)) fail("confidence threshold must be in (0, 1)");
  }
};

/// Standard normal CDF through the complementary error function.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Root mean square about zero of log-scale residuals (actual - forecast).
inline double estimate_sigma(std::span<const double> residuals) {
  if (residuals.size() < 30) {
    throw Error(ErrorCode::insufficient_residuals, "need >= 30 residuals, got " + std::to_string(residuals.size()));
  }
  double ss = 0.0;
  for (double e : residuals) ss += e * e;
  return std::sqrt(ss / static_cast<double>(residuals.size()));
}

/// P(price < HR * G) for a lognormal price with log-median `mu_log`.
inline double hourly_loss_probability(double mu_log, const RiskSpec& spec) {
  spec.validate();
  const double breakeven = spec.breakeven_price();
  if (breakeven <= 0.0) return 0.0;
  const double z = std::log(breakeven) - mu_log;
  if (spec.sigma == 0.0) return z > 0.0 ? 1.0 : 0.0;
  return normal_cdf(z / spec.sigma);
}

struct ProfitQuantiles {
  double p05 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

struct BlockProfit {
  std::vector<double> samples;
  double expected = 0.0;
  ProfitQuantiles quantiles;
  double loss_probability = 0.0;
};

/// Linear interpolation between order statistics at position (n - 1) * q.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Monte Carlo block profit. `hours` holds 1-based hours into `mu_log`.
/// Samples are split into `shards` contiguous ranges, each with its own
/// seeded stream, so results depend only on (seed, n_samples, shards).
inline BlockProfit block_profit_distribution(std::span<const double> mu_log, std::span<const std::size_t> hours,
                                             const RiskSpec& spec, std::size_t n_samples, std::uint64_t seed,
                                             std::size_t shards = 1) {
  spec.validate();
  if (hours.empty()) throw Error(ErrorCode::invalid_hours, "no hours selected");
  std::set<std::size_t> seen;
  for (std::size_t h : hours) {
    if (h < 1 || h > mu_log.size()) {
      throw Error(ErrorCode::invalid_hours, "hour " + std::to_string(h) + " outside 1.." +
                                                std::to_string(mu_log.size()));
    }
    if (!seen.insert(h).second) throw Error(ErrorCode::invalid_hours, "hour " + std::to_string(h) + " repeated");
  }
  if (n_samples < 10000) throw Error(ErrorCode::invalid_spec, "need >= 10000 samples");
  shards = std::clamp<std::size_t>(shards, 1, n_samples);

  const double breakeven = spec.breakeven_price();
  BlockProfit out;
  out.samples.resize(n_samples);
  auto run_shard = [&](std::size_t shard) {
    const std::size_t begin = n_samples * shard / shards;
    const std::size_t end = n_samples * (shard + 1) / shards;
    std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(shard)));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t s = begin; s < end; ++s) {
      double profit = -spec.startup_cost;
      for (std::size_t h : hours) {
        const double price = std::exp(mu_log[h - 1] + spec.sigma * normal(rng));
        profit += spec.capacity_mw * (price - breakeven);
      }
      out.samples[s] = profit;
    }
  };
  if (shards == 1) {
    run_shard(0);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t k = 0; k < shards; ++k) workers.emplace_back(run_shard, k);
    for (auto& w : workers) w.join();
  }

  double total = 0.0;
  std::size_t losses = 0;
  for (double p : out.samples) {
    total += p;
    if (p < 0.0) ++losses;
  }
  out.expected = total / static_cast<double>(n_samples);
  out.loss_probability = static_cast<double>(losses) / static_cast<double>(n_samples);
  std::vector<double> sorted = out.samples;
  std::sort(sorted.begin(), sorted.end());
  out.quantiles = {quantile_sorted(sorted, 0.05), quantile_sorted(sorted, 0.50), quantile_sorted(sorted, 0.95)};
  return out;
}

enum class Action { run, shutdown };

inline const char* to_string(Action a) { return a == Action::run ? "RUN" : "SHUTDOWN"; }

struct Recommendation {
  Action action = Action::run;
  double loss_probability = 0.0;
};

/// Shut down only when the loss probability strictly exceeds the threshold.
inline Recommendation recommend_shutdown(double block_loss_probability, const RiskSpec& spec) {
  return {block_loss_probability > spec.confidence_threshold ? Action::shutdown : Action::run,
          block_loss_probability};
}

struct HourlyRisk {
  std::size_t hour = 0;
  double forecast_price = 0.0;
  double breakeven_price = 0.0;
  double loss_probability = 0.0;
};

struct RiskReport {
  std::vector<HourlyRisk> hours;
  std::vector<std::size_t> block_hours;
  double expected_profit = 0.0;
  ProfitQuantiles quantiles;
  double block_loss_probability = 0.0;
  Recommendation recommendation;
};

/// Risk report for a price forecast in $/MWh over the 1-based `block_hours`.
inline RiskReport assess_risk(std::span<const double> forecast_prices, std::span<const std::size_t> block_hours,
                              const RiskSpec& spec, std::size_t n_samples, std::uint64_t seed,
                              std::size_t shards = 1) {
  spec.validate();
  std::vector<double> mu;
  for (double p : forecast_prices) {
    if (!(p > 0.0)) throw Error(ErrorCode::domain, "forecast prices must be positive");
    mu.push_back(std::log(p));
  }
  RiskReport r;
  for (std::size_t h = 0; h < mu.size(); ++h) {
    r.hours.push_back({h + 1, forecast_prices[h], spec.breakeven_price(), hourly_loss_probability(mu[h], spec)});
  }
  const BlockProfit block = block_profit_distribution(mu, block_hours, spec, n_samples, seed, shards);
  r.block_hours.assign(block_hours.begin(), block_hours.end());
  r.expected_profit = block.expected;
  r.quantiles = block.quantiles;
  r.block_loss_probability = block.loss_probability;
  r.recommendation = recommend_shutdown(block.loss_probability, spec);
  return r;
}

inline void write_risk_csv(std::ostream& out, const RiskReport& r) {
  out << "hour,forecast_price,breakeven_price,p_hourly_loss\n";
  char buf[128];
  for (const auto& h : r.hours) {
    std::snprintf(buf, sizeof(buf), "%zu,%.2f,%.2f,%.4f\n", h.hour, h.forecast_price, h.breakeven_price,
                  h.loss_probability);
    out << buf;
  }
}

inline void write_risk_summary(std::ostream& out, const RiskReport& r, const RiskSpec& spec) {
  char buf[160];
  out << "block_hours";
  for (std::size_t h : r.block_hours) out << ' ' << h;
  out << '\n';
  std::snprintf(buf, sizeof(buf), "breakeven_price %.2f\n", spec.breakeven_price());
  out << buf;
  std::snprintf(buf, sizeof(buf), "expected_profit %.2f\n", r.expected_profit);
  out << buf;
  std::snprintf(buf, sizeof(buf), "profit_p05 %.2f\nprofit_p50 %.2f\nprofit_p95 %.2f\n", r.quantiles.p05,
                r.quantiles.p50, r.quantiles.p95);
  out << buf;
  std::snprintf(buf, sizeof(buf), "p_block_loss %.4f\nthreshold %.4f\n", r.block_loss_probability,
                spec.confidence_threshold);
  out << buf;
  out << "recommendation " << to_string(r.recommendation.action) << '\n';
}

}  // namespace dalmp
