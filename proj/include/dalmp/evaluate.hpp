#pragma once

// Out-of-sample benchmark over the last `test_days` days of a dataset.
// The forecaster is trained once on everything before the test window;
// Models 1-3 are refit before every test day on all data up to that day.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dalmp/baselines.hpp"
#include "dalmp/data.hpp"
#include "dalmp/error.hpp"
#include "dalmp/forecaster.hpp"
#include "dalmp/metrics.hpp"
#include "dalmp/network_config.hpp"
#include "dalmp/training.hpp"

namespace dalmp {

inline constexpr std::array<const char*, 4> benchmark_models = {"model_1", "model_2", "model_3", "dl"};

struct BenchmarkConfig {
  NetworkConfig network{};
  TrainConfig dl_train{};
  TrainConfig stateless_train{};
  StatelessOptions stateless{};
  std::size_t ar_order = 6;
  SeasonalSpec sarx{};
  SeasonalMode seasonal_mode = SeasonalMode::multiplicative;
  std::size_t test_days = 7;
  std::uint64_t seed = 1;
};

struct BenchmarkResult {
  std::vector<HourStamp> hours;
  std::vector<double> actual;
  std::array<std::vector<double>, 4> forecasts;  // benchmark_models order
  std::vector<EvalReport> reports;
  ForecasterTraining dl;
};

/// Hours [0, end) of `data`.
inline MarketData market_prefix(const MarketData& data, std::size_t end) {
  MarketData out;
  out.prices.start = data.prices.start;
  out.prices.values.assign(data.prices.values.begin(), data.prices.values.begin() + static_cast<std::ptrdiff_t>(end));
  out.exogenous.start = data.exogenous.start;
  for (const auto& c : data.exogenous.columns) {
    out.exogenous.columns.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

/// Trains the forecaster on `data` with its own exogenous scaling.
inline ForecasterTraining train_forecaster(const MarketData& data, const NetworkConfig& network,
                                           const TrainConfig& tc, std::uint64_t seed) {
  const ExampleSet set = build_examples(data, network, tc.validation_fraction);
  ForecasterWeights w = build_forecaster(network, seed);
  w.scaling = set.scaling;
  fit_price_level(w, set.examples, set.training_count);
  TrainConfig cfg = tc;
  cfg.rng_seed = seed;
  return train(std::move(w), set.examples, cfg);
}

/// 24-hour price forecast of the forecaster for the day starting at `origin`.
inline std::vector<double> forecast_day(const ForecasterWeights& w, const MarketData& data, HourStamp origin) {
  const HourlySeries logp = log_transform(data.prices);
  const auto history = history_window(logp, origin, w.config.history_hours);
  return predict(w, history, exogenous_block(data.exogenous, origin, w.config.horizon_hours, w.scaling));
}

inline BenchmarkResult run_benchmark(const MarketData& data, const BenchmarkConfig& cfg) {
  if (cfg.test_days == 0) throw Error(ErrorCode::invalid_config, "test_days must be positive");
  if (cfg.network.horizon_hours != 24) throw Error(ErrorCode::invalid_config, "benchmark needs a 24-hour horizon");
  if (!is_midnight(data.prices.start)) throw Error(ErrorCode::invalid_config, "data must start at a UTC midnight");
  const std::size_t test_hours = cfg.test_days * 24;
  if (data.prices.size() % 24 != 0 || data.prices.size() < test_hours + 30 * 24) {
    throw Error(ErrorCode::insufficient_data, "need whole days and at least 30 training days before the test window");
  }
  const std::size_t train_end = data.prices.size() - test_hours;

  BenchmarkResult r;
  r.dl = train_forecaster(market_prefix(data, train_end), cfg.network, cfg.dl_train, cfg.seed);

  const HourlySeries logp = log_transform(data.prices);
  for (std::size_t d = 0; d < cfg.test_days; ++d) {
    const std::size_t origin = train_end + d * 24;
    const HourStamp t0 = data.prices.time_at(origin);
    const MarketData seen = market_prefix(data, origin);
    const HourlySeries seen_log{seen.prices.start, {logp.values.begin(), logp.values.begin() + static_cast<std::ptrdiff_t>(origin)}};

    std::vector<std::vector<double>> future_exo;
    Tensor stateless_x(Shape{24, table_exogenous_columns + calendar_feature_count});
    for (std::size_t h = 0; h < 24; ++h) {
      future_exo.push_back(detail::exo_row(&data.exogenous, origin + h));
      const auto f = stateless_features(data, origin + h);
      std::copy(f.begin(), f.end(), stateless_x.data().begin() + static_cast<std::ptrdiff_t>(h * f.size()));
    }

    const auto m1 = fit_ar(seen_log, cfg.ar_order);
    const auto f1 = forecast_recursive(m1, seen_log.values);

    const auto m2 = fit_sarx(seen_log, &seen.exogenous, cfg.sarx, cfg.seasonal_mode);
    const auto f2 = forecast_recursive(m2, seen_log.values, future_exo);

    const auto m3 = fit_stateless(seen, origin, cfg.seed + 1 + d, cfg.stateless_train, cfg.stateless);
    std::vector<double> f3;
    for (double v : predict_log(m3.net, stateless_x)) f3.push_back(std::exp(v));

    const auto f4 = forecast_day(r.dl.weights, data, t0);

    for (std::size_t h = 0; h < 24; ++h) {
      r.hours.push_back(data.prices.time_at(origin + h));
      r.actual.push_back(data.prices.values[origin + h]);
      r.forecasts[0].push_back(f1[h]);
      r.forecasts[1].push_back(f2[h]);
      r.forecasts[2].push_back(f3[h]);
      r.forecasts[3].push_back(f4[h]);
    }
  }
  for (std::size_t m = 0; m < benchmark_models.size(); ++m) {
    r.reports.push_back(evaluate(benchmark_models[m], r.actual, r.forecasts[m]));
  }
  return r;
}

inline void write_forecasts_csv(std::ostream& out, const BenchmarkResult& r) {
  out << "timestamp,actual";
  for (const char* m : benchmark_models) out << ',' << m;
  out << '\n';
  for (std::size_t i = 0; i < r.actual.size(); ++i) {
    out << format_timestamp(r.hours[i]) << ',' << format_double(r.actual[i]);
    for (const auto& f : r.forecasts) out << ',' << format_double(f[i]);
    out << '\n';
  }
}

inline void write_history_csv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,train_mae,val_mae\n";
  for (const auto& e : history) {
    out << e.epoch << ',' << format_double(e.train_mae) << ',' << format_double(e.validation_mae) << '\n';
  }
}

}  // namespace dalmp
