#pragma once

// Synthetic hourly market with a known price mechanism:
//
//   city temperatures -> zonal loads -> aggregate RTO load
//   log price = base + calendar terms + slope * l + convexity * max(l, 0)^2
//               + log noise
//   log noise = slow daily level (fuel cost drift) + fast hourly AR(1)
//   price     = exp(log price) * spike multiplier
//
// where l is the aggregate load normalized by fixed reference constants. The
// noiseless path (no log noise, no spikes) depends only on the exogenous
// columns and the calendar.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "dalmp/data.hpp"
#include "dalmp/error.hpp"
#include "dalmp/param_io.hpp"

namespace dalmp {

struct CityClimate {
  double annual_mean_f;
  double annual_amplitude_f;
};

struct MarketParams {
  HourStamp start = std::chrono::sys_days{std::chrono::year{2019} / 8 / 9};

  double base_log_price = 3.2;
  double daily_price_amplitude = 0.06;
  double weekend_price_drop = 0.04;

  std::array<CityClimate, 4> cities{{{50.0, 23.0}, {55.0, 21.0}, {56.0, 21.0}, {52.0, 21.0}}};
  double daily_temperature_amplitude_f = 8.0;
  double weather_anomaly_sd_f = 6.0;
  double weather_anomaly_persistence = 0.8;  // day to day
  double hourly_temperature_noise_f = 1.0;

  double comfort_temperature_f = 62.0;
  double load_linear = 0.002;      // relative load per deg F above comfort
  double load_quadratic = 0.00025;  // relative load per squared deg F from comfort
  double daily_load_amplitude = 0.10;
  double weekend_load_drop = 0.06;

  double reference_load_mw = 100000.0;
  double reference_load_scale_mw = 15000.0;
  double stack_slope = 0.25;
  double stack_convexity = 0.3;

  double noise_sigma = 0.40;             // stationary sd of the total log noise
  double level_share = 0.95;             // share of the noise variance in the daily level
  double level_persistence = 0.98;       // day to day
  double noise_persistence = 0.9;        // hour to hour, fast component
  double spike_probability = 0.002;
  double spike_min = 2.0;
  double spike_max = 5.0;

  std::uint64_t seed = 1;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::invalid_config, what); };
    if (!is_midnight(start)) fail("start must be a UTC midnight");
    if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
    if (!(level_share >= 0.0 && level_share <= 1.0)) fail("level_share must be in [0, 1]");
    if (!(level_persistence >= 0.0 && level_persistence < 1.0)) fail("level_persistence must be in [0, 1)");
    if (!(noise_persistence >= 0.0 && noise_persistence < 1.0)) fail("noise_persistence must be in [0, 1)");
    if (!(spike_probability >= 0.0 && spike_probability < 1.0)) fail("spike_probability must be in [0, 1)");
    if (!(spike_min >= 1.0 && spike_max >= spike_min)) fail("spike range must satisfy 1 <= min <= max");
    if (!(weather_anomaly_persistence >= 0.0 && weather_anomaly_persistence < 1.0)) {
      fail("weather_anomaly_persistence must be in [0, 1)");
    }
    if (!(weather_anomaly_sd_f >= 0.0) || !(hourly_temperature_noise_f >= 0.0)) fail("temperature sds must be >= 0");
    if (!(reference_load_scale_mw > 0.0)) fail("reference_load_scale_mw must be > 0");
    if (!(stack_convexity >= 0.0)) fail("stack_convexity must be >= 0");
    if (!(load_quadratic >= 0.0)) fail("load_quadratic must be >= 0");
  }
};

struct SyntheticMarket {
  MarketData data;
  std::vector<double> noiseless_price;
};

namespace detail {

struct Zone {
  double base_mw;
  std::size_t city;        // index into MarketParams::cities
  double sensitivity;      // multiplies the load response to temperature
};

// AEP, APS, DOM, MIDATL, EKPC, ATSI, COMED, DUQ
inline constexpr std::array<Zone, 8> zones{{{14000.0, 1, 1.0},
                                            {5500.0, 3, 0.9},
                                            {11000.0, 2, 1.25},
                                            {30000.0, 2, 1.1},
                                            {1700.0, 1, 1.3},
                                            {8000.0, 3, 0.85},
                                            {11000.0, 0, 1.05},
                                            {1600.0, 3, 0.95}}};
inline constexpr double zone_noise = 0.01;
inline constexpr double unlisted_share = 0.12;  // RTO load outside the listed zones

}  // namespace detail

inline SyntheticMarket generate_market(const MarketParams& p, std::size_t n_days) {
  p.validate();
  if (n_days < 30) throw Error(ErrorCode::invalid_config, "n_days must be >= 30");
  using std::numbers::pi;
  const std::size_t n = n_days * 24;

  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  SyntheticMarket m;
  m.data.prices.start = p.start;
  m.data.exogenous.start = p.start;
  m.data.prices.values.resize(n);
  m.data.exogenous.columns.assign(table_exogenous_columns, std::vector<double>(n));
  m.noiseless_price.resize(n);

  std::array<double, 4> anomaly{};
  const double innovation = std::sqrt(1.0 - p.weather_anomaly_persistence * p.weather_anomaly_persistence);
  const double level_sd = p.noise_sigma * std::sqrt(p.level_share);
  const double fast_sd = p.noise_sigma * std::sqrt(1.0 - p.level_share);
  const double level_innovation = std::sqrt(1.0 - p.level_persistence * p.level_persistence);
  const double fast_innovation = std::sqrt(1.0 - p.noise_persistence * p.noise_persistence);
  double level = level_sd * normal(rng);
  double fast = fast_sd * normal(rng);
  double unlisted_anomaly = 0.0;

  for (std::size_t t = 0; t < n; ++t) {
    const HourStamp when = p.start + std::chrono::hours{static_cast<long long>(t)};
    const auto day = std::chrono::floor<std::chrono::days>(when);
    const double hour = static_cast<double>((when - day).count());
    const bool weekend = std::chrono::weekday{day}.iso_encoding() >= 6;
    const std::chrono::year_month_day ymd{day};
    const double doy =
        static_cast<double>((day - std::chrono::sys_days{ymd.year() / std::chrono::January / 1}).count());

    if (hour == 0.0) {
      level = p.level_persistence * level + level_innovation * level_sd * normal(rng);
      // Regional weather fronts: a shared daily shock plus a local one.
      const double shared = normal(rng);
      for (double& a : anomaly) {
        const double shock = std::sqrt(0.7) * shared + std::sqrt(0.3) * normal(rng);
        a = p.weather_anomaly_persistence * a + innovation * p.weather_anomaly_sd_f * shock;
      }
    }

    std::array<double, 4> temperature{};
    for (std::size_t c = 0; c < temperature.size(); ++c) {
      const auto& city = p.cities[c];
      temperature[c] = city.annual_mean_f - city.annual_amplitude_f * std::cos(2.0 * pi * (doy - 15.0) / 365.25) +
                       p.daily_temperature_amplitude_f * std::sin(2.0 * pi * (hour - 9.0) / 24.0) + anomaly[c] +
                       p.hourly_temperature_noise_f * normal(rng);
    }

    const double calendar_load = 1.0 + p.daily_load_amplitude * std::sin(2.0 * pi * (hour - 9.0) / 24.0) -
                                 (weekend ? p.weekend_load_drop : 0.0);
    double listed = 0.0;
    for (std::size_t z = 0; z < detail::zones.size(); ++z) {
      const double dt = temperature[detail::zones[z].city] - p.comfort_temperature_f;
      const double weather = 1.0 + detail::zones[z].sensitivity * (p.load_linear * dt + p.load_quadratic * dt * dt);
      const double load = std::max(
          0.0, detail::zones[z].base_mw * calendar_load * weather * (1.0 + detail::zone_noise * normal(rng)));
      m.data.exogenous.columns[1 + z][t] = load;
      listed += load;
    }
    unlisted_anomaly = 0.95 * unlisted_anomaly + 0.01 * normal(rng);
    const double rto = listed * (1.0 + detail::unlisted_share * (1.0 + unlisted_anomaly));
    m.data.exogenous.columns[0][t] = rto;
    for (std::size_t c = 0; c < temperature.size(); ++c) m.data.exogenous.columns[9 + c][t] = temperature[c];

    const double l = (rto - p.reference_load_mw) / p.reference_load_scale_mw;
    const double above = std::max(l, 0.0);
    const double log_clean = p.base_log_price + p.daily_price_amplitude * std::sin(2.0 * pi * (hour - 11.0) / 24.0) -
                             (weekend ? p.weekend_price_drop : 0.0) + p.stack_slope * l +
                             p.stack_convexity * above * above;
    m.noiseless_price[t] = std::exp(log_clean);

    fast = p.noise_persistence * fast + fast_innovation * fast_sd * normal(rng);
    const bool spike = uniform(rng) < p.spike_probability;
    const double spike_size = p.spike_min + (p.spike_max - p.spike_min) * uniform(rng);
    const double noisy = p.noise_sigma > 0.0 ? std::exp(log_clean + level + fast) : m.noiseless_price[t];
    m.data.prices.values[t] = spike ? noisy * spike_size : noisy;
  }
  return m;
}

inline void write_ground_truth_csv(std::ostream& out, const SyntheticMarket& m) {
  out << "timestamp,noiseless_price\n";
  for (std::size_t i = 0; i < m.noiseless_price.size(); ++i) {
    out << format_timestamp(m.data.prices.time_at(i)) << ',' << format_double(m.noiseless_price[i]) << '\n';
  }
}

}  // namespace dalmp
