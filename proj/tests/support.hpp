#pragma once

// Small fixtures shared by the test binaries.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dalmp/data.hpp"
#include "dalmp/forecaster.hpp"

namespace dalmp::testing {

inline HourStamp day0() { return std::chrono::sys_days{std::chrono::year{2020} / 1 / 6}; }  // a Monday

/// Smooth positive market of `days` days: prices follow the RTO load.
inline MarketData toy_market(std::size_t days, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t n = days * 24;
  MarketData d;
  d.prices.start = d.exogenous.start = day0();
  d.exogenous.columns.assign(table_exogenous_columns, std::vector<double>(n));
  for (std::size_t t = 0; t < n; ++t) {
    const double hour = static_cast<double>(t % 24);
    const double load = 90000.0 + 15000.0 * std::sin(2 * 3.14159265358979 * (hour - 9) / 24) + 3000.0 * noise(rng);
    d.exogenous.columns[0][t] = load;
    for (std::size_t z = 1; z < 9; ++z) d.exogenous.columns[z][t] = load * (0.05 + 0.01 * z) * (1 + 0.01 * noise(rng));
    for (std::size_t c = 9; c < 13; ++c) d.exogenous.columns[c][t] = 60.0 + 10.0 * std::sin(hour / 4) + noise(rng);
    d.prices.values.push_back(std::exp(3.0 + (load - 90000.0) / 40000.0 + 0.05 * noise(rng)));
  }
  return d;
}

inline NetworkConfig tiny_network(std::size_t units = 4, std::size_t history = 48) {
  NetworkConfig c;
  c.history_hours = history;
  c.lstm_units = units;
  c.dense1_units = 6;
  c.batch_size = 8;
  return c;
}

/// `n` random examples matching `c`.
inline std::vector<TrainingExample> random_examples(const NetworkConfig& c, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingExample ex;
    ex.origin = day0() + std::chrono::days{static_cast<long long>(i)};
    for (std::size_t h = 0; h < c.history_hours; ++h) ex.history.push_back(3.0 + 0.3 * z(rng));
    ex.exogenous = Tensor(Shape{c.horizon_hours, c.exogenous_features});
    for (double& v : ex.exogenous.data()) v = z(rng);
    for (std::size_t h = 0; h < c.horizon_hours; ++h) ex.target.push_back(3.0 + 0.3 * z(rng));
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::string to_csv(const MarketData& d) {
  std::ostringstream os;
  write_market_csv(os, d);
  return os.str();
}

inline HourlySeries simulate_ar(const std::vector<double>& phi, double c, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> e(0.0, 1.0);
  std::vector<double> y(n + 500, 0.0);
  for (std::size_t t = phi.size(); t < y.size(); ++t) {
    double v = c + e(rng);
    for (std::size_t i = 0; i < phi.size(); ++i) v += phi[i] * y[t - 1 - i];
    y[t] = v;
  }
  return {day0(), {y.begin() + 500, y.end()}};
}

// (1 - phi B)(1 - Phi B^24) y = e
inline HourlySeries simulate_seasonal(double phi, double Phi, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> e(0.0, 1.0);
  std::vector<double> y(n + 2000, 0.0);
  for (std::size_t t = 25; t < y.size(); ++t) y[t] = phi * y[t - 1] + Phi * y[t - 24] - phi * Phi * y[t - 25] + e(rng);
  return {day0(), {y.begin() + 2000, y.end()}};
}

// Normal equations solved by Gauss-Jordan elimination with partial pivoting.
inline std::vector<double> normal_equations(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
  const std::size_t p = x.front().size();
  std::vector<std::vector<long double>> a(p, std::vector<long double>(p + 1, 0.0L));
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) a[i][j] += (long double)x[r][i] * x[r][j];
      a[i][p] += (long double)x[r][i] * y[r];
    }
  }
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < p; ++r) {
      if (std::fabs((double)a[r][col]) > std::fabs((double)a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == col) continue;
      const long double f = a[r][col] / a[col][col];
      for (std::size_t k = col; k <= p; ++k) a[r][k] -= f * a[col][k];
    }
  }
  std::vector<double> out(p);
  for (std::size_t i = 0; i < p; ++i) out[i] = static_cast<double>(a[i][p] / a[i][i]);
  return out;
}

}  // namespace dalmp::testing
