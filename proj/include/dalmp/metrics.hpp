#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dalmp/error.hpp"
#include "dalmp/param_io.hpp"

namespace dalmp {

namespace detail {

inline void check_pair(std::span<const double> actual, std::span<const double> forecast) {
  if (actual.size() != forecast.size()) {
    throw Error(ErrorCode::length_mismatch, std::to_string(actual.size()) + " actuals vs " +
                                                std::to_string(forecast.size()) + " forecasts");
  }
  if (actual.empty()) throw Error(ErrorCode::empty_input, "no forecast points");
}

}  // namespace detail

/// Mean squared error in squared price units.
inline double mse(std::span<const double> actual, std::span<const double> forecast) {
  detail::check_pair(actual, forecast);
  double acc = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = actual[i] - forecast[i];
    acc += e * e;
  }
  return acc / static_cast<double>(actual.size());
}

/// Mean absolute percentage error, in percent.
inline double mape(std::span<const double> actual, std::span<const double> forecast) {
  detail::check_pair(actual, forecast);
  double acc = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) throw Error(ErrorCode::zero_actual, "actual value at index " + std::to_string(i) + " is 0");
    acc += 100.0 * std::fabs(actual[i] - forecast[i]) / std::fabs(actual[i]);
  }
  return acc / static_cast<double>(actual.size());
}

struct EvalReport {
  std::string model;
  double mse = 0.0;
  double mape = 0.0;
  std::size_t n = 0;
  std::vector<double> errors;  // forecast - actual, per point
};

inline EvalReport evaluate(std::string model, std::span<const double> actual, std::span<const double> forecast) {
  EvalReport r;
  r.model = std::move(model);
  r.mse = mse(actual, forecast);
  r.mape = mape(actual, forecast);
  r.n = actual.size();
  r.errors.reserve(actual.size());
  for (std::size_t i = 0; i < actual.size(); ++i) r.errors.push_back(forecast[i] - actual[i]);
  return r;
}

inline void write_reports_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "model,mse,mape,n\n";
  for (const auto& r : reports) {
    out << r.model << ',' << format_double(r.mse) << ',' << format_double(r.mape) << ',' << r.n << '\n';
  }
}

}  // namespace dalmp
