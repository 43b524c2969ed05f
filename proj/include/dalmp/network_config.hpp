#pragma once

#include <cstddef>
#include <string>

#include "dalmp/error.hpp"

namespace dalmp {

inline constexpr std::size_t table_exogenous_columns = 13;
inline constexpr std::size_t calendar_feature_count = 24 + 7;

/// Shapes of the two-branch forecaster. Defaults reproduce the reference
/// configuration: ten days of hourly history, a 24-hour horizon, the 13
/// load/temperature columns plus 31 calendar one-hots.
struct NetworkConfig {
  std::size_t history_hours = 240;
  std::size_t horizon_hours = 24;
  std::size_t exogenous_features = table_exogenous_columns + calendar_feature_count;
  std::size_t cnn_filters = 3;
  std::size_t cnn_kernel_width = 3;
  std::size_t lstm_units = 100;
  std::size_t dense1_units = 50;
  std::size_t dense2_units = 24;
  std::size_t batch_size = 50;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::invalid_config, what); };
    if (history_hours == 0) fail("history_hours must be positive");
    if (horizon_hours == 0) fail("horizon_hours must be positive");
    if (exogenous_features == 0) fail("exogenous_features must be positive");
    if (cnn_filters == 0) fail("cnn_filters must be positive");
    if (cnn_kernel_width == 0) fail("cnn_kernel_width must be positive");
    if (cnn_kernel_width > horizon_hours) fail("cnn_kernel_width must not exceed horizon_hours");
    if (lstm_units == 0) fail("lstm_units must be positive");
    if (dense1_units == 0) fail("dense1_units must be positive");
    if (dense2_units == 0) fail("dense2_units must be positive");
    if (batch_size == 0) fail("batch_size must be positive");
    if (dense2_units != horizon_hours) {
      fail("dense2_units (" + std::to_string(dense2_units) + ") must equal horizon_hours (" +
           std::to_string(horizon_hours) + ")");
    }
  }

  bool operator==(const NetworkConfig&) const = default;
};

}  // namespace dalmp
