#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dalmp/error.hpp"
#include "dalmp/network_config.hpp"
#include "dalmp/tensor.hpp"
#include "dalmp/training.hpp"

namespace dalmp {

using HourStamp = std::chrono::sys_time<std::chrono::hours>;

// ---------------------------------------------------------------------------
// Timestamps: YYYY-MM-DDTHH:00:00Z, UTC only.

inline HourStamp parse_timestamp(std::string_view s) {
  auto fail = [&] { throw Error(ErrorCode::parse, "bad timestamp '" + std::string(s) + "'"); };
  if (s.size() != 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s.substr(13) != ":00:00Z") fail();
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    auto r = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (r.ec != std::errc() || r.ptr != s.data() + pos + len) fail();
    return v;
  };
  const int y = num(0, 4), mo = num(5, 2), d = num(8, 2), h = num(11, 2);
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23) fail();
  return std::chrono::sys_days{ymd} + std::chrono::hours{h};
}

inline std::string format_timestamp(HourStamp t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{day};
  const auto hour = (t - day).count();
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:00:00Z", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<long long>(hour));
  return buf;
}

inline bool is_midnight(HourStamp t) { return t == std::chrono::floor<std::chrono::days>(t); }

// ---------------------------------------------------------------------------
// Column contract.

/// Exogenous columns in their fixed feature order: aggregate RTO demand, eight
/// zonal demands (MW), then four city temperatures (deg F).
inline constexpr std::array<std::string_view, table_exogenous_columns> exogenous_columns = {
    "rto_demand_mw", "aep_mw",    "aps_mw",     "dom_mw",         "midatl_mw",    "ekpc_mw",     "atsi_mw",
    "comed_mw",      "duq_mw",    "chicago_f",  "cincinnati_f",   "philadelphia_f", "pittsburgh_f"};
inline constexpr std::size_t demand_column_count = 9;
inline constexpr std::string_view timestamp_column = "timestamp";
inline constexpr std::string_view price_column = "dalmp";

/// Hourly series on consecutive UTC hours.
struct HourlySeries {
  HourStamp start{};
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  HourStamp end() const { return start + std::chrono::hours{static_cast<long long>(values.size())}; }
  HourStamp time_at(std::size_t i) const { return start + std::chrono::hours{static_cast<long long>(i)}; }
  std::ptrdiff_t index_of(HourStamp t) const { return (t - start).count(); }
};

/// Hour-aligned exogenous columns in `exogenous_columns` order.
struct ExogenousFrame {
  HourStamp start{};
  std::vector<std::vector<double>> columns;

  std::size_t size() const { return columns.empty() ? 0 : columns.front().size(); }
  std::ptrdiff_t index_of(HourStamp t) const { return (t - start).count(); }
};

struct MarketData {
  HourlySeries prices;
  ExogenousFrame exogenous;
};

struct CsvSchema {
  /// When false the price column may be omitted (exogenous forecasts for the
  /// day being predicted); if present it is ignored.
  bool require_price = true;
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_field(std::string_view s, std::size_t line_no) {
  s = trim(s);
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

/// Parses the hourly CSV contract, sorts rows by time and enforces the
/// continuity, positivity and column rules.
inline MarketData parse_market_csv(std::istream& in, const CsvSchema& schema = {}) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse, "missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = detail::split_commas(line);

  std::ptrdiff_t ts_col = -1, price_col = -1;
  std::array<std::ptrdiff_t, table_exogenous_columns> exo_col;
  exo_col.fill(-1);
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = detail::trim(header[i]);
    bool known = false;
    if (name == timestamp_column) {
      ts_col = static_cast<std::ptrdiff_t>(i);
      known = true;
    } else if (name == price_column) {
      price_col = static_cast<std::ptrdiff_t>(i);
      known = true;
    } else {
      for (std::size_t c = 0; c < exogenous_columns.size(); ++c) {
        if (name == exogenous_columns[c]) {
          exo_col[c] = static_cast<std::ptrdiff_t>(i);
          known = true;
        }
      }
    }
    if (!known) throw Error(ErrorCode::unknown_column, "unexpected column '" + std::string(name) + "'");
  }
  if (ts_col < 0) throw Error(ErrorCode::missing_column, "timestamp");
  if (schema.require_price && price_col < 0) throw Error(ErrorCode::missing_column, std::string(price_column));
  for (std::size_t c = 0; c < exogenous_columns.size(); ++c) {
    if (exo_col[c] < 0) throw Error(ErrorCode::missing_column, std::string(exogenous_columns[c]));
  }

  struct Row {
    HourStamp t;
    double price;
    std::array<double, table_exogenous_columns> exo;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " +
                                        std::to_string(fields.size()));
    }
    Row r{};
    r.t = parse_timestamp(detail::trim(fields[static_cast<std::size_t>(ts_col)]));
    r.price = 1.0;
    if (schema.require_price) {
      r.price = detail::parse_field(fields[static_cast<std::size_t>(price_col)], line_no);
      if (!(r.price > 0.0)) {
        throw Error(ErrorCode::non_positive_price,
                    "price " + std::string(detail::trim(fields[static_cast<std::size_t>(price_col)])) + " at " +
                        format_timestamp(r.t));
      }
    }
    for (std::size_t c = 0; c < exogenous_columns.size(); ++c) {
      r.exo[c] = detail::parse_field(fields[static_cast<std::size_t>(exo_col[c])], line_no);
      if (c < demand_column_count && r.exo[c] < 0.0) {
        throw Error(ErrorCode::negative_demand,
                    std::string(exogenous_columns[c]) + " is negative at " + format_timestamp(r.t));
      }
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw Error(ErrorCode::empty_input, "no data rows");

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  std::vector<std::string> missing;
  std::size_t missing_count = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].t == rows[i - 1].t) {
      throw Error(ErrorCode::duplicate_timestamp, format_timestamp(rows[i].t));
    }
    for (auto t = rows[i - 1].t + std::chrono::hours{1}; t < rows[i].t; t += std::chrono::hours{1}) {
      if (missing.size() < 20) missing.push_back(format_timestamp(t));
      ++missing_count;
    }
  }
  if (missing_count > 0) {
    std::string msg = std::to_string(missing_count) + " missing hour(s):";
    for (const auto& m : missing) msg += " " + m;
    if (missing_count > missing.size()) msg += " ...";
    throw Error(ErrorCode::gap, msg);
  }

  MarketData data;
  data.prices.start = rows.front().t;
  data.exogenous.start = rows.front().t;
  data.prices.values.reserve(rows.size());
  data.exogenous.columns.assign(table_exogenous_columns, std::vector<double>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.prices.values.push_back(rows[i].price);
    for (std::size_t c = 0; c < table_exogenous_columns; ++c) data.exogenous.columns[c][i] = rows[i].exo[c];
  }
  return data;
}

inline MarketData ingest_csv(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return parse_market_csv(in, schema);
}

inline void write_market_csv(std::ostream& out, const MarketData& data) {
  out << timestamp_column << ',' << price_column;
  for (auto name : exogenous_columns) out << ',' << name;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < data.prices.size(); ++i) {
    out << format_timestamp(data.prices.time_at(i));
    auto put = [&](double v) {
      auto r = std::to_chars(buf, buf + sizeof(buf), v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
    };
    put(data.prices.values[i]);
    for (const auto& col : data.exogenous.columns) put(col[i]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Transforms.

inline HourlySeries log_transform(const HourlySeries& s) {
  HourlySeries out{s.start, {}};
  out.values.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = s.values[i];
    if (!(v > 0.0)) {
      throw Error(ErrorCode::domain, "log of non-positive value " + std::to_string(v) + " at " +
                                         format_timestamp(s.time_at(i)));
    }
    out.values.push_back(std::log(v));
  }
  return out;
}

inline HourlySeries inverse_log(const HourlySeries& s) {
  HourlySeries out{s.start, {}};
  out.values.reserve(s.size());
  for (double v : s.values) out.values.push_back(std::exp(v));
  return out;
}

/// 24 hour-of-day one-hots followed by 7 day-of-week one-hots (Monday = 0).
inline std::array<double, calendar_feature_count> calendar_features(HourStamp t) {
  std::array<double, calendar_feature_count> f{};
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const auto hour = static_cast<std::size_t>((t - day).count());
  const auto dow = std::chrono::weekday{day}.iso_encoding() - 1;
  f[hour] = 1.0;
  f[24 + dow] = 1.0;
  return f;
}

/// Per-column z-scores of the exogenous table columns. Zero-variance columns
/// map to 0.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 0 marks a zero-variance column

  static Standardizer identity(std::size_t columns) {
    return {std::vector<double>(columns, 0.0), std::vector<double>(columns, 1.0)};
  }

  static Standardizer fit(const ExogenousFrame& exo, std::span<const std::pair<std::ptrdiff_t, std::ptrdiff_t>> rows) {
    Standardizer s;
    for (const auto& col : exo.columns) {
      double sum = 0.0;
      std::size_t n = 0;
      for (auto [a, b] : rows) {
        for (auto i = a; i < b; ++i) sum += col[static_cast<std::size_t>(i)], ++n;
      }
      const double mean = n ? sum / static_cast<double>(n) : 0.0;
      double ss = 0.0;
      for (auto [a, b] : rows) {
        for (auto i = a; i < b; ++i) {
          const double d = col[static_cast<std::size_t>(i)] - mean;
          ss += d * d;
        }
      }
      const double sd = n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
      s.mean.push_back(mean);
      s.scale.push_back(sd > 1e-12 * std::max(1.0, std::fabs(mean)) ? sd : 0.0);
    }
    return s;
  }

  double apply(std::size_t column, double v) const {
    return scale[column] == 0.0 ? 0.0 : (v - mean[column]) / scale[column];
  }
};

// ---------------------------------------------------------------------------
// Windowing.

/// Z: log-prices of the history_hours before `origin`; X: exogenous block of
/// the horizon starting at `origin`; y: log-prices of that horizon.
struct TrainingExample {
  std::vector<double> history;
  Tensor exogenous;  // [horizon_hours, exogenous_features]
  std::vector<double> target;
  HourStamp origin{};
};

struct ExampleSet {
  std::vector<TrainingExample> examples;
  Standardizer scaling;
  std::size_t training_count = 0;
};

inline void check_feature_count(const NetworkConfig& config) {
  if (config.exogenous_features != table_exogenous_columns + calendar_feature_count) {
    throw Error(ErrorCode::invalid_config, "exogenous_features must be " +
                                              std::to_string(table_exogenous_columns + calendar_feature_count) +
                                              " for the CSV contract");
  }
}

/// Standardized exogenous columns plus calendar one-hots for `hours` hours from `from`.
inline Tensor exogenous_block(const ExogenousFrame& exo, HourStamp from, std::size_t hours,
                              const Standardizer& scaling) {
  const auto first = exo.index_of(from);
  if (first < 0 || static_cast<std::size_t>(first) + hours > exo.size()) {
    throw Error(ErrorCode::insufficient_history, "exogenous data does not cover " + format_timestamp(from) + " + " +
                                                     std::to_string(hours) + "h");
  }
  Tensor x(Shape{hours, table_exogenous_columns + calendar_feature_count});
  for (std::size_t h = 0; h < hours; ++h) {
    const auto row = static_cast<std::size_t>(first) + h;
    for (std::size_t c = 0; c < table_exogenous_columns; ++c) x.at(h, c) = scaling.apply(c, exo.columns[c][row]);
    const auto cal = calendar_features(from + std::chrono::hours{static_cast<long long>(h)});
    for (std::size_t k = 0; k < cal.size(); ++k) x.at(h, table_exogenous_columns + k) = cal[k];
  }
  return x;
}

/// Log-price history of `hours` hours ending just before `origin`.
inline std::vector<double> history_window(const HourlySeries& log_prices, HourStamp origin, std::size_t hours) {
  const auto end = log_prices.index_of(origin);
  if (end < static_cast<std::ptrdiff_t>(hours) || end > static_cast<std::ptrdiff_t>(log_prices.size())) {
    throw Error(ErrorCode::insufficient_history, "need " + std::to_string(hours) + "h of prices before " +
                                                     format_timestamp(origin));
  }
  return {log_prices.values.begin() + (end - static_cast<std::ptrdiff_t>(hours)),
          log_prices.values.begin() + end};
}

/// Forecast origins: every UTC midnight with history_hours of prices before
/// it and a full horizon of prices and exogenous data after it.
inline std::vector<HourStamp> example_origins(const MarketData& data, const NetworkConfig& config) {
  std::vector<HourStamp> origins;
  const auto lo = data.prices.start + std::chrono::hours{static_cast<long long>(config.history_hours)};
  auto t = std::chrono::ceil<std::chrono::days>(lo);
  const auto horizon = std::chrono::hours{static_cast<long long>(config.horizon_hours)};
  for (; t + horizon <= data.prices.end(); t += std::chrono::days{1}) {
    const auto xi = data.exogenous.index_of(t);
    if (xi < 0 || static_cast<std::size_t>(xi) + config.horizon_hours > data.exogenous.size()) continue;
    origins.emplace_back(t);
  }
  return origins;
}

/// Builds the examples with the given exogenous scaling.
inline std::vector<TrainingExample> build_examples(const MarketData& data, const NetworkConfig& config,
                                                   const Standardizer& scaling) {
  config.validate();
  check_feature_count(config);
  const HourlySeries logp = log_transform(data.prices);
  std::vector<TrainingExample> out;
  for (HourStamp origin : example_origins(data, config)) {
    TrainingExample ex;
    ex.origin = origin;
    ex.history = history_window(logp, origin, config.history_hours);
    ex.exogenous = exogenous_block(data.exogenous, origin, config.horizon_hours, scaling);
    const auto yi = static_cast<std::size_t>(logp.index_of(origin));
    ex.target.assign(logp.values.begin() + static_cast<std::ptrdiff_t>(yi),
                     logp.values.begin() + static_cast<std::ptrdiff_t>(yi + config.horizon_hours));
    out.push_back(std::move(ex));
  }
  if (out.empty()) {
    throw Error(ErrorCode::insufficient_history,
                "series of " + std::to_string(data.prices.size()) + "h has no full window of " +
                    std::to_string(config.history_hours) + "h history + " + std::to_string(config.horizon_hours) +
                    "h horizon");
  }
  return out;
}

/// Builds the examples and fits the exogenous scaling on the hours covered by
/// the training portion (everything but the chronological validation tail).
inline ExampleSet build_examples(const MarketData& data, const NetworkConfig& config,
                                 double validation_fraction = 0.07) {
  config.validate();
  check_feature_count(config);
  const auto origins = example_origins(data, config);
  if (origins.empty()) {
    throw Error(ErrorCode::insufficient_history,
                "series of " + std::to_string(data.prices.size()) + "h has no full window of " +
                    std::to_string(config.history_hours) + "h history + " + std::to_string(config.horizon_hours) +
                    "h horizon");
  }
  ExampleSet set;
  set.training_count = origins.size() < 2 ? origins.size()
                                          : split_chronologically(origins.size(), validation_fraction).train;
  std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> rows;
  for (std::size_t i = 0; i < set.training_count; ++i) {
    const auto a = data.exogenous.index_of(origins[i]);
    rows.emplace_back(a, a + static_cast<std::ptrdiff_t>(config.horizon_hours));
  }
  set.scaling = Standardizer::fit(data.exogenous, rows);
  set.examples = build_examples(data, config, set.scaling);
  return set;
}

}  // namespace dalmp
