#pragma once

// dalmp command line: synth | train | forecast | evaluate | risk.
//
// Settings come from defaults, then an INI file (--config), then
// --set section.key=value overrides, then the dedicated flags. The resolved
// settings and input checksums are written to <out>/manifest.txt before any
// computation. Exit codes: 0 success, 1 runtime/data error, 2 config error.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dalmp/baselines.hpp"
#include "dalmp/data.hpp"
#include "dalmp/error.hpp"
#include "dalmp/evaluate.hpp"
#include "dalmp/forecaster.hpp"
#include "dalmp/metrics.hpp"
#include "dalmp/param_io.hpp"
#include "dalmp/risk.hpp"
#include "dalmp/synthetic.hpp"

namespace dalmp {

inline constexpr int exit_ok = 0;
inline constexpr int exit_runtime = 1;
inline constexpr int exit_config = 2;

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string data_path;
  std::string weights_path;
  std::string exogenous_path;
  std::string forecast_path;
  std::string residuals_path;

  NetworkConfig network{};
  TrainConfig training{};

  TrainConfig stateless_training{};
  StatelessOptions stateless{};
  SeasonalMode seasonal_mode = SeasonalMode::multiplicative;
  std::size_t test_days = 7;

  MarketParams market{};
  std::size_t synth_days = 372;

  RiskSpec risk{};
  bool risk_sigma_given = false;  // otherwise estimated from the residuals file
  std::vector<std::size_t> block_hours = [] {
    std::vector<std::size_t> h(24);
    for (std::size_t i = 0; i < 24; ++i) h[i] = i + 1;
    return h;
  }();
  std::size_t risk_samples = 100000;
  std::size_t risk_shards = 1;
};

namespace detail {

inline Error config_error(const std::string& what) { return Error(ErrorCode::invalid_config, what); }

template <typename T>
T parse_value(std::string_view key, std::string_view s) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw config_error("bad value '" + std::string(s) + "' for " + std::string(key));
  }
  return v;
}

inline bool parse_bool(std::string_view key, std::string_view s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw config_error("bad boolean '" + std::string(s) + "' for " + std::string(key));
}

/// "8-20" or "1,2,5" or a mix ("1-3,7").
inline std::vector<std::size_t> parse_hours(std::string_view key, std::string_view s) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto comma = s.find(',', pos);
    if (comma == std::string_view::npos) comma = s.size();
    std::string_view part = trim(s.substr(pos, comma - pos));
    const auto dash = part.find('-');
    if (dash == std::string_view::npos) {
      out.push_back(parse_value<std::size_t>(key, part));
    } else {
      const auto a = parse_value<std::size_t>(key, trim(part.substr(0, dash)));
      const auto b = parse_value<std::size_t>(key, trim(part.substr(dash + 1)));
      if (b < a) throw config_error("empty hour range '" + std::string(part) + "' for " + std::string(key));
      for (std::size_t h = a; h <= b; ++h) out.push_back(h);
    }
    pos = comma + 1;
  }
  return out;
}

inline std::string join_hours(const std::vector<std::size_t>& hours) {
  std::string s;
  for (std::size_t i = 0; i < hours.size(); ++i) s += (i ? "," : "") + std::to_string(hours[i]);
  return s;
}

struct Field {
  std::function<void(std::string_view)> set;
  std::function<std::string()> get;
};

class Registry {
 public:
  template <typename T>
  void bind(const std::string& key, T& ref) {
    if constexpr (std::is_same_v<T, std::string>) {
      fields_[key] = {[&ref](std::string_view v) { ref = std::string(v); }, [&ref] { return ref; }};
    } else if constexpr (std::is_same_v<T, bool>) {
      fields_[key] = {[&ref, key](std::string_view v) { ref = parse_bool(key, v); },
                      [&ref] { return std::string(ref ? "true" : "false"); }};
    } else if constexpr (std::is_same_v<T, double>) {
      fields_[key] = {[&ref, key](std::string_view v) { ref = parse_value<double>(key, v); },
                      [&ref] { return format_double(ref); }};
    } else {
      fields_[key] = {[&ref, key](std::string_view v) { ref = parse_value<T>(key, v); },
                      [&ref] { return std::to_string(ref); }};
    }
  }
  void custom(const std::string& key, Field f) { fields_[key] = std::move(f); }

  void set(const std::string& key, std::string_view value) {
    const auto it = fields_.find(key);
    if (it == fields_.end()) throw config_error("unknown configuration key '" + key + "'");
    it->second.set(trim(value));
  }
  const std::map<std::string, Field>& fields() const { return fields_; }

 private:
  std::map<std::string, Field> fields_;
};

inline Registry make_registry(RunConfig& c) {
  Registry r;
  r.bind("seed", c.seed);
  r.bind("paths.out", c.out_dir);
  r.bind("paths.data", c.data_path);
  r.bind("paths.weights", c.weights_path);
  r.bind("paths.exogenous", c.exogenous_path);
  r.bind("paths.forecast", c.forecast_path);
  r.bind("paths.residuals", c.residuals_path);

  r.bind("network.history_hours", c.network.history_hours);
  r.bind("network.horizon_hours", c.network.horizon_hours);
  r.bind("network.exogenous_features", c.network.exogenous_features);
  r.bind("network.cnn_filters", c.network.cnn_filters);
  r.bind("network.cnn_kernel_width", c.network.cnn_kernel_width);
  r.bind("network.lstm_units", c.network.lstm_units);
  r.bind("network.dense1_units", c.network.dense1_units);
  r.bind("network.dense2_units", c.network.dense2_units);
  r.bind("network.batch_size", c.network.batch_size);

  auto train_fields = [&r](const std::string& s, TrainConfig& t) {
    r.bind(s + ".max_epochs", t.max_epochs);
    r.bind(s + ".min_delta", t.min_delta);
    r.bind(s + ".patience", t.patience);
    r.bind(s + ".validation_fraction", t.validation_fraction);
    r.bind(s + ".early_stopping", t.early_stopping);
    r.bind(s + ".learning_rate", t.adam.learning_rate);
    r.bind(s + ".beta1", t.adam.beta1);
    r.bind(s + ".beta2", t.adam.beta2);
    r.bind(s + ".epsilon", t.adam.epsilon);
  };
  train_fields("training", c.training);
  train_fields("stateless", c.stateless_training);
  r.bind("stateless.hidden1", c.stateless.hidden1);
  r.bind("stateless.hidden2", c.stateless.hidden2);
  r.bind("stateless.batch_size", c.stateless.batch_size);

  r.bind("evaluate.test_days", c.test_days);
  r.custom("evaluate.seasonal_mode", {[&c](std::string_view v) { c.seasonal_mode = parse_seasonal_mode(v); },
                                      [&c] { return std::string(to_string(c.seasonal_mode)); }});

  auto& m = c.market;
  r.bind("synth.days", c.synth_days);
  r.custom("synth.start", {[&m](std::string_view v) { m.start = parse_timestamp(v); },
                           [&m] { return format_timestamp(m.start); }});
  r.bind("synth.base_log_price", m.base_log_price);
  r.bind("synth.daily_price_amplitude", m.daily_price_amplitude);
  r.bind("synth.weekend_price_drop", m.weekend_price_drop);
  r.bind("synth.daily_temperature_amplitude_f", m.daily_temperature_amplitude_f);
  r.bind("synth.weather_anomaly_sd_f", m.weather_anomaly_sd_f);
  r.bind("synth.weather_anomaly_persistence", m.weather_anomaly_persistence);
  r.bind("synth.hourly_temperature_noise_f", m.hourly_temperature_noise_f);
  r.bind("synth.comfort_temperature_f", m.comfort_temperature_f);
  r.bind("synth.load_linear", m.load_linear);
  r.bind("synth.load_quadratic", m.load_quadratic);
  r.bind("synth.daily_load_amplitude", m.daily_load_amplitude);
  r.bind("synth.weekend_load_drop", m.weekend_load_drop);
  r.bind("synth.reference_load_mw", m.reference_load_mw);
  r.bind("synth.reference_load_scale_mw", m.reference_load_scale_mw);
  r.bind("synth.stack_slope", m.stack_slope);
  r.bind("synth.stack_convexity", m.stack_convexity);
  r.bind("synth.noise_sigma", m.noise_sigma);
  r.bind("synth.noise_persistence", m.noise_persistence);
  r.bind("synth.level_share", m.level_share);
  r.bind("synth.level_persistence", m.level_persistence);
  r.bind("synth.spike_probability", m.spike_probability);
  r.bind("synth.spike_min", m.spike_min);
  r.bind("synth.spike_max", m.spike_max);

  r.bind("risk.capacity_mw", c.risk.capacity_mw);
  r.bind("risk.heat_rate", c.risk.heat_rate);
  r.bind("risk.gas_price", c.risk.gas_price);
  r.bind("risk.startup_cost", c.risk.startup_cost);
  r.custom("risk.sigma", {[&c](std::string_view v) {
                            c.risk.sigma = parse_value<double>("risk.sigma", v);
                            c.risk_sigma_given = true;
                          },
                          [&c] { return c.risk_sigma_given ? format_double(c.risk.sigma) : std::string("estimate"); }});
  r.bind("risk.confidence_threshold", c.risk.confidence_threshold);
  r.custom("risk.block_hours", {[&c](std::string_view v) { c.block_hours = parse_hours("risk.block_hours", v); },
                                [&c] { return join_hours(c.block_hours); }});
  r.bind("risk.samples", c.risk_samples);
  r.bind("risk.shards", c.risk_shards);
  return r;
}

inline void load_ini(Registry& reg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw config_error(path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section open/close markers
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    reg.set(item.fullname(), value);
  }
}

inline std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

inline std::string require_path(const std::string& value, const std::string& key) {
  if (value.empty()) throw config_error(key + " is required for this command");
  return value;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + p.string());
  return out;
}

struct NamedColumn {
  std::vector<std::string> timestamps;
  std::vector<double> values;
};

/// Reads one numeric column (and the timestamp column when present) of a CSV.
inline NamedColumn read_column(const std::string& path, std::string_view column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse, path + ": missing header row");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_commas(line);
  std::ptrdiff_t col = -1, ts = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == column) col = static_cast<std::ptrdiff_t>(i);
    if (trim(header[i]) == timestamp_column) ts = static_cast<std::ptrdiff_t>(i);
  }
  if (col < 0) throw Error(ErrorCode::missing_column, path + ": " + std::string(column));
  NamedColumn out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::parse, path + " line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " fields");
    }
    out.values.push_back(parse_field(cells[static_cast<std::size_t>(col)], line_no));
    if (ts >= 0) out.timestamps.emplace_back(trim(cells[static_cast<std::size_t>(ts)]));
  }
  if (out.values.empty()) throw Error(ErrorCode::empty_input, path + ": no data rows");
  return out;
}

}  // namespace detail

class Command {
 public:
  Command(std::string name, RunConfig config, std::ostream& log) : name_(std::move(name)), c_(std::move(config)), log_(log) {
    dir_ = c_.out_dir;
    std::filesystem::create_directories(dir_);
  }

  /// Writes the manifest: command, every resolved setting, input checksums.
  void manifest(const std::vector<std::pair<std::string, std::string>>& inputs) {
    auto out = detail::open_output(dir_ / "manifest.txt");
    out << "command " << name_ << '\n';
    RunConfig copy = c_;
    const detail::Registry reg = detail::make_registry(copy);
    for (const auto& [key, field] : reg.fields()) out << "config " << key << " = " << field.get() << '\n';
    for (const auto& [role, path] : inputs) out << "input " << role << ' ' << path << " fnv1a64=" << detail::file_checksum(path) << '\n';
  }

  int synth() {
    c_.market.seed = c_.seed;
    c_.market.validate();
    if (c_.synth_days < 30) throw detail::config_error("synth.days must be >= 30");
    manifest({});
    const SyntheticMarket m = generate_market(c_.market, c_.synth_days);
    auto data = detail::open_output(dir_ / "market.csv");
    write_market_csv(data, m.data);
    auto truth = detail::open_output(dir_ / "ground_truth.csv");
    write_ground_truth_csv(truth, m);
    log_ << "wrote " << m.data.prices.size() << " hours to " << (dir_ / "market.csv").string() << '\n';
    return exit_ok;
  }

  int train() {
    c_.network.validate();
    c_.training.validate();
    const std::string data_path = detail::require_path(c_.data_path, "paths.data");
    manifest({{"data", data_path}});
    const MarketData data = ingest_csv(data_path);
    const ForecasterTraining t = train_forecaster(data, c_.network, c_.training, c_.seed);
    save_model(t.weights, (dir_ / "weights.txt").string());
    auto hist = detail::open_output(dir_ / "history.csv");
    write_history_csv(hist, t.history);
    log_ << "trained " << t.history.size() << " epochs, best epoch " << t.best_epoch << " (validation MAE "
         << format_double(t.best_validation_mae) << ")\n";
    return exit_ok;
  }

  int forecast() {
    const std::string weights_path = detail::require_path(c_.weights_path, "paths.weights");
    const std::string data_path = detail::require_path(c_.data_path, "paths.data");
    const std::string exo_path = detail::require_path(c_.exogenous_path, "paths.exogenous");
    manifest({{"weights", weights_path}, {"data", data_path}, {"exogenous", exo_path}});
    const ForecasterWeights w = load_model(weights_path);
    const MarketData history = ingest_csv(data_path);
    const MarketData exo = ingest_csv(exo_path, CsvSchema{.require_price = false});
    const HourStamp origin = exo.exogenous.start;
    if (!is_midnight(origin)) throw Error(ErrorCode::invalid_spec, "exogenous forecast must start at a UTC midnight");
    const auto logp = log_transform(history.prices);
    const auto z = history_window(logp, origin, w.config.history_hours);
    const auto prices = predict(w, z, exogenous_block(exo.exogenous, origin, w.config.horizon_hours, w.scaling));
    auto out = detail::open_output(dir_ / "forecast.csv");
    out << "timestamp,price\n";
    for (std::size_t h = 0; h < prices.size(); ++h) {
      out << format_timestamp(origin + std::chrono::hours{static_cast<long long>(h)}) << ','
          << format_double(prices[h]) << '\n';
    }
    log_ << "wrote " << prices.size() << " hourly prices from " << format_timestamp(origin) << '\n';
    return exit_ok;
  }

  int evaluate() {
    c_.network.validate();
    c_.training.validate();
    c_.stateless_training.validate();
    const std::string data_path = detail::require_path(c_.data_path, "paths.data");
    manifest({{"data", data_path}});
    const MarketData data = ingest_csv(data_path);
    BenchmarkConfig b;
    b.network = c_.network;
    b.dl_train = c_.training;
    b.stateless_train = c_.stateless_training;
    b.stateless = c_.stateless;
    b.seasonal_mode = c_.seasonal_mode;
    b.test_days = c_.test_days;
    b.seed = c_.seed;
    const BenchmarkResult r = run_benchmark(data, b);
    auto report = detail::open_output(dir_ / "report.csv");
    write_reports_csv(report, r.reports);
    auto fc = detail::open_output(dir_ / "forecasts.csv");
    write_forecasts_csv(fc, r);
    auto hist = detail::open_output(dir_ / "history.csv");
    write_history_csv(hist, r.dl.history);
    auto res = detail::open_output(dir_ / "residuals.csv");
    res << "timestamp,residual\n";
    for (std::size_t i = 0; i < r.actual.size(); ++i) {
      res << format_timestamp(r.hours[i]) << ',' << format_double(std::log(r.actual[i]) - std::log(r.forecasts[3][i]))
          << '\n';
    }
    for (const auto& e : r.reports) {
      log_ << e.model << ": MSE " << format_double(e.mse) << ", MAPE " << format_double(e.mape) << "% (n=" << e.n
           << ")\n";
    }
    return exit_ok;
  }

  int risk() {
    const std::string fc_path = detail::require_path(c_.forecast_path, "paths.forecast");
    std::vector<std::pair<std::string, std::string>> inputs{{"forecast", fc_path}};
    if (!c_.risk_sigma_given) inputs.emplace_back("residuals", detail::require_path(c_.residuals_path, "paths.residuals"));
    RiskSpec spec = c_.risk;
    if (!c_.risk_sigma_given) spec.sigma = 0.0;
    spec.validate();
    manifest(inputs);
    const auto fc = detail::read_column(fc_path, "price");
    if (!c_.risk_sigma_given) spec.sigma = estimate_sigma(detail::read_column(c_.residuals_path, "residual").values);
    const RiskReport r = assess_risk(fc.values, c_.block_hours, spec, c_.risk_samples, c_.seed, c_.risk_shards);
    auto hourly = detail::open_output(dir_ / "risk_hourly.csv");
    write_risk_csv(hourly, r);
    auto summary = detail::open_output(dir_ / "risk_summary.txt");
    summary << "sigma " << format_double(spec.sigma) << '\n';
    write_risk_summary(summary, r, spec);
    log_ << to_string(r.recommendation.action) << " (P(block loss) = " << format_double(r.block_loss_probability)
         << ", threshold " << format_double(spec.confidence_threshold) << ")\n";
    return exit_ok;
  }

 private:
  std::string name_;
  RunConfig c_;
  std::ostream& log_;
  std::filesystem::path dir_;
};

inline bool is_config_error(ErrorCode code) {
  return code == ErrorCode::invalid_config || code == ErrorCode::invalid_spec || code == ErrorCode::invalid_hours;
}

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Day-ahead LMP forecasting, benchmarking and shutdown risk", "dalmp"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::string> sets;
  std::string data, weights, exogenous, forecast, residuals;
  app.add_option("--config", config_path, "INI configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--set", sets, "Override a setting: section.key=value")->take_all();
  app.add_option("--data", data, "Market CSV (paths.data)");
  app.add_option("--weights", weights, "Weight file (paths.weights)");
  app.add_option("--exogenous", exogenous, "Exogenous forecast CSV (paths.exogenous)");
  app.add_option("--forecast", forecast, "Price forecast CSV (paths.forecast)");
  app.add_option("--residuals", residuals, "Log-price residuals CSV (paths.residuals)");
  app.fallthrough();
  app.add_subcommand("synth", "Generate a synthetic market and its noiseless price path");
  app.add_subcommand("train", "Train the forecaster");
  app.add_subcommand("forecast", "Forecast the 24 hours of an exogenous forecast file");
  app.add_subcommand("evaluate", "Benchmark the forecaster against Models 1-3 over the final test days");
  app.add_subcommand("risk", "Hourly loss probabilities and a run/shut-down recommendation");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      out << app.help();
      return exit_ok;
    }
    err << "error: " << e.what() << '\n';
    return exit_config;
  }

  try {
    RunConfig c;
    detail::Registry reg = detail::make_registry(c);
    if (!config_path.empty()) detail::load_ini(reg, config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw detail::config_error("--set expects section.key=value, got '" + s + "'");
      reg.set(std::string(detail::trim(std::string_view(s).substr(0, eq))), std::string_view(s).substr(eq + 1));
    }
    if (*seed_opt) c.seed = seed;
    if (!out_dir.empty()) c.out_dir = out_dir;
    if (!data.empty()) c.data_path = data;
    if (!weights.empty()) c.weights_path = weights;
    if (!exogenous.empty()) c.exogenous_path = exogenous;
    if (!forecast.empty()) c.forecast_path = forecast;
    if (!residuals.empty()) c.residuals_path = residuals;

    const std::string name = app.get_subcommands().front()->get_name();
    Command cmd(name, std::move(c), out);
    if (name == "synth") return cmd.synth();
    if (name == "train") return cmd.train();
    if (name == "forecast") return cmd.forecast();
    if (name == "evaluate") return cmd.evaluate();
    return cmd.risk();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_config_error(e.code()) ? exit_config : exit_runtime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

}  // namespace dalmp
