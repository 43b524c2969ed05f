#pragma once

// Two-branch day-ahead forecaster.
//
//   history Z [B, n_z, 1] -> LSTM -> dense(ReLU) -> dense(ReLU) -> [B, n_x, 1]
//   exogenous X [B, n_x, x_F] -> conv1d(width k, c_F filters, ReLU) -> [B, n_x, c_F]
//   concat -> [B, n_x, 1 + c_F] -> conv1d(width 1, 1 filter, ReLU) -> [B, n_x, 1]
//
// The width-1 output convolution mixes the recurrent estimate for hour h
// only with the exogenous features extracted around hour h.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dalmp/autodiff.hpp"
#include "dalmp/data.hpp"
#include "dalmp/error.hpp"
#include "dalmp/grad_check.hpp"
#include "dalmp/network_config.hpp"
#include "dalmp/param_io.hpp"
#include "dalmp/training.hpp"

namespace dalmp {

/// Parameter order is fixed; see forecaster_parameter_shapes().
///
/// lstm.kernel has 1 + lstm_units rows (input weight row, then recurrent
/// rows) and 4 * lstm_units columns grouped as input, forget, cell and
/// output gates.
struct ForecasterWeights {
  NetworkConfig config;
  std::uint64_t seed = 0;
  std::vector<NamedTensor> parameters;
  Standardizer scaling = Standardizer::identity(table_exogenous_columns);
  // Z enters the LSTM as (Z - history_mean) / history_scale.
  double history_mean = 0.0;
  double history_scale = 1.0;

  const Tensor& parameter(const std::string& name) const {
    for (const auto& p : parameters) {
      if (p.name == name) return p.value;
    }
    throw Error(ErrorCode::shape_audit, "no parameter " + name);
  }
  Tensor& parameter(const std::string& name) {
    return const_cast<Tensor&>(static_cast<const ForecasterWeights&>(*this).parameter(name));
  }
  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    for (const auto& p : parameters) out.push_back(p.value);
    return out;
  }
};

inline std::vector<std::pair<std::string, Shape>> forecaster_parameter_shapes(const NetworkConfig& c) {
  const std::size_t h = c.lstm_units;
  return {
      {"lstm.kernel", Shape{1 + h, 4 * h}},
      {"lstm.bias", Shape{4 * h}},
      {"dense1.kernel", Shape{h, c.dense1_units}},
      {"dense1.bias", Shape{c.dense1_units}},
      {"dense2.kernel", Shape{c.dense1_units, c.dense2_units}},
      {"dense2.bias", Shape{c.dense2_units}},
      {"exo_conv.kernel", Shape{c.cnn_kernel_width, c.exogenous_features, c.cnn_filters}},
      {"exo_conv.bias", Shape{c.cnn_filters}},
      {"out_conv.kernel", Shape{1, 1 + c.cnn_filters, 1}},
      {"out_conv.bias", Shape{1}},
  };
}

inline std::size_t parameter_count(const ForecasterWeights& w) {
  std::size_t n = 0;
  for (const auto& p : w.parameters) n += p.value.size();
  return n;
}

/// Throws shape_audit unless every tensor matches the configuration.
inline void audit_shapes(const ForecasterWeights& w) {
  const auto expected = forecaster_parameter_shapes(w.config);
  if (w.parameters.size() != expected.size()) {
    throw Error(ErrorCode::shape_audit, "expected " + std::to_string(expected.size()) + " tensors, found " +
                                            std::to_string(w.parameters.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& [name, shape] = expected[i];
    if (w.parameters[i].name != name || !(w.parameters[i].value.shape() == shape)) {
      throw Error(ErrorCode::shape_audit, w.parameters[i].name + " " + w.parameters[i].value.shape().str() +
                                              ", expected " + name + " " + shape.str());
    }
  }
  if (w.scaling.mean.size() != table_exogenous_columns || w.scaling.scale.size() != table_exogenous_columns) {
    throw Error(ErrorCode::shape_audit, "exogenous scaling must cover " + std::to_string(table_exogenous_columns) +
                                            " columns");
  }
}

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases zero except
/// the LSTM forget gate (1). The output kernel draws |U(-a, a)|.
inline ForecasterWeights build_forecaster(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  ForecasterWeights w;
  w.config = config;
  w.seed = seed;
  std::mt19937_64 rng(seed);
  auto glorot = [&](Tensor& t, double fan_in, double fan_out, bool positive = false) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    for (double& v : t.data()) v = positive ? std::fabs(u(rng)) : u(rng);
  };
  const std::size_t h = config.lstm_units;
  for (const auto& [name, shape] : forecaster_parameter_shapes(config)) {
    Tensor t(shape);
    if (name == "lstm.kernel") {
      glorot(t, static_cast<double>(1 + h), static_cast<double>(4 * h));
    } else if (name == "lstm.bias") {
      for (std::size_t i = h; i < 2 * h; ++i) t[i] = 1.0;
    } else if (name == "dense1.kernel" || name == "dense2.kernel") {
      glorot(t, static_cast<double>(shape[0]), static_cast<double>(shape[1]));
    } else if (name == "exo_conv.kernel") {
      glorot(t, static_cast<double>(shape[0] * shape[1]), static_cast<double>(shape[0] * shape[2]));
    } else if (name == "out_conv.kernel") {
      glorot(t, static_cast<double>(shape[1]), 1.0, true);
    }
    w.parameters.push_back({name, std::move(t)});
  }
  audit_shapes(w);
  return w;
}

/// Fits the history standardization to the target log-prices of the first
/// `training_count` examples and starts the output bias at their mean.
inline void fit_price_level(ForecasterWeights& w, std::span<const TrainingExample> examples,
                            std::size_t training_count) {
  double sum = 0.0, ss = 0.0;
  std::size_t n = 0;
  const std::size_t end = std::min(training_count, examples.size());
  for (std::size_t i = 0; i < end; ++i) {
    for (double v : examples[i].target) sum += v, ++n;
  }
  if (n == 0) return;
  const double mean = sum / static_cast<double>(n);
  for (std::size_t i = 0; i < end; ++i) {
    for (double v : examples[i].target) ss += (v - mean) * (v - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  w.history_mean = mean;
  w.history_scale = sd > 1e-12 ? sd : 1.0;
  w.parameter("out_conv.bias")[0] = mean;
}

struct Batch {
  Tensor history;    // [B, n_z, 1]
  Tensor exogenous;  // [B, n_x, x_F]
  Tensor target;     // [B, n_x, 1]
};

inline Batch assemble_batch(std::span<const TrainingExample> examples, std::span<const std::size_t> indices,
                            const NetworkConfig& c, double history_mean = 0.0, double history_scale = 1.0) {
  const std::size_t b = indices.size();
  Batch out{Tensor(Shape{b, c.history_hours, 1}), Tensor(Shape{b, c.horizon_hours, c.exogenous_features}),
            Tensor(Shape{b, c.horizon_hours, 1})};
  for (std::size_t i = 0; i < b; ++i) {
    const auto& ex = examples[indices[i]];
    if (ex.history.size() != c.history_hours || ex.target.size() != c.horizon_hours ||
        !(ex.exogenous.shape() == Shape{c.horizon_hours, c.exogenous_features})) {
      throw Error(ErrorCode::shape_mismatch, "example does not match network configuration");
    }
    std::transform(ex.history.begin(), ex.history.end(), &out.history.data()[i * c.history_hours],
                   [&](double v) { return (v - history_mean) / history_scale; });
    std::copy(ex.target.begin(), ex.target.end(), &out.target.data()[i * c.horizon_hours]);
    const auto xs = ex.exogenous.data();
    std::copy(xs.begin(), xs.end(), &out.exogenous.data()[i * xs.size()]);
  }
  return out;
}

/// Records the forward pass on `g`; `params` are leaves in
/// forecaster_parameter_shapes() order. Returns [B, n_x, 1] log-prices.
inline Var forecaster_graph(Graph& g, const NetworkConfig& c, std::span<const Var> params, const Tensor& history,
                            const Tensor& exogenous) {
  const Shape& zs = history.shape();
  const Shape& xs = exogenous.shape();
  if (zs.rank() != 3 || zs[1] != c.history_hours || zs[2] != 1) {
    throw Error(ErrorCode::shape_mismatch, "history " + zs.str() + ", expected [B x " +
                                               std::to_string(c.history_hours) + " x 1]");
  }
  if (xs.rank() != 3 || xs[0] != zs[0] || xs[1] != c.horizon_hours || xs[2] != c.exogenous_features) {
    throw Error(ErrorCode::shape_mismatch, "exogenous " + xs.str() + ", expected [" + std::to_string(zs[0]) + " x " +
                                               std::to_string(c.horizon_hours) + " x " +
                                               std::to_string(c.exogenous_features) + "]");
  }
  const std::size_t batch = zs[0];
  const std::size_t units = c.lstm_units;
  const Var kernel = params[0], bias = params[1];

  Var hidden = g.leaf(Tensor(Shape{batch, units}));
  Var cell = g.leaf(Tensor(Shape{batch, units}));
  for (std::size_t t = 0; t < c.history_hours; ++t) {
    Tensor step(Shape{batch, 1});
    for (std::size_t b = 0; b < batch; ++b) step[b] = history.at(b, t, 0);
    const Var joined = g.concat({g.leaf(std::move(step)), hidden});
    const Var gates = g.add(g.matmul(joined, kernel), bias);
    const Var input = g.sigmoid(g.slice(gates, 1, 0, units));
    const Var forget = g.sigmoid(g.slice(gates, 1, units, 2 * units));
    const Var candidate = g.tanh(g.slice(gates, 1, 2 * units, 3 * units));
    const Var output = g.sigmoid(g.slice(gates, 1, 3 * units, 4 * units));
    cell = g.add(g.mul(forget, cell), g.mul(input, candidate));
    hidden = g.mul(output, g.tanh(cell));
  }
  const Var d1 = g.relu(g.add(g.matmul(hidden, params[2]), params[3]));
  const Var d2 = g.relu(g.add(g.matmul(d1, params[4]), params[5]));
  const Var recurrent = g.reshape(d2, Shape{batch, c.horizon_hours, 1});

  const Var features = g.relu(g.conv1d(g.leaf(exogenous), params[6], params[7]));
  const Var stacked = g.concat({recurrent, features});
  return g.relu(g.conv1d(stacked, params[8], params[9]));
}

/// Network output (log-prices), [B, n_x, 1].
inline Tensor forward(const ForecasterWeights& w, const Tensor& history, const Tensor& exogenous) {
  Graph g;
  std::vector<Var> leaves;
  for (const auto& p : w.parameters) leaves.push_back(g.leaf(p.value));
  return g.value(forecaster_graph(g, w.config, leaves, history, exogenous));
}

struct ForecasterTraining {
  ForecasterWeights weights;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_validation_mae = 0.0;
  bool stopped_early = false;
};

/// Minimizes the batch-mean L1 error on log-prices with Adam. Examples must be
/// in chronological order; the validation tail is never trained on.
inline ForecasterTraining train(ForecasterWeights weights, std::span<const TrainingExample> examples,
                                const TrainConfig& tc) {
  audit_shapes(weights);
  if (examples.empty()) throw Error(ErrorCode::empty_dataset, "no training examples");
  const NetworkConfig& c = weights.config;
  const BatchLossBuilder loss = [&](Graph& g, std::span<const Var> params, std::span<const std::size_t> idx) {
    const Batch batch = assemble_batch(examples, idx, c, weights.history_mean, weights.history_scale);
    const Var out = forecaster_graph(g, c, params, batch.history, batch.exogenous);
    return g.mae(out, g.leaf(batch.target));
  };
  TrainOutcome outcome = train_minibatch(weights.tensors(), examples.size(), c.batch_size, tc, loss);
  for (std::size_t i = 0; i < weights.parameters.size(); ++i) {
    weights.parameters[i].value = std::move(outcome.parameters[i]);
  }
  return {std::move(weights), std::move(outcome.history), outcome.best_epoch, outcome.best_validation_mae,
          outcome.stopped_early};
}

/// Mean absolute log-price error of `weights` over `examples`.
inline double evaluate_mae(const ForecasterWeights& w, std::span<const TrainingExample> examples) {
  std::vector<std::size_t> idx(examples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const BatchLossBuilder loss = [&](Graph& g, std::span<const Var> params, std::span<const std::size_t> part) {
    const Batch batch = assemble_batch(examples, part, w.config, w.history_mean, w.history_scale);
    return g.mae(forecaster_graph(g, w.config, params, batch.history, batch.exogenous), g.leaf(batch.target));
  };
  return mean_loss(w.tensors(), loss, idx, 64);
}

/// Prices in $/MWh for one example: exp of the network output.
inline std::vector<double> predict(const ForecasterWeights& w, const std::vector<double>& history,
                                   const Tensor& exogenous) {
  const NetworkConfig& c = w.config;
  if (history.size() != c.history_hours) {
    throw Error(ErrorCode::shape_mismatch, "history has " + std::to_string(history.size()) + " values, expected " +
                                               std::to_string(c.history_hours));
  }
  if (!(exogenous.shape() == Shape{c.horizon_hours, c.exogenous_features})) {
    throw Error(ErrorCode::shape_mismatch, "exogenous block " + exogenous.shape().str());
  }
  Tensor z(Shape{1, c.history_hours, 1}, history);
  for (double& v : z.data()) v = (v - w.history_mean) / w.history_scale;
  const Tensor x = exogenous.reshaped(Shape{1, c.horizon_hours, c.exogenous_features});
  const Tensor out = forward(w, z, x);
  std::vector<double> prices;
  prices.reserve(out.size());
  for (double v : out.data()) prices.push_back(std::exp(v));
  return prices;
}

inline std::vector<double> predict(const ForecasterWeights& w, const TrainingExample& ex) {
  return predict(w, ex.history, ex.exogenous);
}

// ---------------------------------------------------------------------------
// Persistence.

inline ParamDocument to_document(const ForecasterWeights& w) {
  ParamDocument doc;
  doc.kind = "forecaster";
  const NetworkConfig& c = w.config;
  doc.meta = {
      {"history_hours", std::to_string(c.history_hours)},
      {"horizon_hours", std::to_string(c.horizon_hours)},
      {"exogenous_features", std::to_string(c.exogenous_features)},
      {"cnn_filters", std::to_string(c.cnn_filters)},
      {"cnn_kernel_width", std::to_string(c.cnn_kernel_width)},
      {"lstm_units", std::to_string(c.lstm_units)},
      {"dense1_units", std::to_string(c.dense1_units)},
      {"dense2_units", std::to_string(c.dense2_units)},
      {"batch_size", std::to_string(c.batch_size)},
      {"seed", std::to_string(w.seed)},
      {"history_mean", format_double(w.history_mean)},
      {"history_scale", format_double(w.history_scale)},
  };
  doc.tensors = w.parameters;
  doc.tensors.push_back({"scaling.mean", Tensor(Shape{w.scaling.mean.size()}, w.scaling.mean)});
  doc.tensors.push_back({"scaling.scale", Tensor(Shape{w.scaling.scale.size()}, w.scaling.scale)});
  return doc;
}

inline ForecasterWeights from_document(const ParamDocument& doc) {
  if (doc.kind != "forecaster") throw Error(ErrorCode::parse, "document kind is '" + doc.kind + "'");
  auto field = [&](const std::string& k) -> std::size_t {
    const std::string& v = doc.meta_value(k);
    std::size_t out = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw Error(ErrorCode::parse, "bad " + k + " '" + v + "'");
    return out;
  };
  ForecasterWeights w;
  w.config.history_hours = field("history_hours");
  w.config.horizon_hours = field("horizon_hours");
  w.config.exogenous_features = field("exogenous_features");
  w.config.cnn_filters = field("cnn_filters");
  w.config.cnn_kernel_width = field("cnn_kernel_width");
  w.config.lstm_units = field("lstm_units");
  w.config.dense1_units = field("dense1_units");
  w.config.dense2_units = field("dense2_units");
  w.config.batch_size = field("batch_size");
  w.seed = field("seed");
  w.history_mean = parse_double(doc.meta_value("history_mean"));
  w.history_scale = parse_double(doc.meta_value("history_scale"));
  if (!(w.history_scale > 0.0) || !std::isfinite(w.history_mean)) {
    throw Error(ErrorCode::shape_audit, "history standardization must have a finite mean and positive scale");
  }
  try {
    w.config.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::shape_audit, e.what());
  }
  for (const auto& t : doc.tensors) {
    if (t.name == "scaling.mean") {
      w.scaling.mean = t.value.values();
    } else if (t.name == "scaling.scale") {
      w.scaling.scale = t.value.values();
    } else {
      w.parameters.push_back(t);
    }
  }
  audit_shapes(w);
  return w;
}

inline void save_model(const ForecasterWeights& w, const std::string& path) { write_document(path, to_document(w)); }

inline ForecasterWeights load_model(const std::string& path) { return from_document(read_document(path)); }

}  // namespace dalmp
