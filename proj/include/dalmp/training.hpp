#pragma once

// Mini-batch Adam loop with a chronological validation tail and
// validation-based early stopping, shared by the forecaster and the
// stateless baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dalmp/adam.hpp"
#include "dalmp/autodiff.hpp"
#include "dalmp/error.hpp"

namespace dalmp {

struct TrainConfig {
  std::size_t max_epochs = 250;
  double min_delta = 1e-4;
  std::size_t patience = 20;
  double validation_fraction = 0.07;
  AdamConfig adam{};
  std::uint64_t rng_seed = 0;
  bool early_stopping = true;
  /// Optional per-epoch learning rate (1-based epoch, base rate) -> rate.
  std::function<double(std::size_t, double)> learning_rate_schedule{};

  void validate() const {
    if (!(validation_fraction > 0.0 && validation_fraction < 0.5)) {
      throw Error(ErrorCode::invalid_config, "validation_fraction must be in (0, 0.5)");
    }
    if (patience < 1) throw Error(ErrorCode::invalid_config, "patience must be >= 1");
    if (!(min_delta >= 0.0)) throw Error(ErrorCode::invalid_config, "min_delta must be >= 0");
    if (max_epochs < 1) throw Error(ErrorCode::invalid_config, "max_epochs must be >= 1");
    if (!(adam.learning_rate > 0.0)) throw Error(ErrorCode::invalid_config, "learning rate must be > 0");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_mae = 0.0;
  double validation_mae = 0.0;
};

/// Improvement means val < best - min_delta; training stops once `patience`
/// consecutive epochs pass without one.
class EarlyStopping {
 public:
  EarlyStopping(double min_delta, std::size_t patience) : min_delta_(min_delta), patience_(patience) {}

  bool observe(std::size_t epoch, double validation) {
    if (validation < best_ - min_delta_) {
      best_ = validation;
      best_epoch_ = epoch;
      wait_ = 0;
      return true;
    }
    ++wait_;
    return false;
  }
  bool should_stop() const { return wait_ >= patience_; }
  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  double min_delta_;
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t wait_ = 0;
};

struct ChronologicalSplit {
  std::size_t train = 0;
  std::size_t validation = 0;
};

inline ChronologicalSplit split_chronologically(std::size_t n, double validation_fraction) {
  if (n < 2) throw Error(ErrorCode::empty_dataset, "need at least 2 examples, got " + std::to_string(n));
  auto val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  val = std::clamp<std::size_t>(val, 1, n - 1);
  return {n - val, val};
}

struct TrainOutcome {
  std::vector<Tensor> parameters;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_validation_mae = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
};

/// Builds the mean loss of the examples at `indices` (all from one split).
using BatchLossBuilder = std::function<Var(Graph&, std::span<const Var>, std::span<const std::size_t>)>;

inline double mean_loss(const std::vector<Tensor>& params, const BatchLossBuilder& build,
                        std::span<const std::size_t> indices, std::size_t chunk) {
  double total = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += chunk) {
    const auto part = indices.subspan(start, std::min(chunk, indices.size() - start));
    Graph g;
    std::vector<Var> leaves;
    for (const auto& p : params) leaves.push_back(g.leaf(p));
    total += g.value(build(g, leaves, part))[0] * static_cast<double>(part.size());
  }
  return total / static_cast<double>(indices.size());
}

/// Examples 0..n-1 are in chronological order; the last validation_fraction
/// of them is held out. When early stopping is on, the parameters of the best
/// validation epoch are returned; otherwise those of the last epoch.
inline TrainOutcome train_minibatch(std::vector<Tensor> params, std::size_t n_examples, std::size_t batch_size,
                                    const TrainConfig& tc, const BatchLossBuilder& build) {
  tc.validate();
  if (n_examples == 0) throw Error(ErrorCode::empty_dataset, "no training examples");
  if (batch_size == 0) throw Error(ErrorCode::invalid_config, "batch size must be positive");
  const auto split = split_chronologically(n_examples, tc.validation_fraction);

  std::vector<std::size_t> train_idx(split.train);
  std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
  std::vector<std::size_t> val_idx(split.validation);
  std::iota(val_idx.begin(), val_idx.end(), split.train);

  std::mt19937_64 rng(tc.rng_seed);
  Adam adam(tc.adam);
  EarlyStopping stopper(tc.min_delta, tc.patience);

  TrainOutcome out;
  std::vector<Tensor> best = params;
  std::vector<Tensor> grads;
  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const double lr = tc.learning_rate_schedule ? tc.learning_rate_schedule(epoch, tc.adam.learning_rate)
                                                : tc.adam.learning_rate;
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += batch_size) {
      const std::span<const std::size_t> batch(train_idx.data() + start,
                                               std::min(batch_size, train_idx.size() - start));
      Graph g;
      std::vector<Var> leaves;
      leaves.reserve(params.size());
      for (const auto& p : params) leaves.push_back(g.leaf(p));
      const Var loss = build(g, leaves, batch);
      const double value = g.value(loss)[0];
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::divergence, "non-finite training loss at epoch " + std::to_string(epoch));
      }
      g.backward(loss);
      grads.clear();
      for (Var v : leaves) grads.push_back(g.gradient(v));
      adam.step(params, grads, lr);
      epoch_loss += value * static_cast<double>(batch.size());
    }

    EpochRecord rec{epoch, epoch_loss / static_cast<double>(train_idx.size()),
                    mean_loss(params, build, val_idx, std::max<std::size_t>(batch_size, 64))};
    if (!std::isfinite(rec.validation_mae)) {
      throw Error(ErrorCode::divergence, "non-finite validation loss at epoch " + std::to_string(epoch));
    }
    out.history.push_back(rec);
    if (stopper.observe(epoch, rec.validation_mae)) best = params;
    if (tc.early_stopping && stopper.should_stop()) {
      out.stopped_early = true;
      break;
    }
  }
  out.best_epoch = stopper.best_epoch();
  out.best_validation_mae = stopper.best();
  out.parameters = tc.early_stopping ? std::move(best) : std::move(params);
  return out;
}

}  // namespace dalmp
