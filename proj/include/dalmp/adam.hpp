#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "dalmp/tensor.hpp"

namespace dalmp {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  std::size_t steps() const { return step_; }

  void step(std::span<Tensor> params, std::span<const Tensor> grads) { step(params, grads, config_.learning_rate); }

  void step(std::span<Tensor> params, std::span<const Tensor> grads, double learning_rate) {
    if (first_.empty()) {
      for (const auto& p : params) {
        first_.emplace_back(p.shape());
        second_.emplace_back(p.shape());
      }
    }
    ++step_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto w = params[p].data();
      auto g = grads[p].data();
      auto m = first_[p].data();
      auto v = second_[p].data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
        w[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
      }
    }
  }

 private:
  AdamConfig config_;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
  std::size_t step_ = 0;
};

}  // namespace dalmp
