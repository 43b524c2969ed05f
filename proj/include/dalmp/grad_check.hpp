#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dalmp/autodiff.hpp"
#include "dalmp/error.hpp"
#include "dalmp/tensor.hpp"

namespace dalmp {

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Builds a scalar loss from graph leaves holding the parameters, in order.
using LossBuilder = std::function<Var(Graph&, std::span<const Var>)>;

struct ParameterCheck {
  std::string name;
  double max_relative_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<ParameterCheck> parameters;
  double tolerance = 0.0;

  bool passed() const {
    return std::all_of(parameters.begin(), parameters.end(), [](const auto& p) { return p.passed; });
  }
  double worst() const {
    double w = 0.0;
    for (const auto& p : parameters) w = std::max(w, p.max_relative_error);
    return w;
  }
};

namespace detail {

inline double evaluate_loss(const LossBuilder& build, std::span<const NamedTensor> params) {
  Graph g;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(g.leaf(p.value));
  const Var loss = build(g, leaves);
  const Tensor& v = g.value(loss);
  if (v.size() != 1) throw Error(ErrorCode::non_scalar_loss, "loss has shape " + v.shape().str());
  return v[0];
}

}  // namespace detail

/// Compares reverse-mode gradients against central differences with step
/// `step`, reporting max |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|) per tensor.
inline GradCheckReport grad_check(const LossBuilder& build, std::vector<NamedTensor> params, double tolerance,
                                  double step = 1e-5) {
  std::vector<Tensor> analytic;
  double base = 0.0;
  {
    Graph g;
    std::vector<Var> leaves;
    for (const auto& p : params) leaves.push_back(g.leaf(p.value));
    const Var loss = build(g, leaves);
    g.backward(loss);
    base = g.value(loss)[0];
    for (Var v : leaves) analytic.push_back(g.gradient(v));
  }
  if (detail::evaluate_loss(build, params) != base) {
    throw Error(ErrorCode::non_deterministic, "two evaluations at identical parameters differ");
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t p = 0; p < params.size(); ++p) {
    ParameterCheck check{params[p].name, 0.0, true};
    auto data = params[p].value.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = detail::evaluate_loss(build, params);
      data[i] = saved - step;
      const double down = detail::evaluate_loss(build, params);
      data[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double ad = analytic[p][i];
      const double rel = std::fabs(ad - fd) / std::max(1e-8, std::fabs(ad) + std::fabs(fd));
      check.max_relative_error = std::max(check.max_relative_error, rel);
    }
    check.passed = check.max_relative_error <= tolerance;
    report.parameters.push_back(std::move(check));
  }
  return report;
}

}  // namespace dalmp
