#include "catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dalmp/baselines.hpp"
#include "dalmp/metrics.hpp"
#include "support.hpp"

using dalmp::testing::normal_equations;
using dalmp::testing::simulate_ar;
using dalmp::testing::simulate_seasonal;

using namespace dalmp;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::io;
}

}  // namespace

TEST_CASE("AR(6) recovers an AR(1) generator") {
  const auto y = simulate_ar({0.8}, 0.0, 10000, 1);
  const auto m = fit_ar(y, 6);
  REQUIRE(m.ar.size() == 6);
  CHECK(std::fabs(m.ar[0] - 0.8) <= 0.02);
  for (std::size_t i = 1; i < 6; ++i) CHECK(std::fabs(m.ar[i]) <= 0.02);
  CHECK(m.n_obs == 10000 - 6);
  CHECK(m.residual_variance == Catch::Approx(1.0).epsilon(0.05));
  CHECK(m.coefficient_count() == 7);
}

TEST_CASE("OLS equals the normal-equations solution and is orthogonal to its residuals") {
  const auto y = simulate_ar({0.5, -0.2, 0.1, 0.05, 0.0, 0.1}, 0.3, 5000, 2);
  const auto m = fit_ar(y, 6);
  std::vector<std::vector<double>> x;
  std::vector<double> target;
  for (std::size_t t = 6; t < y.size(); ++t) {
    std::vector<double> row{1.0};
    for (std::size_t i = 1; i <= 6; ++i) row.push_back(y.values[t - i]);
    x.push_back(row);
    target.push_back(y.values[t]);
  }
  const auto beta = normal_equations(x, target);
  CHECK(std::fabs(m.intercept - beta[0]) <= 1e-8);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::fabs(m.ar[i] - beta[1 + i]) <= 1e-8);

  std::vector<double> xtr(7, 0.0);
  double xnorm = 0.0, rnorm = 0.0;
  for (std::size_t r = 0; r < x.size(); ++r) {
    double fit = m.intercept;
    for (std::size_t i = 0; i < 6; ++i) fit += m.ar[i] * x[r][1 + i];
    const double res = target[r] - fit;
    rnorm += res * res;
    for (std::size_t k = 0; k < 7; ++k) {
      xtr[k] += x[r][k] * res;
      xnorm += x[r][k] * x[r][k];
    }
  }
  for (double v : xtr) CHECK(std::fabs(v) <= 1e-8 * std::sqrt(xnorm) * std::sqrt(rnorm));
}

TEST_CASE("degenerate designs are rejected") {
  const HourlySeries flat{dalmp::testing::day0(), std::vector<double>(500, 3.0)};
  CHECK(code_of([&] { fit_ar(flat, 6); }) == ErrorCode::rank_deficient);
  const auto shortie = simulate_ar({0.5}, 0.0, 70, 3);
  CHECK(code_of([&] { fit_ar(shortie, 6); }) == ErrorCode::insufficient_data);

  const auto y = simulate_ar({0.7}, 0.0, 3000, 4);
  ExogenousFrame lag;
  lag.start = y.start;
  lag.columns.push_back(std::vector<double>(y.size(), 0.0));
  for (std::size_t t = 1; t < y.size(); ++t) lag.columns[0][t] = y.values[t - 1];
  CHECK(code_of([&] { fit_sarx(y, &lag, {6, 2, 24}, SeasonalMode::additive); }) == ErrorCode::rank_deficient);
}

TEST_CASE("multiplicative fit recovers the seasonal generator") {
  const double phi = 0.6, Phi = 0.5;
  const auto y = simulate_seasonal(phi, Phi, 20000, 5);
  const auto m = fit_sarx(y, nullptr, {1, 1, 24}, SeasonalMode::multiplicative);
  CHECK(m.seasonal_mode == SeasonalMode::multiplicative);
  CHECK(std::fabs(m.ar[0] - phi) <= 0.05 * phi);
  CHECK(std::fabs(m.seasonal[0] - Phi) <= 0.05 * Phi);
}

TEST_CASE("without seasonality the multiplicative and additive fits agree") {
  const auto y = simulate_ar({0.6, 0.2}, 0.1, 20000, 6);
  const SeasonalSpec spec{2, 2, 24};
  const auto mult = fit_sarx(y, nullptr, spec, SeasonalMode::multiplicative);
  const auto add = fit_sarx(y, nullptr, spec, SeasonalMode::additive);
  for (std::size_t i = 0; i < 2; ++i) CHECK(std::fabs(mult.ar[i] - add.ar[i]) <= 1e-3);
}

TEST_CASE("refinement never ends above its warm start") {
  const auto data = dalmp::testing::toy_market(120);
  const auto logp = log_transform(data.prices);
  const auto add = fit_sarx(logp, &data.exogenous, {}, SeasonalMode::additive);
  const auto mult = fit_sarx(logp, &data.exogenous, {}, SeasonalMode::multiplicative);
  LinearAutoregressor warm = add;
  warm.seasonal_mode = SeasonalMode::multiplicative;
  CHECK(css_objective(mult, logp.values, &data.exogenous) <= css_objective(warm, logp.values, &data.exogenous));
  CHECK(mult.exogenous.size() == 13);
  CHECK(mult.max_lag() == 6 + 48);
}

TEST_CASE("LM reports non-convergence when out of iterations") {
  const auto y = simulate_seasonal(0.6, 0.5, 5000, 7);
  CHECK(code_of([&] { fit_sarx(y, nullptr, {1, 1, 24}, SeasonalMode::multiplicative, LmOptions{1, 0.0}); }) ==
        ErrorCode::non_convergence);
}

TEST_CASE("recursive forecasts follow the documented special cases") {
  std::vector<double> hist(100);
  for (std::size_t i = 0; i < hist.size(); ++i) hist[i] = 3.0 + 0.01 * static_cast<double>(i % 24);

  LinearAutoregressor constant;
  constant.ar.assign(6, 0.0);
  constant.intercept = 2.5;
  for (double p : forecast_recursive(constant, hist)) CHECK(p == std::exp(2.5));

  LinearAutoregressor walk;
  walk.ar = {1.0, 0, 0, 0, 0, 0};
  for (double p : forecast_recursive(walk, hist)) CHECK(p == std::exp(hist.back()));

  LinearAutoregressor seasonal;
  seasonal.seasonal_mode = SeasonalMode::multiplicative;
  seasonal.ar.assign(6, 0.0);
  seasonal.seasonal = {1.0, 0.0};
  const auto f = forecast_recursive(seasonal, hist);
  REQUIRE(f.size() == 24);
  for (std::size_t h = 0; h < 24; ++h) CHECK(f[h] == std::exp(hist[hist.size() - 24 + h]));

  CHECK(code_of([&] { forecast_recursive(seasonal, std::span(hist).first(53)); }) == ErrorCode::insufficient_history);
}

TEST_CASE("models with exogenous terms need future rows") {
  const auto data = dalmp::testing::toy_market(90);
  const auto logp = log_transform(data.prices);
  const auto m = fit_sarx(logp, &data.exogenous, {}, SeasonalMode::additive);
  CHECK(code_of([&] { forecast_recursive(m, logp.values); }) == ErrorCode::missing_exogenous);
  std::vector<std::vector<double>> rows(24, std::vector<double>(12, 0.0));
  CHECK(code_of([&] { forecast_recursive(m, logp.values, rows); }) == ErrorCode::shape_mismatch);
}

TEST_CASE("a fit on its own noiseless process reproduces it") {
  // y_t = 0.5 + 0.7 y_{t-1} - 0.2 y_{t-2}, no noise, started off equilibrium.
  std::vector<double> y{4.0, 1.0};
  for (int t = 2; t < 600; ++t) y.push_back(0.5 + 0.7 * y[t - 1] - 0.2 * y[t - 2] + 0.3 * std::sin(t * 0.7));
  LinearAutoregressor m;
  m.ar = {0.7, -0.2};
  m.intercept = 0.5;
  m.fitted_on_log = false;
  const auto f = forecast_recursive(m, std::span(y).first(600));
  std::vector<double> z(y.begin(), y.end());
  for (int h = 0; h < 24; ++h) {
    z.push_back(0.5 + 0.7 * z[z.size() - 1] - 0.2 * z[z.size() - 2]);
    CHECK(std::fabs(f[static_cast<std::size_t>(h)] - z.back()) < 1e-6);
  }
}

TEST_CASE("linear models round-trip through parameter documents") {
  const auto data = dalmp::testing::toy_market(90);
  const auto logp = log_transform(data.prices);
  const auto m = fit_sarx(logp, &data.exogenous);
  const auto back = linear_model_from_document(deserialize(serialize(to_document(m))));
  CHECK(back.intercept == m.intercept);
  CHECK(back.ar == m.ar);
  CHECK(back.seasonal == m.seasonal);
  CHECK(back.exogenous == m.exogenous);
  CHECK(back.exo_scale == m.exo_scale);
  CHECK(back.seasonal_mode == m.seasonal_mode);
  CHECK(back.residual_variance == m.residual_variance);
}

TEST_CASE("Model 3 learns a realizable target") {
  const auto data = dalmp::testing::toy_market(120);
  const std::size_t n = data.prices.size(), f = 44;
  Tensor x(Shape{n, f});
  std::vector<double> y;
  for (std::size_t t = 0; t < n; ++t) {
    const auto row = stateless_features(data, t);
    std::copy(row.begin(), row.end(), x.data().begin() + static_cast<std::ptrdiff_t>(t * f));
    y.push_back(3.0 + (data.exogenous.columns[0][t] - 90000.0) / 40000.0);
  }
  const std::size_t train_n = n - 24 * 5;
  Tensor xt(Shape{train_n, f}, std::vector<double>(x.data().begin(), x.data().begin() + static_cast<std::ptrdiff_t>(train_n * f)));
  TrainConfig tc;
  tc.adam.learning_rate = 3e-3;
  const auto fit = fit_stateless(xt, std::span(y).first(train_n), 3, tc);
  Tensor xh(Shape{n - train_n, f}, std::vector<double>(x.data().begin() + static_cast<std::ptrdiff_t>(train_n * f), x.data().end()));
  const auto pred = predict_log(fit.net, xh);
  std::vector<double> actual, forecast;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    actual.push_back(std::exp(y[train_n + i]));
    forecast.push_back(std::exp(pred[i]));
  }
  CHECK(mape(actual, forecast) < 1.0);
}

TEST_CASE("Model 3 on shuffled targets is no better than the training median") {
  const auto data = dalmp::testing::toy_market(40);
  const std::size_t n = data.prices.size(), f = 44;
  Tensor x(Shape{n, f});
  std::vector<double> y;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> noise(3.0, 0.3);
  for (std::size_t t = 0; t < n; ++t) {
    const auto row = stateless_features(data, t);
    std::copy(row.begin(), row.end(), x.data().begin() + static_cast<std::ptrdiff_t>(t * f));
    y.push_back(noise(rng));
  }
  const auto fit = fit_stateless(x, y, 4, TrainConfig{});
  const auto split = split_chronologically(n, 0.07);
  std::vector<double> train(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(split.train));
  std::nth_element(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(train.size() / 2), train.end());
  const double median = train[train.size() / 2];
  double mae_median = 0.0;
  for (std::size_t i = split.train; i < n; ++i) mae_median += std::fabs(y[i] - median);
  mae_median /= static_cast<double>(split.validation);
  double best = 1e9;
  for (const auto& e : fit.history) best = std::min(best, e.validation_mae);
  CHECK(best == Catch::Approx(mae_median).epsilon(0.1));
}

TEST_CASE("Model 3 is deterministic and persists") {
  const auto data = dalmp::testing::toy_market(30);
  TrainConfig tc;
  tc.max_epochs = 5;
  const auto a = fit_stateless(data, data.prices.size(), 11, tc);
  const auto b = fit_stateless(data, data.prices.size(), 11, tc);
  const std::string text = serialize(to_document(a.net));
  CHECK(text == serialize(to_document(b.net)));
  const auto back = stateless_from_document(deserialize(text));
  Tensor x(Shape{1, 44}, stateless_features(data, 5));
  CHECK(predict_log(back, x) == predict_log(a.net, x));
  Tensor few(Shape{99, 44});
  CHECK(code_of([&] { fit_stateless(few, std::vector<double>(99, 1.0), 1, tc); }) == ErrorCode::insufficient_data);
}
