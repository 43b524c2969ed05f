#pragma once

// Benchmark models:
//   Model 1  AR(p) on log-prices, OLS
//   Model 2  seasonal ARX (p,0,0)x(P,0,0,24) on log-prices with exogenous
//            regressors; multiplicative seasonal polynomial fitted by
//            conditional least squares (Levenberg-Marquardt)
//   Model 3  stateless MLP: exogenous + calendar features of one hour -> log-price

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dalmp/autodiff.hpp"
#include "dalmp/data.hpp"
#include "dalmp/error.hpp"
#include "dalmp/grad_check.hpp"
#include "dalmp/param_io.hpp"
#include "dalmp/training.hpp"

namespace dalmp {

enum class SeasonalMode { none, additive, multiplicative };

inline const char* to_string(SeasonalMode m) {
  switch (m) {
    case SeasonalMode::none: return "none";
    case SeasonalMode::additive: return "additive";
    case SeasonalMode::multiplicative: return "multiplicative";
  }
  return "?";
}

inline SeasonalMode parse_seasonal_mode(std::string_view s) {
  if (s == "none") return SeasonalMode::none;
  if (s == "additive") return SeasonalMode::additive;
  if (s == "multiplicative") return SeasonalMode::multiplicative;
  throw Error(ErrorCode::invalid_config, "unknown seasonal mode '" + std::string(s) + "'");
}

/// y_t = c + sum_i ar[i] y_{t-1-i} + sum_j seasonal[j] y_{t-24(j+1)} + beta . z_t            (additive)
/// (1 - sum ar B^i)(1 - sum seasonal B^{24j}) y_t = c + beta . z_t                            (multiplicative)
/// where z_t are the exogenous columns standardized with exo_mean / exo_scale
/// (scale 0: column excluded, coefficient 0).
struct LinearAutoregressor {
  double intercept = 0.0;
  std::vector<double> ar;
  SeasonalMode seasonal_mode = SeasonalMode::none;
  std::size_t period = 24;
  std::vector<double> seasonal;
  std::vector<double> exogenous;
  std::vector<double> exo_mean;
  std::vector<double> exo_scale;
  bool fitted_on_log = true;
  std::size_t n_obs = 0;
  double residual_variance = 0.0;

  std::size_t max_lag() const {
    const std::size_t s = seasonal.size() * period;
    if (seasonal_mode == SeasonalMode::multiplicative) return ar.size() + s;
    return std::max(ar.size(), s);
  }
  std::size_t coefficient_count() const { return 1 + ar.size() + seasonal.size() + exogenous.size(); }

  void check() const {
    if (seasonal_mode == SeasonalMode::none && !seasonal.empty()) {
      throw Error(ErrorCode::invalid_config, "seasonal coefficients without a seasonal mode");
    }
    if (exo_mean.size() != exogenous.size() || exo_scale.size() != exogenous.size()) {
      throw Error(ErrorCode::shape_audit, "exogenous scaling does not match coefficient count");
    }
    if (period == 0) throw Error(ErrorCode::invalid_config, "period must be positive");
  }

  double exo_term(std::span<const double> row) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < exogenous.size(); ++k) {
      if (exo_scale[k] != 0.0) acc += exogenous[k] * (row[k] - exo_mean[k]) / exo_scale[k];
    }
    return acc;
  }

  /// One-step prediction of y[t] from y[t - max_lag() .. t - 1].
  double predict_at(std::span<const double> y, std::size_t t, std::span<const double> exo_row) const {
    double v = intercept + (exogenous.empty() ? 0.0 : exo_term(exo_row));
    for (std::size_t i = 0; i < ar.size(); ++i) v += ar[i] * y[t - 1 - i];
    for (std::size_t j = 0; j < seasonal.size(); ++j) {
      const std::size_t s = (j + 1) * period;
      v += seasonal[j] * y[t - s];
      if (seasonal_mode == SeasonalMode::multiplicative) {
        for (std::size_t i = 0; i < ar.size(); ++i) v -= ar[i] * seasonal[j] * y[t - s - 1 - i];
      }
    }
    return v;
  }
};

struct SeasonalSpec {
  std::size_t order = 6;
  std::size_t seasonal_order = 2;
  std::size_t period = 24;
};

namespace detail {

inline std::vector<double> exo_row(const ExogenousFrame* exo, std::size_t t) {
  std::vector<double> r;
  if (!exo) return r;
  r.reserve(exo->columns.size());
  for (const auto& c : exo->columns) r.push_back(c[t]);
  return r;
}

inline void fit_exo_scaling(LinearAutoregressor& m, const ExogenousFrame& exo, std::size_t first, std::size_t n) {
  const std::pair<std::ptrdiff_t, std::ptrdiff_t> rows{static_cast<std::ptrdiff_t>(first),
                                                       static_cast<std::ptrdiff_t>(n)};
  const Standardizer s = Standardizer::fit(exo, std::span(&rows, 1));
  m.exo_mean = s.mean;
  m.exo_scale = s.scale;
  m.exogenous.assign(exo.columns.size(), 0.0);
}

/// Least squares through Householder QR; rejects designs whose condition
/// number exceeds 1e12.
inline Eigen::VectorXd solve_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(x.cols()).triangularView<Eigen::Upper>();
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
  const double smax = sv(0), smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || smax / smin > 1e12) {
    throw Error(ErrorCode::rank_deficient,
                "design matrix condition number " + (smin > 0.0 ? format_double(smax / smin) : std::string("inf")) +
                    " exceeds 1e12");
  }
  return qr.solve(y);
}

inline void check_length(std::size_t usable_rows, std::size_t params) {
  if (usable_rows <= 10 * params) {
    throw Error(ErrorCode::insufficient_data, std::to_string(usable_rows) + " usable observations for " +
                                                  std::to_string(params) + " parameters (need > " +
                                                  std::to_string(10 * params) + ")");
  }
}

inline void check_aligned(std::size_t n, const ExogenousFrame& exo) {
  if (exo.columns.empty()) throw Error(ErrorCode::missing_exogenous, "no exogenous columns");
  for (const auto& c : exo.columns) {
    if (c.size() != n) {
      throw Error(ErrorCode::length_mismatch, "exogenous column has " + std::to_string(c.size()) + " rows, prices " +
                                                  std::to_string(n));
    }
  }
}

/// OLS on an explicit lag set plus optional exogenous columns.
inline LinearAutoregressor fit_lagged(std::span<const double> y, const ExogenousFrame* exo,
                                      std::size_t order, std::size_t seasonal_order, std::size_t period,
                                      SeasonalMode mode) {
  LinearAutoregressor m;
  m.seasonal_mode = mode;
  m.period = period;
  m.ar.assign(order, 0.0);
  m.seasonal.assign(seasonal_order, 0.0);
  const std::size_t first = std::max(order, seasonal_order * period);
  if (y.size() <= first) throw Error(ErrorCode::insufficient_data, "series shorter than the largest lag");
  const std::size_t n = y.size() - first;
  if (exo) fit_exo_scaling(m, *exo, first, y.size());

  std::vector<std::size_t> exo_used;
  for (std::size_t k = 0; k < m.exogenous.size(); ++k) {
    if (m.exo_scale[k] != 0.0) exo_used.push_back(k);
  }
  const std::size_t p = 1 + order + seasonal_order + exo_used.size();
  check_length(n, p);

  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd target(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t t = first + r;
    std::size_t c = 0;
    x(r, c++) = 1.0;
    for (std::size_t i = 1; i <= order; ++i) x(r, c++) = y[t - i];
    for (std::size_t j = 1; j <= seasonal_order; ++j) x(r, c++) = y[t - j * period];
    for (std::size_t k : exo_used) x(r, c++) = (exo->columns[k][t] - m.exo_mean[k]) / m.exo_scale[k];
    target(r) = y[t];
  }
  const Eigen::VectorXd beta = solve_ols(x, target);
  std::size_t c = 0;
  m.intercept = beta(c++);
  for (auto& a : m.ar) a = beta(c++);
  for (auto& s : m.seasonal) s = beta(c++);
  for (std::size_t k : exo_used) m.exogenous[k] = beta(c++);
  const Eigen::VectorXd resid = target - x * beta;
  m.n_obs = n;
  m.residual_variance = resid.squaredNorm() / static_cast<double>(n > p ? n - p : 1);
  return m;
}

}  // namespace detail

/// Model 1: AR(order) with intercept by OLS.
inline LinearAutoregressor fit_ar(const HourlySeries& log_prices, std::size_t order = 6) {
  if (order == 0) throw Error(ErrorCode::invalid_config, "AR order must be positive");
  return detail::fit_lagged(log_prices.values, nullptr, order, 0, 24, SeasonalMode::none);
}

/// Sum of squared one-step residuals over t >= max_lag().
inline double css_objective(const LinearAutoregressor& m, std::span<const double> y, const ExogenousFrame* exo) {
  double ss = 0.0;
  for (std::size_t t = m.max_lag(); t < y.size(); ++t) {
    const auto row = detail::exo_row(exo, t);
    const double e = y[t] - m.predict_at(y, t, row);
    ss += e * e;
  }
  return ss;
}

struct LmOptions {
  std::size_t max_iterations = 200;
  double tolerance = 1e-12;
};

namespace detail {

/// Conditional least squares for the multiplicative model, started at `m`
/// (whose coefficients define which exogenous columns take part).
inline LinearAutoregressor refine_multiplicative(LinearAutoregressor m, std::span<const double> y,
                                                 const ExogenousFrame* exo, const LmOptions& opt) {
  m.seasonal_mode = SeasonalMode::multiplicative;
  const std::size_t p = m.ar.size(), q = m.seasonal.size(), s = m.period;
  std::vector<std::size_t> exo_used;
  for (std::size_t k = 0; k < m.exogenous.size(); ++k) {
    if (m.exo_scale[k] != 0.0) exo_used.push_back(k);
  }
  const std::size_t k_exo = exo_used.size();
  const std::size_t np = 1 + k_exo + p + q;
  const std::size_t first = m.max_lag();
  if (y.size() <= first) throw Error(ErrorCode::insufficient_data, "series shorter than the largest lag");
  const std::size_t n = y.size() - first;
  check_length(n, np);

  Eigen::MatrixXd z(n, k_exo);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k_exo; ++c) {
      const std::size_t k = exo_used[c];
      z(r, c) = (exo->columns[k][first + r] - m.exo_mean[k]) / m.exo_scale[k];
    }
  }

  auto pack = [&](const LinearAutoregressor& mm) {
    Eigen::VectorXd th(np);
    std::size_t c = 0;
    th(c++) = mm.intercept;
    for (std::size_t k : exo_used) th(c++) = mm.exogenous[k];
    for (double a : mm.ar) th(c++) = a;
    for (double b : mm.seasonal) th(c++) = b;
    return th;
  };
  auto unpack = [&](const Eigen::VectorXd& th, LinearAutoregressor& mm) {
    std::size_t c = 0;
    mm.intercept = th(c++);
    for (std::size_t k : exo_used) mm.exogenous[k] = th(c++);
    for (auto& a : mm.ar) a = th(c++);
    for (auto& b : mm.seasonal) b = th(c++);
  };
  // residuals r = y - f, Jacobian of r.
  auto evaluate = [&](const Eigen::VectorXd& th, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const double c0 = th(0);
    const auto beta = th.segment(1, static_cast<Eigen::Index>(k_exo));
    const auto phi = th.segment(static_cast<Eigen::Index>(1 + k_exo), static_cast<Eigen::Index>(p));
    const auto Phi = th.segment(static_cast<Eigen::Index>(1 + k_exo + p), static_cast<Eigen::Index>(q));
    r.resize(static_cast<Eigen::Index>(n));
    if (jac) jac->resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(np));
    for (std::size_t row = 0; row < n; ++row) {
      const std::size_t t = first + row;
      const auto ri = static_cast<Eigen::Index>(row);
      double f = c0;
      if (k_exo) f += z.row(ri).dot(beta);
      for (std::size_t i = 0; i < p; ++i) {
        double w = y[t - 1 - i];  // lag-i column filtered by the seasonal polynomial
        for (std::size_t j = 0; j < q; ++j) w -= Phi(static_cast<Eigen::Index>(j)) * y[t - (j + 1) * s - 1 - i];
        f += phi(static_cast<Eigen::Index>(i)) * w;
        if (jac) (*jac)(ri, static_cast<Eigen::Index>(1 + k_exo + i)) = -w;
      }
      for (std::size_t j = 0; j < q; ++j) {
        double w = y[t - (j + 1) * s];
        for (std::size_t i = 0; i < p; ++i) w -= phi(static_cast<Eigen::Index>(i)) * y[t - (j + 1) * s - 1 - i];
        if (jac) (*jac)(ri, static_cast<Eigen::Index>(1 + k_exo + p + j)) = -w;
      }
      for (std::size_t j = 0; j < q; ++j) f += Phi(static_cast<Eigen::Index>(j)) * y[t - (j + 1) * s];
      r(ri) = y[t] - f;
      if (jac) {
        (*jac)(ri, 0) = -1.0;
        for (std::size_t c = 0; c < k_exo; ++c) (*jac)(ri, static_cast<Eigen::Index>(1 + c)) = -z(ri, static_cast<Eigen::Index>(c));
      }
    }
  };

  Eigen::VectorXd theta = pack(m);
  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  evaluate(theta, r, &j);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  bool converged = false;
  for (std::size_t it = 0; it < opt.max_iterations && !converged; ++it) {
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    while (true) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      const Eigen::VectorXd cand = theta + step;
      Eigen::VectorXd rc;
      evaluate(cand, rc, nullptr);
      const double cc = rc.squaredNorm();
      if (std::isfinite(cc) && cc <= cost) {
        const double gain = cost - cc;
        theta = cand;
        cost = cc;
        evaluate(theta, r, &j);
        lambda = std::max(lambda / 10.0, 1e-12);
        if (gain <= opt.tolerance * std::max(cost, 1e-300) || step.norm() <= 1e-12 * (theta.norm() + 1e-12)) {
          converged = true;
        }
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e16) {  // no descent direction left: at a minimum to machine precision
        converged = true;
        break;
      }
    }
  }
  if (!converged) {
    throw Error(ErrorCode::non_convergence,
                "Levenberg-Marquardt did not converge in " + std::to_string(opt.max_iterations) + " iterations");
  }
  unpack(theta, m);
  m.n_obs = n;
  m.residual_variance = cost / static_cast<double>(n > np ? n - np : 1);
  return m;
}

}  // namespace detail

/// Model 2. Additive mode is plain OLS on lags 1..order, period, 2*period, ...
/// and the exogenous columns; multiplicative mode starts from that solution.
/// Pass exo == nullptr for a pure seasonal AR.
inline LinearAutoregressor fit_sarx(const HourlySeries& log_prices, const ExogenousFrame* exo,
                                    const SeasonalSpec& spec = {}, SeasonalMode mode = SeasonalMode::multiplicative,
                                    const LmOptions& lm = {}) {
  if (spec.period == 0) throw Error(ErrorCode::invalid_config, "period must be positive");
  if (exo) detail::check_aligned(log_prices.size(), *exo);
  if (mode == SeasonalMode::none) {
    return detail::fit_lagged(log_prices.values, exo, spec.order, 0, spec.period, SeasonalMode::none);
  }
  LinearAutoregressor additive =
      detail::fit_lagged(log_prices.values, exo, spec.order, spec.seasonal_order, spec.period, SeasonalMode::additive);
  if (mode == SeasonalMode::additive || spec.seasonal_order == 0) return additive;
  return detail::refine_multiplicative(additive, log_prices.values, exo, lm);
}

/// Iterated forecasts of `steps` hours after `history` (log scale when the
/// model was fitted on logs). future_exo holds one raw exogenous row per
/// forecast hour and is required when the model has exogenous terms.
/// Returns prices: exp of the log forecasts, or the forecasts themselves.
inline std::vector<double> forecast_recursive(const LinearAutoregressor& m, std::span<const double> history,
                                              std::span<const std::vector<double>> future_exo = {},
                                              std::size_t steps = 24) {
  m.check();
  if (history.size() < m.max_lag()) {
    throw Error(ErrorCode::insufficient_history, "forecast needs " + std::to_string(m.max_lag()) +
                                                     " hours of history, got " + std::to_string(history.size()));
  }
  if (!m.exogenous.empty()) {
    if (future_exo.empty()) throw Error(ErrorCode::missing_exogenous, "model has exogenous terms but no future rows");
    if (future_exo.size() < steps) {
      throw Error(ErrorCode::missing_exogenous, std::to_string(future_exo.size()) + " future exogenous rows for " +
                                                    std::to_string(steps) + " steps");
    }
    for (const auto& row : future_exo) {
      if (row.size() != m.exogenous.size()) {
        throw Error(ErrorCode::shape_mismatch, "future exogenous row has " + std::to_string(row.size()) +
                                                   " values, expected " + std::to_string(m.exogenous.size()));
      }
    }
  }
  std::vector<double> y(history.begin(), history.end());
  const std::size_t base = y.size();
  std::vector<double> out;
  out.reserve(steps);
  for (std::size_t h = 0; h < steps; ++h) {
    const std::span<const double> row = m.exogenous.empty() ? std::span<const double>{} : future_exo[h];
    const double v = m.predict_at(y, base + h, row);
    y.push_back(v);
    out.push_back(m.fitted_on_log ? std::exp(v) : v);
  }
  return out;
}

inline ParamDocument to_document(const LinearAutoregressor& m) {
  ParamDocument doc;
  doc.kind = "linear-autoregressor";
  doc.meta = {{"seasonal_mode", to_string(m.seasonal_mode)},
              {"period", std::to_string(m.period)},
              {"order", std::to_string(m.ar.size())},
              {"seasonal_order", std::to_string(m.seasonal.size())},
              {"exogenous", std::to_string(m.exogenous.size())},
              {"fitted_on_log", m.fitted_on_log ? "1" : "0"},
              {"n_obs", std::to_string(m.n_obs)},
              {"residual_variance", format_double(m.residual_variance)}};
  doc.tensors.push_back({"intercept", Tensor(Shape{1}, {m.intercept})});
  auto add = [&](const std::string& name, const std::vector<double>& v) {
    if (!v.empty()) doc.tensors.push_back({name, Tensor(Shape{v.size()}, v)});
  };
  add("ar", m.ar);
  add("seasonal", m.seasonal);
  add("exogenous", m.exogenous);
  add("exo.mean", m.exo_mean);
  add("exo.scale", m.exo_scale);
  return doc;
}

inline LinearAutoregressor linear_model_from_document(const ParamDocument& doc) {
  if (doc.kind != "linear-autoregressor") throw Error(ErrorCode::parse, "document kind is '" + doc.kind + "'");
  auto count = [&](const std::string& k) {
    const std::string& v = doc.meta_value(k);
    std::size_t out = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw Error(ErrorCode::parse, "bad " + k + " '" + v + "'");
    return out;
  };
  auto vec = [&](const std::string& name, std::size_t n) -> std::vector<double> {
    if (n == 0) return {};
    const Tensor& t = doc.tensor(name);
    if (!(t.shape() == Shape{n})) throw Error(ErrorCode::shape_audit, name + " has shape " + t.shape().str());
    return t.values();
  };
  LinearAutoregressor m;
  m.seasonal_mode = parse_seasonal_mode(doc.meta_value("seasonal_mode"));
  m.period = count("period");
  m.fitted_on_log = doc.meta_value("fitted_on_log") == "1";
  m.n_obs = count("n_obs");
  m.residual_variance = parse_double(doc.meta_value("residual_variance"));
  m.intercept = vec("intercept", 1)[0];
  m.ar = vec("ar", count("order"));
  m.seasonal = vec("seasonal", count("seasonal_order"));
  const std::size_t k = count("exogenous");
  m.exogenous = vec("exogenous", k);
  m.exo_mean = vec("exo.mean", k);
  m.exo_scale = vec("exo.scale", k);
  m.check();
  return m;
}

// ---------------------------------------------------------------------------
// Model 3.

/// 13 raw table columns followed by the 31 calendar one-hots of hour t.
inline std::vector<double> stateless_features(const MarketData& data, std::size_t t) {
  std::vector<double> f;
  f.reserve(table_exogenous_columns + calendar_feature_count);
  for (const auto& c : data.exogenous.columns) f.push_back(c[t]);
  for (double v : calendar_features(data.prices.time_at(t))) f.push_back(v);
  return f;
}

struct StatelessNet {
  std::uint64_t seed = 0;
  std::vector<NamedTensor> parameters;  // hidden1.{kernel,bias}, hidden2.{kernel,bias}, output.{kernel,bias}
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;  // 0: feature ignored

  std::size_t input_size() const { return feature_mean.size(); }

  void check() const {
    if (parameters.size() != 6) throw Error(ErrorCode::shape_audit, "stateless net needs 6 parameter tensors");
    const std::size_t f = input_size();
    if (feature_scale.size() != f) throw Error(ErrorCode::shape_audit, "feature scaling size mismatch");
    const std::size_t h1 = parameters[0].value.shape().back(), h2 = parameters[2].value.shape().back();
    const Shape want[6] = {Shape{f, h1}, Shape{h1}, Shape{h1, h2}, Shape{h2}, Shape{h2, 1}, Shape{1}};
    for (std::size_t i = 0; i < 6; ++i) {
      if (!(parameters[i].value.shape() == want[i])) {
        throw Error(ErrorCode::shape_audit, parameters[i].name + " has shape " + parameters[i].value.shape().str() +
                                                ", expected " + want[i].str());
      }
    }
  }

  Tensor standardize(const Tensor& raw) const {
    if (raw.shape().rank() != 2 || raw.shape()[1] != input_size()) {
      throw Error(ErrorCode::shape_mismatch, "feature matrix " + raw.shape().str() + ", expected [n x " +
                                                 std::to_string(input_size()) + "]");
    }
    Tensor out(raw.shape());
    const std::size_t f = input_size();
    for (std::size_t i = 0; i < raw.shape()[0]; ++i) {
      for (std::size_t k = 0; k < f; ++k) {
        out[i * f + k] = feature_scale[k] == 0.0 ? 0.0 : (raw[i * f + k] - feature_mean[k]) / feature_scale[k];
      }
    }
    return out;
  }
};

inline Var stateless_graph(Graph& g, std::span<const Var> p, Var x) {
  const Var h1 = g.relu(g.add(g.matmul(x, p[0]), p[1]));
  const Var h2 = g.relu(g.add(g.matmul(h1, p[2]), p[3]));
  return g.add(g.matmul(h2, p[4]), p[5]);
}

/// Log-price predictions for raw feature rows [n, F].
inline std::vector<double> predict_log(const StatelessNet& net, const Tensor& raw_features) {
  net.check();
  Graph g;
  std::vector<Var> leaves;
  for (const auto& p : net.parameters) leaves.push_back(g.leaf(p.value));
  return g.value(stateless_graph(g, leaves, g.leaf(net.standardize(raw_features)))).values();
}

struct StatelessOptions {
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;
  std::size_t batch_size = 64;
};

struct StatelessTraining {
  StatelessNet net;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

/// Rows of `features` ([n, F], raw) must be in chronological order; the last
/// validation_fraction of them is the early-stopping hold-out.
inline StatelessTraining fit_stateless(const Tensor& features, std::span<const double> log_targets, std::uint64_t seed,
                                       const TrainConfig& tc, const StatelessOptions& opt = {}) {
  if (features.shape().rank() != 2 || features.shape()[0] != log_targets.size()) {
    throw Error(ErrorCode::shape_mismatch, "features " + features.shape().str() + " vs " +
                                               std::to_string(log_targets.size()) + " targets");
  }
  const std::size_t n = log_targets.size(), f = features.shape()[1];
  if (n < 100) throw Error(ErrorCode::insufficient_data, "need >= 100 pairs, got " + std::to_string(n));
  const auto split = split_chronologically(n, tc.validation_fraction);

  StatelessTraining out;
  StatelessNet& net = out.net;
  net.seed = seed;
  for (std::size_t k = 0; k < f; ++k) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < split.train; ++i) s += features[i * f + k];
    const double mean = s / static_cast<double>(split.train);
    for (std::size_t i = 0; i < split.train; ++i) ss += (features[i * f + k] - mean) * (features[i * f + k] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(split.train));
    net.feature_mean.push_back(mean);
    net.feature_scale.push_back(sd > 1e-12 * std::max(1.0, std::fabs(mean)) ? sd : 0.0);
  }

  std::mt19937_64 rng(seed);
  auto glorot = [&](std::size_t fan_in, std::size_t fan_out) {
    Tensor t(Shape{fan_in, fan_out});
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    for (double& v : t.data()) v = u(rng);
    return t;
  };
  std::vector<double> sorted(log_targets.begin(), log_targets.begin() + static_cast<std::ptrdiff_t>(split.train));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  net.parameters = {{"hidden1.kernel", glorot(f, opt.hidden1)},
                    {"hidden1.bias", Tensor(Shape{opt.hidden1})},
                    {"hidden2.kernel", glorot(opt.hidden1, opt.hidden2)},
                    {"hidden2.bias", Tensor(Shape{opt.hidden2})},
                    {"output.kernel", glorot(opt.hidden2, 1)},
                    {"output.bias", Tensor(Shape{1}, {sorted[sorted.size() / 2]})}};

  const Tensor x = net.standardize(features);
  const BatchLossBuilder loss = [&](Graph& g, std::span<const Var> params, std::span<const std::size_t> idx) {
    Tensor xb(Shape{idx.size(), f});
    Tensor yb(Shape{idx.size(), 1});
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(idx[r] * f), f,
                  xb.data().begin() + static_cast<std::ptrdiff_t>(r * f));
      yb[r] = log_targets[idx[r]];
    }
    return g.mae(stateless_graph(g, params, g.leaf(std::move(xb))), g.leaf(std::move(yb)));
  };
  std::vector<Tensor> init;
  for (const auto& p : net.parameters) init.push_back(p.value);
  TrainConfig cfg = tc;
  cfg.rng_seed = seed;
  TrainOutcome o = train_minibatch(std::move(init), n, opt.batch_size, cfg, loss);
  for (std::size_t i = 0; i < net.parameters.size(); ++i) net.parameters[i].value = std::move(o.parameters[i]);
  out.history = std::move(o.history);
  out.best_epoch = o.best_epoch;
  return out;
}

/// Fits Model 3 on hours [0, end) of `data`.
inline StatelessTraining fit_stateless(const MarketData& data, std::size_t end, std::uint64_t seed,
                                       const TrainConfig& tc, const StatelessOptions& opt = {}) {
  if (end > data.prices.size()) throw Error(ErrorCode::insufficient_data, "fit window exceeds the data");
  const std::size_t f = table_exogenous_columns + calendar_feature_count;
  Tensor x(Shape{std::max<std::size_t>(end, 1), f});
  std::vector<double> y;
  y.reserve(end);
  for (std::size_t t = 0; t < end; ++t) {
    const auto row = stateless_features(data, t);
    std::copy(row.begin(), row.end(), x.data().begin() + static_cast<std::ptrdiff_t>(t * f));
    const double p = data.prices.values[t];
    if (!(p > 0.0)) throw Error(ErrorCode::domain, "non-positive price at hour " + std::to_string(t));
    y.push_back(std::log(p));
  }
  return fit_stateless(x, y, seed, tc, opt);
}

inline ParamDocument to_document(const StatelessNet& net) {
  net.check();
  ParamDocument doc;
  doc.kind = "stateless-net";
  doc.meta = {{"seed", std::to_string(net.seed)}};
  doc.tensors = net.parameters;
  doc.tensors.push_back({"feature.mean", Tensor(Shape{net.feature_mean.size()}, net.feature_mean)});
  doc.tensors.push_back({"feature.scale", Tensor(Shape{net.feature_scale.size()}, net.feature_scale)});
  return doc;
}

inline StatelessNet stateless_from_document(const ParamDocument& doc) {
  if (doc.kind != "stateless-net") throw Error(ErrorCode::parse, "document kind is '" + doc.kind + "'");
  StatelessNet net;
  net.seed = std::stoull(doc.meta_value("seed"));
  for (const auto& t : doc.tensors) {
    if (t.name == "feature.mean") {
      net.feature_mean = t.value.values();
    } else if (t.name == "feature.scale") {
      net.feature_scale = t.value.values();
    } else {
      net.parameters.push_back(t);
    }
  }
  net.check();
  return net;
}

}  // namespace dalmp
