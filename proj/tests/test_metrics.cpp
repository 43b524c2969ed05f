#include "catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dalmp/metrics.hpp"

using namespace dalmp;

namespace {

double mse_loop(const std::vector<double>& a, const std::vector<double>& f) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (long double)(a[i] - f[i]) * (a[i] - f[i]);
  return static_cast<double>(s / a.size());
}

double mape_loop(const std::vector<double>& a, const std::vector<double>& f) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs((long double)a[i] - f[i]) / std::fabs((long double)a[i]);
  return static_cast<double>(100 * s / a.size());
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::io;
}

}  // namespace

TEST_CASE("mse examples") {
  CHECK(mse(std::vector<double>{10, 10}, std::vector<double>{10, 10}) == 0.0);
  CHECK(mse(std::vector<double>{10}, std::vector<double>{13}) == 9.0);
}

TEST_CASE("mape examples") {
  CHECK(mape(std::vector<double>{100}, std::vector<double>{93}) == 7.0);
  CHECK(mape(std::vector<double>{20, 40}, std::vector<double>{20, 40}) == 0.0);
  CHECK(code_of([] { mape(std::vector<double>{1, 0}, std::vector<double>{1, 1}); }) == ErrorCode::zero_actual);
}

TEST_CASE("length and emptiness are checked") {
  CHECK(code_of([] { mse(std::vector<double>{1, 2}, std::vector<double>{1}); }) == ErrorCode::length_mismatch);
  CHECK(code_of([] { mape(std::vector<double>{1}, std::vector<double>{1, 2}); }) == ErrorCode::length_mismatch);
  CHECK(code_of([] { mse(std::vector<double>{}, std::vector<double>{}); }) == ErrorCode::empty_input);
}

TEST_CASE("metrics agree with scalar-loop oracles") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(1.0, 200.0);
  std::uniform_int_distribution<std::size_t> len(1, 300);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(len(rng)), f(a.size());
    for (auto& v : a) v = u(rng);
    for (auto& v : f) v = u(rng);
    CHECK(std::fabs(mse(a, f) - mse_loop(a, f)) <= 1e-12 * std::max(1.0, mse_loop(a, f)));
    CHECK(std::fabs(mape(a, f) - mape_loop(a, f)) <= 1e-12 * std::max(1.0, mape_loop(a, f)));
  }
}

TEST_CASE("permutation invariance and scaling") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(5.0, 80.0);
  std::vector<double> a(50), f(50);
  for (auto& v : a) v = u(rng);
  for (auto& v : f) v = u(rng);
  std::vector<std::size_t> idx(50);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<double> pa, pf, sa, sf;
  for (std::size_t i : idx) pa.push_back(a[i]), pf.push_back(f[i]);
  for (std::size_t i = 0; i < a.size(); ++i) sa.push_back(3.5 * a[i]), sf.push_back(3.5 * f[i]);
  CHECK(mse(pa, pf) == Catch::Approx(mse(a, f)).epsilon(1e-12));
  CHECK(mape(pa, pf) == Catch::Approx(mape(a, f)).epsilon(1e-12));
  CHECK(mse(sa, sf) == Catch::Approx(3.5 * 3.5 * mse(a, f)).epsilon(1e-12));
  CHECK(mape(sa, sf) == Catch::Approx(mape(a, f)).epsilon(1e-12));
  CHECK(mse(a, f) > 0.0);
}

TEST_CASE("reports carry per-point errors and serialize to CSV") {
  const std::vector<double> a{100, 50}, f{93, 55};
  const EvalReport r = evaluate("dl", a, f);
  CHECK(r.n == 2);
  CHECK(r.errors == std::vector<double>{-7, 5});
  CHECK(r.mse == 37.0);
  CHECK(r.mape == Catch::Approx(8.5));
  std::ostringstream os;
  const EvalReport rs[] = {r};
  write_reports_csv(os, rs);
  CHECK(os.str() == "model,mse,mape,n\ndl,37," + format_double(r.mape) + ",2\n");
}
