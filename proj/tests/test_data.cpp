#include "catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dalmp/data.hpp"
#include "support.hpp"

using namespace dalmp;
using dalmp::testing::to_csv;
using dalmp::testing::toy_market;

namespace {

ErrorCode parse_error_code(const std::string& csv, std::string* message = nullptr) {
  std::istringstream in(csv);
  try {
    parse_market_csv(in);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("parse succeeded");
  return ErrorCode::io;
}

std::vector<std::string> lines_of(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string join(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

MarketData year_from(HourStamp start, std::size_t days) {
  MarketData d = toy_market(days);
  d.prices.start = d.exogenous.start = start;
  return d;
}

}  // namespace

TEST_CASE("timestamps round-trip through the ISO form") {
  const HourStamp t = parse_timestamp("2020-03-15T07:00:00Z");
  CHECK(format_timestamp(t) == "2020-03-15T07:00:00Z");
  CHECK_THROWS_AS(parse_timestamp("2020-03-15 07:00"), Error);
  CHECK_THROWS_AS(parse_timestamp("2020-02-30T07:00:00Z"), Error);
  CHECK_THROWS_AS(parse_timestamp("2020-03-15T24:00:00Z"), Error);
}

TEST_CASE("a full year of hourly rows is accepted") {
  const MarketData d = year_from(parse_timestamp("2019-01-01T00:00:00Z"), 365);
  std::istringstream in(to_csv(d));
  const MarketData back = parse_market_csv(in);
  CHECK(back.prices.size() == 8760);
  CHECK(back.exogenous.size() == 8760);
  CHECK(back.exogenous.columns.size() == 13);
}

TEST_CASE("written CSVs use the documented header") {
  const auto lines = lines_of(to_csv(toy_market(30)));
  CHECK(lines.front() ==
        "timestamp,dalmp,rto_demand_mw,aep_mw,aps_mw,dom_mw,midatl_mw,ekpc_mw,atsi_mw,comed_mw,duq_mw,chicago_f,"
        "cincinnati_f,philadelphia_f,pittsburgh_f");
}

TEST_CASE("a missing hour is reported by timestamp") {
  auto lines = lines_of(to_csv(year_from(parse_timestamp("2020-03-01T00:00:00Z"), 30)));
  const auto it = std::find_if(lines.begin(), lines.end(),
                               [](const std::string& l) { return l.rfind("2020-03-15T07:00:00Z", 0) == 0; });
  REQUIRE(it != lines.end());
  lines.erase(it);
  std::string msg;
  CHECK(parse_error_code(join(lines), &msg) == ErrorCode::gap);
  CHECK(msg.find("2020-03-15T07:00:00Z") != std::string::npos);
}

TEST_CASE("a duplicated timestamp is rejected") {
  auto lines = lines_of(to_csv(toy_market(30)));
  lines.insert(lines.begin() + 100, lines[100]);
  CHECK(parse_error_code(join(lines)) == ErrorCode::duplicate_timestamp);
}

TEST_CASE("non-positive prices, negative demand and bad columns are rejected") {
  auto zero_price = [](std::string row) {
    const auto a = row.find(',');
    const auto b = row.find(',', a + 1);
    return row.substr(0, a + 1) + "0.0" + row.substr(b);
  };
  auto lines = lines_of(to_csv(toy_market(30)));
  auto bad = lines;
  bad[50] = zero_price(bad[50]);
  CHECK(parse_error_code(join(bad)) == ErrorCode::non_positive_price);

  bad = lines;
  const auto a = bad[60].find(',', bad[60].find(',') + 1);
  bad[60].insert(a + 1, "-");
  CHECK(parse_error_code(join(bad)) == ErrorCode::negative_demand);

  bad = lines;
  bad[0] += ",extra";
  for (std::size_t i = 1; i < bad.size(); ++i) bad[i] += ",1";
  CHECK(parse_error_code(join(bad)) == ErrorCode::unknown_column);

  bad = lines;
  bad[0].replace(bad[0].find("duq_mw"), 6, "dup_mw");
  CHECK(parse_error_code(join(bad)) == ErrorCode::unknown_column);

  bad = lines;
  for (auto& l : bad) l = l.substr(0, l.rfind(','));
  CHECK(parse_error_code(join(bad)) == ErrorCode::missing_column);

  CHECK(parse_error_code("") == ErrorCode::parse);
}

TEST_CASE("rows are sorted by timestamp") {
  const MarketData d = toy_market(30);
  auto lines = lines_of(to_csv(d));
  std::mt19937_64 rng(1);
  std::shuffle(lines.begin() + 1, lines.end(), rng);
  std::istringstream in(join(lines));
  const MarketData back = parse_market_csv(in);
  CHECK(back.prices.start == d.prices.start);
  for (std::size_t i = 0; i < d.prices.size(); ++i) CHECK(back.prices.values[i] == d.prices.values[i]);
}

TEST_CASE("log transform and its inverse") {
  CHECK(log_transform(HourlySeries{{}, {1.0}}).values == std::vector<double>{0.0});
  CHECK(log_transform(HourlySeries{{}, {std::exp(2.0)}}).values[0] == Catch::Approx(2.0).epsilon(1e-15));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1e-3, 1e4);
  HourlySeries s;
  for (int i = 0; i < 8760; ++i) s.values.push_back(u(rng));
  const auto back = inverse_log(log_transform(s));
  double worst = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) worst = std::max(worst, std::fabs(back.values[i] - s.values[i]) / s.values[i]);
  CHECK(worst < 1e-12);
  try {
    log_transform(HourlySeries{{}, {1.0, -2.0}});
    FAIL("expected a domain error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::domain);
  }
}

TEST_CASE("calendar one-hots") {
  const auto monday = calendar_features(parse_timestamp("2020-01-06T00:00:00Z"));
  CHECK(monday[0] == 1.0);
  CHECK(monday[24] == 1.0);
  const auto sunday = calendar_features(parse_timestamp("2020-01-12T23:00:00Z"));
  CHECK(sunday[23] == 1.0);
  CHECK(sunday[30] == 1.0);
  for (int h = 0; h < 24 * 14; ++h) {
    const auto f = calendar_features(parse_timestamp("2020-01-06T00:00:00Z") + std::chrono::hours{h});
    double sum = 0.0;
    for (double v : f) sum += v;
    CHECK(sum == 2.0);
  }
}

TEST_CASE("window count matches brute-force enumeration") {
  const MarketData d = toy_market(365);
  const NetworkConfig c;
  std::size_t brute = 0;
  for (std::size_t origin = 0; origin < d.prices.size(); origin += 24) {
    if (origin >= c.history_hours && origin + c.horizon_hours <= d.prices.size()) ++brute;
  }
  const auto set = build_examples(d, c);
  CHECK(set.examples.size() == brute);
  CHECK(brute == 355);
  const auto& first = set.examples.front();
  CHECK(first.origin == d.prices.start + std::chrono::days{10});
  CHECK(first.history.front() == std::log(d.prices.values[0]));
  CHECK(first.history.back() == std::log(d.prices.values[239]));
  CHECK(first.target.front() == std::log(d.prices.values[240]));
  CHECK(first.target.back() == std::log(d.prices.values[263]));
  for (std::size_t i = 1; i < set.examples.size(); ++i) {
    CHECK(set.examples[i].origin - set.examples[i - 1].origin == std::chrono::hours{24});
  }
}

TEST_CASE("examples never see their own targets") {
  const MarketData d = toy_market(40);
  NetworkConfig c;
  const auto set = build_examples(d, c);
  const auto logp = log_transform(d.prices);
  for (const auto& ex : set.examples) {
    const auto o = logp.index_of(ex.origin);
    // Z ends the hour before the origin; y starts at it.
    CHECK(ex.history.back() == logp.values[static_cast<std::size_t>(o - 1)]);
    CHECK(ex.target.front() == logp.values[static_cast<std::size_t>(o)]);
    for (std::size_t h = 0; h < 24; ++h) {
      const auto cal = calendar_features(ex.origin + std::chrono::hours{h});
      for (std::size_t k = 0; k < cal.size(); ++k) CHECK(ex.exogenous.at(h, 13 + k) == cal[k]);
    }
  }
}

TEST_CASE("exogenous scaling uses training rows only") {
  MarketData d = toy_market(60);
  for (double& v : d.exogenous.columns[12]) v = 55.0;
  const NetworkConfig c;
  const auto set = build_examples(d, c, 0.1);
  const std::size_t n = set.examples.size();
  const std::size_t train = n - static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  REQUIRE(set.training_count == train);
  double sum = 0.0, ss = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < train; ++i) {
    const auto a = static_cast<std::size_t>(d.exogenous.index_of(set.examples[i].origin));
    for (std::size_t h = 0; h < 24; ++h) sum += d.exogenous.columns[0][a + h], ++cnt;
  }
  const double mean = sum / static_cast<double>(cnt);
  for (std::size_t i = 0; i < train; ++i) {
    const auto a = static_cast<std::size_t>(d.exogenous.index_of(set.examples[i].origin));
    for (std::size_t h = 0; h < 24; ++h) ss += std::pow(d.exogenous.columns[0][a + h] - mean, 2);
  }
  CHECK(set.scaling.mean[0] == Catch::Approx(mean).epsilon(1e-12));
  CHECK(set.scaling.scale[0] == Catch::Approx(std::sqrt(ss / static_cast<double>(cnt))).epsilon(1e-12));
  CHECK(set.scaling.scale[12] == 0.0);
  for (const auto& ex : set.examples) {
    for (std::size_t h = 0; h < 24; ++h) CHECK(ex.exogenous.at(h, 12) == 0.0);
  }
  const auto stored = set.scaling;
  const auto again = build_examples(d, c, set.scaling);
  CHECK(set.scaling.mean == stored.mean);
  CHECK(again.back().exogenous == set.examples.back().exogenous);
}

TEST_CASE("build_examples is pure and needs enough history") {
  const MarketData d = toy_market(20);
  const NetworkConfig c;
  const auto a = build_examples(d, c);
  const auto b = build_examples(d, c);
  REQUIRE(a.examples.size() == b.examples.size());
  for (std::size_t i = 0; i < a.examples.size(); ++i) {
    CHECK(a.examples[i].history == b.examples[i].history);
    CHECK(a.examples[i].exogenous == b.examples[i].exogenous);
    CHECK(a.examples[i].target == b.examples[i].target);
  }
  try {
    build_examples(toy_market(10), c);
    FAIL("expected insufficient history");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::insufficient_history);
  }
}
