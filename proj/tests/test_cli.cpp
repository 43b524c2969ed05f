#include "catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dalmp/cli.hpp"

using namespace dalmp;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dalmp_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

const std::vector<std::string> plant{"risk.capacity_mw=300", "risk.heat_rate=7", "risk.gas_price=3",
                                     "risk.startup_cost=20000"};

const std::vector<std::string> small_net{"network.lstm_units=4", "network.history_hours=48", "network.dense1_units=6",
                                         "network.batch_size=8"};

std::vector<std::string> with_sets(std::vector<std::string> args, const std::vector<std::string>& sets,
                                   const std::vector<std::string>& more = {}) {
  args.push_back("--set");
  args.insert(args.end(), sets.begin(), sets.end());
  args.insert(args.end(), more.begin(), more.end());
  return args;
}

}  // namespace

TEST_CASE("configuration errors exit with 2") {
  const auto dir = scratch("config");
  CHECK(cli({"synth", "--out", dir.string(), "--set", "synth.days=abc"}).code == exit_config);
  CHECK(cli({"synth", "--out", dir.string(), "--set", "synth.no_such_key=1"}).code == exit_config);
  CHECK(cli({"synth", "--out", dir.string(), "--set", "synth.days=10"}).code == exit_config);
  CHECK(cli({"bogus"}).code == exit_config);
  CHECK(cli({}).code == exit_config);
  CHECK(cli({"train", "--out", dir.string()}).code == exit_config);
}

TEST_CASE("missing inputs are runtime errors") {
  const auto dir = scratch("missing");
  const auto r = cli({"train", "--out", dir.string(), "--data", (dir / "nope.csv").string()});
  CHECK(r.code == exit_runtime);
  CHECK(r.err.find("nope.csv") != std::string::npos);
}

TEST_CASE("synth is reproducible and writes a manifest") {
  const auto a = scratch("synth_a"), b = scratch("synth_b");
  REQUIRE(cli({"synth", "--out", a.string(), "--seed", "4", "--set", "synth.days=31"}).code == exit_ok);
  REQUIRE(cli({"synth", "--out", b.string(), "--seed", "4", "--set", "synth.days=31"}).code == exit_ok);
  CHECK(slurp(a / "market.csv") == slurp(b / "market.csv"));
  CHECK(lines(a / "market.csv").size() == 31 * 24 + 1);
  CHECK(lines(a / "ground_truth.csv").size() == 31 * 24 + 1);
  const std::string manifest = slurp(a / "manifest.txt");
  CHECK(manifest.find("config seed = 4") != std::string::npos);
  CHECK(manifest.find("config synth.days = 31") != std::string::npos);
  std::ifstream in(a / "market.csv");
  CHECK_NOTHROW(parse_market_csv(in));
}

TEST_CASE("an INI file sets values and flags override it") {
  const auto dir = scratch("ini");
  {
    std::ofstream ini(dir / "run.ini");
    ini << "seed = 9\n[synth]\ndays = 33\nnoise_sigma = 0.05\n";
  }
  REQUIRE(cli({"synth", "--config", (dir / "run.ini").string(), "--out", dir.string(), "--seed", "2"}).code == exit_ok);
  const std::string manifest = slurp(dir / "manifest.txt");
  CHECK(manifest.find("config synth.days = 33") != std::string::npos);
  CHECK(manifest.find("config synth.noise_sigma = 0.05") != std::string::npos);
  CHECK(manifest.find("config seed = 2") != std::string::npos);

  {
    std::ofstream ini(dir / "bad.ini");
    ini << "[synth]\ndayz = 33\n";
  }
  CHECK(cli({"synth", "--config", (dir / "bad.ini").string(), "--out", dir.string()}).code == exit_config);
}

TEST_CASE("train, forecast and risk chain together") {
  const auto dir = scratch("chain");
  REQUIRE(cli({"synth", "--out", dir.string(), "--set", "synth.days=40"}).code == exit_ok);
  const std::string data = (dir / "market.csv").string();

  const auto t1 = dir / "t1", t2 = dir / "t2";
  auto train_args = [&](const fs::path& out) {
    auto sets = small_net;
    sets.push_back("training.max_epochs=6");
    return with_sets({"train", "--data", data, "--out", out.string(), "--seed", "3"}, sets);
  };
  REQUIRE(cli(train_args(t1)).code == exit_ok);
  REQUIRE(cli(train_args(t2)).code == exit_ok);
  CHECK(slurp(t1 / "weights.txt") == slurp(t2 / "weights.txt"));
  const auto hist = lines(t1 / "history.csv");
  CHECK(hist.size() >= 2);
  CHECK(hist.size() <= 7);
  CHECK(slurp(t1 / "manifest.txt").find("input data ") != std::string::npos);

  // Exogenous forecast: the final day of the table without its price column.
  const auto rows = lines(dir / "market.csv");
  {
    std::ofstream exo(dir / "exo.csv");
    auto drop_price = [&exo](const std::string& l) {
      const auto a = l.find(','), b = l.find(',', a + 1);
      exo << l.substr(0, a) << l.substr(b) << '\n';
    };
    drop_price(rows[0]);
    for (std::size_t i = rows.size() - 24; i < rows.size(); ++i) drop_price(rows[i]);
  }
  const auto f = dir / "f";
  REQUIRE(cli({"forecast", "--weights", (t1 / "weights.txt").string(), "--data", data, "--exogenous",
               (dir / "exo.csv").string(), "--out", f.string()})
              .code == exit_ok);
  const auto fc = lines(f / "forecast.csv");
  REQUIRE(fc.size() == 25);
  CHECK(fc[0] == "timestamp,price");
  for (std::size_t i = 1; i < fc.size(); ++i) CHECK(std::stod(fc[i].substr(fc[i].find(',') + 1)) > 0.0);

  const auto r = dir / "r";
  REQUIRE(cli(with_sets({"risk", "--forecast", (f / "forecast.csv").string(), "--out", r.string()},
                        {"risk.sigma=0.25", "risk.block_hours=8-20", "risk.samples=10000"}, plant))
              .code == exit_ok);
  CHECK(lines(r / "risk_hourly.csv").size() == 25);
  const std::string summary = slurp(r / "risk_summary.txt");
  CHECK(summary.find("block_hours 8 9 10 11 12 13 14 15 16 17 18 19 20") != std::string::npos);
  CHECK((summary.find("recommendation RUN") != std::string::npos ||
         summary.find("recommendation SHUT DOWN") != std::string::npos));

  CHECK(cli(with_sets({"risk", "--forecast", (f / "forecast.csv").string(), "--out", r.string()},
                      {"risk.sigma=0.25", "risk.block_hours=0-3"}, plant))
            .code == exit_config);
  CHECK(cli(with_sets({"risk", "--forecast", (f / "forecast.csv").string(), "--out", r.string()}, {}, plant)).code ==
        exit_config);
  // No plant parameters.
  CHECK(cli({"risk", "--forecast", (f / "forecast.csv").string(), "--out", r.string(), "--set", "risk.sigma=0.25"})
            .code == exit_config);

  {
    std::ofstream res(dir / "res.csv");
    res << "timestamp,residual\n";
    for (int i = 0; i < 40; ++i) res << "2020-01-01T00:00:00Z," << (i % 2 ? "0.1" : "-0.1") << '\n';
  }
  const auto r2 = dir / "r2";
  REQUIRE(cli(with_sets({"risk", "--forecast", (f / "forecast.csv").string(), "--residuals", (dir / "res.csv").string(),
                         "--out", r2.string()},
                        {"risk.samples=10000"}, plant))
              .code == exit_ok);
  const auto summary2 = lines(r2 / "risk_summary.txt");
  REQUIRE(summary2.front().rfind("sigma ", 0) == 0);
  CHECK(std::stod(summary2.front().substr(6)) == Catch::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("evaluate reports four models over the test week") {
  const auto dir = scratch("evaluate");
  REQUIRE(cli({"synth", "--out", dir.string(), "--set", "synth.days=75"}).code == exit_ok);
  auto sets = small_net;
  sets.insert(sets.end(), {"training.max_epochs=4", "stateless.max_epochs=4"});
  const auto e = dir / "e";
  const auto r = cli(with_sets({"evaluate", "--data", (dir / "market.csv").string(), "--out", e.string()}, sets));
  REQUIRE(r.code == exit_ok);
  const auto report = lines(e / "report.csv");
  REQUIRE(report.size() == 5);
  CHECK(report[0] == "model,mse,mape,n");
  for (std::size_t i = 1; i < report.size(); ++i) CHECK(report[i].substr(report[i].rfind(',') + 1) == "168");
  CHECK(lines(e / "residuals.csv").size() == 169);

}
