#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "kronquery/experiments.hpp"
#include "kronquery/kron_core.hpp"
#include "kronquery/numerics.hpp"

using namespace kronquery;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("kq_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

std::vector<std::vector<std::string>> parse_rows(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(csv);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("config schema") {
  SUBCASE("minimal valid config") {
    const auto cfg = config_from_json(json{{"experiment", "concentration"}, {"seed", 7}});
    CHECK(cfg.experiment == "concentration");
    CHECK(cfg.seed == 7);
    CHECK(cfg.q_lo == 1);
  }
  SUBCASE("missing seed is reported by name") {
    try {
      (void)config_from_json(json{{"experiment", "concentration"}});
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("seed") != std::string::npos);
    }
  }
  SUBCASE("every offending key is listed") {
    try {
      (void)config_from_json(json{{"bogus", 1}, {"wat", 2}, {"experiment", "l2"}, {"seed", 1}});
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("bogus") != std::string::npos);
      CHECK(msg.find("wat") != std::string::npos);
    }
  }
  SUBCASE("q and q_range are mutually exclusive") {
    CHECK_THROWS_AS((void)config_from_json(json{{"experiment", "l2"},
                                                {"seed", 1},
                                                {"q", 3},
                                                {"q_range", {1, 2}}}),
                    ConfigError);
  }
  SUBCASE("q_range is validated") {
    CHECK_THROWS_AS(
        (void)config_from_json(json{{"experiment", "l2"}, {"seed", 1}, {"q_range", {4, 2}}}),
        ConfigError);
  }
  SUBCASE("unknown experiments and params are rejected") {
    CHECK_THROWS_AS((void)config_from_json(json{{"experiment", "nope"}, {"seed", 1}}),
                    ConfigError);
    ExperimentConfig cfg =
        config_from_json(json{{"experiment", "concentration"},
                              {"seed", 1},
                              {"params", json{{"tau_scale", 1.0}, {"huh", 2}}}});
    cfg.trials = 1000;
    TempFile tmp("params.csv");
    cfg.out = tmp.path;
    CHECK_THROWS_AS((void)run_experiment(cfg), ConfigError);
  }
  SUBCASE("zero-test is an alias for zero-test-scaling") {
    const auto cfg = config_from_json(json{{"experiment", "zero-test"}, {"seed", 1}});
    CHECK(cfg.experiment == "zero-test-scaling");
  }
}

TEST_CASE("zero-test experiment matches the exact product law") {
  ExperimentConfig cfg;
  cfg.experiment = "zero-test-scaling";
  cfg.n = 2;
  cfg.q_lo = 2;
  cfg.q_hi = 4;
  cfg.trials = 4000;
  cfg.seed = 17;
  cfg.timestamp = false;
  TempFile tmp("zt.csv");
  cfg.out = tmp.path;
  (void)run_experiment(cfg);

  const auto rows = parse_rows(slurp(tmp.path));
  REQUIRE(rows.size() == 4);  // header + one row per q
  // columns: experiment,seed,n,q,trials,m,dist,detect_rate,wilson_halfwidth,expected_rate
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const int q = std::stoi(rows[r][3]);
    const double rate = std::stod(rows[r][7]);
    const double expected = std::stod(rows[r][9]);
    CHECK(expected == doctest::Approx(std::pow(0.5, q)));
    const long hits = std::lround(rate * cfg.trials);
    CHECK(wilson_interval(hits, cfg.trials, 3.5).contains(expected));
  }
}

TEST_CASE("complex zero-test rate follows (3/4)^q") {
  ExperimentConfig cfg;
  cfg.experiment = "zero-test-scaling";
  cfg.n = 2;
  cfg.q_lo = 4;
  cfg.q_hi = 4;
  cfg.trials = 4000;
  cfg.seed = 23;
  cfg.timestamp = false;
  cfg.params = json{{"alphabet", "pm1i"}};
  TempFile tmp("ztc.csv");
  cfg.out = tmp.path;
  (void)run_experiment(cfg);
  const auto rows = parse_rows(slurp(tmp.path));
  REQUIRE(rows.size() == 2);
  const double rate = std::stod(rows[1][7]);
  const double expected = std::stod(rows[1][9]);
  CHECK(expected == doctest::Approx(std::pow(0.75, 4)));
  CHECK(std::abs(rate - expected) <= 3.5 * std::sqrt(expected * (1 - expected) / cfg.trials));
}

TEST_CASE("experiment output is byte-identical across reruns and thread counts") {
  ExperimentConfig cfg;
  cfg.experiment = "concentration";
  cfg.n = 2;
  cfg.q_lo = 1;
  cfg.q_hi = 6;
  cfg.trials = 3000;
  cfg.seed = 99;
  cfg.timestamp = false;

  TempFile a("det_a.csv"), b("det_b.csv"), c("det_c.csv");
  cfg.out = a.path;
  cfg.threads = 1;
  (void)run_experiment(cfg);
  cfg.out = b.path;
  (void)run_experiment(cfg);
  cfg.out = c.path;
  cfg.threads = 4;
  (void)run_experiment(cfg);

  const std::string sa = slurp(a.path);
  CHECK(!sa.empty());
  CHECK(sa == slurp(b.path));
  CHECK(sa == slurp(c.path));
}

TEST_CASE("game-values experiment emits the pm1 certificates") {
  ExperimentConfig cfg;
  cfg.experiment = "game-values";
  cfg.n = 2;
  cfg.seed = 1;
  cfg.timestamp = false;
  TempFile tmp("gv.csv");
  cfg.out = tmp.path;
  const auto summary = run_experiment(cfg);
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].find("1/2") != std::string::npos);
  CHECK(summary[1].find("1/2") != std::string::npos);
  const auto rows = parse_rows(slurp(tmp.path));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][4] == "1");  // p_num
  CHECK(rows[1][5] == "2");  // p_den
}

TEST_CASE("divergence experiment agrees with the closed form") {
  ExperimentConfig cfg;
  cfg.experiment = "divergence";
  cfg.seed = 5;
  cfg.timestamp = false;
  cfg.params = json{{"a", {1.0, 0.0}}, {"mc_samples", 200000}};
  TempFile tmp("dv.csv");
  cfg.out = tmp.path;
  const auto summary = run_experiment(cfg);
  const auto rows = parse_rows(slurp(tmp.path));
  REQUIRE(rows.size() == 2);
  const double closed = std::stod(rows[1][5]);
  const double rel = std::stod(rows[1][7]);
  CHECK(closed == doctest::Approx(std::exp(1.0)));
  CHECK(rel <= 0.05);
  CHECK(!summary.empty());
}

TEST_CASE("trace experiment reports the exact-zero failure fraction") {
  ExperimentConfig cfg;
  cfg.experiment = "trace";
  cfg.n = 2;
  cfg.q_lo = 6;
  cfg.q_hi = 6;
  cfg.trials = 1500;
  cfg.seed = 3;
  cfg.timestamp = false;
  cfg.threads = 2;
  TempFile tmp("tr.csv");
  cfg.out = tmp.path;
  (void)run_experiment(cfg);
  const auto rows = parse_rows(slurp(tmp.path));
  REQUIRE(rows.size() == 2);
  // columns: ...,mean_trace_true,mean_estimate,frac_exact_zero,frac_within_20pct,mean_rel_err
  const double tr = std::stod(rows[1][8]);
  const double frac_zero = std::stod(rows[1][10]);
  CHECK(tr == 64.0);
  const double want = std::pow(1.0 - 1.0 / 64, 16);
  CHECK(std::abs(frac_zero - want) <= 4.0 * std::sqrt(want * (1 - want) / cfg.trials));
}

TEST_CASE("csv formatting is shortest-round-trip and locale independent") {
  CHECK(csv_format(0.5) == "0.5");
  CHECK(csv_format(1.0) == "1");
  CHECK(csv_format(static_cast<long long>(42)) == "42");
  CHECK(csv_format(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(csv_format(std::nan("")) == "nan");
  const double v = 0.1 + 0.2;
  CHECK(std::stod(csv_format(v)) == v);
}
