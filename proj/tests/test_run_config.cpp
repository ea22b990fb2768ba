#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "abc/error.hpp"
#include "abc/run_config.hpp"
#include "abc/selftest.hpp"

using namespace abc;
using nlohmann::json;

namespace {

json minimal() {
  return {{"model_set", "benchmark"},
          {"N", 3000},
          {"n_obs", 50},
          {"seed", 5},
          {"observed", {{"synthetic", {{"model", "gk"}, {"theta", {0.2}}, {"seed", 1}}}}},
          {"harness", {{"c", 20}, {"epsilons", {13, 1.5, 0.28}}}},
          {"report", {{"mc_replicates", 99}}}};
}

std::filesystem::path temp_dir(const char* tag) {
  return std::filesystem::temp_directory_path() / (std::string("abc-cfg-") + tag + std::to_string(::getpid()));
}

}  // namespace

TEST_CASE("parses a complete configuration") {
  const RunConfig c = parse_run_config(minimal(), "/base");
  CHECK(c.models.size() == 2);
  CHECK(c.models[1].name == "gk");
  CHECK(c.n_rows == 3000);
  CHECK(c.harness.c == 20);
  CHECK(c.harness.epsilons == std::vector<double>{13, 1.5, 0.28});
  CHECK_FALSE(c.grid.has_value());
  CHECK(c.harness.seed == 5);
  CHECK(c.out == std::filesystem::path("/base/abc-out"));
  CHECK(c.table_path() == std::filesystem::path("/base/abc-out/table.abct"));
}

TEST_CASE("explicit models, grid specs and inf") {
  json j = minimal();
  j.erase("model_set");
  j["models"] = {{{"name", "normal"}, {"prior_weight", 0.25}}, {{"name", "gk"}, {"prior_weight", 0.75}}};
  j["harness"]["epsilons"] = {"inf", 2, 1};
  RunConfig c = parse_run_config(j);
  CHECK(c.models[0].prior_weight == 0.25);
  CHECK(c.harness.epsilons.front() == std::numeric_limits<double>::infinity());
  j["harness"]["epsilons"] = {{"q", 4}, {"max_fraction", 0.4}};
  c = parse_run_config(j);
  REQUIRE(c.grid.has_value());
  CHECK(c.grid->q == 4);
  CHECK(c.harness.epsilons.empty());
}

TEST_CASE("errors name the offending key") {
  auto fails_on = [](json j, const std::string& key) {
    CHECK_THROWS_WITH_AS(parse_run_config(j), doctest::Contains(key.c_str()), ConfigError);
  };
  json j = minimal();
  j["bogus"] = 1;
  fails_on(j, "bogus");
  j = minimal();
  j["harness"]["c"] = 0;
  fails_on(j, "harness.c");
  j = minimal();
  j["harness"]["epsilons"] = {1, 2};
  fails_on(j, "harness.epsilons");
  j = minimal();
  j["harness"]["v_mode"] = "sideways";
  fails_on(j, "harness.v_mode");
  j = minimal();
  j["model_set"] = "nope";
  fails_on(j, "model_set");
  j = minimal();
  j["observed"] = {{"file", "/definitely/not/here.txt"}};
  fails_on(j, "observed.file");
  j = minimal();
  j["observed"]["synthetic"]["model"] = "conjugate-normal";
  fails_on(j, "observed.synthetic.model");
  j = minimal();
  j.erase("observed");
  fails_on(j, "observed");
}

TEST_CASE("missing config file names the path") {
  CHECK_THROWS_WITH_AS(load_run_config("/no/such/config.json"), doctest::Contains("/no/such/config.json"),
                       ConfigError);
}

TEST_CASE("epsilon lists") {
  CHECK(parse_epsilon_list("inf,1.5,0.28").size() == 3);
  CHECK_THROWS_AS(parse_epsilon_list("0.28,1.5"), ConfigError);
  CHECK_THROWS_AS(parse_epsilon("abc"), ConfigError);
  CHECK_THROWS_AS(parse_epsilon("-1"), ConfigError);
}

TEST_CASE("environment overrides output and threads only") {
  RunConfig c = parse_run_config(minimal());
  ::setenv("ABC_CALIBRATE_OUT", "/tmp/elsewhere", 1);
  ::setenv("ABC_CALIBRATE_THREADS", "3", 1);
  apply_env_overrides(c);
  CHECK(c.out == std::filesystem::path("/tmp/elsewhere"));
  CHECK(c.threads == 3);
  CHECK(c.harness.threads == 3);
  ::setenv("ABC_CALIBRATE_THREADS", "x", 1);
  CHECK_THROWS_AS(apply_env_overrides(c), ConfigError);
  ::unsetenv("ABC_CALIBRATE_OUT");
  ::unsetenv("ABC_CALIBRATE_THREADS");
}

TEST_CASE("observed data from a file") {
  const auto dir = temp_dir("obs");
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "y.txt");
    f << "1 2 3\n4 5\n";
  }
  json j = minimal();
  j["observed"] = {{"file", "y.txt"}};
  const RunConfig c = parse_run_config(j, dir);
  const SummaryVector s = observed_summary(c, make_model_set(c));
  CHECK(s == SummaryVector{2, 3, 4});
  std::filesystem::remove_all(dir);
}

TEST_CASE("build then diagnose") {
  const auto dir = temp_dir("run");
  json j = minimal();
  RunConfig c = parse_run_config(j, dir);
  std::ostringstream log;
  const BuildResult b = run_build(c, log);
  CHECK(log.str().find(b.checksum) != std::string::npos);
  CHECK(std::filesystem::exists(b.path));
  // same seed, same checksum
  const BuildResult again = run_build(c, log);
  CHECK(again.checksum == b.checksum);

  const ReferenceTable table = load_table(b.path);
  const DiagnoseResult d = run_diagnose(c, table, log);
  CHECK(log.str().find("eps=1.5") != std::string::npos);
  std::ifstream curves(c.out / "curves.csv");
  std::string line;
  std::getline(curves, line);
  std::set<std::string> eps;
  while (std::getline(curves, line)) {
    std::stringstream ss(line);
    std::string field;
    for (int k = 0; k < 4; ++k) std::getline(ss, field, ',');
    eps.insert(field);
  }
  CHECK(eps == std::set<std::string>{"13", "1.5", "0.28"});

  RunConfig reg = c;
  reg.harness.adjust = AdjustMode::regression;
  reg.harness.v_mode = VMode::prior;
  const DiagnoseResult dr = run_diagnose(reg, table, log);
  CHECK(dr.report.metadata["config"]["adjust"] == "regression");
  CHECK(dr.report.metadata["config"]["v_mode"] == "prior");
  CHECK(dr.report.metadata["config"]["regression"].contains("kernel"));

  // a table from another model set is refused
  json other = minimal();
  other["model_set"] = "conjugate";
  other["observed"] = {{"summary", {0.1}}};
  const RunConfig oc = parse_run_config(other, dir);
  CHECK_THROWS_AS(run_diagnose(oc, table, log), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("self-test passes and flags a corrupted table") {
  const SelftestResult ok = run_selftest();
  CHECK(ok.passed());
  const auto path = temp_dir("corrupt");
  {
    std::ofstream f(path, std::ios::binary);
    f << "ABCT garbage";
  }
  const SelftestResult bad = run_selftest(path);
  CHECK_FALSE(bad.passed());
  std::ostringstream out;
  print_selftest(bad, out);
  CHECK(out.str().find("FAIL  table integrity") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("shipped example configurations load") {
  for (const char* name : {"bench.json", "conjugate.json", "synthetic.json"}) {
    CAPTURE(name);
    CHECK_NOTHROW(load_run_config(std::filesystem::path(ABC_SOURCE_DIR) / "configs" / name));
  }
}
