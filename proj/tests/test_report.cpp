#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include <unistd.h>

#include "doctest.h"
#include "abc/random.hpp"
#include "abc/report.hpp"

using namespace abc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::filesystem::path temp_dir(const char* tag) {
  return std::filesystem::temp_directory_path() / (std::string("abc-report-") + tag + std::to_string(::getpid()));
}

std::size_t data_rows(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n - 1;
}

HarnessOutput small_run(std::vector<double> eps) {
  static const ReferenceTable t = build_table(benchmark_model_set(40), 2000, Allocation::equal, 9, 1);
  HarnessConfig cfg;
  cfg.c = 40;
  cfg.epsilons = std::move(eps);
  cfg.observed = {-0.6, 0.0, 0.6};
  cfg.threads = 1;
  return run_harness(t, cfg);
}

}  // namespace

TEST_CASE("histogram bins") {
  std::vector<double> low(200, 0.01);
  CHECK(build_histogram(low, 20)[0] == 200);
  std::vector<double> grid;
  for (int i = 0; i < 1000; ++i) grid.push_back((i + 0.5) / 1000);
  const auto c = build_histogram(grid, 7);
  CHECK(*std::max_element(c.begin(), c.end()) - *std::min_element(c.begin(), c.end()) <= 1);
  CHECK(std::accumulate(c.begin(), c.end(), std::size_t{0}) == 1000);
  CHECK(build_histogram(std::vector<double>{1.0}, 4)[3] == 1);
  CHECK_THROWS_AS(build_histogram(grid, 0), InvalidArgument);
}

TEST_CASE("calibration bins") {
  // eight records in [0.3, 0.4), three of them the model
  std::vector<int> q{1, 1, 1, 0, 0, 0, 0, 0};
  std::vector<double> z(8, 0.35);
  q.push_back(1);
  z.push_back(1.0);
  const auto bins = build_calibration(q, z, 10);
  REQUIRE(bins.size() == 10);
  CHECK(bins[3].n == 8);
  CHECK(bins[3].k == 3);
  CHECK(bins[3].post_mean == doctest::Approx(0.4));
  CHECK(bins[3].ci_low == doctest::Approx(0.1369956622651665).epsilon(1e-8));
  CHECK(bins[3].ci_high == doctest::Approx(0.7007049437914596).epsilon(1e-8));
  CHECK(bins[9].n == 1);
  CHECK(bins[0].n == 0);
  CHECK(bins[0].post_mean == 0.5);
  CHECK(bins[0].ci_low == doctest::Approx(0.025).epsilon(1e-8));
  CHECK(bins[0].ci_high == doctest::Approx(0.975).epsilon(1e-8));
  for (std::size_t b = 1; b < bins.size(); ++b) CHECK(bins[b].low == bins[b - 1].high);
}

TEST_CASE("calibrated data mostly fall inside the credible intervals") {
  Engine rng = make_stream(4, StreamTag::user, 0, 0);
  std::vector<int> q;
  std::vector<double> z;
  for (int j = 0; j < 10000; ++j) {
    z.push_back(uniform_open(rng));
    q.push_back(uniform_open(rng) < z.back() ? 1 : 0);
  }
  const auto bins = build_calibration(q, z, 10);
  int hit = 0, nonempty = 0;
  for (const auto& b : bins) {
    if (b.n == 0) continue;
    ++nonempty;
    if (b.ci_high >= b.low && b.ci_low <= b.high) ++hit;
  }
  CHECK(hit >= 0.9 * nonempty);
}

TEST_CASE("curves have one point per epsilon") {
  const HarnessOutput out = small_run({kInf, 1.0, 0.0});
  const auto curves = build_curves(out);
  // X2, KS for gk:g; U, V for each model; W
  CHECK(curves.size() == 7);
  for (const auto& c : curves) {
    REQUIRE(c.points.size() == 3);
    CHECK_FALSE(c.points[0].missing);
    CHECK(c.points[2].missing);
  }
  ReportOptions only;
  only.statistics = {"X2"};
  CHECK(build_curves(out, only).size() == 1);
  CHECK(build_curves(small_run({2.0})).front().points.size() == 1);
}

TEST_CASE("identical inputs at two epsilons give identical Monte-Carlo p-values") {
  // both epsilons accept everything, so z and q agree across the grid
  const HarnessOutput out = small_run({1e9, 1e8});
  for (const auto& c : build_curves(out)) {
    if (c.kind == "model") CHECK(c.points[0].p_value == c.points[1].p_value);
  }
}

TEST_CASE("emit and load round trip") {
  const HarnessOutput out = small_run({kInf, 1.5, 0.5});
  ReportOptions opt;
  opt.mc_replicates = 199;
  DiagnosticReport r = build_report(out, opt);
  const auto dir = temp_dir("rt");
  emit(r, dir);
  CHECK(load_report(dir) == r);
  std::size_t points = 0, hist = 0, cal = 0;
  for (const auto& c : r.curves) points += c.points.size();
  for (const auto& h : r.histograms) {
    hist += h.counts.size();
    CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}) > 0);
  }
  for (const auto& c : r.calibration) cal += c.bins.size();
  CHECK(data_rows(dir / "curves.csv") == points);
  CHECK(data_rows(dir / "histograms.csv") == hist);
  CHECK(data_rows(dir / "calibration.csv") == cal);
  CHECK(r.metadata["per_epsilon"].size() == 3);
  CHECK(r.metadata["config"]["epsilons"][0] == "inf");
  std::filesystem::remove_all(dir);
}

TEST_CASE("empty harness output still writes complete files") {
  HarnessOutput out;
  out.config.epsilons = {1.0};
  const DiagnosticReport r = build_report(out);
  const auto dir = temp_dir("empty");
  emit(r, dir);
  write_harness_output(out, dir);
  for (const char* f : {"curves.csv", "histograms.csv", "calibration.csv", "p0.csv", "z.csv"}) {
    CHECK(data_rows(dir / f) == 0);
  }
  CHECK(load_report(dir).metadata.contains("config"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("harness csv output") {
  const HarnessOutput out = small_run({kInf, 0.0});
  const auto dir = temp_dir("h");
  write_harness_output(out, dir);
  std::size_t gk_feasible = 0;
  for (const auto& rec : out.records) gk_feasible += rec.feasible && rec.m0 == 2;
  CHECK(data_rows(dir / "p0.csv") == gk_feasible);
  CHECK(data_rows(dir / "z.csv") == out.records.size() * 2);
  std::ifstream in(dir / "z.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "v_index,epsilon,model,z,m0,feasible");
  std::filesystem::remove_all(dir);
}

TEST_CASE("number formatting") {
  CHECK(format_number(kInf) == "inf");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3) == "0.333333333333");
  CHECK(number_from_json(number_to_json(kInf)) == kInf);
  CHECK(number_from_json(number_to_json(2.5)) == 2.5);
  CHECK_THROWS_AS(number_from_json(nlohmann::json("x")), FormatError);
}
