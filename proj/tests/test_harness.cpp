#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "abc/harness.hpp"

using namespace abc;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

const ReferenceTable& bench_table() {
  static const ReferenceTable t = build_table(benchmark_model_set(50), 3000, Allocation::equal, 17, 1);
  return t;
}
}  // namespace

TEST_CASE("grid validation") {
  CHECK(validate_grid({kInf, 2, 1, 0}) == std::vector<double>{kInf, 2, 1, 0});
  CHECK_THROWS_AS(validate_grid({}), InvalidArgument);
  CHECK_THROWS_AS(validate_grid({1, 2}), InvalidArgument);
  CHECK_THROWS_AS(validate_grid({2, 2}), InvalidArgument);
  CHECK_THROWS_AS(validate_grid({1, -1}), InvalidArgument);
  const std::vector<double> bench{13, 1.5, 0.28};
  CHECK(validate_grid(bench) == bench);
}

TEST_CASE("acceptance fractions are geometric") {
  const auto f = acceptance_fractions(GridSpec{}, 10000);
  REQUIRE(f.size() == 20);
  CHECK(f.front() == doctest::Approx(0.5));
  CHECK(f.back() == doctest::Approx(0.01));
  for (std::size_t j = 1; j + 1 < f.size(); ++j) CHECK(f[j] * f[j] == doctest::Approx(f[j - 1] * f[j + 1]));
  CHECK(acceptance_fractions(GridSpec{1}, 100) == std::vector<double>{0.5});
}

TEST_CASE("epsilon grid is the distance order statistic") {
  const ReferenceTable& t = bench_table();
  const auto s = t.summary(5);
  const std::vector<double> obs(s.begin(), s.end());
  const auto eps = epsilon_grid(t, obs, GridSpec{3});
  std::vector<double> d = distances_to(t, obs);
  std::sort(d.begin(), d.end());
  // ceil(0.5 * 3000) = 1500th smallest
  CHECK(eps[0] == d[1499]);
  CHECK(eps[2] == d[99]);
  CHECK(eps[0] > eps[1]);
  CHECK(accept(t, obs, eps[2]).size() >= 100);
}

TEST_CASE("V selection") {
  const ReferenceTable& t = bench_table();
  const std::vector<double> obs{-0.6, 0.0, 0.6};
  CHECK(select_v(t, obs, 40, VMode::truncated, 1) == nearest(t, obs, 40));
  const auto a = select_v(t, obs, 40, VMode::prior, 1);
  CHECK(a == select_v(t, obs, 40, VMode::prior, 1));
  CHECK(a != select_v(t, obs, 40, VMode::prior, 2));
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 40);
}

TEST_CASE("harness records") {
  const ReferenceTable& t = bench_table();
  HarnessConfig cfg;
  cfg.c = 30;
  cfg.epsilons = {kInf, 1.0, 0.0};
  cfg.observed = {-0.6, 0.0, 0.6};
  cfg.seed = 4;
  cfg.threads = 1;
  const HarnessOutput out = run_harness(t, cfg);
  REQUIRE(out.records.size() == 90);
  CHECK(out.v_rows.size() == 30);
  for (std::size_t v = 0; v < 30; ++v) {
    const CoverageRecord& r = out.record(v, 0);
    CHECK(r.v_index == v);
    CHECK(r.table_row == out.v_rows[v]);
    CHECK(r.feasible);
    CHECK(r.n_accepted == t.size() - 1);
    CHECK(r.p0.size() == t.param_dim(r.m0));
    CHECK(r.z.size() == 2);
    // eps = 0 with continuous summaries leaves nothing once s0 itself is removed
    CHECK_FALSE(out.record(v, 2).feasible);
    CHECK(out.record(v, 2).p0.empty());
  }
  CHECK(out.per_epsilon[2].infeasible == 30);
  CHECK(out.per_epsilon[0].min_accepted == t.size() - 1);
  CHECK(out.provenance["table_checksum"] == table_checksum(t));

  HarnessConfig many = cfg;
  many.threads = 5;
  CHECK(run_harness(t, many).records == out.records);
}

TEST_CASE("harness rejects bad configurations") {
  const ReferenceTable& t = bench_table();
  HarnessConfig cfg;
  cfg.epsilons = {1.0};
  cfg.observed = {0.0, 0.0};
  CHECK_THROWS_AS(run_harness(t, cfg), InvalidArgument);
  cfg.observed = {0.0, 0.0, 0.0};
  cfg.c = t.size() + 1;
  CHECK_THROWS_AS(run_harness(t, cfg), InvalidArgument);
  cfg.c = 5;
  cfg.epsilons = {};
  CHECK_THROWS_AS(run_harness(t, cfg), InvalidArgument);
}

TEST_CASE("resimulation mode has the same shape") {
  const ModelSet models = conjugate_model_set(10);
  const ReferenceTable t = build_table(models, 800, Allocation::equal, 3, 1);
  HarnessConfig cfg;
  cfg.c = 10;
  cfg.observed = {0.2};
  cfg.epsilons = epsilon_grid(t, cfg.observed, GridSpec{3});
  cfg.threads = 1;
  const HarnessOutput reuse = run_harness(t, cfg);
  const HarnessOutput resim = resimulate_mode(models, t, cfg);
  CHECK(resim.records.size() == reuse.records.size());
  CHECK(resim.v_rows == reuse.v_rows);
  CHECK(resim.provenance["analysis"] == "resimulate");
  for (std::size_t i = 0; i < resim.records.size(); ++i) {
    CHECK(resim.records[i].m0 == reuse.records[i].m0);
    if (resim.records[i].feasible) CHECK(resim.records[i].p0.size() == 1);
  }
}

TEST_CASE("regression adjustment in the harness") {
  const ReferenceTable& t = bench_table();
  HarnessConfig cfg;
  cfg.c = 10;
  cfg.epsilons = {1.5};
  cfg.observed = {-0.6, 0.0, 0.6};
  cfg.adjust = AdjustMode::regression;
  cfg.threads = 1;
  const HarnessOutput out = run_harness(t, cfg);
  for (const auto& r : out.records) {
    CHECK(r.feasible);
    CHECK(r.z[0] + r.z[1] == doctest::Approx(1.0));
  }
}

TEST_CASE("mode names round trip") {
  CHECK(v_mode_from_string(to_string(VMode::prior)) == VMode::prior);
  CHECK(adjust_mode_from_string("regression") == AdjustMode::regression);
  CHECK(model_prob_mode_from_string(to_string(ModelProbMode::raw)) == ModelProbMode::raw);
  CHECK_THROWS_AS(v_mode_from_string("posterior"), InvalidArgument);
}
