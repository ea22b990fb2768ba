#include <cmath>
#include <vector>

#include "doctest.h"
#include "abc/calibration_stats.hpp"
#include "abc/error.hpp"

using namespace abc;

TEST_CASE("p0 estimate") {
  const std::vector<double> draws{0.1, 0.4, 0.2, 0.9};
  CHECK(p0_estimate(draws, 0.3) == doctest::Approx(3.0 / 6));
  CHECK(p0_estimate(draws, 0.0) == doctest::Approx(1.0 / 6));
  CHECK(p0_estimate(draws, 1.0) == doctest::Approx(5.0 / 6));
  CHECK(p0_estimate({}, 1.0) == 0.5);
  // strict inequality: ties do not count as below
  CHECK(p0_estimate(draws, 0.4) == doctest::Approx(3.0 / 6));
}

TEST_CASE("X2 against reference") {
  const std::vector<double> p{0.1, 0.5, 0.9, 0.3};
  const StatReport r = x2_statistic(p);
  CHECK(r.statistic_name == "X2");
  CHECK(r.value == doctest::Approx(3.5597447280280883).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.9377047274506989).epsilon(1e-10));
  CHECK(x2_statistic(std::vector<double>(7, 0.5)).value == 0.0);
  // symmetric in p and 1 - p
  CHECK(x2_statistic(std::vector<double>{0.9, 0.5, 0.1, 0.7}).value == doctest::Approx(r.value));
  CHECK_THROWS_AS(x2_statistic(std::vector<double>{0.0, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(x2_statistic(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("KS distance and asymptotic p-value") {
  const std::vector<double> p{0.1, 0.2, 0.35, 0.5, 0.9};
  CHECK(ks_distance(p) == doctest::Approx(0.3));
  const StatReport r = ks_statistic(p);
  CHECK(r.method == StatMethod::asymptotic);
  CHECK(r.p_value == doctest::Approx(0.7590978384203948).epsilon(1e-9));
  const StatReport mc = ks_statistic(p, McOptions{999, 3, 0});
  CHECK(mc.method == StatMethod::monte_carlo);
  CHECK(mc.mc_replicates == 999u);
  // exact small-sample value is 0.664
  CHECK(mc.p_value == doctest::Approx(0.664).epsilon(0.05));
}

TEST_CASE("two-tailed rank p-value") {
  const std::vector<double> null{1, 2, 3, 4, 5, 6, 7, 8, 9};
  // lower = (1 + 9) / 10, upper = (1 + 0) / 10
  CHECK(two_tailed_rank_pvalue(null, 100) == doctest::Approx(0.2));
  CHECK(two_tailed_rank_pvalue(null, 5) == doctest::Approx(1.0));
  // lower = 3/10, upper = 8/10
  CHECK(two_tailed_rank_pvalue(null, 2) == doctest::Approx(0.6));
}

TEST_CASE("probability floor") {
  CHECK(probability_floor(0) == 0.5);
  CHECK(probability_floor(9) == doctest::Approx(0.05));
}

TEST_CASE("U and V statistic values") {
  const std::vector<int> q{1, 0, 1, 1};
  const std::vector<double> z{0.8, 0.3, 0.6, 0.1};
  const McOptions mc{499, 11, 2};
  CHECK(u_statistic(q, z, mc).value == doctest::Approx(0.75));
  const double v = std::log(0.8) + std::log(0.7) + std::log(0.6) + std::log(0.1);
  CHECK(v_statistic(q, z, {}, mc).value == doctest::Approx(v).epsilon(1e-14));
  // clamping with eta = 0.2 lifts z_4 to 0.2
  const std::vector<double> eta(4, 0.2);
  const double vc = std::log(0.8) + std::log(0.7) + std::log(0.6) + std::log(0.2);
  CHECK(v_statistic(q, z, eta, mc).value == doctest::Approx(vc).epsilon(1e-14));
}

TEST_CASE("V is constant when every z is one half") {
  const std::vector<double> z(6, 0.5);
  const StatReport a = v_statistic(std::vector<int>{1, 1, 1, 1, 1, 1}, z, {}, McOptions{199, 1, 0});
  const StatReport b = v_statistic(std::vector<int>{0, 1, 0, 0, 1, 0}, z, {}, McOptions{199, 1, 0});
  CHECK(a.value == b.value);
  CHECK(a.p_value == 1.0);
}

TEST_CASE("Monte-Carlo p-values are reproducible and depend on the stream") {
  const std::vector<int> q{1, 0, 0, 1, 1, 0, 1, 1, 1, 1};
  const std::vector<double> z{0.3, 0.6, 0.2, 0.5, 0.4, 0.7, 0.5, 0.3, 0.6, 0.4};
  const StatReport a = u_statistic(q, z, McOptions{999, 5, 1});
  const StatReport b = u_statistic(q, z, McOptions{999, 5, 1});
  CHECK(a == b);
  CHECK(a.seed == 5u);
  const StatReport c = u_statistic(q, z, McOptions{999, 6, 1});
  CHECK(c.p_value != doctest::Approx(a.p_value).epsilon(1e-12));
}

TEST_CASE("W statistic") {
  const std::vector<ModelId> m0{1, 2, 3};
  const std::vector<std::vector<double>> Z{{0.5, 0.25, 0.25}, {0.1, 0.8, 0.1}, {0.2, 0.2, 0.6}};
  const StatReport w = w_statistic(m0, Z, {}, McOptions{199, 1, 0});
  CHECK(w.value == doctest::Approx(std::log(0.5) + std::log(0.8) + std::log(0.6)));
  CHECK(w.p_value > 0.0);
  CHECK(w.p_value <= 1.0);
  const std::vector<std::vector<double>> bad{{0.5, 0.4, 0.0}, {0.1, 0.8, 0.1}, {0.2, 0.2, 0.6}};
  CHECK_THROWS_AS(w_statistic(m0, bad, {}, McOptions{}), InvalidArgument);
  const std::vector<ModelId> out_of_range{1, 4, 2};
  CHECK_THROWS_AS(w_statistic(out_of_range, Z, {}, McOptions{}), InvalidArgument);
}

TEST_CASE("method names") {
  CHECK(to_string(StatMethod::monte_carlo) == "monte-carlo");
  CHECK(stat_method_from_string("exact") == StatMethod::exact);
  CHECK_THROWS_AS(stat_method_from_string("bogus"), InvalidArgument);
}
