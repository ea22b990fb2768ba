#include <cmath>
#include <limits>

#include "doctest.h"
#include "abc/random.hpp"
#include "abc/regression.hpp"

using namespace abc;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("Epanechnikov weights") {
  const std::vector<double> d{0.0, 0.5, 1.0, 2.0};
  const auto w = epanechnikov_weights(d, 1.0);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == doctest::Approx(0.75));
  CHECK(w[2] == 0.0);
  CHECK(w[3] == 0.0);
  const auto all = epanechnikov_weights(d, kInf);
  for (double x : all) CHECK(x == 1.0);
}

TEST_CASE("exact linear relation is removed completely") {
  // theta = 1 + 2 s1 - s2, so theta* = 1 + 2 s1_obs - s2_obs for every sample
  const std::size_t n = 40;
  Eigen::MatrixXd s(n, 2);
  std::vector<ParamVector> theta(n);
  std::vector<double> d(n, 0.0);
  Engine rng = make_stream(1, StreamTag::user, 0, 0);
  for (std::size_t i = 0; i < n; ++i) {
    s(i, 0) = uniform_between(rng, -1, 1);
    s(i, 1) = uniform_between(rng, -1, 1);
    theta[i] = {1 + 2 * s(i, 0) - s(i, 1)};
    d[i] = std::hypot(s(i, 0) - 0.2, s(i, 1) + 0.1);
  }
  const std::vector<double> obs{0.2, -0.1};
  const std::vector<ParamInfo> params{{"t", -kInf, kInf, Transform::none}};
  const AdjustedParams a = local_linear_adjust(theta, s, obs, d, 3.0, params);
  REQUIRE(a.diagnostics[0].adjusted);
  for (const auto& t : a.theta_star) CHECK(t[0] == doctest::Approx(1 + 0.4 + 0.1).epsilon(1e-9));
  const auto& beta = a.diagnostics[0].coefficients;
  CHECK(beta[0] == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(beta[1] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(beta[2] == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("weighted slope matches the closed form") {
  const std::vector<double> sv{0, 1, 2, 3, 4, 5};
  const std::vector<double> tv{0.1, 0.9, 2.3, 2.8, 4.4, 4.9};
  const std::vector<double> d{0.9, 0.3, 0.1, 0.2, 0.6, 0.95};
  Eigen::MatrixXd s(6, 1);
  std::vector<ParamVector> theta;
  for (int i = 0; i < 6; ++i) {
    s(i, 0) = sv[i];
    theta.push_back({tv[i]});
  }
  const auto w = epanechnikov_weights(d, 1.0);
  double sw = 0, sx = 0, sy = 0;
  for (int i = 0; i < 6; ++i) {
    sw += w[i];
    sx += w[i] * sv[i];
    sy += w[i] * tv[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 6; ++i) {
    sxy += w[i] * (sv[i] - mx) * (tv[i] - my);
    sxx += w[i] * (sv[i] - mx) * (sv[i] - mx);
  }
  const std::vector<double> obs{2.0};
  const std::vector<ParamInfo> params{{"t", -kInf, kInf, Transform::none}};
  const AdjustedParams a = local_linear_adjust(theta, s, obs, d, 1.0, params);
  CHECK(a.diagnostics[0].coefficients[1] == doctest::Approx(sxy / sxx).epsilon(1e-10));
}

TEST_CASE("too few points or a constant design leaves parameters unchanged") {
  Eigen::MatrixXd s(3, 2);
  s << 0, 1, 1, 0, 2, 2;
  const std::vector<ParamVector> theta{{0.1}, {0.2}, {0.3}};
  const std::vector<double> d{0.1, 0.1, 0.1}, obs{0, 0};
  const std::vector<ParamInfo> params{{"t", 0, 1, Transform::logit}};
  const AdjustedParams a = local_linear_adjust(theta, s, obs, d, 1.0, params);
  CHECK_FALSE(a.diagnostics[0].adjusted);
  CHECK_FALSE(a.diagnostics[0].warning.empty());
  CHECK(a.theta_star == theta);
}

TEST_CASE("logit transform keeps adjusted values inside the prior support") {
  const std::size_t n = 200;
  Eigen::MatrixXd s(n, 1);
  std::vector<ParamVector> theta(n);
  std::vector<double> d(n);
  Engine rng = make_stream(2, StreamTag::user, 0, 0);
  for (std::size_t i = 0; i < n; ++i) {
    theta[i] = {uniform_between(rng, 0, 4)};
    s(i, 0) = theta[i][0] + 0.3 * (uniform_open(rng) - 0.5);
    d[i] = std::fabs(s(i, 0) - 3.9);
  }
  const std::vector<double> obs{3.9};
  const std::vector<ParamInfo> params{{"g", 0, 4, Transform::logit}};
  const AdjustedParams a = local_linear_adjust(theta, s, obs, d, kInf, params);
  for (const auto& t : a.theta_star) {
    CHECK(t[0] > 0);
    CHECK(t[0] < 4);
  }
}

TEST_CASE("multinomial logit recovers a known logistic curve") {
  // P(m = 2 | s) = 1 / (1 + exp(-(0.5 + 1.5 s)))
  const std::size_t n = 20000;
  Eigen::MatrixXd s(n, 1);
  std::vector<ModelId> ids(n);
  std::vector<double> d(n);
  Engine rng = make_stream(3, StreamTag::user, 0, 0);
  for (std::size_t i = 0; i < n; ++i) {
    s(i, 0) = uniform_between(rng, -2, 2);
    const double p2 = 1 / (1 + std::exp(-(0.5 + 1.5 * s(i, 0))));
    ids[i] = uniform_open(rng) < p2 ? 2 : 1;
    d[i] = std::fabs(s(i, 0) - 0.4);
  }
  const std::vector<double> obs{0.4};
  const AdjustedModelProbs r = multinomial_logit_adjust(ids, s, obs, d, kInf, 2);
  CHECK_FALSE(r.fallback);
  const double truth = 1 / (1 + std::exp(-(0.5 + 1.5 * 0.4)));
  CHECK(r.probs[1] == doctest::Approx(truth).epsilon(0.03));
  CHECK(r.probs[0] + r.probs[1] == doctest::Approx(1.0));
}

TEST_CASE("multinomial logit falls back on one model and on separation") {
  Eigen::MatrixXd s(6, 1);
  s << -3, -2, -1, 1, 2, 3;
  const std::vector<double> d(6, 0.0), obs{0.0};
  const std::vector<ModelId> one{2, 2, 2, 2, 2, 2};
  const AdjustedModelProbs a = multinomial_logit_adjust(one, s, obs, d, kInf, 3);
  CHECK(a.fallback);
  CHECK(a.probs == std::vector<double>{0, 1, 0});
  const std::vector<ModelId> sep{1, 1, 1, 2, 2, 2};
  const AdjustedModelProbs b = multinomial_logit_adjust(sep, s, obs, d, kInf, 2);
  CHECK(b.fallback);
  CHECK(b.probs[0] == doctest::Approx(0.5));
}
