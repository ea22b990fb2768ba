#pragma once

// Coverage p-values and the uniformity / calibration statistics X2, KS, U, V, W.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abc/models.hpp"
#include "abc/random.hpp"

namespace abc {

enum class StatMethod { exact, asymptotic, monte_carlo };
std::string_view to_string(StatMethod m);
StatMethod stat_method_from_string(std::string_view s);

struct StatReport {
  std::string statistic_name;  ///< X2, KS, U, V or W
  double value = 0.0;
  double p_value = 1.0;
  StatMethod method = StatMethod::asymptotic;
  std::optional<std::size_t> mc_replicates;
  std::optional<std::uint64_t> seed;

  bool operator==(const StatReport&) const = default;
};

/// Monte-Carlo null settings. Replicate b always draws from
/// make_stream(seed, StreamTag::mc_null, stream, b), never from anything that
/// depends on epsilon, so curves over epsilon share their null draws.
struct McOptions {
  std::size_t replicates = 999;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// (1 + #{draws < theta0}) / (2 + n)
double p0_estimate(std::span<const double> draws, double theta0);

/// sum of normal_quantile(p_i)^2, two-tailed against chi-square with c dof.
StatReport x2_statistic(std::span<const double> p);

/// One-sample KS distance from U(0,1). The p-value is the one-tailed
/// asymptotic Kolmogorov tail at sqrt(c) * Y, or a Monte-Carlo estimate when
/// `mc` is given.
double ks_distance(std::span<const double> p);
StatReport ks_statistic(std::span<const double> p, const std::optional<McOptions>& mc = std::nullopt);

/// Two-tailed rank p-value min(1, 2 min(lower, upper)) with lower =
/// (1 + #{null <= observed}) / (B + 1) and upper likewise with >=.
double two_tailed_rank_pvalue(std::span<const double> null_values, double observed);

/// Simulates `replicates` null statistics with per-replicate streams and
/// returns the two-tailed rank p-value of `observed`.
using NullDraw = std::function<double(Engine&)>;
double mc_null_pvalue(const NullDraw& draw, double observed, const McOptions& mc);

/// Clamp floor for model probabilities estimated from n accepted samples:
/// 1 / (2 (n + 1)).
double probability_floor(std::size_t n_accepted);

/// U = mean(q), null q*_j ~ Bernoulli(z_j).
StatReport u_statistic(std::span<const int> q, std::span<const double> z, const McOptions& mc);

/// V = sum q_j log z_j + (1 - q_j) log(1 - z_j) with z_j clamped to
/// [eta_j, 1 - eta_j]. `eta` holds one floor per record, or is empty for none.
StatReport v_statistic(std::span<const int> q, std::span<const double> z, std::span<const double> eta,
                       const McOptions& mc);

/// W = sum_j log Z_j(m0_j) with entries clamped to [eta_j, 1 - eta_j];
/// null m*_j ~ Z_j. Model ids are 1-based.
StatReport w_statistic(std::span<const ModelId> m0, const std::vector<std::vector<double>>& z,
                       std::span<const double> eta, const McOptions& mc);

}  // namespace abc
