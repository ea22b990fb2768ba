#pragma once

// Coverage diagnostics loop: choose pseudo-observed rows V from the reference
// table, run a leave-one-out ABC analysis for every (row, epsilon) cell and
// record coverage p-values and model probabilities.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abc/engine.hpp"
#include "abc/reference_table.hpp"

namespace abc {

enum class VMode { truncated, prior };
enum class AdjustMode { none, regression };

std::string_view to_string(VMode m);
std::string_view to_string(AdjustMode m);
std::string_view to_string(ModelProbMode m);
VMode v_mode_from_string(std::string_view s);
AdjustMode adjust_mode_from_string(std::string_view s);
ModelProbMode model_prob_mode_from_string(std::string_view s);

struct HarnessConfig {
  std::size_t c = 200;
  std::vector<double> epsilons;  ///< strictly decreasing, >= 0; may start with +inf
  VMode v_mode = VMode::truncated;
  AdjustMode adjust = AdjustMode::none;
  ModelProbMode model_prob_mode = ModelProbMode::reweighted;
  std::uint64_t seed = 0;
  SummaryVector observed;
  RegressionOptions regression;
  std::size_t threads = 0;  ///< 0 = hardware concurrency; never affects results
};

struct CoverageRecord {
  std::size_t v_index = 0;    ///< position within V
  std::size_t table_row = 0;  ///< row of U used as (m0, theta0, s0)
  double epsilon = 0.0;
  ModelId m0 = 0;
  std::vector<double> p0;  ///< one per parameter of m0; empty when infeasible
  std::vector<double> z;   ///< per-model probabilities; empty when infeasible
  bool feasible = false;
  std::size_t n_accepted = 0;
  std::size_t n_param_draws = 0;  ///< accepted samples from model m0
  std::string warning;

  bool operator==(const CoverageRecord&) const = default;
};

struct EpsilonSummary {
  double epsilon = 0.0;
  std::size_t total_accepted = 0;
  std::size_t min_accepted = 0;
  std::size_t infeasible = 0;

  bool operator==(const EpsilonSummary&) const = default;
};

struct HarnessOutput {
  HarnessConfig config;
  std::vector<TableModel> models;
  std::vector<std::size_t> v_rows;
  /// c x q records, row-major by V element then epsilon.
  std::vector<CoverageRecord> records;
  std::vector<EpsilonSummary> per_epsilon;
  nlohmann::json provenance = nlohmann::json::object();

  const CoverageRecord& record(std::size_t v, std::size_t eps) const {
    return records[v * config.epsilons.size() + eps];
  }
};

/// Throws InvalidArgument unless the grid is non-empty, non-negative and
/// strictly decreasing; returns it unchanged.
std::vector<double> validate_grid(std::vector<double> epsilons);

struct GridSpec {
  std::size_t q = 20;
  double max_fraction = 0.5;
  std::optional<double> min_fraction;  ///< defaults to 100 / N
};

/// Geometrically spaced acceptance fractions from max_fraction down to
/// min_fraction (max_fraction alone when q = 1).
std::vector<double> acceptance_fractions(const GridSpec& spec, std::size_t n_rows);

/// Epsilon at acceptance fraction f is the ceil(f N)-th smallest distance from
/// the table to `observed`; returned in descending order.
std::vector<double> epsilon_grid(const ReferenceTable& table, std::span<const double> observed,
                                 const GridSpec& spec = {});

/// Truncated mode: the c rows nearest `observed`. Prior mode: c rows sampled
/// uniformly without replacement from a stream derived from seed.
std::vector<std::size_t> select_v(const ReferenceTable& table, std::span<const double> observed, std::size_t c,
                                  VMode mode, std::uint64_t seed);

/// Reuses U for every analysis (leave-one-out).
HarnessOutput run_harness(const ReferenceTable& table, const HarnessConfig& config);

/// Like run_harness, but every V element is analysed against a freshly
/// simulated table of size N - 1 sharing U's distance scale.
HarnessOutput resimulate_mode(const ModelSet& models, const ReferenceTable& table, const HarnessConfig& config,
                              Allocation allocation = Allocation::equal);

}  // namespace abc
