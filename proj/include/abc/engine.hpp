#pragma once

// One ABC analysis under the uniform kernel: accept every row of the
// reference table within epsilon of the target summary.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "abc/error.hpp"
#include "abc/reference_table.hpp"
#include "abc/regression.hpp"

namespace abc {

/// Optional table row removed before the analysis (W = U \ {row}).
struct LeaveOneOut {
  std::optional<std::size_t> excluded;
};

enum class ModelProbMode { raw, reweighted };

struct AbcOptions {
  ModelProbMode model_probs = ModelProbMode::reweighted;
  bool regression = false;
  /// Model whose parameter draws are regression-adjusted (regression only).
  std::optional<ModelId> adjust_params_for;
  RegressionOptions regression_options;
};

struct AbcResult {
  double epsilon = 0.0;
  std::vector<std::size_t> accepted_indices;  ///< ascending table rows
  std::size_t n_accepted = 0;
  std::vector<double> model_probs;

  /// Regression output, present only when requested.
  std::optional<AdjustedParams> adjusted_params;
  std::vector<std::size_t> adjusted_rows;  ///< table rows behind adjusted_params.theta_star
  std::optional<AdjustedModelProbs> model_fit;
};

/// Raised when no row lies within epsilon of the target.
class NoAcceptancesError : public Error {
 public:
  explicit NoAcceptancesError(double epsilon);
  double epsilon;
};

/// Rows with distance(s_i, target) <= epsilon, excluding loo.excluded.
std::vector<std::size_t> accept(const ReferenceTable& table, std::span<const double> target, double epsilon,
                                LeaveOneOut loo = {});
/// Same, from distances precomputed by distances_to().
std::vector<std::size_t> accept_within(std::span<const double> distances, double epsilon, LeaveOneOut loo = {});

/// Per-model acceptance proportions; throws NoAcceptancesError when empty.
std::vector<double> raw_model_probs(const ReferenceTable& table, std::span<const std::size_t> accepted,
                                    double epsilon = 0.0);

/// Proportion of each model in U, or in W = U \ {excluded} when loo is set.
std::vector<double> model_proportions(const ReferenceTable& table, LeaveOneOut loo = {});

/// g~(i) proportional to g(i) h_i(U) / h_i(W), renormalized.
std::vector<double> reweight_model_probs(std::span<const double> raw, std::span<const double> h_u,
                                         std::span<const double> h_w);

/// Parameter `param` of model `model` over the accepted rows from that model.
std::vector<double> posterior_draws(const ReferenceTable& table, std::span<const std::size_t> accepted,
                                    ModelId model, std::size_t param);

AbcResult run_abc(const ReferenceTable& table, std::span<const double> target, double epsilon, LeaveOneOut loo,
                  const AbcOptions& options = {});
/// Variant reusing distances from target to every row.
AbcResult run_abc(const ReferenceTable& table, std::span<const double> distances, std::span<const double> target,
                  double epsilon, LeaveOneOut loo, const AbcOptions& options = {});

}  // namespace abc
