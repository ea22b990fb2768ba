#pragma once

// Regression post-processing of accepted ABC samples: local-linear adjustment
// of parameters and multinomial-logistic re-estimation of model probabilities.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abc/models.hpp"

namespace abc {

struct RegressionOptions {
  /// Second regression of log squared residuals to rescale residuals.
  bool heteroskedastic = false;
  int max_iterations = 100;
  /// IRLS stops when the largest coefficient change falls below this.
  double tolerance = 1e-8;
  /// Added to the diagonal of the IRLS normal equations.
  double ridge = 1e-8;
};

struct ParamFit {
  std::string param;
  bool adjusted = false;
  /// Intercept followed by one slope per summary coordinate, on the
  /// transformed parameter scale. Dropped (constant) regressors have slope 0.
  std::vector<double> coefficients;
  double residual_scale = 0.0;
  std::string warning;
};

struct AdjustedParams {
  std::vector<ParamVector> theta_star;  ///< one per accepted sample, in input order
  std::vector<ParamFit> diagnostics;    ///< one per parameter
};

struct AdjustedModelProbs {
  std::vector<double> probs;  ///< per model, evaluated at s = s_obs
  bool fallback = false;      ///< raw proportions were returned instead of the fit
  std::string warning;
  int iterations = 0;
};

/// Epanechnikov kernel weights 1 - (d/eps)^2; all ones for eps = inf.
std::vector<double> epanechnikov_weights(std::span<const double> distances, double epsilon);

/// Weighted least squares of each (transformed) parameter on s - s_obs,
/// then theta* = theta - beta^T (s - s_obs). `summaries` is n x d, `theta`
/// holds n vectors of params.size() entries. Parameters whose design is
/// rank-deficient, or with n <= d + 1, are returned unchanged and flagged.
AdjustedParams local_linear_adjust(const std::vector<ParamVector>& theta, const Eigen::MatrixXd& summaries,
                                   std::span<const double> s_obs, std::span<const double> distances, double epsilon,
                                   std::span<const ParamInfo> params, const RegressionOptions& options = {});

/// Weighted multinomial logistic regression of model id on s - s_obs fitted by
/// IRLS; returns fitted probabilities at s_obs. Falls back to raw proportions
/// (with a warning) when fewer than two models are present, on separation, or
/// without convergence.
AdjustedModelProbs multinomial_logit_adjust(std::span<const ModelId> ids, const Eigen::MatrixXd& summaries,
                                            std::span<const double> s_obs, std::span<const double> distances,
                                            double epsilon, std::size_t n_models,
                                            const RegressionOptions& options = {});

}  // namespace abc
