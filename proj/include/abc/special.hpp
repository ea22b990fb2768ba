#pragma once

// Special functions used throughout: normal quantile, chi-square and beta
// distribution functions, and the Kolmogorov limiting distribution.

namespace abc {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile, Wichura's AS241 (PPND16) rational approximation.
/// Absolute error is below 1e-15 over (0,1); returns -inf/+inf at 0/1.
double normal_quantile(double p);

/// Upper bound on the absolute error of normal_quantile that callers may budget for.
inline constexpr double kNormalQuantileTolerance = 1e-9;

/// CDF of the chi-square distribution with `dof` degrees of freedom.
double chi_square_cdf(double x, double dof);

/// Regularized incomplete beta function I_x(a, b).
double beta_cdf(double x, double a, double b);

/// Beta(a, b) quantile by bisection on beta_cdf, absolute tolerance 1e-10 in x.
double beta_quantile(double prob, double a, double b);

/// P(K >= lambda) for the Kolmogorov limiting distribution, i.e. the
/// asymptotic P(sqrt(n) * D_n >= lambda). Series are truncated once terms drop
/// below 1e-12.
double kolmogorov_survival(double lambda);

}  // namespace abc
