#pragma once

// Simulator/prior/summary interface plus the built-in models:
//   "normal"           N(0,1), no parameters
//   "gk"               g-and-k with A=0, B=1, k=0, c=0.8 and g ~ U(0,4)
//   "conjugate-normal" N(mu, 1) data with mu ~ N(0,1); exact posterior known
//   "synthetic9-{1,2,3}" three 9-parameter models for workflow tests

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abc/random.hpp"

namespace abc {

using ModelId = int;  ///< 1-based model index within a ModelSet.
using ParamVector = std::vector<double>;
using SummaryVector = std::vector<double>;

/// Support transform applied before regression adjustment.
enum class Transform { none, log, logit };

struct ParamInfo {
  std::string name;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  Transform transform = Transform::none;

  bool operator==(const ParamInfo&) const = default;
};

std::string_view to_string(Transform t);
Transform transform_from_string(std::string_view name);

struct ModelSpec {
  ModelId model_id = 0;
  std::string name;
  double prior_weight = 0.0;
  std::vector<ParamInfo> params;

  std::size_t param_dim() const { return params.size(); }
  std::vector<std::string> param_names() const;
};

/// How a data vector is reduced to a SummaryVector.
enum class SummaryKind {
  quartiles,    ///< (lower quartile, median, upper quartile), type-7 interpolation
  mean,         ///< sample mean; sufficient for the conjugate-normal model
  group_means,  ///< means of the 9 residue classes of the observation index
};

std::string_view to_string(SummaryKind kind);
SummaryKind summary_kind_from_string(std::string_view name);
std::size_t summary_dim(SummaryKind kind);

/// Type-7 sample quantile of already sorted data.
double sorted_quantile(std::span<const double> sorted, double prob);

/// Quartile summary (lower quartile, median, upper quartile).
SummaryVector summarize(std::span<const double> data);
SummaryVector summarize(SummaryKind kind, std::span<const double> data);

/// A generative model: prior over parameters and a data simulator.
class Simulator {
 public:
  virtual ~Simulator() = default;
  virtual std::string_view name() const = 0;
  virtual const std::vector<ParamInfo>& params() const = 0;
  virtual ParamVector sample_prior(Engine& rng) const = 0;
  virtual std::vector<double> simulate(std::span<const double> theta, std::size_t n_obs, Engine& rng) const = 0;
  virtual SummaryKind natural_summary() const { return SummaryKind::quartiles; }
};

// ---------------------------------------------------------------------------
// g-and-k

struct GkParams {
  double A = 0.0;
  double B = 1.0;
  double g = 0.0;
  double k = 0.0;
  double c = 0.8;

  /// Throws InvalidArgument unless B > 0, k >= 0, 0 <= c <= 0.83 and all
  /// entries are finite; inside that region Q is strictly increasing.
  void validate() const;
};

/// Q(p) = A + B (1 + c tanh(g z / 2)) (1 + z^2)^k z with z = normal_quantile(p).
double gk_quantile(double p, const GkParams& params);

/// gk(A, B, g, k) with only g free; default matches gk(0,1,g,0) with g ~ U(0, g_max).
class GkModel final : public Simulator {
 public:
  explicit GkModel(GkParams fixed = {}, double g_max = 4.0);
  std::string_view name() const override { return "gk"; }
  const std::vector<ParamInfo>& params() const override { return params_; }
  ParamVector sample_prior(Engine& rng) const override;
  std::vector<double> simulate(std::span<const double> theta, std::size_t n_obs, Engine& rng) const override;

  const GkParams& fixed() const { return fixed_; }

 private:
  GkParams fixed_;
  double g_max_;
  std::vector<ParamInfo> params_;
};

class NormalModel final : public Simulator {
 public:
  std::string_view name() const override { return "normal"; }
  const std::vector<ParamInfo>& params() const override { return params_; }
  ParamVector sample_prior(Engine&) const override { return {}; }
  std::vector<double> simulate(std::span<const double> theta, std::size_t n_obs, Engine& rng) const override;

 private:
  std::vector<ParamInfo> params_;
};

/// y_i ~ N(mu, noise_sd^2) with mu ~ N(prior_mean, prior_sd^2). The sample mean
/// is sufficient, so the exact posterior given the summary is available.
class ConjugateNormalModel final : public Simulator {
 public:
  ConjugateNormalModel(double prior_mean = 0.0, double prior_sd = 1.0, double noise_sd = 1.0);
  std::string_view name() const override { return "conjugate-normal"; }
  const std::vector<ParamInfo>& params() const override { return params_; }
  ParamVector sample_prior(Engine& rng) const override;
  std::vector<double> simulate(std::span<const double> theta, std::size_t n_obs, Engine& rng) const override;
  SummaryKind natural_summary() const override { return SummaryKind::mean; }

  struct Posterior {
    double mean;
    double sd;
  };
  /// Posterior of mu given the sample mean of n_obs observations.
  Posterior posterior(double sample_mean, std::size_t n_obs) const;
  double posterior_cdf(double sample_mean, std::size_t n_obs, double mu) const;

 private:
  double prior_mean_;
  double prior_sd_;
  double noise_sd_;
  std::vector<ParamInfo> params_;
};

/// Nine U(0,1) parameters; observation t has mean f(theta_{t mod 9}) with a
/// model-specific response f and unit-scale noise.
class Synthetic9Model final : public Simulator {
 public:
  explicit Synthetic9Model(int variant);
  std::string_view name() const override { return name_; }
  const std::vector<ParamInfo>& params() const override { return params_; }
  ParamVector sample_prior(Engine& rng) const override;
  std::vector<double> simulate(std::span<const double> theta, std::size_t n_obs, Engine& rng) const override;
  SummaryKind natural_summary() const override { return SummaryKind::group_means; }

 private:
  int variant_;
  std::string name_;
  std::vector<ParamInfo> params_;
};

/// Exact posterior CDF for an oracle model; throws InvalidArgument for any
/// other simulator.
double exact_posterior_cdf(const Simulator& model, std::span<const double> summary, std::size_t n_obs, double theta);

/// Instantiate a built-in model by registry name.
std::shared_ptr<const Simulator> make_model(std::string_view name);
std::vector<std::string> builtin_model_names();

/// An ordered collection of models sharing one summary statistic.
class ModelSet {
 public:
  struct Entry {
    std::string name;
    double prior_weight;
  };

  ModelSet() = default;
  /// Built-in models by name. Prior weights must sum to 1 within 1e-12. When no
  /// summary kind is given all models must share the same natural summary.
  ModelSet(const std::vector<Entry>& entries, std::size_t n_obs, std::optional<SummaryKind> summary = std::nullopt);
  /// Custom in-process registration.
  ModelSet(std::vector<std::shared_ptr<const Simulator>> models, std::vector<double> prior_weights, std::size_t n_obs,
           SummaryKind summary);

  std::size_t size() const { return models_.size(); }
  std::size_t n_obs() const { return n_obs_; }
  SummaryKind summary_kind() const { return summary_; }
  std::size_t summary_dim() const { return abc::summary_dim(summary_); }

  const ModelSpec& spec(ModelId id) const;
  const Simulator& simulator(ModelId id) const;
  const std::vector<ModelSpec>& specs() const { return specs_; }
  std::vector<double> prior_weights() const;

  ParamVector sample_prior(ModelId id, Engine& rng) const;
  std::vector<double> simulate(ModelId id, std::span<const double> theta, Engine& rng) const;
  SummaryVector summarize(std::span<const double> data) const { return abc::summarize(summary_, data); }

 private:
  void check_id(ModelId id) const;

  std::vector<std::shared_ptr<const Simulator>> models_;
  std::vector<ModelSpec> specs_;
  std::size_t n_obs_ = 0;
  SummaryKind summary_ = SummaryKind::quartiles;
};

/// N(0,1) vs gk(0,1,g,0), equal prior weights, quartile summaries.
ModelSet benchmark_model_set(std::size_t n_obs = 100);
/// Conjugate-normal oracle alone, sample-mean summary.
ModelSet conjugate_model_set(std::size_t n_obs = 10);
/// Three equally weighted 9-parameter synthetic models.
ModelSet synthetic_model_set(std::size_t n_obs = 90);

}  // namespace abc
