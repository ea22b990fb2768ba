#include "abc/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "abc/error.hpp"
#include "abc/special.hpp"

namespace abc {

std::vector<std::string> ModelSpec::param_names() const {
  std::vector<std::string> names;
  names.reserve(params.size());
  for (const auto& p : params) names.push_back(p.name);
  return names;
}

std::string_view to_string(Transform t) {
  switch (t) {
    case Transform::none:
      return "none";
    case Transform::log:
      return "log";
    case Transform::logit:
      return "logit";
  }
  return "none";
}

Transform transform_from_string(std::string_view name) {
  if (name == "none") return Transform::none;
  if (name == "log") return Transform::log;
  if (name == "logit") return Transform::logit;
  throw InvalidArgument("unknown parameter transform '" + std::string(name) + "'");
}

std::string_view to_string(SummaryKind kind) {
  switch (kind) {
    case SummaryKind::quartiles:
      return "quartiles";
    case SummaryKind::mean:
      return "mean";
    case SummaryKind::group_means:
      return "group-means";
  }
  return "quartiles";
}

SummaryKind summary_kind_from_string(std::string_view name) {
  if (name == "quartiles") return SummaryKind::quartiles;
  if (name == "mean") return SummaryKind::mean;
  if (name == "group-means") return SummaryKind::group_means;
  throw InvalidArgument("unknown summary kind '" + std::string(name) + "'");
}

std::size_t summary_dim(SummaryKind kind) {
  switch (kind) {
    case SummaryKind::quartiles:
      return 3;
    case SummaryKind::mean:
      return 1;
    case SummaryKind::group_means:
      return 9;
  }
  return 0;
}

double sorted_quantile(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw InvalidArgument("quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

SummaryVector summarize(std::span<const double> data) {
  if (data.empty()) throw InvalidArgument("summarize: empty data");
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  return {sorted_quantile(sorted, 0.25), sorted_quantile(sorted, 0.5), sorted_quantile(sorted, 0.75)};
}

SummaryVector summarize(SummaryKind kind, std::span<const double> data) {
  if (data.empty()) throw InvalidArgument("summarize: empty data");
  switch (kind) {
    case SummaryKind::quartiles:
      return summarize(data);
    case SummaryKind::mean:
      return {std::accumulate(data.begin(), data.end(), 0.0) / static_cast<double>(data.size())};
    case SummaryKind::group_means: {
      if (data.size() < 9) throw InvalidArgument("summarize: group-means needs at least 9 observations");
      SummaryVector sums(9, 0.0);
      std::vector<std::size_t> counts(9, 0);
      for (std::size_t t = 0; t < data.size(); ++t) {
        sums[t % 9] += data[t];
        ++counts[t % 9];
      }
      for (std::size_t j = 0; j < 9; ++j) sums[j] /= static_cast<double>(counts[j]);
      return sums;
    }
  }
  throw InvalidArgument("summarize: unknown summary kind");
}

// ---------------------------------------------------------------------------

void GkParams::validate() const {
  if (!std::isfinite(A) || !std::isfinite(B) || !std::isfinite(g) || !std::isfinite(k) || !std::isfinite(c)) {
    throw InvalidArgument("g-and-k: non-finite parameter");
  }
  if (!(B > 0.0)) throw InvalidArgument("g-and-k: B must be positive");
  // k in (-0.5, 0) admits non-monotone quantile functions once |g| is large
  if (!(k >= 0.0)) throw InvalidArgument("g-and-k: k must be non-negative");
  if (!(c >= 0.0 && c <= 0.83)) throw InvalidArgument("g-and-k: c must lie in [0, 0.83]");
}

double gk_quantile(double p, const GkParams& params) {
  const double z = normal_quantile(p);
  if (std::isinf(z)) return z;
  const double skew = 1.0 + params.c * std::tanh(0.5 * params.g * z);
  const double kurt = params.k == 0.0 ? 1.0 : std::pow(1.0 + z * z, params.k);
  return params.A + params.B * skew * kurt * z;
}

GkModel::GkModel(GkParams fixed, double g_max) : fixed_(fixed), g_max_(g_max) {
  fixed_.validate();
  if (!(g_max > 0.0)) throw InvalidArgument("g-and-k: prior upper bound must be positive");
  params_.push_back({"g", 0.0, g_max_, Transform::logit});
}

ParamVector GkModel::sample_prior(Engine& rng) const { return {uniform_between(rng, 0.0, g_max_)}; }

std::vector<double> GkModel::simulate(std::span<const double> theta, std::size_t n_obs, Engine& rng) const {
  if (theta.size() != 1) throw InvalidArgument("g-and-k: expected one parameter (g)");
  GkParams p = fixed_;
  p.g = theta[0];
  p.validate();
  std::vector<double> y(n_obs);
  for (auto& v : y) v = gk_quantile(uniform_open(rng), p);
  return y;
}

std::vector<double> NormalModel::simulate(std::span<const double> theta, std::size_t n_obs, Engine& rng) const {
  if (!theta.empty()) throw InvalidArgument("normal: model has no parameters");
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> y(n_obs);
  for (auto& v : y) v = dist(rng);
  return y;
}

ConjugateNormalModel::ConjugateNormalModel(double prior_mean, double prior_sd, double noise_sd)
    : prior_mean_(prior_mean), prior_sd_(prior_sd), noise_sd_(noise_sd) {
  if (!(prior_sd > 0.0) || !(noise_sd > 0.0)) {
    throw InvalidArgument("conjugate-normal: standard deviations must be positive");
  }
  params_.push_back({"mu"});
}

ParamVector ConjugateNormalModel::sample_prior(Engine& rng) const {
  return {prior_mean_ + prior_sd_ * normal_quantile(uniform_open(rng))};
}

std::vector<double> ConjugateNormalModel::simulate(std::span<const double> theta, std::size_t n_obs,
                                                   Engine& rng) const {
  if (theta.size() != 1 || !std::isfinite(theta[0])) throw InvalidArgument("conjugate-normal: expected finite mu");
  std::vector<double> y(n_obs);
  for (auto& v : y) v = theta[0] + noise_sd_ * normal_quantile(uniform_open(rng));
  return y;
}

ConjugateNormalModel::Posterior ConjugateNormalModel::posterior(double sample_mean, std::size_t n_obs) const {
  if (n_obs == 0) throw InvalidArgument("conjugate-normal: n_obs must be positive");
  const double prior_precision = 1.0 / (prior_sd_ * prior_sd_);
  const double data_precision = static_cast<double>(n_obs) / (noise_sd_ * noise_sd_);
  const double precision = prior_precision + data_precision;
  const double mean = (prior_precision * prior_mean_ + data_precision * sample_mean) / precision;
  return {mean, std::sqrt(1.0 / precision)};
}

double ConjugateNormalModel::posterior_cdf(double sample_mean, std::size_t n_obs, double mu) const {
  const Posterior post = posterior(sample_mean, n_obs);
  return normal_cdf((mu - post.mean) / post.sd);
}

Synthetic9Model::Synthetic9Model(int variant) : variant_(variant) {
  if (variant < 1 || variant > 3) throw InvalidArgument("synthetic9: variant must be 1, 2 or 3");
  name_ = "synthetic9-" + std::to_string(variant);
  for (int j = 1; j <= 9; ++j) params_.push_back({"t" + std::to_string(j), 0.0, 1.0, Transform::logit});
}

ParamVector Synthetic9Model::sample_prior(Engine& rng) const {
  ParamVector theta(9);
  for (auto& t : theta) t = uniform_between(rng, 0.0, 1.0);
  return theta;
}

std::vector<double> Synthetic9Model::simulate(std::span<const double> theta, std::size_t n_obs, Engine& rng) const {
  if (theta.size() != 9) throw InvalidArgument("synthetic9: expected 9 parameters");
  std::vector<double> y(n_obs);
  for (std::size_t t = 0; t < n_obs; ++t) {
    const double x = theta[t % 9];
    double mean = x;
    if (variant_ == 2) mean = 2.0 * x - 0.5;
    if (variant_ == 3) mean = 3.0 * x * x - 0.25;
    y[t] = mean + 0.5 * normal_quantile(uniform_open(rng));
  }
  return y;
}

double exact_posterior_cdf(const Simulator& model, std::span<const double> summary, std::size_t n_obs,
                           double theta) {
  const auto* oracle = dynamic_cast<const ConjugateNormalModel*>(&model);
  if (oracle == nullptr) {
    throw InvalidArgument("exact_posterior_cdf: model '" + std::string(model.name()) + "' has no exact posterior");
  }
  if (summary.size() != 1) throw InvalidArgument("exact_posterior_cdf: expected a sample-mean summary");
  return oracle->posterior_cdf(summary[0], n_obs, theta);
}

std::shared_ptr<const Simulator> make_model(std::string_view name) {
  if (name == "normal") return std::make_shared<NormalModel>();
  if (name == "gk") return std::make_shared<GkModel>();
  if (name == "conjugate-normal") return std::make_shared<ConjugateNormalModel>();
  if (name == "synthetic9-1") return std::make_shared<Synthetic9Model>(1);
  if (name == "synthetic9-2") return std::make_shared<Synthetic9Model>(2);
  if (name == "synthetic9-3") return std::make_shared<Synthetic9Model>(3);
  throw InvalidArgument("unknown model '" + std::string(name) + "'");
}

std::vector<std::string> builtin_model_names() {
  return {"normal", "gk", "conjugate-normal", "synthetic9-1", "synthetic9-2", "synthetic9-3"};
}

// ---------------------------------------------------------------------------

namespace {

SummaryKind common_summary(const std::vector<std::shared_ptr<const Simulator>>& models) {
  if (models.empty()) throw InvalidArgument("model set is empty");
  const SummaryKind kind = models.front()->natural_summary();
  for (const auto& m : models) {
    if (m->natural_summary() != kind) {
      throw InvalidArgument("models in a set use different summary statistics; specify one explicitly");
    }
  }
  return kind;
}

std::vector<std::shared_ptr<const Simulator>> instantiate(const std::vector<ModelSet::Entry>& entries) {
  std::vector<std::shared_ptr<const Simulator>> models;
  for (const auto& e : entries) models.push_back(make_model(e.name));
  return models;
}

std::vector<double> weights_of(const std::vector<ModelSet::Entry>& entries) {
  std::vector<double> w;
  for (const auto& e : entries) w.push_back(e.prior_weight);
  return w;
}

}  // namespace

ModelSet::ModelSet(const std::vector<Entry>& entries, std::size_t n_obs, std::optional<SummaryKind> summary) {
  auto models = instantiate(entries);
  const SummaryKind kind = summary ? *summary : common_summary(models);
  *this = ModelSet(std::move(models), weights_of(entries), n_obs, kind);
}

ModelSet::ModelSet(std::vector<std::shared_ptr<const Simulator>> models, std::vector<double> prior_weights,
                   std::size_t n_obs, SummaryKind summary)
    : models_(std::move(models)), n_obs_(n_obs), summary_(summary) {
  if (models_.empty()) throw InvalidArgument("model set is empty");
  if (prior_weights.size() != models_.size()) throw InvalidArgument("one prior weight per model required");
  if (n_obs_ == 0) throw InvalidArgument("n_obs must be at least 1");
  double total = 0.0;
  for (double w : prior_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("prior weights must be positive");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-12) throw InvalidArgument("prior weights must sum to 1");
  for (std::size_t i = 0; i < models_.size(); ++i) {
    specs_.push_back({static_cast<ModelId>(i + 1), std::string(models_[i]->name()), prior_weights[i],
                      models_[i]->params()});
  }
}

void ModelSet::check_id(ModelId id) const {
  if (id < 1 || static_cast<std::size_t>(id) > models_.size()) {
    throw InvalidArgument("unregistered model id " + std::to_string(id));
  }
}

const ModelSpec& ModelSet::spec(ModelId id) const {
  check_id(id);
  return specs_[static_cast<std::size_t>(id - 1)];
}

const Simulator& ModelSet::simulator(ModelId id) const {
  check_id(id);
  return *models_[static_cast<std::size_t>(id - 1)];
}

std::vector<double> ModelSet::prior_weights() const {
  std::vector<double> w;
  for (const auto& s : specs_) w.push_back(s.prior_weight);
  return w;
}

ParamVector ModelSet::sample_prior(ModelId id, Engine& rng) const { return simulator(id).sample_prior(rng); }

std::vector<double> ModelSet::simulate(ModelId id, std::span<const double> theta, Engine& rng) const {
  return simulator(id).simulate(theta, n_obs_, rng);
}

ModelSet benchmark_model_set(std::size_t n_obs) {
  return ModelSet({{"normal", 0.5}, {"gk", 0.5}}, n_obs);
}

ModelSet conjugate_model_set(std::size_t n_obs) { return ModelSet({{"conjugate-normal", 1.0}}, n_obs); }

ModelSet synthetic_model_set(std::size_t n_obs) {
  const double third = 1.0 / 3.0;
  return ModelSet(
      {std::make_shared<Synthetic9Model>(1), std::make_shared<Synthetic9Model>(2),
       std::make_shared<Synthetic9Model>(3)},
      {third, third, 1.0 - 2.0 * third}, n_obs, SummaryKind::group_means);
}

}  // namespace abc
