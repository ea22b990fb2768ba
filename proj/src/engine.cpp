#include "abc/engine.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace abc {

namespace {

std::string describe_epsilon(double epsilon) {
  std::ostringstream s;
  s << "no samples accepted at epsilon " << epsilon;
  return s.str();
}

}  // namespace

NoAcceptancesError::NoAcceptancesError(double eps) : Error(describe_epsilon(eps)), epsilon(eps) {}

std::vector<std::size_t> accept_within(std::span<const double> distances, double epsilon, LeaveOneOut loo) {
  if (std::isnan(epsilon) || epsilon < 0.0) throw InvalidArgument("accept: epsilon must be >= 0");
  if (loo.excluded && *loo.excluded >= distances.size()) throw InvalidArgument("accept: excluded row out of range");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (distances[i] <= epsilon && i != loo.excluded) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> accept(const ReferenceTable& table, std::span<const double> target, double epsilon,
                                LeaveOneOut loo) {
  return accept_within(distances_to(table, target), epsilon, loo);
}

std::vector<double> raw_model_probs(const ReferenceTable& table, std::span<const std::size_t> accepted,
                                    double epsilon) {
  if (accepted.empty()) throw NoAcceptancesError(epsilon);
  std::vector<double> probs(table.model_count(), 0.0);
  for (std::size_t row : accepted) probs[static_cast<std::size_t>(table.model_id(row) - 1)] += 1.0;
  for (auto& p : probs) p /= static_cast<double>(accepted.size());
  return probs;
}

std::vector<double> model_proportions(const ReferenceTable& table, LeaveOneOut loo) {
  std::vector<double> counts(table.per_model_counts().begin(), table.per_model_counts().end());
  double total = static_cast<double>(table.size());
  if (loo.excluded) {
    if (*loo.excluded >= table.size()) throw InvalidArgument("model_proportions: excluded row out of range");
    counts[static_cast<std::size_t>(table.model_id(*loo.excluded) - 1)] -= 1.0;
    total -= 1.0;
  }
  if (total <= 0.0) throw InvalidArgument("model_proportions: empty set");
  for (auto& c : counts) c /= total;
  return counts;
}

std::vector<double> reweight_model_probs(std::span<const double> raw, std::span<const double> h_u,
                                         std::span<const double> h_w) {
  if (raw.size() != h_u.size() || raw.size() != h_w.size()) {
    throw InvalidArgument("reweight_model_probs: length mismatch");
  }
  std::vector<double> out(raw.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == 0.0) continue;
    if (!(h_u[i] > 0.0) || !(h_w[i] > 0.0)) {
      throw InvalidArgument("reweight_model_probs: model " + std::to_string(i + 1) +
                            " has positive probability but zero reference proportion");
    }
    out[i] = raw[i] * h_u[i] / h_w[i];
    total += out[i];
  }
  if (!(total > 0.0)) throw InvalidArgument("reweight_model_probs: probabilities sum to zero");
  for (auto& p : out) p /= total;
  return out;
}

std::vector<double> posterior_draws(const ReferenceTable& table, std::span<const std::size_t> accepted, ModelId model,
                                    std::size_t param) {
  if (param >= table.param_dim(model)) throw InvalidArgument("posterior_draws: parameter index out of range");
  std::vector<double> draws;
  for (std::size_t row : accepted) {
    if (table.model_id(row) == model) draws.push_back(table.theta(row)[param]);
  }
  return draws;
}

AbcResult run_abc(const ReferenceTable& table, std::span<const double> target, double epsilon, LeaveOneOut loo,
                  const AbcOptions& options) {
  const std::vector<double> d = distances_to(table, target);
  return run_abc(table, d, target, epsilon, loo, options);
}

AbcResult run_abc(const ReferenceTable& table, std::span<const double> distances, std::span<const double> target,
                  double epsilon, LeaveOneOut loo, const AbcOptions& options) {
  if (distances.size() != table.size()) throw InvalidArgument("run_abc: one distance per table row required");
  if (target.size() != table.summary_dim()) throw InvalidArgument("run_abc: target length mismatch");

  AbcResult result;
  result.epsilon = epsilon;
  result.accepted_indices = accept_within(distances, epsilon, loo);
  result.n_accepted = result.accepted_indices.size();
  std::vector<double> probs = raw_model_probs(table, result.accepted_indices, epsilon);

  if (options.regression) {
    const std::size_t n = result.n_accepted;
    const auto dim = static_cast<Eigen::Index>(table.summary_dim());
    Eigen::MatrixXd s(static_cast<Eigen::Index>(n), dim);
    std::vector<double> d(n);
    std::vector<ModelId> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = result.accepted_indices[i];
      const auto summary = table.summary(row);
      for (Eigen::Index j = 0; j < dim; ++j) s(static_cast<Eigen::Index>(i), j) = summary[static_cast<std::size_t>(j)];
      d[i] = distances[row];
      ids[i] = table.model_id(row);
    }
    result.model_fit =
        multinomial_logit_adjust(ids, s, target, d, epsilon, table.model_count(), options.regression_options);
    probs = result.model_fit->probs;

    if (options.adjust_params_for) {
      const ModelId m = *options.adjust_params_for;
      const TableModel& model = table.model(m);
      std::vector<ParamVector> theta;
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < n; ++i) {
        if (ids[i] != m) continue;
        keep.push_back(i);
        const auto t = table.theta(result.accepted_indices[i]);
        theta.emplace_back(t.begin(), t.end());
        result.adjusted_rows.push_back(result.accepted_indices[i]);
      }
      Eigen::MatrixXd sm(static_cast<Eigen::Index>(keep.size()), dim);
      std::vector<double> dm(keep.size());
      for (std::size_t r = 0; r < keep.size(); ++r) {
        sm.row(static_cast<Eigen::Index>(r)) = s.row(static_cast<Eigen::Index>(keep[r]));
        dm[r] = d[keep[r]];
      }
      result.adjusted_params =
          local_linear_adjust(theta, sm, target, dm, epsilon, model.params, options.regression_options);
    }
  }

  if (options.model_probs == ModelProbMode::reweighted && loo.excluded) {
    probs = reweight_model_probs(probs, model_proportions(table), model_proportions(table, loo));
  }
  result.model_probs = std::move(probs);
  return result;
}

}  // namespace abc
