#include "abc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>

#include "abc/calibration_stats.hpp"
#include "abc/parallel.hpp"

namespace abc {

std::string_view to_string(VMode m) { return m == VMode::prior ? "prior" : "truncated"; }
std::string_view to_string(AdjustMode m) { return m == AdjustMode::regression ? "regression" : "none"; }
std::string_view to_string(ModelProbMode m) { return m == ModelProbMode::raw ? "raw" : "reweighted"; }

VMode v_mode_from_string(std::string_view s) {
  if (s == "truncated") return VMode::truncated;
  if (s == "prior") return VMode::prior;
  throw InvalidArgument("v-mode must be 'truncated' or 'prior', got '" + std::string(s) + "'");
}

AdjustMode adjust_mode_from_string(std::string_view s) {
  if (s == "none") return AdjustMode::none;
  if (s == "regression") return AdjustMode::regression;
  throw InvalidArgument("adjust must be 'none' or 'regression', got '" + std::string(s) + "'");
}

ModelProbMode model_prob_mode_from_string(std::string_view s) {
  if (s == "raw") return ModelProbMode::raw;
  if (s == "reweighted") return ModelProbMode::reweighted;
  throw InvalidArgument("model_prob_mode must be 'raw' or 'reweighted', got '" + std::string(s) + "'");
}

std::vector<double> validate_grid(std::vector<double> epsilons) {
  if (epsilons.empty()) throw InvalidArgument("epsilon grid is empty");
  for (std::size_t j = 0; j < epsilons.size(); ++j) {
    if (std::isnan(epsilons[j]) || epsilons[j] < 0.0) throw InvalidArgument("epsilon values must be >= 0");
    if (j > 0 && !(epsilons[j] < epsilons[j - 1])) throw InvalidArgument("epsilon grid must be strictly decreasing");
  }
  return epsilons;
}

std::vector<double> acceptance_fractions(const GridSpec& spec, std::size_t n_rows) {
  if (spec.q < 1) throw InvalidArgument("epsilon grid needs q >= 1");
  if (n_rows == 0) throw InvalidArgument("epsilon grid needs a non-empty table");
  const double hi = spec.max_fraction;
  const double lo = spec.min_fraction.value_or(std::min(hi, 100.0 / static_cast<double>(n_rows)));
  if (!(hi > 0.0 && hi <= 1.0) || !(lo > 0.0 && lo <= hi)) {
    throw InvalidArgument("acceptance fractions must satisfy 0 < min <= max <= 1");
  }
  std::vector<double> f(spec.q);
  for (std::size_t j = 0; j < spec.q; ++j) {
    f[j] = spec.q == 1 ? hi : hi * std::pow(lo / hi, static_cast<double>(j) / static_cast<double>(spec.q - 1));
  }
  return f;
}

std::vector<double> epsilon_grid(const ReferenceTable& table, std::span<const double> observed,
                                 const GridSpec& spec) {
  const std::vector<double> fractions = acceptance_fractions(spec, table.size());
  std::vector<double> d = distances_to(table, observed);
  const std::size_t n = d.size();
  std::vector<double> eps;
  for (double f : fractions) {
    const double rank = std::ceil(f * static_cast<double>(n) - 1e-9);
    const auto k = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(n)));
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
    eps.push_back(d[k - 1]);
  }
  try {
    return validate_grid(std::move(eps));
  } catch (const InvalidArgument&) {
    throw InvalidArgument("distance-quantile grid has repeated epsilon values; use fewer grid points");
  }
}

std::vector<std::size_t> select_v(const ReferenceTable& table, std::span<const double> observed, std::size_t c,
                                  VMode mode, std::uint64_t seed) {
  const std::size_t n = table.size();
  if (c < 1 || c > n) throw InvalidArgument("select_v: c must lie in [1, N]");
  if (mode == VMode::truncated) return nearest(table, observed, c);
  // Partial Fisher-Yates over row indices.
  Engine rng = make_stream(seed, StreamTag::select_v);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < c; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
  idx.resize(c);
  return idx;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void check_config(const ReferenceTable& table, const HarnessConfig& config) {
  if (table.empty()) throw InvalidArgument("harness: reference table is empty");
  if (!table.has_scale()) throw InvalidArgument("harness: reference table has no distance scale");
  if (config.c < 1 || config.c > table.size()) throw InvalidArgument("harness: c must lie in [1, N]");
  if (config.observed.size() != table.summary_dim()) {
    throw InvalidArgument("harness: observed summary has length " + std::to_string(config.observed.size()) +
                          ", table summaries have length " + std::to_string(table.summary_dim()));
  }
  validate_grid(config.epsilons);
}

// One (V element, epsilon) cell, analysed against `reference`.
CoverageRecord analyse_cell(const ReferenceTable& reference, std::span<const double> distances, LeaveOneOut loo,
                            std::span<const double> s0, ModelId m0, std::span<const double> theta0, double epsilon,
                            const HarnessConfig& config) {
  CoverageRecord rec;
  rec.epsilon = epsilon;
  rec.m0 = m0;
  AbcOptions options;
  options.model_probs = config.model_prob_mode;
  options.regression = config.adjust == AdjustMode::regression;
  options.regression_options = config.regression;
  if (options.regression) options.adjust_params_for = m0;
  try {
    const AbcResult result = run_abc(reference, distances, s0, epsilon, loo, options);
    rec.feasible = true;
    rec.n_accepted = result.n_accepted;
    rec.z = result.model_probs;
    for (std::size_t p = 0; p < theta0.size(); ++p) {
      std::vector<double> draws;
      if (result.adjusted_params) {
        for (const auto& t : result.adjusted_params->theta_star) draws.push_back(t[p]);
      } else {
        draws = posterior_draws(reference, result.accepted_indices, m0, p);
      }
      rec.n_param_draws = draws.size();
      rec.p0.push_back(p0_estimate(draws, theta0[p]));
    }
    if (result.model_fit && result.model_fit->fallback) rec.warning = result.model_fit->warning;
    if (result.adjusted_params) {
      for (const auto& fit : result.adjusted_params->diagnostics) {
        if (!fit.warning.empty()) rec.warning += (rec.warning.empty() ? "" : "; ") + fit.param + ": " + fit.warning;
      }
    }
  } catch (const NoAcceptancesError&) {
    rec.feasible = false;
    rec.warning = "no acceptances";
  }
  return rec;
}

HarnessOutput assemble(const ReferenceTable& table, const HarnessConfig& config, std::vector<std::size_t> v_rows,
                       std::vector<CoverageRecord> records, const std::string& started, const char* mode) {
  HarnessOutput out;
  out.config = config;
  out.models = table.models();
  out.v_rows = std::move(v_rows);
  out.records = std::move(records);
  const std::size_t q = config.epsilons.size();
  for (std::size_t j = 0; j < q; ++j) {
    EpsilonSummary s;
    s.epsilon = config.epsilons[j];
    s.min_accepted = table.size();
    for (std::size_t v = 0; v < out.v_rows.size(); ++v) {
      const CoverageRecord& r = out.record(v, j);
      s.total_accepted += r.n_accepted;
      s.min_accepted = std::min(s.min_accepted, r.n_accepted);
      if (!r.feasible) ++s.infeasible;
    }
    out.per_epsilon.push_back(s);
  }
  out.provenance["table_checksum"] = table_checksum(table);
  out.provenance["table_rows"] = table.size();
  out.provenance["table"] = table.provenance();
  out.provenance["seed"] = config.seed;
  out.provenance["analysis"] = mode;
  out.provenance["started_at"] = started;
  out.provenance["finished_at"] = utc_now();
  return out;
}

}  // namespace

HarnessOutput run_harness(const ReferenceTable& table, const HarnessConfig& config) {
  check_config(table, config);
  const std::string started = utc_now();
  std::vector<std::size_t> v_rows = select_v(table, config.observed, config.c, config.v_mode, config.seed);
  const std::size_t q = config.epsilons.size();
  std::vector<CoverageRecord> records(v_rows.size() * q);

  parallel_for(v_rows.size(), config.threads, [&](std::size_t v) {
    const std::size_t row = v_rows[v];
    const auto s0 = table.summary(row);
    const std::vector<double> d = distances_to(table, s0);
    for (std::size_t j = 0; j < q; ++j) {
      CoverageRecord rec = analyse_cell(table, d, LeaveOneOut{row}, s0, table.model_id(row), table.theta(row),
                                        config.epsilons[j], config);
      rec.v_index = v;
      rec.table_row = row;
      records[v * q + j] = std::move(rec);
    }
  });
  return assemble(table, config, std::move(v_rows), std::move(records), started, "reuse");
}

HarnessOutput resimulate_mode(const ModelSet& models, const ReferenceTable& table, const HarnessConfig& config,
                              Allocation allocation) {
  check_config(table, config);
  if (table.size() < 2) throw InvalidArgument("resimulate_mode: table needs at least two rows");
  if (ReferenceTable::describe(models) != table.models() || models.summary_dim() != table.summary_dim()) {
    throw InvalidArgument("resimulate_mode: model set does not match the reference table");
  }
  const std::string started = utc_now();
  std::vector<std::size_t> v_rows = select_v(table, config.observed, config.c, config.v_mode, config.seed);
  const std::size_t q = config.epsilons.size();
  std::vector<CoverageRecord> records(v_rows.size() * q);

  parallel_for(v_rows.size(), config.threads, [&](std::size_t v) {
    const std::size_t row = v_rows[v];
    ReferenceTable fresh =
        build_table(models, table.size() - 1, allocation, derive_seed(config.seed, StreamTag::resimulate, v), 1);
    fresh.set_scale(table.scale());
    const auto s0 = table.summary(row);
    const std::vector<double> d = distances_to(fresh, s0);
    for (std::size_t j = 0; j < q; ++j) {
      CoverageRecord rec =
          analyse_cell(fresh, d, LeaveOneOut{}, s0, table.model_id(row), table.theta(row), config.epsilons[j], config);
      rec.v_index = v;
      rec.table_row = row;
      records[v * q + j] = std::move(rec);
    }
  });
  return assemble(table, config, std::move(v_rows), std::move(records), started, "resimulate");
}

}  // namespace abc
