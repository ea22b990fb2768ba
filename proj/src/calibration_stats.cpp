#include "abc/calibration_stats.hpp"

#include <algorithm>
#include <cmath>

#include "abc/error.hpp"
#include "abc/special.hpp"

namespace abc {

std::string_view to_string(StatMethod m) {
  switch (m) {
    case StatMethod::exact:
      return "exact";
    case StatMethod::asymptotic:
      return "asymptotic";
    case StatMethod::monte_carlo:
      return "monte-carlo";
  }
  return "asymptotic";
}

StatMethod stat_method_from_string(std::string_view s) {
  if (s == "exact") return StatMethod::exact;
  if (s == "asymptotic") return StatMethod::asymptotic;
  if (s == "monte-carlo") return StatMethod::monte_carlo;
  throw InvalidArgument("unknown statistic method '" + std::string(s) + "'");
}

double p0_estimate(std::span<const double> draws, double theta0) {
  const auto below = std::count_if(draws.begin(), draws.end(), [&](double t) { return t < theta0; });
  return (1.0 + static_cast<double>(below)) / (2.0 + static_cast<double>(draws.size()));
}

StatReport x2_statistic(std::span<const double> p) {
  if (p.empty()) throw InvalidArgument("x2_statistic: no p-values");
  double x2 = 0.0;
  for (double pi : p) {
    if (!(pi > 0.0 && pi < 1.0)) throw InvalidArgument("x2_statistic: p-values must lie in (0,1)");
    const double z = normal_quantile(pi);
    x2 += z * z;
  }
  const double cdf = chi_square_cdf(x2, static_cast<double>(p.size()));
  StatReport r;
  r.statistic_name = "X2";
  r.value = x2;
  r.p_value = std::min(1.0, 2.0 * std::min(cdf, 1.0 - cdf));
  r.method = StatMethod::asymptotic;
  return r;
}

double ks_distance(std::span<const double> p) {
  if (p.empty()) throw InvalidArgument("ks_statistic: no p-values");
  std::vector<double> sorted(p.begin(), p.end());
  std::sort(sorted.begin(), sorted.end());
  const auto c = static_cast<double>(sorted.size());
  double y = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double x = sorted[i];
    if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("ks_statistic: values must lie in [0,1]");
    y = std::max({y, static_cast<double>(i + 1) / c - x, x - static_cast<double>(i) / c});
  }
  return y;
}

StatReport ks_statistic(std::span<const double> p, const std::optional<McOptions>& mc) {
  StatReport r;
  r.statistic_name = "KS";
  r.value = ks_distance(p);
  if (!mc) {
    r.p_value = kolmogorov_survival(std::sqrt(static_cast<double>(p.size())) * r.value);
    r.method = StatMethod::asymptotic;
    return r;
  }
  if (mc->replicates < 1) throw InvalidArgument("ks_statistic: need at least one replicate");
  std::size_t at_least = 0;
  std::vector<double> u(p.size());
  for (std::size_t b = 0; b < mc->replicates; ++b) {
    Engine rng = make_stream(mc->seed, StreamTag::ks_null, mc->stream, b);
    for (auto& x : u) x = uniform_open(rng);
    if (ks_distance(u) >= r.value) ++at_least;
  }
  r.p_value = static_cast<double>(at_least + 1) / static_cast<double>(mc->replicates + 1);
  r.method = StatMethod::monte_carlo;
  r.mc_replicates = mc->replicates;
  r.seed = mc->seed;
  return r;
}

double two_tailed_rank_pvalue(std::span<const double> null_values, double observed) {
  std::size_t lower = 0;
  std::size_t upper = 0;
  for (double t : null_values) {
    if (t <= observed) ++lower;
    if (t >= observed) ++upper;
  }
  const auto denom = static_cast<double>(null_values.size() + 1);
  const double lo = static_cast<double>(lower + 1) / denom;
  const double hi = static_cast<double>(upper + 1) / denom;
  return std::min(1.0, 2.0 * std::min(lo, hi));
}

double mc_null_pvalue(const NullDraw& draw, double observed, const McOptions& mc) {
  if (mc.replicates < 1) throw InvalidArgument("mc_null_pvalue: need at least one replicate");
  std::vector<double> null_values(mc.replicates);
  for (std::size_t b = 0; b < mc.replicates; ++b) {
    Engine rng = make_stream(mc.seed, StreamTag::mc_null, mc.stream, b);
    null_values[b] = draw(rng);
  }
  return two_tailed_rank_pvalue(null_values, observed);
}

double probability_floor(std::size_t n_accepted) { return 1.0 / (2.0 * (static_cast<double>(n_accepted) + 1.0)); }

namespace {

void check_binary(std::span<const int> q, std::span<const double> z, const char* who) {
  if (q.size() != z.size()) throw InvalidArgument(std::string(who) + ": length mismatch");
  if (q.empty()) throw InvalidArgument(std::string(who) + ": no records");
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (q[j] != 0 && q[j] != 1) throw InvalidArgument(std::string(who) + ": q must be binary");
    if (!(z[j] >= 0.0 && z[j] <= 1.0)) throw InvalidArgument(std::string(who) + ": z must lie in [0,1]");
  }
}

double clamped(double z, double eta) { return std::clamp(z, eta, 1.0 - eta); }

StatReport mc_report(std::string name, double value, double p_value, const McOptions& mc) {
  StatReport r;
  r.statistic_name = std::move(name);
  r.value = value;
  r.p_value = p_value;
  r.method = StatMethod::monte_carlo;
  r.mc_replicates = mc.replicates;
  r.seed = mc.seed;
  return r;
}

}  // namespace

StatReport u_statistic(std::span<const int> q, std::span<const double> z, const McOptions& mc) {
  check_binary(q, z, "u_statistic");
  const auto c = static_cast<double>(q.size());
  double ones = 0.0;
  for (int x : q) ones += x;
  const double u = ones / c;
  const auto draw = [&](Engine& rng) {
    double count = 0.0;
    for (double zj : z) count += uniform_open(rng) < zj ? 1.0 : 0.0;
    return count / c;
  };
  return mc_report("U", u, mc_null_pvalue(draw, u, mc), mc);
}

StatReport v_statistic(std::span<const int> q, std::span<const double> z, std::span<const double> eta,
                       const McOptions& mc) {
  check_binary(q, z, "v_statistic");
  if (!eta.empty() && eta.size() != z.size()) throw InvalidArgument("v_statistic: one floor per record required");
  const std::size_t c = q.size();
  std::vector<double> log_z(c);
  std::vector<double> log_1mz(c);
  for (std::size_t j = 0; j < c; ++j) {
    const double zj = eta.empty() ? z[j] : clamped(z[j], eta[j]);
    log_z[j] = std::log(zj);
    // 1 - z is exact for z >= 0.5, which keeps V bitwise constant at z = 0.5.
    log_1mz[j] = zj >= 0.5 ? std::log(1.0 - zj) : std::log1p(-zj);
  }
  const auto loglik = [&](auto&& outcome) {
    double v = 0.0;
    for (std::size_t j = 0; j < c; ++j) v += outcome(j) ? log_z[j] : log_1mz[j];
    return v;
  };
  const double v = loglik([&](std::size_t j) { return q[j] == 1; });
  const auto draw = [&](Engine& rng) {
    std::vector<char> sim(c);
    for (std::size_t j = 0; j < c; ++j) sim[j] = uniform_open(rng) < z[j];
    return loglik([&](std::size_t j) { return sim[j] != 0; });
  };
  return mc_report("V", v, mc_null_pvalue(draw, v, mc), mc);
}

StatReport w_statistic(std::span<const ModelId> m0, const std::vector<std::vector<double>>& z,
                       std::span<const double> eta, const McOptions& mc) {
  if (m0.size() != z.size()) throw InvalidArgument("w_statistic: dimension mismatch");
  if (m0.empty()) throw InvalidArgument("w_statistic: no records");
  if (!eta.empty() && eta.size() != z.size()) throw InvalidArgument("w_statistic: one floor per record required");
  const std::size_t c = m0.size();
  const std::size_t models = z.front().size();
  std::vector<std::vector<double>> log_z(c);
  for (std::size_t j = 0; j < c; ++j) {
    if (z[j].size() != models) throw InvalidArgument("w_statistic: dimension mismatch");
    if (m0[j] < 1 || static_cast<std::size_t>(m0[j]) > models) throw InvalidArgument("w_statistic: bad model id");
    double total = 0.0;
    for (double x : z[j]) {
      if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("w_statistic: probabilities must lie in [0,1]");
      total += x;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw InvalidArgument("w_statistic: rows must sum to 1");
    for (double x : z[j]) log_z[j].push_back(std::log(eta.empty() ? x : clamped(x, eta[j])));
  }
  std::vector<std::size_t> last_positive(c, 0);
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t k = 0; k < models; ++k) {
      if (z[j][k] > 0.0) last_positive[j] = k;
    }
  }
  double w = 0.0;
  for (std::size_t j = 0; j < c; ++j) w += log_z[j][static_cast<std::size_t>(m0[j] - 1)];
  const auto draw = [&](Engine& rng) {
    double sim = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double u = uniform_open(rng);
      std::size_t m = last_positive[j];
      for (std::size_t k = 0; k < models; ++k) {
        if (u < z[j][k]) {
          m = k;
          break;
        }
        u -= z[j][k];
      }
      sim += log_z[j][m];
    }
    return sim;
  };
  return mc_report("W", w, mc_null_pvalue(draw, w, mc), mc);
}

}  // namespace abc
