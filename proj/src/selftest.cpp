#include "abc/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <ostream>

#include <unistd.h>

#include "abc/calibration_stats.hpp"
#include "abc/engine.hpp"
#include "abc/models.hpp"
#include "abc/reference_table.hpp"
#include "abc/special.hpp"

namespace abc {

namespace {

constexpr std::uint64_t kSeed = 20240611;

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

SelftestCheck near(std::string name, double actual, double expected, double tol) {
  return {std::move(name), std::fabs(actual - expected) <= tol, num(expected) + " +/- " + num(tol), num(actual)};
}

// Exact two-tailed p-value of U = mean(q) under independent Bernoulli(z_j).
double u_enumerated(const std::vector<int>& q, const std::vector<double>& z) {
  const std::size_t c = z.size();
  int observed = 0;
  for (int v : q) observed += v;
  std::vector<double> pmf(c + 1, 0.0);
  pmf[0] = 1.0;
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t k = j + 1; k-- > 0;) {
      pmf[k + 1] += pmf[k] * z[j];
      pmf[k] *= 1.0 - z[j];
    }
  }
  double lower = 0, upper = 0;
  for (std::size_t k = 0; k <= c; ++k) {
    if (static_cast<int>(k) <= observed) lower += pmf[k];
    if (static_cast<int>(k) >= observed) upper += pmf[k];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper));
}

SelftestCheck oracle_uniformity() {
  const ModelSet models = conjugate_model_set();
  const ReferenceTable table = build_table(models, 4000, Allocation::equal, kSeed, 1);
  const std::vector<double> observed{0.3};
  const auto rows = nearest(table, observed, 200);
  const Simulator& sim = models.simulator(1);
  std::vector<double> p0;
  for (std::size_t r : rows) {
    p0.push_back(exact_posterior_cdf(sim, table.summary(r), models.n_obs(), table.theta(r)[0]));
  }
  const StatReport ks = ks_statistic(p0);
  return {"oracle coverage (conjugate-normal, KS)", ks.p_value > 0.01, "p > 0.01", num(ks.p_value)};
}

SelftestCheck reweighting_invariance() {
  const ModelSet models = benchmark_model_set(20);
  const ReferenceTable table = build_table(models, 20, Allocation::proportional, kSeed + 1, 1);
  const std::vector<double> expect = model_proportions(table);
  double worst = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto s = table.summary(i);
    const std::vector<double> target(s.begin(), s.end());
    const AbcResult r = run_abc(table, target, std::numeric_limits<double>::infinity(), LeaveOneOut{i});
    for (std::size_t k = 0; k < expect.size(); ++k) worst = std::max(worst, std::fabs(r.model_probs[k] - expect[k]));
  }
  return {"leave-one-out reweighting invariance", worst <= 1e-12, "max deviation <= 1e-12", num(worst)};
}

SelftestCheck u_monte_carlo() {
  const std::vector<int> q{1, 0, 0, 1, 0, 0, 0, 1};
  const std::vector<double> z{0.9, 0.2, 0.4, 0.7, 0.1, 0.3, 0.5, 0.6};
  const double exact = u_enumerated(q, z);
  const StatReport u = u_statistic(q, z, McOptions{999, kSeed, 0});
  return near("U Monte-Carlo p-value vs enumeration", u.p_value, exact, 0.05);
}

SelftestCheck table_roundtrip() {
  const ModelSet models = benchmark_model_set(30);
  const ReferenceTable table = build_table(models, 64, Allocation::equal, kSeed + 2, 1);
  const auto path = std::filesystem::temp_directory_path() /
                    ("abc-selftest-" + std::to_string(::getpid()) + ".abct");
  std::string actual;
  bool ok = false;
  try {
    save_table(table, path);
    const ReferenceTable back = load_table(path);
    ok = back == table;
    actual = table_checksum(back);
  } catch (const Error& e) {
    actual = e.what();
  }
  std::error_code ec;
  std::filesystem::remove(path, ec);
  return {"table save/load round trip", ok, table_checksum(table), actual};
}

SelftestCheck table_integrity(const std::filesystem::path& path) {
  try {
    const ReferenceTable t = load_table(path);
    return {"table integrity: " + path.string(), true, "readable table", table_checksum(t)};
  } catch (const Error& e) {
    return {"table integrity: " + path.string(), false, "readable table", e.what()};
  }
}

}  // namespace

bool SelftestResult::passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

SelftestResult run_selftest(const std::optional<std::filesystem::path>& table) {
  SelftestResult r;
  r.checks.push_back(near("X2 at p = 0.5", x2_statistic(std::vector<double>(10, 0.5)).value, 0.0, 1e-12));
  {
    const std::vector<int> q{1, 0, 1, 0};
    const std::vector<double> z(4, 0.5);
    r.checks.push_back(
        near("V at z = 0.5, c = 4", v_statistic(q, z, {}, McOptions{99, kSeed, 0}).value, 4 * std::log(0.5), 1e-12));
  }
  r.checks.push_back(near("Kolmogorov tail at 1.358", kolmogorov_survival(1.358), 0.05, 0.002));
  r.checks.push_back(near("normal quantile at 0.975", normal_quantile(0.975), 1.959963984540054, 1e-9));
  r.checks.push_back(u_monte_carlo());
  r.checks.push_back(reweighting_invariance());
  r.checks.push_back(oracle_uniformity());
  r.checks.push_back(table_roundtrip());
  if (table) r.checks.push_back(table_integrity(*table));
  return r;
}

void print_selftest(const SelftestResult& result, std::ostream& out) {
  std::size_t failed = 0;
  for (const auto& c : result.checks) {
    if (c.passed) {
      out << "ok    " << c.name << '\n';
    } else {
      ++failed;
      out << "FAIL  " << c.name << ": expected " << c.expected << ", got " << c.actual << '\n';
    }
  }
  out << (failed ? std::to_string(failed) + " of " + std::to_string(result.checks.size()) + " checks failed"
                 : "all " + std::to_string(result.checks.size()) + " checks passed")
      << '\n';
}

}  // namespace abc
