#include "abc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "abc/special.hpp"

namespace abc {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

nlohmann::json number_to_json(double x) {
  if (std::isfinite(x)) return x;
  return format_number(x);
}

double number_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw FormatError("expected a number, got '" + s + "'");
}

std::vector<std::size_t> build_histogram(std::span<const double> values, std::size_t bins) {
  if (bins < 1) throw InvalidArgument("build_histogram: bins must be >= 1");
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    const double pos = std::floor(std::clamp(v, 0.0, 1.0) * static_cast<double>(bins));
    ++counts[std::min(bins - 1, static_cast<std::size_t>(pos))];
  }
  return counts;
}

std::vector<CalibrationBin> build_calibration(std::span<const int> q, std::span<const double> z, std::size_t bins) {
  if (bins < 1) throw InvalidArgument("build_calibration: bins must be >= 1");
  if (q.size() != z.size()) throw InvalidArgument("build_calibration: length mismatch");
  std::vector<CalibrationBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].low = static_cast<double>(b) / static_cast<double>(bins);
    out[b].high = static_cast<double>(b + 1) / static_cast<double>(bins);
  }
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double pos = std::floor(std::clamp(z[j], 0.0, 1.0) * static_cast<double>(bins));
    CalibrationBin& bin = out[std::min(bins - 1, static_cast<std::size_t>(pos))];
    ++bin.n;
    if (q[j] == 1) ++bin.k;
  }
  for (auto& bin : out) {
    const auto a = static_cast<double>(bin.k + 1);
    const auto b = static_cast<double>(bin.n - bin.k + 1);
    bin.post_mean = a / (a + b);
    bin.ci_low = beta_quantile(0.025, a, b);
    bin.ci_high = beta_quantile(0.975, a, b);
  }
  return out;
}

namespace {

constexpr std::uint64_t kWStream = 1000;

std::string param_target(const TableModel& m, const ParamInfo& p) { return m.name + ":" + p.name; }

struct ModelInputs {
  std::vector<int> q;
  std::vector<double> z;
  std::vector<double> eta;
};

ModelInputs model_inputs(const HarnessOutput& out, std::size_t eps, ModelId model) {
  ModelInputs in;
  for (std::size_t v = 0; v < out.v_rows.size(); ++v) {
    const CoverageRecord& r = out.record(v, eps);
    if (!r.feasible) continue;
    in.q.push_back(r.m0 == model ? 1 : 0);
    in.z.push_back(r.z[static_cast<std::size_t>(model - 1)]);
    in.eta.push_back(probability_floor(r.n_accepted));
  }
  return in;
}

std::vector<double> param_inputs(const HarnessOutput& out, std::size_t eps, ModelId model, std::size_t param) {
  std::vector<double> p0;
  for (std::size_t v = 0; v < out.v_rows.size(); ++v) {
    const CoverageRecord& r = out.record(v, eps);
    if (r.feasible && r.m0 == model) p0.push_back(r.p0[param]);
  }
  return p0;
}

CurvePoint point_from(double eps, const StatReport& s, std::size_t n) {
  return {eps, false, s.value, s.p_value, s.method, n};
}

CurvePoint missing_point(double eps) {
  CurvePoint p;
  p.epsilon = eps;
  p.missing = true;
  return p;
}

nlohmann::json config_json(const HarnessConfig& c) {
  nlohmann::json j;
  j["c"] = c.c;
  j["epsilons"] = nlohmann::json::array();
  for (double e : c.epsilons) j["epsilons"].push_back(number_to_json(e));
  j["v_mode"] = std::string(to_string(c.v_mode));
  j["adjust"] = std::string(to_string(c.adjust));
  j["model_prob_mode"] = std::string(to_string(c.model_prob_mode));
  j["seed"] = c.seed;
  j["observed"] = c.observed;
  j["regression"] = {{"heteroskedastic", c.regression.heteroskedastic},
                     {"max_iterations", c.regression.max_iterations},
                     {"tolerance", c.regression.tolerance},
                     {"ridge", c.regression.ridge},
                     {"kernel", "epanechnikov"}};
  return j;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace

std::vector<Curve> build_curves(const HarnessOutput& output, const ReportOptions& options) {
  const auto wants = [&](const char* s) { return options.statistics.count(s) > 0; };
  const std::vector<double>& eps = output.config.epsilons;
  std::vector<Curve> curves;

  for (const TableModel& m : output.models) {
    for (std::size_t p = 0; p < m.params.size(); ++p) {
      Curve x2{param_target(m, m.params[p]), "parameter", "X2", {}};
      Curve ks{param_target(m, m.params[p]), "parameter", "KS", {}};
      for (std::size_t j = 0; j < eps.size(); ++j) {
        const std::vector<double> p0 = param_inputs(output, j, m.id, p);
        if (p0.empty()) {
          x2.points.push_back(missing_point(eps[j]));
          ks.points.push_back(missing_point(eps[j]));
          continue;
        }
        x2.points.push_back(point_from(eps[j], x2_statistic(p0), p0.size()));
        std::optional<McOptions> mc;
        if (options.ks_monte_carlo) {
          mc = McOptions{options.mc_replicates, options.mc_seed, static_cast<std::uint64_t>(m.id) * 1000 + p};
        }
        ks.points.push_back(point_from(eps[j], ks_statistic(p0, mc), p0.size()));
      }
      if (wants("X2")) curves.push_back(std::move(x2));
      if (wants("KS")) curves.push_back(std::move(ks));
    }
  }

  if (output.models.size() < 2) return curves;

  for (const TableModel& m : output.models) {
    Curve u{m.name, "model", "U", {}};
    Curve v{m.name, "model", "V", {}};
    const McOptions mc{options.mc_replicates, options.mc_seed, static_cast<std::uint64_t>(m.id)};
    for (std::size_t j = 0; j < eps.size(); ++j) {
      const ModelInputs in = model_inputs(output, j, m.id);
      if (in.q.empty()) {
        u.points.push_back(missing_point(eps[j]));
        v.points.push_back(missing_point(eps[j]));
        continue;
      }
      if (wants("U")) u.points.push_back(point_from(eps[j], u_statistic(in.q, in.z, mc), in.q.size()));
      if (wants("V")) v.points.push_back(point_from(eps[j], v_statistic(in.q, in.z, in.eta, mc), in.q.size()));
    }
    if (wants("U")) curves.push_back(std::move(u));
    if (wants("V")) curves.push_back(std::move(v));
  }

  if (wants("W")) {
    Curve w{"all", "model", "W", {}};
    const McOptions mc{options.mc_replicates, options.mc_seed, kWStream};
    for (std::size_t j = 0; j < eps.size(); ++j) {
      std::vector<ModelId> m0;
      std::vector<std::vector<double>> z;
      std::vector<double> eta;
      for (std::size_t k = 0; k < output.v_rows.size(); ++k) {
        const CoverageRecord& r = output.record(k, j);
        if (!r.feasible) continue;
        m0.push_back(r.m0);
        z.push_back(r.z);
        eta.push_back(probability_floor(r.n_accepted));
      }
      if (m0.empty()) {
        w.points.push_back(missing_point(eps[j]));
      } else {
        w.points.push_back(point_from(eps[j], w_statistic(m0, z, eta, mc), m0.size()));
      }
    }
    curves.push_back(std::move(w));
  }
  return curves;
}

DiagnosticReport build_report(const HarnessOutput& output, const ReportOptions& options) {
  DiagnosticReport report;
  report.curves = build_curves(output, options);
  const std::vector<double>& eps = output.config.epsilons;

  for (const TableModel& m : output.models) {
    for (std::size_t p = 0; p < m.params.size(); ++p) {
      for (std::size_t j = 0; j < eps.size(); ++j) {
        report.histograms.push_back(
            {param_target(m, m.params[p]), eps[j], build_histogram(param_inputs(output, j, m.id, p),
                                                                   options.histogram_bins)});
      }
    }
  }
  if (output.models.size() >= 2) {
    for (const TableModel& m : output.models) {
      for (std::size_t j = 0; j < eps.size(); ++j) {
        const ModelInputs in = model_inputs(output, j, m.id);
        report.calibration.push_back({m.name, eps[j], build_calibration(in.q, in.z, options.calibration_bins)});
      }
    }
  }

  nlohmann::json& md = report.metadata;
  md["config"] = config_json(output.config);
  md["models"] = nlohmann::json::array();
  for (const auto& m : output.models) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : m.params) params.push_back(p.name);
    md["models"].push_back({{"id", m.id}, {"name", m.name}, {"params", params}});
  }
  md["options"] = {{"statistics", options.statistics},
                   {"histogram_bins", options.histogram_bins},
                   {"calibration_bins", options.calibration_bins},
                   {"mc_replicates", options.mc_replicates},
                   {"mc_seed", options.mc_seed},
                   {"ks_method", options.ks_monte_carlo ? "monte-carlo" : "asymptotic"}};
  md["per_epsilon"] = nlohmann::json::array();
  for (const auto& s : output.per_epsilon) {
    md["per_epsilon"].push_back({{"epsilon", number_to_json(s.epsilon)},
                                 {"total_accepted", s.total_accepted},
                                 {"min_accepted", s.min_accepted},
                                 {"dropped_cells", s.infeasible}});
  }
  md["provenance"] = output.provenance;
  md["notes"] = {
      "p0 values computed only for parameters of the true model m0",
      "the c p-values per epsilon are treated as independent although they share one reference table",
      "calibration prediction reference is the identity diagonal",
      "KS p-values are asymptotic; p0 values are discrete so they are of the correct order only",
  };
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json to_json(const DiagnosticReport& r) {
  nlohmann::json j;
  j["schema_version"] = r.schema_version;
  j["curves"] = nlohmann::json::array();
  for (const auto& c : r.curves) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : c.points) {
      pts.push_back({{"epsilon", number_to_json(p.epsilon)},
                     {"missing", p.missing},
                     {"value", number_to_json(p.value)},
                     {"p_value", number_to_json(p.p_value)},
                     {"method", std::string(to_string(p.method))},
                     {"n_used", p.n_used}});
    }
    j["curves"].push_back({{"target", c.target}, {"kind", c.kind}, {"statistic", c.statistic}, {"points", pts}});
  }
  j["histograms"] = nlohmann::json::array();
  for (const auto& h : r.histograms) {
    j["histograms"].push_back({{"param", h.param}, {"epsilon", number_to_json(h.epsilon)}, {"counts", h.counts}});
  }
  j["calibration"] = nlohmann::json::array();
  for (const auto& c : r.calibration) {
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : c.bins) {
      bins.push_back({{"low", b.low},
                      {"high", b.high},
                      {"n", b.n},
                      {"k", b.k},
                      {"post_mean", b.post_mean},
                      {"ci_low", b.ci_low},
                      {"ci_high", b.ci_high}});
    }
    j["calibration"].push_back({{"model", c.model}, {"epsilon", number_to_json(c.epsilon)}, {"bins", bins}});
  }
  j["metadata"] = r.metadata;
  return j;
}

DiagnosticReport from_json(const nlohmann::json& j) {
  DiagnosticReport r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != kReportSchemaVersion) {
    throw FormatError("report schema version " + std::to_string(r.schema_version) + " not supported");
  }
  for (const auto& c : j.at("curves")) {
    Curve curve{c.at("target").get<std::string>(), c.at("kind").get<std::string>(),
                c.at("statistic").get<std::string>(), {}};
    for (const auto& p : c.at("points")) {
      curve.points.push_back({number_from_json(p.at("epsilon")), p.at("missing").get<bool>(),
                              number_from_json(p.at("value")), number_from_json(p.at("p_value")),
                              stat_method_from_string(p.at("method").get<std::string>()),
                              p.at("n_used").get<std::size_t>()});
    }
    r.curves.push_back(std::move(curve));
  }
  for (const auto& h : j.at("histograms")) {
    r.histograms.push_back({h.at("param").get<std::string>(), number_from_json(h.at("epsilon")),
                            h.at("counts").get<std::vector<std::size_t>>()});
  }
  for (const auto& c : j.at("calibration")) {
    CalibrationSeries series{c.at("model").get<std::string>(), number_from_json(c.at("epsilon")), {}};
    for (const auto& b : c.at("bins")) {
      series.bins.push_back({b.at("low").get<double>(), b.at("high").get<double>(), b.at("n").get<std::size_t>(),
                             b.at("k").get<std::size_t>(), b.at("post_mean").get<double>(),
                             b.at("ci_low").get<double>(), b.at("ci_high").get<double>()});
    }
    r.calibration.push_back(std::move(series));
  }
  r.metadata = j.at("metadata");
  return r;
}

}  // namespace

void emit(const DiagnosticReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    const auto path = dir / "report.json";
    auto out = open_out(path);
    out << to_json(report).dump(2) << '\n';
    finish(out, path);
  }
  {
    const auto path = dir / "curves.csv";
    auto out = open_out(path);
    out << "target,kind,statistic,epsilon,value,p_value,method\n";
    for (const auto& c : report.curves) {
      for (const auto& p : c.points) {
        out << c.target << ',' << c.kind << ',' << c.statistic << ',' << format_number(p.epsilon) << ',';
        if (p.missing) {
          out << ",,missing\n";
        } else {
          out << format_number(p.value) << ',' << format_number(p.p_value) << ',' << to_string(p.method) << '\n';
        }
      }
    }
    finish(out, path);
  }
  {
    const auto path = dir / "histograms.csv";
    auto out = open_out(path);
    out << "param,epsilon,bin_low,bin_high,count\n";
    for (const auto& h : report.histograms) {
      const auto bins = h.counts.size();
      for (std::size_t b = 0; b < bins; ++b) {
        out << h.param << ',' << format_number(h.epsilon) << ','
            << format_number(static_cast<double>(b) / static_cast<double>(bins)) << ','
            << format_number(static_cast<double>(b + 1) / static_cast<double>(bins)) << ',' << h.counts[b] << '\n';
      }
    }
    finish(out, path);
  }
  {
    const auto path = dir / "calibration.csv";
    auto out = open_out(path);
    out << "model,epsilon,bin_low,bin_high,n,k,post_mean,ci_low,ci_high\n";
    for (const auto& c : report.calibration) {
      for (const auto& b : c.bins) {
        out << c.model << ',' << format_number(c.epsilon) << ',' << format_number(b.low) << ','
            << format_number(b.high) << ',' << b.n << ',' << b.k << ',' << format_number(b.post_mean) << ','
            << format_number(b.ci_low) << ',' << format_number(b.ci_high) << '\n';
      }
    }
    finish(out, path);
  }
}

DiagnosticReport load_report(const std::filesystem::path& dir) {
  const auto path = dir / "report.json";
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed report '" + path.string() + "': " + e.what());
  }
}

void write_harness_output(const HarnessOutput& output, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t q = output.config.epsilons.size();
  {
    nlohmann::json j;
    j["config"] = config_json(output.config);
    j["v_rows"] = output.v_rows;
    j["provenance"] = output.provenance;
    j["per_epsilon"] = nlohmann::json::array();
    for (const auto& s : output.per_epsilon) {
      j["per_epsilon"].push_back({{"epsilon", number_to_json(s.epsilon)},
                                  {"total_accepted", s.total_accepted},
                                  {"min_accepted", s.min_accepted},
                                  {"infeasible", s.infeasible}});
    }
    j["records"] = nlohmann::json::array();
    for (const auto& r : output.records) {
      j["records"].push_back({{"v_index", r.v_index},
                              {"table_row", r.table_row},
                              {"epsilon", number_to_json(r.epsilon)},
                              {"m0", r.m0},
                              {"p0", r.p0},
                              {"z", r.z},
                              {"feasible", r.feasible},
                              {"n_accepted", r.n_accepted},
                              {"n_param_draws", r.n_param_draws},
                              {"warning", r.warning}});
    }
    const auto path = dir / "harness.json";
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    finish(out, path);
  }
  {
    const auto path = dir / "p0.csv";
    auto out = open_out(path);
    out << "v_index,epsilon,param,p0\n";
    for (std::size_t v = 0; v < output.v_rows.size(); ++v) {
      for (std::size_t e = 0; e < q; ++e) {
        const CoverageRecord& r = output.record(v, e);
        if (!r.feasible) continue;
        const TableModel& m = output.models[static_cast<std::size_t>(r.m0 - 1)];
        for (std::size_t p = 0; p < r.p0.size(); ++p) {
          out << v << ',' << format_number(r.epsilon) << ',' << param_target(m, m.params[p]) << ','
              << format_number(r.p0[p]) << '\n';
        }
      }
    }
    finish(out, path);
  }
  {
    const auto path = dir / "z.csv";
    auto out = open_out(path);
    out << "v_index,epsilon,model,z,m0,feasible\n";
    for (std::size_t v = 0; v < output.v_rows.size(); ++v) {
      for (std::size_t e = 0; e < q; ++e) {
        const CoverageRecord& r = output.record(v, e);
        const std::string m0 = output.models[static_cast<std::size_t>(r.m0 - 1)].name;
        for (const auto& m : output.models) {
          out << v << ',' << format_number(r.epsilon) << ',' << m.name << ',';
          if (r.feasible) out << format_number(r.z[static_cast<std::size_t>(m.id - 1)]);
          out << ',' << m0 << ',' << (r.feasible ? 1 : 0) << '\n';
        }
      }
    }
    finish(out, path);
  }
}

}  // namespace abc
