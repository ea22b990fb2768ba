#include "abc/run_config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "abc/error.hpp"

namespace abc {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config key '" + key + "': " + what);
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) bad(where, "must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) bad(where.empty() ? k : where + "." + k, "unknown key");
  }
}

std::size_t get_count(const json& j, const std::string& key, std::size_t min) {
  if (!j.is_number_integer() || j.get<long long>() < static_cast<long long>(min)) {
    bad(key, "must be an integer >= " + std::to_string(min));
  }
  return j.get<std::size_t>();
}

std::uint64_t get_seed(const json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    bad(key, "must be a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

double get_double(const json& j, const std::string& key) {
  if (!j.is_number()) bad(key, "must be a number");
  return j.get<double>();
}

std::string get_string(const json& j, const std::string& key) {
  if (!j.is_string()) bad(key, "must be a string");
  return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) bad(key, "must be true or false");
  return j.get<bool>();
}

template <class F>
auto converted(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    bad(key, e.what());
  }
}

std::vector<ModelSet::Entry> named_set(const std::string& name) {
  if (name == "benchmark") return {{"normal", 0.5}, {"gk", 0.5}};
  if (name == "conjugate") return {{"conjugate-normal", 1.0}};
  if (name == "synthetic") return {{"synthetic9-1", 1.0 / 3}, {"synthetic9-2", 1.0 / 3}, {"synthetic9-3", 1.0 / 3}};
  bad("model_set", "unknown set '" + name + "' (benchmark, conjugate, synthetic)");
}

std::vector<ModelSet::Entry> parse_models(const json& j) {
  if (!j.is_array() || j.empty()) bad("models", "must be a non-empty array");
  std::vector<ModelSet::Entry> out;
  bool any_weight = false;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string key = "models[" + std::to_string(i) + "]";
    if (j[i].is_string()) {
      out.push_back({j[i].get<std::string>(), 0.0});
    } else {
      check_keys(j[i], key, {"name", "prior_weight"});
      if (!j[i].contains("name")) bad(key + ".name", "required");
      ModelSet::Entry e{get_string(j[i]["name"], key + ".name"), 0.0};
      if (j[i].contains("prior_weight")) {
        e.prior_weight = get_double(j[i]["prior_weight"], key + ".prior_weight");
        if (!(e.prior_weight > 0)) bad(key + ".prior_weight", "must be positive");
        any_weight = true;
      }
      out.push_back(e);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool has = out[i].prior_weight > 0;
    if (any_weight && !has) bad("models[" + std::to_string(i) + "].prior_weight", "give weights for all models or none");
    if (!any_weight) out[i].prior_weight = 1.0 / static_cast<double>(out.size());
  }
  return out;
}

ObservedSource parse_observed(const json& j, const std::filesystem::path& base) {
  check_keys(j, "observed", {"file", "summary", "synthetic"});
  if (j.size() != 1) bad("observed", "give exactly one of file, summary, synthetic");
  ObservedSource src;
  if (j.contains("file")) {
    std::filesystem::path p = get_string(j["file"], "observed.file");
    if (p.is_relative()) p = base / p;
    if (!std::filesystem::exists(p)) bad("observed.file", "file not found: " + p.string());
    src.file = p;
  } else if (j.contains("summary")) {
    if (!j["summary"].is_array() || j["summary"].empty()) bad("observed.summary", "must be a non-empty array");
    SummaryVector s;
    for (const auto& x : j["summary"]) s.push_back(get_double(x, "observed.summary"));
    src.summary = s;
  } else {
    const json& syn = j["synthetic"];
    check_keys(syn, "observed.synthetic", {"model", "theta", "seed"});
    if (!syn.contains("model")) bad("observed.synthetic.model", "required");
    src.model = get_string(syn["model"], "observed.synthetic.model");
    if (syn.contains("theta")) {
      if (!syn["theta"].is_array()) bad("observed.synthetic.theta", "must be an array");
      for (const auto& x : syn["theta"]) src.theta.push_back(get_double(x, "observed.synthetic.theta"));
    }
    if (syn.contains("seed")) src.seed = get_seed(syn["seed"], "observed.synthetic.seed");
  }
  return src;
}

void parse_harness(const json& j, RunConfig& cfg) {
  check_keys(j, "harness",
             {"c", "epsilons", "v_mode", "adjust", "model_prob_mode", "resimulate", "heteroskedastic"});
  HarnessConfig& h = cfg.harness;
  if (j.contains("c")) h.c = get_count(j["c"], "harness.c", 1);
  if (j.contains("v_mode")) {
    h.v_mode = converted("harness.v_mode", [&] { return v_mode_from_string(get_string(j["v_mode"], "harness.v_mode")); });
  }
  if (j.contains("adjust")) {
    h.adjust = converted("harness.adjust", [&] { return adjust_mode_from_string(get_string(j["adjust"], "harness.adjust")); });
  }
  if (j.contains("model_prob_mode")) {
    h.model_prob_mode = converted("harness.model_prob_mode", [&] {
      return model_prob_mode_from_string(get_string(j["model_prob_mode"], "harness.model_prob_mode"));
    });
  }
  if (j.contains("resimulate")) cfg.resimulate = get_bool(j["resimulate"], "harness.resimulate");
  if (j.contains("heteroskedastic")) {
    h.regression.heteroskedastic = get_bool(j["heteroskedastic"], "harness.heteroskedastic");
  }
  if (!j.contains("epsilons")) {
    cfg.grid = GridSpec{};
    return;
  }
  const json& e = j["epsilons"];
  if (e.is_array()) {
    std::vector<double> eps;
    for (const auto& x : e) {
      eps.push_back(x.is_string() ? parse_epsilon(x.get<std::string>()) : get_double(x, "harness.epsilons"));
    }
    h.epsilons = converted("harness.epsilons", [&] { return validate_grid(eps); });
    cfg.grid.reset();
  } else {
    check_keys(e, "harness.epsilons", {"q", "max_fraction", "min_fraction"});
    GridSpec g;
    if (e.contains("q")) g.q = get_count(e["q"], "harness.epsilons.q", 1);
    if (e.contains("max_fraction")) g.max_fraction = get_double(e["max_fraction"], "harness.epsilons.max_fraction");
    if (e.contains("min_fraction")) g.min_fraction = get_double(e["min_fraction"], "harness.epsilons.min_fraction");
    if (!(g.max_fraction > 0 && g.max_fraction <= 1)) bad("harness.epsilons.max_fraction", "must be in (0, 1]");
    if (g.min_fraction && !(*g.min_fraction > 0 && *g.min_fraction <= g.max_fraction)) {
      bad("harness.epsilons.min_fraction", "must be in (0, max_fraction]");
    }
    cfg.grid = g;
  }
}

void parse_report(const json& j, ReportOptions& r) {
  check_keys(j, "report",
             {"statistics", "histogram_bins", "calibration_bins", "mc_replicates", "mc_seed", "ks_method"});
  if (j.contains("statistics")) {
    if (!j["statistics"].is_array()) bad("report.statistics", "must be an array");
    r.statistics.clear();
    for (const auto& s : j["statistics"]) {
      const std::string name = get_string(s, "report.statistics");
      if (name != "X2" && name != "KS" && name != "U" && name != "V" && name != "W") {
        bad("report.statistics", "unknown statistic '" + name + "'");
      }
      r.statistics.insert(name);
    }
  }
  if (j.contains("histogram_bins")) r.histogram_bins = get_count(j["histogram_bins"], "report.histogram_bins", 1);
  if (j.contains("calibration_bins")) {
    r.calibration_bins = get_count(j["calibration_bins"], "report.calibration_bins", 1);
  }
  if (j.contains("mc_replicates")) r.mc_replicates = get_count(j["mc_replicates"], "report.mc_replicates", 1);
  if (j.contains("mc_seed")) r.mc_seed = get_seed(j["mc_seed"], "report.mc_seed");
  if (j.contains("ks_method")) {
    const std::string m = get_string(j["ks_method"], "report.ks_method");
    if (m != "asymptotic" && m != "monte-carlo") bad("report.ks_method", "must be asymptotic or monte-carlo");
    r.ks_monte_carlo = m == "monte-carlo";
  }
}

std::size_t parse_threads(const std::string& text, const std::string& key) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (text.empty() || *end != '\0' || errno != 0 || text[0] == '-') bad(key, "must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

double parse_epsilon(const std::string& text) {
  if (text == "inf" || text == "Inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0' || !(v >= 0) || std::isnan(v)) {
    throw ConfigError("invalid epsilon '" + text + "'");
  }
  return v;
}

std::vector<double> parse_epsilon_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_epsilon(item));
  try {
    return validate_grid(out);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("--epsilons: ") + e.what());
  }
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "",
             {"$schema", "model_set", "models", "summary", "N", "n_obs", "allocation", "seed", "observed", "harness",
              "report", "out", "table", "threads"});
  RunConfig cfg;
  if (j.contains("models") == j.contains("model_set")) bad("models", "give exactly one of models, model_set");
  cfg.models = j.contains("models") ? parse_models(j["models"]) : named_set(get_string(j["model_set"], "model_set"));
  if (j.contains("summary")) {
    cfg.summary = converted("summary", [&] { return summary_kind_from_string(get_string(j["summary"], "summary")); });
  }
  if (j.contains("N")) cfg.n_rows = get_count(j["N"], "N", 2);
  if (j.contains("n_obs")) cfg.n_obs = get_count(j["n_obs"], "n_obs", 1);
  if (j.contains("allocation")) {
    const std::string a = get_string(j["allocation"], "allocation");
    if (a == "equal") cfg.allocation = Allocation::equal;
    else if (a == "proportional") cfg.allocation = Allocation::proportional;
    else bad("allocation", "must be equal or proportional");
  }
  if (j.contains("seed")) cfg.seed = get_seed(j["seed"], "seed");
  if (!j.contains("observed")) bad("observed", "required");
  cfg.observed = parse_observed(j["observed"], base_dir);
  cfg.grid = GridSpec{};
  if (j.contains("harness")) parse_harness(j["harness"], cfg);
  if (j.contains("report")) parse_report(j["report"], cfg.report);
  if (j.contains("out")) {
    std::filesystem::path p = get_string(j["out"], "out");
    cfg.out = p.is_relative() ? base_dir / p : p;
  } else {
    cfg.out = base_dir / cfg.out;
  }
  if (j.contains("table")) {
    std::filesystem::path p = get_string(j["table"], "table");
    cfg.table = p.is_relative() ? base_dir / p : p;
  }
  if (j.contains("threads")) cfg.threads = get_count(j["threads"], "threads", 0);

  // Fail before any compute if the models or observed source are unusable.
  const ModelSet models = make_model_set(cfg);
  if (!cfg.observed.model.empty()) {
    bool found = false;
    for (const auto& e : cfg.models) found = found || e.name == cfg.observed.model;
    if (!found) bad("observed.synthetic.model", "'" + cfg.observed.model + "' is not in the model set");
  }
  if (cfg.observed.summary && cfg.observed.summary->size() != models.summary_dim()) {
    bad("observed.summary", "expected " + std::to_string(models.summary_dim()) + " values");
  }
  cfg.harness.seed = cfg.seed;
  cfg.harness.threads = cfg.threads;
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

void apply_env_overrides(RunConfig& config) {
  if (const char* out = std::getenv("ABC_CALIBRATE_OUT"); out && *out) config.out = out;
  if (const char* t = std::getenv("ABC_CALIBRATE_THREADS"); t && *t) {
    config.threads = parse_threads(t, "ABC_CALIBRATE_THREADS");
    config.harness.threads = config.threads;
  }
}

ModelSet make_model_set(const RunConfig& config) {
  try {
    return ModelSet(config.models, config.n_obs, config.summary);
  } catch (const InvalidArgument& e) {
    bad("models", e.what());
  }
}

SummaryVector observed_summary(const RunConfig& config, const ModelSet& models) {
  const ObservedSource& src = config.observed;
  if (src.summary) return *src.summary;
  if (src.file) {
    std::ifstream in(*src.file);
    if (!in) throw ConfigError("cannot read observed data '" + src.file->string() + "'");
    std::vector<double> data;
    double x;
    while (in >> x) data.push_back(x);
    if (!in.eof()) throw ConfigError("observed data '" + src.file->string() + "' contains a non-numeric token");
    if (data.empty()) throw ConfigError("observed data '" + src.file->string() + "' is empty");
    return models.summarize(data);
  }
  ModelId id = 0;
  for (std::size_t i = 0; i < config.models.size(); ++i) {
    if (config.models[i].name == src.model) id = static_cast<ModelId>(i + 1);
  }
  if (id == 0) throw ConfigError("observed model '" + src.model + "' is not in the model set");
  if (src.theta.size() != models.spec(id).param_dim()) {
    bad("observed.synthetic.theta", "expected " + std::to_string(models.spec(id).param_dim()) + " values");
  }
  Engine rng = make_stream(src.seed, StreamTag::observed, 0, 0);
  try {
    return models.summarize(models.simulate(id, src.theta, rng));
  } catch (const InvalidArgument& e) {
    bad("observed.synthetic.theta", e.what());
  }
}

void check_compatible(const ReferenceTable& table, const ModelSet& models) {
  const std::vector<TableModel> want = ReferenceTable::describe(models);
  if (table.summary_dim() != models.summary_dim()) {
    throw ConfigError("table summary dimension " + std::to_string(table.summary_dim()) + " does not match config (" +
                      std::to_string(models.summary_dim()) + ")");
  }
  if (table.models().size() != want.size()) throw ConfigError("table was built for a different number of models");
  for (std::size_t i = 0; i < want.size(); ++i) {
    const TableModel& have = table.models()[i];
    if (have.name != want[i].name || have.params != want[i].params) {
      throw ConfigError("table model " + std::to_string(i + 1) + " is '" + have.name + "', config expects '" +
                        want[i].name + "'");
    }
  }
  if (!table.has_scale()) throw ConfigError("table has no distance scale");
}

BuildResult run_build(const RunConfig& config, std::ostream& log) {
  const ModelSet models = make_model_set(config);
  ReferenceTable table = build_table(models, config.n_rows, config.allocation, config.seed, config.threads);
  BuildResult r{config.table_path(), table_checksum(table), table.size()};
  if (r.path.has_parent_path()) std::filesystem::create_directories(r.path.parent_path());
  save_table(table, r.path);
  log << "built " << r.rows << " rows -> " << r.path.string() << " checksum " << r.checksum << '\n';
  return r;
}

DiagnoseResult run_diagnose(const RunConfig& config, const ReferenceTable& table, std::ostream& log) {
  const ModelSet models = make_model_set(config);
  check_compatible(table, models);
  HarnessConfig hc = config.harness;
  hc.observed = observed_summary(config, models);
  if (hc.epsilons.empty()) {
    hc.epsilons = epsilon_grid(table, hc.observed, config.grid.value_or(GridSpec{}));
  }
  DiagnoseResult r;
  r.harness = config.resimulate ? resimulate_mode(models, table, hc, config.allocation) : run_harness(table, hc);
  r.report = build_report(r.harness, config.report);
  r.report.metadata["output_label"] = std::string(to_string(hc.v_mode)) + "/" + std::string(to_string(hc.adjust));
  write_harness_output(r.harness, config.out);
  emit(r.report, config.out);

  for (std::size_t e = 0; e < hc.epsilons.size(); ++e) {
    const EpsilonSummary& s = r.harness.per_epsilon[e];
    log << "eps=" << format_number(s.epsilon) << " accepted(min)=" << s.min_accepted
        << " dropped=" << s.infeasible << '\n';
    for (const Curve& c : r.report.curves) {
      const CurvePoint& p = c.points[e];
      log << "  " << c.statistic << ' ' << c.target << ": ";
      if (p.missing) log << "missing\n";
      else log << "stat=" << format_number(p.value) << " p=" << format_number(p.p_value) << " n=" << p.n_used << '\n';
    }
  }
  log << "wrote " << config.out.string() << " [" << r.report.metadata["output_label"].get<std::string>() << "]\n";
  return r;
}

}  // namespace abc
