// abc-calibrate: build reference tables, run coverage diagnostics, self-test.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "abc/error.hpp"
#include "abc/run_config.hpp"
#include "abc/selftest.hpp"

namespace {

enum Exit { kOk = 0, kSelftestFailed = 1, kUsage = 2, kRuntime = 3 };

struct Flags {
  std::string config;
  std::string table;
  std::string out;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  std::string v_mode;
  std::string adjust;
  std::string epsilons;
};

abc::RunConfig resolve(const Flags& f) {
  if (f.config.empty()) throw abc::ConfigError("--config is required");
  if (!std::filesystem::exists(f.config)) throw abc::ConfigError("config file not found: " + f.config);
  abc::RunConfig cfg = abc::load_run_config(f.config);
  abc::apply_env_overrides(cfg);
  // flags win over environment, environment over file
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.table.empty()) cfg.table = f.table;
  if (f.threads) cfg.threads = cfg.harness.threads = *f.threads;
  if (f.seed) cfg.seed = cfg.harness.seed = *f.seed;
  try {
    if (!f.v_mode.empty()) cfg.harness.v_mode = abc::v_mode_from_string(f.v_mode);
    if (!f.adjust.empty()) cfg.harness.adjust = abc::adjust_mode_from_string(f.adjust);
  } catch (const abc::InvalidArgument& e) {
    throw abc::ConfigError(e.what());
  }
  if (!f.epsilons.empty()) {
    cfg.harness.epsilons = abc::parse_epsilon_list(f.epsilons);
    cfg.grid.reset();
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ABC coverage diagnostics: reference tables, coverage p-values, calibration reports"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&f](CLI::App* sub, bool with_analysis) {
    sub->add_option("-c,--config", f.config, "JSON run configuration")->required();
    sub->add_option("--table", f.table, "reference table file");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--threads", f.threads, "worker threads (results do not depend on it)");
    sub->add_option("--seed", f.seed, "master seed");
    if (with_analysis) {
      sub->add_option("--v-mode", f.v_mode, "truncated | prior");
      sub->add_option("--adjust", f.adjust, "none | regression");
      sub->add_option("--epsilons", f.epsilons, "comma-separated, descending, e.g. inf,1.5,0.28");
    }
  };
  CLI::App* build = app.add_subcommand("build", "simulate and save a reference table");
  add_common(build, false);
  CLI::App* diagnose = app.add_subcommand("diagnose", "run the coverage harness and write the report");
  add_common(diagnose, true);
  CLI::App* selftest = app.add_subcommand("selftest", "run fast correctness checks");
  selftest->add_option("--table", f.table, "also verify this table file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*selftest) {
      std::optional<std::filesystem::path> table;
      if (!f.table.empty()) table = f.table;
      const abc::SelftestResult r = abc::run_selftest(table);
      abc::print_selftest(r, std::cout);
      return r.passed() ? kOk : kSelftestFailed;
    }
    const abc::RunConfig cfg = resolve(f);
    if (*build) {
      abc::run_build(cfg, std::cout);
      return kOk;
    }
    const abc::ReferenceTable table = abc::load_table(cfg.table_path());
    abc::run_diagnose(cfg, table, std::cout);
    return kOk;
  } catch (const abc::ConfigError& e) {
    std::cerr << "abc-calibrate: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "abc-calibrate: error: " << e.what() << '\n';
    return kRuntime;
  }
}
