#pragma once

// JSON run configuration and the build / diagnose stages composed from the
// library modules. The command-line tool is a thin wrapper over these.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abc/harness.hpp"
#include "abc/models.hpp"
#include "abc/reference_table.hpp"
#include "abc/report.hpp"

namespace abc {

/// Where the observed summary comes from.
struct ObservedSource {
  std::optional<std::filesystem::path> file;  ///< whitespace-separated raw data
  std::optional<SummaryVector> summary;       ///< given directly
  // synthetic: simulate from `model` at `theta`
  std::string model;
  ParamVector theta;
  std::uint64_t seed = 0;
};

struct RunConfig {
  std::vector<ModelSet::Entry> models;
  std::optional<SummaryKind> summary;
  std::size_t n_rows = 200000;
  std::size_t n_obs = 100;
  Allocation allocation = Allocation::equal;
  std::uint64_t seed = 0;
  ObservedSource observed;

  HarnessConfig harness;                ///< epsilons empty when `grid` is used
  std::optional<GridSpec> grid;
  bool resimulate = false;
  ReportOptions report;

  std::filesystem::path out = "abc-out";
  std::optional<std::filesystem::path> table;  ///< defaults to out/table.abct
  std::size_t threads = 0;

  std::filesystem::path table_path() const { return table ? *table : out / "table.abct"; }
};

/// Validates and converts; relative file paths resolve against base_dir.
/// Throws ConfigError naming the offending key.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
/// Throws ConfigError naming the path when it is missing or unreadable.
RunConfig load_run_config(const std::filesystem::path& path);

/// ABC_CALIBRATE_OUT and ABC_CALIBRATE_THREADS.
void apply_env_overrides(RunConfig& config);

/// Parses "inf" or a non-negative decimal; throws ConfigError otherwise.
double parse_epsilon(const std::string& text);
/// Comma-separated list, e.g. "13,1.5,0.28".
std::vector<double> parse_epsilon_list(const std::string& text);

ModelSet make_model_set(const RunConfig& config);
SummaryVector observed_summary(const RunConfig& config, const ModelSet& models);

/// Throws ConfigError when the table was built for a different model set.
void check_compatible(const ReferenceTable& table, const ModelSet& models);

struct BuildResult {
  std::filesystem::path path;
  std::string checksum;
  std::size_t rows = 0;
};
BuildResult run_build(const RunConfig& config, std::ostream& log);

struct DiagnoseResult {
  HarnessOutput harness;
  DiagnosticReport report;
};
DiagnoseResult run_diagnose(const RunConfig& config, const ReferenceTable& table, std::ostream& log);

}  // namespace abc
