#pragma once

// Aggregates harness output into diagnostic curves over epsilon, p0
// histograms and binned model-calibration data, and writes them to disk.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abc/calibration_stats.hpp"
#include "abc/harness.hpp"

namespace abc {

inline constexpr int kReportSchemaVersion = 1;

struct CurvePoint {
  double epsilon = 0.0;
  bool missing = false;  ///< no feasible records at this epsilon
  double value = 0.0;
  double p_value = 0.0;
  StatMethod method = StatMethod::asymptotic;
  std::size_t n_used = 0;  ///< records entering the statistic

  bool operator==(const CurvePoint&) const = default;
};

struct Curve {
  std::string target;     ///< "model:param", a model name, or "all" for W
  std::string kind;       ///< "parameter" or "model"
  std::string statistic;  ///< X2, KS, U, V, W
  std::vector<CurvePoint> points;

  bool operator==(const Curve&) const = default;
};

struct HistogramSeries {
  std::string param;  ///< "model:param"
  double epsilon = 0.0;
  std::vector<std::size_t> counts;

  bool operator==(const HistogramSeries&) const = default;
};

struct CalibrationBin {
  double low = 0.0;
  double high = 0.0;
  std::size_t n = 0;
  std::size_t k = 0;
  double post_mean = 0.5;  ///< (k + 1) / (n + 2)
  double ci_low = 0.0;     ///< central 95% interval of Beta(k + 1, n - k + 1)
  double ci_high = 0.0;

  bool operator==(const CalibrationBin&) const = default;
};

struct CalibrationSeries {
  std::string model;
  double epsilon = 0.0;
  std::vector<CalibrationBin> bins;

  bool operator==(const CalibrationSeries&) const = default;
};

struct DiagnosticReport {
  int schema_version = kReportSchemaVersion;
  std::vector<Curve> curves;
  std::vector<HistogramSeries> histograms;
  std::vector<CalibrationSeries> calibration;
  nlohmann::json metadata = nlohmann::json::object();

  bool operator==(const DiagnosticReport&) const = default;
};

struct ReportOptions {
  std::set<std::string> statistics{"X2", "KS", "U", "V", "W"};
  std::size_t histogram_bins = 20;
  std::size_t calibration_bins = 10;
  std::size_t mc_replicates = 999;
  std::uint64_t mc_seed = 0;
  bool ks_monte_carlo = false;
};

/// Equal-width bin counts on [0,1]; the value 1 falls in the last bin.
std::vector<std::size_t> build_histogram(std::span<const double> values, std::size_t bins);

/// Equal partition of [0,1]; z_j = 1 falls in the last bin.
std::vector<CalibrationBin> build_calibration(std::span<const int> q, std::span<const double> z, std::size_t bins);

/// One curve per (parameter, statistic) and (model, statistic), plus W.
std::vector<Curve> build_curves(const HarnessOutput& output, const ReportOptions& options = {});

DiagnosticReport build_report(const HarnessOutput& output, const ReportOptions& options = {});

/// Writes report.json, curves.csv, histograms.csv and calibration.csv.
void emit(const DiagnosticReport& report, const std::filesystem::path& dir);
/// Parses report.json written by emit().
DiagnosticReport load_report(const std::filesystem::path& dir);

/// Writes harness.json, p0.csv (v_index,epsilon,param,p0) and
/// z.csv (v_index,epsilon,model,z,m0,feasible).
void write_harness_output(const HarnessOutput& output, const std::filesystem::path& dir);

/// Decimal with 12 significant digits; "inf" for infinity.
std::string format_number(double x);

/// Doubles as JSON numbers, with non-finite values as strings.
nlohmann::json number_to_json(double x);
double number_from_json(const nlohmann::json& j);

}  // namespace abc
