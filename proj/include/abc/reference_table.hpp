#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abc/error.hpp"
#include "abc/models.hpp"

namespace abc {

/// Per-coordinate distance scales v_j (prior-predictive standard deviations).
struct DistanceScale {
  std::vector<double> v;

  /// Throws InvalidArgument unless v has `dim` finite, strictly positive entries.
  void validate(std::size_t dim) const;
  bool operator==(const DistanceScale&) const = default;
};

/// Model metadata carried by a table so it can be interpreted without the ModelSet.
struct TableModel {
  ModelId id = 0;
  std::string name;
  double prior_weight = 0.0;
  std::vector<ParamInfo> params;

  std::size_t param_dim() const { return params.size(); }
  bool operator==(const TableModel&) const = default;
};

enum class Allocation { proportional, equal };

/// The reference set U of simulated (model, theta, summary) triples.
/// Immutable once built; concurrent readers are safe.
class ReferenceTable {
 public:
  ReferenceTable() = default;
  ReferenceTable(std::vector<TableModel> models, std::size_t summary_dim);

  /// Model metadata for a ModelSet.
  static std::vector<TableModel> describe(const ModelSet& models);

  void reserve(std::size_t rows, std::size_t theta_values);
  void append(ModelId id, std::span<const double> theta, std::span<const double> summary);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::size_t summary_dim() const { return summary_dim_; }
  std::size_t model_count() const { return models_.size(); }

  ModelId model_id(std::size_t row) const { return ids_[row]; }
  std::span<const double> theta(std::size_t row) const {
    return {thetas_.data() + theta_offset_[row], theta_offset_[row + 1] - theta_offset_[row]};
  }
  std::span<const double> summary(std::size_t row) const {
    return {summaries_.data() + row * summary_dim_, summary_dim_};
  }
  /// Row-major N x d block of all summaries.
  std::span<const double> summaries() const { return summaries_; }
  const std::vector<ModelId>& model_ids() const { return ids_; }

  const std::vector<TableModel>& models() const { return models_; }
  const TableModel& model(ModelId id) const;
  std::size_t param_dim(ModelId id) const { return model(id).param_dim(); }

  /// Row counts per model, indexed by model id - 1; sums to size().
  const std::vector<std::size_t>& per_model_counts() const { return counts_; }

  bool has_scale() const { return !scale_.v.empty(); }
  const DistanceScale& scale() const;
  void set_scale(DistanceScale scale);

  const nlohmann::json& provenance() const { return provenance_; }
  void set_provenance(nlohmann::json provenance) { provenance_ = std::move(provenance); }

  bool operator==(const ReferenceTable&) const = default;

 private:
  std::vector<TableModel> models_;
  std::size_t summary_dim_ = 0;
  std::vector<ModelId> ids_;
  std::vector<std::size_t> theta_offset_{0};
  std::vector<double> thetas_;
  std::vector<double> summaries_;
  std::vector<std::size_t> counts_;
  DistanceScale scale_;
  nlohmann::json provenance_ = nlohmann::json::object();
};

/// Error raised when a simulator keeps producing non-finite summaries.
class SimulationError : public Error {
 public:
  SimulationError(ModelId id, ParamVector theta, const std::string& what)
      : Error(what), model_id(id), theta(std::move(theta)) {}
  ModelId model_id;
  ParamVector theta;
};

/// Simulates N triples. Row i uses streams derived from (seed, i) only, so the
/// table is identical for any thread count. "equal" assigns models round-robin;
/// "proportional" draws m ~ p(m) per row. The scale is estimated when N >= 2.
ReferenceTable build_table(const ModelSet& models, std::size_t n, Allocation allocation, std::uint64_t seed,
                           std::size_t threads = 0);

/// Sample standard deviation (divisor n - 1) of every summary coordinate.
DistanceScale estimate_scale(const ReferenceTable& table);

/// [sum_j (a_j - b_j)^2 / v_j^2]^(1/2)
double distance(std::span<const double> a, std::span<const double> b, const DistanceScale& scale);

/// Distances from every row to target, in row order.
std::vector<double> distances_to(const ReferenceTable& table, std::span<const double> target,
                                 std::size_t threads = 1);

/// Indices of the c rows closest to target, ordered by (distance, index).
std::vector<std::size_t> nearest(const ReferenceTable& table, std::span<const double> target, std::size_t c);
/// Same selection from precomputed distances.
std::vector<std::size_t> nearest(std::span<const double> distances, std::size_t c);

/// Binary persistence: "ABCT", u32 version, u64 header length, JSON header,
/// then row-major little-endian f64 rows (model id, theta..., summary...).
inline constexpr std::uint32_t kTableFormatVersion = 1;
void save_table(const ReferenceTable& table, const std::filesystem::path& path);
ReferenceTable load_table(const std::filesystem::path& path);

/// CRC-32 of the binary payload, as 8 lowercase hex digits.
std::string table_checksum(const ReferenceTable& table);

/// CSV with header `model,theta_1..theta_p,s_1..s_d`; p is the widest model.
void export_csv(const ReferenceTable& table, const std::filesystem::path& path);

}  // namespace abc
