#include "abc/reference_table.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <zlib.h>

#include "abc/error.hpp"
#include "abc/parallel.hpp"

namespace abc {

void DistanceScale::validate(std::size_t dim) const {
  if (v.size() != dim) throw InvalidArgument("distance scale length does not match summary dimension");
  for (double x : v) {
    if (!std::isfinite(x) || !(x > 0.0)) throw InvalidArgument("distance scale entries must be finite and positive");
  }
}

ReferenceTable::ReferenceTable(std::vector<TableModel> models, std::size_t summary_dim)
    : models_(std::move(models)), summary_dim_(summary_dim), counts_(models_.size(), 0) {
  if (models_.empty()) throw InvalidArgument("reference table needs at least one model");
  if (summary_dim_ == 0) throw InvalidArgument("summary dimension must be positive");
  for (std::size_t i = 0; i < models_.size(); ++i) {
    if (models_[i].id != static_cast<ModelId>(i + 1)) throw InvalidArgument("model ids must be 1..M in order");
  }
}

std::vector<TableModel> ReferenceTable::describe(const ModelSet& models) {
  std::vector<TableModel> out;
  for (const auto& spec : models.specs()) {
    out.push_back({spec.model_id, spec.name, spec.prior_weight, spec.params});
  }
  return out;
}

void ReferenceTable::reserve(std::size_t rows, std::size_t theta_values) {
  ids_.reserve(rows);
  theta_offset_.reserve(rows + 1);
  thetas_.reserve(theta_values);
  summaries_.reserve(rows * summary_dim_);
}

const TableModel& ReferenceTable::model(ModelId id) const {
  if (id < 1 || static_cast<std::size_t>(id) > models_.size()) {
    throw InvalidArgument("unregistered model id " + std::to_string(id));
  }
  return models_[static_cast<std::size_t>(id - 1)];
}

void ReferenceTable::append(ModelId id, std::span<const double> theta, std::span<const double> summary) {
  const TableModel& m = model(id);
  if (theta.size() != m.param_dim()) {
    throw InvalidArgument("parameter vector length does not match model '" + m.name + "'");
  }
  if (summary.size() != summary_dim_) throw InvalidArgument("summary length does not match table");
  ids_.push_back(id);
  thetas_.insert(thetas_.end(), theta.begin(), theta.end());
  theta_offset_.push_back(thetas_.size());
  summaries_.insert(summaries_.end(), summary.begin(), summary.end());
  ++counts_[static_cast<std::size_t>(id - 1)];
}

const DistanceScale& ReferenceTable::scale() const {
  if (!has_scale()) throw InvalidArgument("reference table has no distance scale");
  return scale_;
}

void ReferenceTable::set_scale(DistanceScale scale) {
  scale.validate(summary_dim_);
  scale_ = std::move(scale);
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxSimulationAttempts = 10;

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

std::string to_string(Allocation a) { return a == Allocation::equal ? "equal" : "proportional"; }

}  // namespace

ReferenceTable build_table(const ModelSet& models, std::size_t n, Allocation allocation, std::uint64_t seed,
                           std::size_t threads) {
  if (n == 0) throw InvalidArgument("build_table: N must be at least 1");
  const std::size_t m_count = models.size();
  const std::size_t dim = models.summary_dim();

  std::vector<ModelId> ids(n);
  if (allocation == Allocation::equal) {
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<ModelId>(i % m_count + 1);
  } else {
    const std::vector<double> weights = models.prior_weights();
    for (std::size_t i = 0; i < n; ++i) {
      Engine rng = make_stream(seed, StreamTag::table_row, i, 1);
      double u = uniform_open(rng);
      ModelId id = static_cast<ModelId>(m_count);
      for (std::size_t k = 0; k < m_count; ++k) {
        if (u < weights[k]) {
          id = static_cast<ModelId>(k + 1);
          break;
        }
        u -= weights[k];
      }
      ids[i] = id;
    }
  }

  std::vector<std::size_t> offsets(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] = offsets[i] + models.spec(ids[i]).param_dim();
  std::vector<double> thetas(offsets[n]);
  std::vector<double> summaries(n * dim);

  parallel_for(n, threads, [&](std::size_t i) {
    Engine rng = make_stream(seed, StreamTag::table_row, i, 0);
    const ModelId id = ids[i];
    ParamVector theta = models.sample_prior(id, rng);
    for (int attempt = 1;; ++attempt) {
      const SummaryVector s = models.summarize(models.simulate(id, theta, rng));
      if (all_finite(s)) {
        std::copy(s.begin(), s.end(), summaries.begin() + static_cast<std::ptrdiff_t>(i * dim));
        break;
      }
      if (attempt == kMaxSimulationAttempts) {
        std::ostringstream msg;
        msg << "simulation failed " << kMaxSimulationAttempts << " times for model " << id << " with theta (";
        for (std::size_t j = 0; j < theta.size(); ++j) msg << (j ? ", " : "") << theta[j];
        msg << ")";
        throw SimulationError(id, theta, msg.str());
      }
    }
    std::copy(theta.begin(), theta.end(), thetas.begin() + static_cast<std::ptrdiff_t>(offsets[i]));
  });

  ReferenceTable table(ReferenceTable::describe(models), dim);
  table.reserve(n, thetas.size());
  for (std::size_t i = 0; i < n; ++i) {
    table.append(ids[i], std::span(thetas).subspan(offsets[i], offsets[i + 1] - offsets[i]),
                 std::span(summaries).subspan(i * dim, dim));
  }
  nlohmann::json prov;
  prov["seed"] = seed;
  prov["N"] = n;
  prov["allocation"] = to_string(allocation);
  prov["n_obs"] = models.n_obs();
  prov["summary"] = std::string(to_string(models.summary_kind()));
  prov["models"] = nlohmann::json::array();
  for (const auto& spec : models.specs()) prov["models"].push_back(spec.name);
  table.set_provenance(std::move(prov));
  if (n >= 2) table.set_scale(estimate_scale(table));
  return table;
}

DistanceScale estimate_scale(const ReferenceTable& table) {
  const std::size_t n = table.size();
  const std::size_t dim = table.summary_dim();
  if (n < 2) throw InvalidArgument("estimate_scale: need at least two rows");
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = table.summary(i);
    for (std::size_t j = 0; j < dim; ++j) mean[j] += s[j];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  std::vector<double> ss(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = table.summary(i);
    for (std::size_t j = 0; j < dim; ++j) ss[j] += (s[j] - mean[j]) * (s[j] - mean[j]);
  }
  DistanceScale scale;
  for (std::size_t j = 0; j < dim; ++j) {
    const double sd = std::sqrt(ss[j] / static_cast<double>(n - 1));
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      throw InvalidArgument("estimate_scale: summary s_" + std::to_string(j + 1) + " has zero variance");
    }
    scale.v.push_back(sd);
  }
  return scale;
}

double distance(std::span<const double> a, std::span<const double> b, const DistanceScale& scale) {
  if (a.size() != b.size() || a.size() != scale.v.size()) throw InvalidArgument("distance: length mismatch");
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = (a[j] - b[j]) / scale.v[j];
    sum += d * d;
  }
  return std::sqrt(sum);
}

std::vector<double> distances_to(const ReferenceTable& table, std::span<const double> target, std::size_t threads) {
  const DistanceScale& scale = table.scale();
  if (target.size() != table.summary_dim()) throw InvalidArgument("distance: length mismatch");
  constexpr std::size_t kChunk = 8192;
  const std::size_t n = table.size();
  std::vector<double> out(n);
  parallel_for((n + kChunk - 1) / kChunk, threads, [&](std::size_t chunk) {
    const std::size_t end = std::min(n, (chunk + 1) * kChunk);
    for (std::size_t i = chunk * kChunk; i < end; ++i) out[i] = distance(table.summary(i), target, scale);
  });
  return out;
}

std::vector<std::size_t> nearest(std::span<const double> distances, std::size_t c) {
  const std::size_t n = distances.size();
  if (c < 1 || c > n) throw InvalidArgument("nearest: c must lie in [1, N]");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto closer = [&](std::size_t a, std::size_t b) {
    return distances[a] < distances[b] || (distances[a] == distances[b] && a < b);
  };
  if (c < n) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(c - 1), idx.end(), closer);
  idx.resize(c);
  std::sort(idx.begin(), idx.end(), closer);
  return idx;
}

std::vector<std::size_t> nearest(const ReferenceTable& table, std::span<const double> target, std::size_t c) {
  if (c < 1 || c > table.size()) throw InvalidArgument("nearest: c must lie in [1, N]");
  return nearest(distances_to(table, target), c);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[4] = {'A', 'B', 'C', 'T'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

void put_f64(std::string& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

std::uint64_t get_u64(const char* p, int bytes = 8) {
  std::uint64_t v = 0;
  for (int b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return v;
}

double get_f64(const char* p) { return std::bit_cast<double>(get_u64(p)); }

std::string payload_of(const ReferenceTable& table) {
  std::string out;
  std::size_t values = 0;
  for (std::size_t i = 0; i < table.size(); ++i) values += 1 + table.theta(i).size() + table.summary_dim();
  out.reserve(values * 8);
  for (std::size_t i = 0; i < table.size(); ++i) {
    put_f64(out, static_cast<double>(table.model_id(i)));
    for (double t : table.theta(i)) put_f64(out, t);
    for (double s : table.summary(i)) put_f64(out, s);
  }
  return out;
}

std::uint32_t crc_of(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto len = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), len);
    pos += len;
  }
  return static_cast<std::uint32_t>(crc);
}

// Infinite bounds are stored as null.
nlohmann::json bound_to_json(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

double bound_from_json(const nlohmann::json& j, bool upper) {
  if (j.is_null()) return upper ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  return j.get<double>();
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

}  // namespace

std::string table_checksum(const ReferenceTable& table) { return hex32(crc_of(payload_of(table))); }

void save_table(const ReferenceTable& table, const std::filesystem::path& path) {
  const std::string payload = payload_of(table);
  nlohmann::json header;
  header["format"] = "abc-reference-table";
  header["n_rows"] = table.size();
  header["summary_dim"] = table.summary_dim();
  header["models"] = nlohmann::json::array();
  for (const auto& m : table.models()) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : m.params) {
      params.push_back({{"name", p.name},
                        {"lower", bound_to_json(p.lower)},
                        {"upper", bound_to_json(p.upper)},
                        {"transform", std::string(to_string(p.transform))}});
    }
    header["models"].push_back(
        {{"id", m.id}, {"name", m.name}, {"prior_weight", m.prior_weight}, {"params", std::move(params)}});
  }
  header["per_model_counts"] = table.per_model_counts();
  header["scale"] = table.has_scale() ? nlohmann::json(table.scale().v) : nlohmann::json(nullptr);
  header["payload_bytes"] = payload.size();
  header["payload_crc32"] = hex32(crc_of(payload));
  header["provenance"] = table.provenance();
  const std::string header_text = header.dump();

  std::string prefix(kMagic, 4);
  put_u32(prefix, kTableFormatVersion);
  put_u64(prefix, header_text.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(prefix.data(), static_cast<std::streamsize>(prefix.size()));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out.flush();
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

ReferenceTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open table file '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = "table file '" + path.string() + "': ";

  if (bytes.size() < 16 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw FormatError(where + "bad magic bytes");
  }
  const auto version = static_cast<std::uint32_t>(get_u64(bytes.data() + 4, 4));
  if (version != kTableFormatVersion) {
    throw FormatError(where + "format version " + std::to_string(version) + " not supported (expected " +
                      std::to_string(kTableFormatVersion) + ")");
  }
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (header_len > bytes.size() - 16) throw FormatError(where + "truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + "corrupt header: " + e.what());
  }

  try {
    const std::string payload = bytes.substr(16 + header_len);
    if (payload.size() != header.at("payload_bytes").get<std::size_t>()) {
      throw FormatError(where + "payload is " + std::to_string(payload.size()) + " bytes, header declares " +
                        std::to_string(header.at("payload_bytes").get<std::size_t>()) + " (truncated file?)");
    }
    if (hex32(crc_of(payload)) != header.at("payload_crc32").get<std::string>()) {
      throw FormatError(where + "checksum mismatch");
    }

    std::vector<TableModel> models;
    for (const auto& m : header.at("models")) {
      std::vector<ParamInfo> params;
      for (const auto& p : m.at("params")) {
        params.push_back({p.at("name").get<std::string>(), bound_from_json(p.at("lower"), false),
                          bound_from_json(p.at("upper"), true),
                          transform_from_string(p.at("transform").get<std::string>())});
      }
      models.push_back({m.at("id").get<ModelId>(), m.at("name").get<std::string>(),
                        m.at("prior_weight").get<double>(), std::move(params)});
    }
    const auto dim = header.at("summary_dim").get<std::size_t>();
    const auto n_rows = header.at("n_rows").get<std::size_t>();
    ReferenceTable table(std::move(models), dim);

    const char* p = payload.data();
    const char* end = payload.data() + payload.size();
    std::vector<double> theta;
    std::vector<double> summary(dim);
    for (std::size_t i = 0; i < n_rows; ++i) {
      if (end - p < 8) throw FormatError(where + "payload ends early");
      const double raw_id = get_f64(p);
      p += 8;
      const auto id = static_cast<ModelId>(raw_id);
      if (static_cast<double>(id) != raw_id || id < 1 || static_cast<std::size_t>(id) > table.model_count()) {
        throw FormatError(where + "invalid model id in row " + std::to_string(i));
      }
      const std::size_t pdim = table.param_dim(id);
      if (static_cast<std::size_t>(end - p) < 8 * (pdim + dim)) throw FormatError(where + "payload ends early");
      theta.resize(pdim);
      for (auto& t : theta) {
        t = get_f64(p);
        p += 8;
      }
      for (auto& s : summary) {
        s = get_f64(p);
        p += 8;
      }
      table.append(id, theta, summary);
    }
    if (p != end) throw FormatError(where + "trailing bytes after last row");
    if (header.at("per_model_counts").get<std::vector<std::size_t>>() != table.per_model_counts()) {
      throw FormatError(where + "per-model counts disagree with rows");
    }
    if (!header.at("scale").is_null()) table.set_scale({header.at("scale").get<std::vector<double>>()});
    table.set_provenance(header.value("provenance", nlohmann::json::object()));
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + "malformed header: " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(where + e.what());
  }
}

void export_csv(const ReferenceTable& table, const std::filesystem::path& path) {
  std::size_t p = 0;
  for (const auto& m : table.models()) p = std::max(p, m.param_dim());
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "model";
  for (std::size_t j = 1; j <= p; ++j) out << ",theta_" << j;
  for (std::size_t j = 1; j <= table.summary_dim(); ++j) out << ",s_" << j;
  out << '\n';
  char buf[40];
  const auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
  };
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.model_id(i);
    const auto theta = table.theta(i);
    for (std::size_t j = 0; j < p; ++j) {
      out << ',';
      if (j < theta.size()) out << num(theta[j]);
    }
    for (double s : table.summary(i)) out << ',' << num(s);
    out << '\n';
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace abc
