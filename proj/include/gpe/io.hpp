#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "gpe/core.hpp"
#include "gpe/mlp.hpp"
#include "gpe/optim.hpp"

namespace gpe {

/// Version tag written as the top-level "schema" field of every JSON output.
inline constexpr int kSchemaVersion = 1;

/// One row per point, comma separated, no header. Values are written with
/// 17 significant digits so a round trip is exact.
void write_matrix_csv(const std::filesystem::path& path, const RowMatrix& values);
RowMatrix read_matrix_csv(const std::filesystem::path& path);

void write_cloud_csv(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_cloud_csv(const std::filesystem::path& path);

/// Binary layout: n and D as little-endian uint64, then n*D little-endian
/// float64 values in row-major order.
void write_cloud_binary(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_cloud_binary(const std::filesystem::path& path);

/// Picks the reader from the extension: ".bin" is binary, anything else CSV.
PointCloud read_cloud(const std::filesystem::path& path);

/// Header "iteration,cost,grad_norm_sq,step", one line per record.
void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace);

nlohmann::json mlp_to_json(const MlpMap& map);
MlpMap mlp_from_json(const nlohmann::json& doc);
void write_mlp_json(const std::filesystem::path& path, const MlpMap& map);
MlpMap read_mlp_json(const std::filesystem::path& path);

/// Pretty-printed with a trailing newline; keys in sorted order so output is
/// byte-stable.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace gpe
