#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "geomint/resnet_ocp.hpp"

namespace geomint::io {

using Cell = std::variant<std::int64_t, double, std::string>;
using Row = std::vector<Cell>;

/// 17 significant digits, '.' decimal point, independent of the locale.
std::string format_double(double v);
std::string format_cell(const Cell& c);

/// Header line plus one line per row, '\n' terminated. Rows must match the
/// schema width; strings must not contain ',' or newlines.
std::string csv_string(const std::vector<Row>& rows, const std::vector<std::string>& schema);
void write_csv(const std::vector<Row>& rows, const std::vector<std::string>& schema,
               const std::filesystem::path& path);

/// Pretty-printed with two-space indent and a trailing newline.
void write_json(const nlohmann::json& value, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

nlohmann::json to_json(const TrainConfig& config);
/// Missing keys keep their defaults. Unknown keys and values of the wrong
/// type are collected and reported together in one UsageError.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::filesystem::path& path);

/// Columns (sample, x_0, ..., x_{d-1}, label).
std::vector<Row> dataset_rows(const Dataset& data);
std::vector<std::string> dataset_schema(Eigen::Index dim);

/// 64-bit FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a(const std::string& bytes);

/// Constant for one build of the library.
std::string build_fingerprint();

/// $GEOMINT_RUNS if set and non-empty, else "runs".
std::filesystem::path artifact_root();

/// One experiment output directory root/<id> with config.json, meta.json and
/// any number of CSV tables. The id is "<command>-<16 hex digits>" hashed from
/// the command and the config, so identical invocations share a directory and
/// rewrite identical bytes.
class RunArtifact
{
public:
  RunArtifact(std::string command, nlohmann::json config, std::uint64_t seed,
              std::filesystem::path root = artifact_root());

  const std::string& id() const { return id_; }
  const std::filesystem::path& dir() const { return dir_; }
  const nlohmann::json& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::string>& tables() const { return tables_; }

  /// Writes dir/<name>.csv and returns its path.
  std::filesystem::path add_table(const std::string& name, const std::vector<Row>& rows,
                                  const std::vector<std::string>& schema);
  std::filesystem::path add_json(const std::string& name, const nlohmann::json& value);

  /// Writes config.json and meta.json (command, id, seed, fingerprint, table list).
  void finish(const nlohmann::json& summary = nlohmann::json::object());

private:
  std::string command_;
  nlohmann::json config_;
  std::uint64_t seed_;
  std::string id_;
  std::filesystem::path dir_;
  std::vector<std::string> tables_;
};

} // namespace geomint::io
