#include "geomint/io.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <type_traits>
#include <sstream>

namespace geomint::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string format_cell(const Cell& c)
{
  if (const auto* d = std::get_if<double>(&c))
    return format_double(*d);
  if (const auto* i = std::get_if<std::int64_t>(&c)) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, *i);
    return std::string(buf, res.ptr);
  }
  return std::get<std::string>(c);
}

namespace {

void checkField(const std::string& s, const char* what)
{
  if (s.find_first_of(",\n\r\"") != std::string::npos)
    throw UsageError(std::string("csv: ") + what + " '" + s + "' contains a separator or quote");
}

void writeFile(const fs::path& path, const std::string& bytes)
{
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec)
      throw IoError("cannot create directory (" + ec.message() + ")", path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open for writing", path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out)
    throw IoError("write failed", path.string());
}

} // namespace

std::string csv_string(const std::vector<Row>& rows, const std::vector<std::string>& schema)
{
  if (schema.empty())
    throw UsageError("csv: empty schema");
  std::string out;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    checkField(schema[c], "column name");
    out += (c ? "," : "") + schema[c];
  }
  out += '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != schema.size())
      throw UsageError("csv: row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                       " cells, schema has " + std::to_string(schema.size()));
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const std::string cell = format_cell(rows[r][c]);
      if (std::holds_alternative<std::string>(rows[r][c]))
        checkField(cell, "cell");
      if (c)
        out += ',';
      out += cell;
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::vector<Row>& rows, const std::vector<std::string>& schema, const fs::path& path)
{
  writeFile(path, csv_string(rows, schema));
}

void write_json(const json& value, const fs::path& path) { writeFile(path, value.dump(2) + "\n"); }

json read_json(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open for reading", path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw UsageError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

json to_json(const TrainConfig& c)
{
  return json{{"layers", c.layers},
              {"dt", c.dt},
              {"gamma", c.gamma},
              {"iterations", c.iterations},
              {"learning_rate", c.learning_rate},
              {"integrator", to_string(c.integrator)},
              {"tol", c.tol},
              {"max_iter", c.max_iter},
              {"seed", c.seed},
              {"init_scale", c.init_scale}};
}

TrainConfig train_config_from_json(const json& j)
{
  if (!j.is_object())
    throw UsageError("config: expected a JSON object");
  TrainConfig c;
  std::vector<std::string> bad;
  auto number = [&](const std::string& key, double& dst) {
    if (!j.contains(key))
      return;
    if (j[key].is_number())
      dst = j[key].get<double>();
    else
      bad.push_back(key + " (expected number)");
  };
  auto integer = [&](const std::string& key, auto& dst) {
    if (!j.contains(key))
      return;
    using T = std::remove_reference_t<decltype(dst)>;
    if (j[key].is_number_integer() && (std::is_signed_v<T> || j[key].get<long long>() >= 0))
      dst = j[key].get<T>();
    else
      bad.push_back(key + " (expected " + (std::is_signed_v<T> ? "integer" : "non-negative integer") + ")");
  };
  integer("layers", c.layers);
  number("dt", c.dt);
  number("gamma", c.gamma);
  integer("iterations", c.iterations);
  number("learning_rate", c.learning_rate);
  number("tol", c.tol);
  integer("max_iter", c.max_iter);
  integer("seed", c.seed);
  number("init_scale", c.init_scale);
  if (j.contains("integrator")) {
    try {
      c.integrator = parse_integrator(j["integrator"].get<std::string>());
    } catch (const std::exception&) {
      bad.push_back("integrator (expected euler, rk4 or symplectic)");
    }
  }
  static const std::set<std::string> known{"layers", "dt",      "gamma", "iterations", "learning_rate",
                                           "integrator", "tol", "max_iter", "seed", "init_scale"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      bad.push_back(key + " (unknown key)");
  if (!bad.empty()) {
    std::string msg = "config: invalid keys:";
    for (const auto& b : bad)
      msg += " " + b + ";";
    msg.pop_back();
    throw UsageError(msg);
  }
  c.validate();
  return c;
}

TrainConfig load_config(const fs::path& path) { return train_config_from_json(read_json(path)); }

std::vector<std::string> dataset_schema(Eigen::Index dim)
{
  std::vector<std::string> s{"sample"};
  for (Eigen::Index k = 0; k < dim; ++k)
    s.push_back("x" + std::to_string(k));
  s.push_back("label");
  return s;
}

std::vector<Row> dataset_rows(const Dataset& data)
{
  std::vector<Row> rows;
  rows.reserve(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    Row r{static_cast<std::int64_t>(i)};
    for (Eigen::Index k = 0; k < data.dim(); ++k)
      r.emplace_back(data.inputs(k, i));
    r.emplace_back(static_cast<std::int64_t>(data.labels(i)));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::uint64_t fnv1a(const std::string& bytes)
{
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string build_fingerprint()
{
#ifndef GEOMINT_VERSION
#define GEOMINT_VERSION "unknown"
#endif
  return std::string("geomint ") + GEOMINT_VERSION + " / " + __VERSION__;
}

fs::path artifact_root()
{
  const char* env = std::getenv("GEOMINT_RUNS");
  return env && *env ? fs::path(env) : fs::path("runs");
}

RunArtifact::RunArtifact(std::string command, json config, std::uint64_t seed, fs::path root)
  : command_(std::move(command)), config_(std::move(config)), seed_(seed)
{
  char hex[17];
  const auto res = std::to_chars(hex, hex + 16, fnv1a(command_ + "\n" + config_.dump()), 16);
  const std::string digits(hex, res.ptr);
  id_ = command_ + "-" + std::string(16 - digits.size(), '0') + digits;
  dir_ = root / id_;
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec)
    throw IoError("cannot create run directory (" + ec.message() + ")", dir_.string());
}

fs::path RunArtifact::add_table(const std::string& name, const std::vector<Row>& rows,
                                const std::vector<std::string>& schema)
{
  const fs::path path = dir_ / (name + ".csv");
  write_csv(rows, schema, path);
  tables_.push_back(name + ".csv");
  return path;
}

fs::path RunArtifact::add_json(const std::string& name, const json& value)
{
  const fs::path path = dir_ / (name + ".json");
  write_json(value, path);
  tables_.push_back(name + ".json");
  return path;
}

void RunArtifact::finish(const json& summary)
{
  write_json(config_, dir_ / "config.json");
  json meta{{"command", command_}, {"id", id_},         {"seed", seed_},
            {"build", build_fingerprint()}, {"outputs", tables_}, {"summary", summary}};
  write_json(meta, dir_ / "meta.json");
}

} // namespace geomint::io
