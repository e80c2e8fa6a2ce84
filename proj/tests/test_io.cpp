#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "geomint/io.hpp"

using namespace geomint;
using namespace geomint::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
  const fs::path dir = fs::temp_directory_path() / "geomint_io_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("number formatting")
{
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(2.0 / 3.0) == "0.66666666666666663");
  CHECK(format_double(-2.5e-300) == "-2.5e-300");
  CHECK(std::strtod(format_double(1.0 / 3.0).c_str(), nullptr) == 1.0 / 3.0);
  CHECK(format_cell(Cell{std::int64_t{-42}}) == "-42");
  CHECK(format_cell(Cell{std::string("symplectic")}) == "symplectic");
}

TEST_CASE("csv layout")
{
  const fs::path dir = scratch("csv");
  write_csv({}, {"a", "b"}, dir / "empty.csv");
  CHECK(slurp(dir / "empty.csv") == "a,b\n");

  const std::vector<Row> rows{{std::int64_t{0}, 0.5}, {std::int64_t{1}, 0.1}};
  write_csv(rows, {"k", "v"}, dir / "t.csv");
  CHECK(slurp(dir / "t.csv") == "k,v\n0,0.5\n1,0.10000000000000001\n");

  CHECK_THROWS_AS(csv_string({{1.0}}, {"a", "b"}), UsageError);
  CHECK_THROWS_AS(csv_string({}, {"a,b"}), UsageError);
  CHECK_THROWS_AS(csv_string({{std::string("x\ny")}}, {"a"}), UsageError);
  CHECK_THROWS_AS(csv_string({}, {}), UsageError);
  CHECK_THROWS_AS(write_csv({}, {"a"}, dir / "t.csv" / "below-a-file.csv"), IoError);
}

TEST_CASE("config round trip and schema errors")
{
  const fs::path dir = scratch("config");
  TrainConfig c;
  c.layers = 7;
  c.dt = 0.0125;
  c.gamma = 540.0;
  c.iterations = 33;
  c.learning_rate = 0.125;
  c.integrator = Integrator::rk4;
  c.tol = 1e-11;
  c.max_iter = 9;
  c.seed = 12345678901234ull;
  c.init_scale = 1.0 / 3.0;
  write_json(to_json(c), dir / "c.json");
  const TrainConfig back = load_config(dir / "c.json");
  CHECK(back.layers == c.layers);
  CHECK(back.dt == c.dt);
  CHECK(back.gamma == c.gamma);
  CHECK(back.iterations == c.iterations);
  CHECK(back.learning_rate == c.learning_rate);
  CHECK(back.integrator == c.integrator);
  CHECK(back.tol == c.tol);
  CHECK(back.max_iter == c.max_iter);
  CHECK(back.seed == c.seed);
  CHECK(back.init_scale == c.init_scale);
  CHECK(to_json(back) == to_json(c));

  // partial configs keep defaults
  CHECK(train_config_from_json(nlohmann::json{{"layers", 3}}).dt == TrainConfig{}.dt);

  const nlohmann::json bad{{"layers", "fifty"}, {"dtt", 0.1}, {"integrator", "leapfrog"}, {"seed", -1}};
  try {
    train_config_from_json(bad);
    FAIL("expected a schema error");
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("layers") != std::string::npos);
    CHECK(msg.find("dtt (unknown key)") != std::string::npos);
    CHECK(msg.find("integrator") != std::string::npos);
    CHECK(msg.find("seed") != std::string::npos);
  }
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"dt", -1.0}}), UsageError);

  std::ofstream(dir / "broken.json") << "{\"layers\": ";
  CHECK_THROWS_AS(load_config(dir / "broken.json"), UsageError);
  CHECK_THROWS_WITH_AS(load_config(dir / "missing.json"), doctest::Contains("missing.json"), IoError);
}

TEST_CASE("run artifacts are reproducible")
{
  const fs::path root = scratch("runs");
  auto run = [&](std::uint64_t seed) {
    const Dataset data = generate_dataset(DatasetKind::spirals, 50, seed);
    RunArtifact art("dataset", nlohmann::json{{"kind", "spirals"}, {"n", 50}, {"seed", seed}}, seed, root);
    art.add_table("points", dataset_rows(data), dataset_schema(data.dim()));
    art.finish(nlohmann::json{{"rows", 50}});
    return art;
  };
  const RunArtifact a = run(7);
  const std::string first = slurp(a.dir() / "points.csv") + slurp(a.dir() / "meta.json") + slurp(a.dir() / "config.json");
  fs::remove_all(a.dir());
  const RunArtifact b = run(7);
  CHECK(a.id() == b.id());
  CHECK(first == slurp(b.dir() / "points.csv") + slurp(b.dir() / "meta.json") + slurp(b.dir() / "config.json"));
  CHECK(run(8).id() != a.id());
  CHECK(a.id().rfind("dataset-", 0) == 0);
  CHECK(a.id().size() == std::string("dataset-").size() + 16);

  const nlohmann::json meta = read_json(b.dir() / "meta.json");
  CHECK(meta["seed"] == 7);
  CHECK(meta["outputs"] == nlohmann::json::array({"points.csv"}));
  CHECK(meta["build"] == build_fingerprint());
  CHECK(read_json(b.dir() / "config.json")["kind"] == "spirals");

  const std::string csv = slurp(b.dir() / "points.csv");
  CHECK(csv.rfind("sample,x0,x1,label\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 51);
}

TEST_CASE("artifact root from the environment")
{
  ::setenv("GEOMINT_RUNS", "/tmp/somewhere", 1);
  CHECK(artifact_root() == fs::path("/tmp/somewhere"));
  ::setenv("GEOMINT_RUNS", "", 1);
  CHECK(artifact_root() == fs::path("runs"));
  ::unsetenv("GEOMINT_RUNS");
  CHECK(artifact_root() == fs::path("runs"));
  CHECK(fnv1a("") == 14695981039346656037ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
}
