#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "commands.hpp"
#include "geomint/io.hpp"

namespace fs = std::filesystem;
using geomint::cli::run;

namespace {

struct Quiet
{
  std::ostringstream out, err;
  std::streambuf* oldOut = std::cout.rdbuf(out.rdbuf());
  std::streambuf* oldErr = std::cerr.rdbuf(err.rdbuf());
  ~Quiet()
  {
    std::cout.rdbuf(oldOut);
    std::cerr.rdbuf(oldErr);
  }
};

fs::path scratch()
{
  const fs::path dir = fs::temp_directory_path() / "geomint_cli_test";
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> withRoot(const fs::path& root, std::vector<std::string> args)
{
  args.insert(args.begin(), {"-q", "--runs", root.string()});
  return args;
}

} // namespace

TEST_CASE("usage errors exit 1")
{
  Quiet q;
  CHECK(run(std::vector<std::string>{}) == 1);
  CHECK(q.err.str().find("rigid-body") != std::string::npos);
  CHECK(run({"--bogus"}) == 1);
  CHECK(run({"rigid-body", "--integrator", "leapfrog"}) == 1);
  CHECK(run({"rigid-body", "--steps", "ten"}) == 1);
  CHECK(run({"teleport"}) == 1);
  CHECK(run({"train", "--dt", "-1"}) == 1);
  CHECK(run({"train", "--snapshots", "20,99"}) == 1);
}

TEST_CASE("numerical and IO failures exit 2")
{
  Quiet q;
  const fs::path root = scratch();
  CHECK(run(withRoot(root, {"train", "--config", (root / "missing.json").string()})) == 2);
  CHECK(run(withRoot(root, {"lp-field", "--dt", "10", "--steps", "3"})) == 2);
  CHECK(q.err.str().find("lp-field step 1") != std::string::npos);

  fs::create_directories(root);
  std::ofstream(root / "bad.json") << R"({"layers": "many"})";
  CHECK(run(withRoot(root, {"train", "--config", (root / "bad.json").string()})) == 1);
}

TEST_CASE("rigid-body run keeps the norm column fixed")
{
  const fs::path root = scratch();
  {
    Quiet q;
    REQUIRE(run(withRoot(root, {"rigid-body", "--integrator", "lphj", "--steps", "5000", "--seed", "2"})) == 0);
  }
  const fs::path dir = *fs::directory_iterator(root);
  std::ifstream in(dir / "trajectory.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,t,pi1,pi2,pi3,norm,energy");
  double n0 = -1.0, worst = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c < 6; ++c)
      std::getline(ss, cell, ',');
    const double n = std::stod(cell);
    if (n0 < 0)
      n0 = n;
    worst = std::max(worst, std::abs(n - n0));
    ++rows;
  }
  CHECK(rows == 5001);
  CHECK(n0 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(worst <= 1e-12);
  const auto meta = geomint::io::read_json(dir / "meta.json");
  CHECK(meta["command"] == "rigid-body");
  CHECK(meta["outputs"] == nlohmann::json::array({"trajectory.csv"}));
}

TEST_CASE("train writes the log and the default snapshot layers")
{
  const fs::path root = scratch();
  {
    Quiet q;
    REQUIRE(run(withRoot(root, {"train", "--dataset", "circles", "--integrator", "euler", "--n", "40", "--layers",
                                "32", "--iters", "3"})) == 0);
  }
  const fs::path dir = *fs::directory_iterator(root);
  for (const char* f : {"log.csv", "snapshot_layer20.csv", "snapshot_layer30.csv", "snapshot_layer32.csv",
                        "config.json", "meta.json"})
    CHECK(fs::exists(dir / f));
  const auto meta = geomint::io::read_json(dir / "meta.json");
  CHECK(meta["summary"]["status"] == "ok");
  CHECK(meta["summary"].contains("test_accuracy"));
}
