// Runs the ahx executable on small configurations and inspects its outputs.
#include "ahx/io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

using namespace ahx;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  fs::path out;
};

Run run(const std::string& name, const std::string& command, const nlohmann::json& cfg) {
  const fs::path dir = fs::path(AHX_CLI_WORKDIR) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "config.json";
  std::ofstream(cfg_path) << cfg.dump(2);
  const std::string cmd = std::string("\"") + AHX_CLI_PATH + "\" " + command + " --config \"" +
                          cfg_path.string() + "\" --out \"" + (dir / "out").string() + "\" > \"" +
                          (dir / "log.txt").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
#ifdef WEXITSTATUS
  return {WEXITSTATUS(status), dir / "out"};
#else
  return {status, dir / "out"};
#endif
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("trace") {
  const auto cfg = nlohmann::json::parse(R"({"metric": "half-plane", "z": {"y": [0], "eta": [1]}})");
  const Run r = run("trace", "trace", cfg);
  REQUIRE(r.code == 0);
  const CsvTable t = read_csv_file((r.out / "trajectory.csv").string());
  CHECK(std::abs(t.number(t.rows.size() - 1, "y1") - 2.0) < 1e-8);
  CHECK(fs::exists(r.out / "trajectory.svg"));

  std::ifstream in(r.out / "trajectory.csv");
  std::string first;
  std::getline(in, first);
  if (!first.empty() && first.back() == '\r') first.pop_back();  // CRLF line endings
  CHECK(first == "# config-hash: " + config_hash_hex(cfg));
}

TEST_CASE("exit codes") {
  CHECK(run("bad-delta", "trace",
            nlohmann::json::parse(R"({"metric": "half-plane", "z": {"y": [0], "omega": [1], "delta": -0.1}})"))
            .code == 3);
  CHECK(run("trapped", "trace",
            nlohmann::json::parse(R"({"metric": "half-plane", "z": {"y": [0], "eta": [1]}, "t_max": 5})"))
            .code == 2);
  CHECK(run("unknown-family", "trace",
            nlohmann::json::parse(R"({"metric": "sphere", "z": {"y": [0], "eta": [1]}})"))
            .code == 3);
}

TEST_CASE("scatter writes one status per row") {
  const auto cfg = nlohmann::json::parse(
      R"({"metric": "disc-normal", "grid": {"y": [0, 1], "eta": [0.01, 1.0, 2.0]}, "svg": false})");
  const Run r = run("scatter", "scatter", cfg);
  REQUIRE(r.code == 0);
  const CsvTable t = read_csv_file((r.out / "scatter.csv").string());
  REQUIRE(t.rows.size() == 6);
  int ok = 0, failed = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    (t.rows[i][t.column("status")] == "ok" ? ok : failed)++;
  CHECK(ok == 4);
  CHECK(failed == 2);
}

TEST_CASE("distance on the disc") {
  const auto cfg =
      nlohmann::json::parse(R"({"metric": "disc-normal", "pairs": [[[0], [1.2]]]})");
  const Run r = run("distance", "distance", cfg);
  REQUIRE(r.code == 0);
  const CsvTable t = read_csv_file((r.out / "distance.csv").string());
  CHECK(std::abs(t.number(0, "dR") - 2 * std::log(2 * std::sin(0.6))) < 1e-7);
}

TEST_CASE("diagnose on the half-plane") {
  const auto cfg = nlohmann::json::parse(R"({"metric": "half-plane", "grid": {"y": [0], "eta": [0.5, 2]}})");
  const Run r = run("diagnose", "diagnose", cfg);
  REQUIRE(r.code == 0);
  const auto d = read_json(r.out / "diagnose.json");
  CHECK(d["conjugate_count"] == 0);
  CHECK(std::abs(d["min_angle_deg"].get<double>() - 90.0) < 1e-6);
}

TEST_CASE("recover on the perturbed fixture") {
  const auto cfg = nlohmann::json::parse(R"({
    "metric": {"family": "perturbed", "params": {"a": {"cos": [0, 0.1]}}},
    "deltas": [0.1, 0.05, 0.025, 0.0125, 0.00625],
    "fit": false})");
  const Run r = run("recover", "recover", cfg);
  REQUIRE(r.code == 0);
  const CsvTable t = read_csv_file((r.out / "recover.csv").string());
  REQUIRE(t.rows.size() == 8);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double y = t.number(i, "y1");
    CHECK(std::abs(t.number(i, "h0_11") - 1.0) < 1e-4);
    CHECK(std::abs(t.number(i, "drho_h_11") - 0.2 * std::cos(y)) < 5e-3);
  }
}
