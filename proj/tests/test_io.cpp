#include "ahx/io.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace ahx;

TEST_CASE("config hash ignores key order") {
  const auto a = nlohmann::json::parse(R"({"metric": "half-plane", "tol": 1e-10, "z": {"y": [0], "eta": [1]}})");
  const auto b = nlohmann::json::parse(R"({"z": {"eta": [1], "y": [0]}, "tol": 1e-10, "metric": "half-plane"})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash_hex(a).size() == 16);
  CHECK(config_hash(a) != config_hash(nlohmann::json::parse(R"({"metric": "disc-normal"})")));
  // FNV-1a of the empty object "{}".
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : std::string("{}")) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  CHECK(config_hash(nlohmann::json::object()) == h);
}

TEST_CASE("CSV round trip with quoting") {
  std::stringstream ss;
  {
    CsvWriter w(ss, {"name", "value"}, "abc");
    w.row({"plain", 1.5});
    w.row({"comma, \"quoted\"", -2});
    w.row({"multi\nline", 0.1});
  }
  CHECK(ss.str().rfind("# config-hash: abc\r\n", 0) == 0);
  const CsvTable t = read_csv(ss);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[1][0] == "comma, \"quoted\"");
  CHECK(t.rows[2][0] == "multi\nline");
  CHECK(t.number(0, "value") == 1.5);
  CHECK(t.number(2, "value") == 0.1);  // 17 significant digits round-trip exactly
  CHECK_THROWS_AS(t.column("missing"), InvalidArgument);

  std::stringstream bad;
  CsvWriter w(bad, {"a", "b"});
  CHECK_THROWS_AS(w.row({1.0}), InvalidArgument);
}

TEST_CASE("number formatting") {
  CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("trajectory CSV") {
  const GeodesicTrajectory t = trace_geodesic(half_plane(), {Vec::Constant(1, 0.0), Vec::Constant(1, 1.0)});
  std::stringstream ss;
  write_trajectory_csv(ss, t, "h");
  const CsvTable a = read_csv(ss);
  CHECK(a.header == std::vector<std::string>{"tau", "rho", "y1", "xi_bar0", "eta1"});
  CHECK(a.number(0, "rho") == 0.0);
  CHECK(std::abs(a.number(a.rows.size() - 1, "y1") - 2.0) < 1e-9);

  std::stringstream dense;
  write_trajectory_csv(dense, t, "", 3);
  const CsvTable b = read_csv(dense);
  CHECK(b.rows.size() > a.rows.size());
}

TEST_CASE("SVG output") {
  std::stringstream ss;
  write_svg(ss, {{"a<b", {0.0, 1.0, 2.0}, {1.0, 0.5, 2.0}}}, "title & co", "x", "y");
  const std::string s = ss.str();
  CHECK(s.find("<svg") != std::string::npos);
  CHECK(s.find("</svg>") != std::string::npos);
  CHECK(s.find("a&lt;b") != std::string::npos);
  CHECK(s.find("title &amp; co") != std::string::npos);
}
