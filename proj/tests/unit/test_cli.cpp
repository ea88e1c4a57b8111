#include <doctest.h>

#include <gtsynth/cli.hpp>
#include <gtsynth/io.hpp>

#include "support.hpp"

#include <filesystem>
#include <sstream>
#include <unistd.h>

using namespace gtsynth;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("gtsynth_cli_" + std::to_string(getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("validate") {
  const auto ok = run({"validate", "-t", test::fixture("star.json")});
  CHECK(ok.code == 0);
  const auto j = io::Json::parse(ok.out);
  CHECK(j.at("valid") == true);
  CHECK(j.at("violations").empty());

  TempDir d;
  io::write_file_atomic(d / "bad.json", R"({"nodes":[{"id":"x1","kind":"observed"},{"id":"x2","kind":"observed"},
    {"id":"x3","kind":"observed"},{"id":"y1","kind":"latent","pi":0.5}],
    "edges":[{"a":"y1","b":"x1","rho":0.6},{"a":"y1","b":"x2","rho":0.5},{"a":"x2","b":"x3","rho":0.8}]})");
  const auto bad = run({"validate", "-t", d / "bad.json"});
  CHECK(bad.code == 1);
  CHECK(bad.out.find("latent degree < 3 at y1") != std::string::npos);
}

TEST_CASE("usage errors exit 2 and write nothing") {
  TempDir d;
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"validate", "-t", d / "missing.json"}).code == 2);
  CHECK(run({"rates", "-t", test::fixture("star.json"), "--samples", "abc", "-o", d / "r.csv"}).code == 2);
  CHECK(run({"rates", "-t", test::fixture("star.json"), "--samples", "10", "-o", d / "r.csv"}).code == 2);
  CHECK(run({"optimize-pi", "-t", test::fixture("star.json"), "--grid-step", "0.5", "-o", d / "o.csv"}).code == 2);
  CHECK(run({"synthesize", "-t", test::fixture("star.json"), "--rate-margin", "0.5", "-o", d / "s"}).code == 2);
  CHECK(run({"synthesize", "-t", test::fixture("star.json"), "-N", "0", "-o", d / "s"}).code == 2);
  CHECK(fs::is_empty(d.path));
}

TEST_CASE("rates on the star") {
  TempDir d;
  const auto r = run({"rates", "-t", test::fixture("star.json"), "--samples", "200000", "--seed", "42", "-o",
                      d / "rates.csv"});
  REQUIRE(r.code == 0);
  std::istringstream csv(io::read_file(d / "rates.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(header == "layer,pi_y1,sum_rate_lb,y_rate_lb,ci");
  std::vector<std::string> cells;
  std::stringstream ss(row);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  REQUIRE(cells.size() == 5);
  CHECK(cells[0] == "0");
  CHECK(std::stod(cells[2]) == doctest::Approx(0.6506).epsilon(1e-4));
  const auto m = io::Json::parse(io::read_file(d / "rates.csv.manifest.json"));
  CHECK(m.at("command") == "rates");
  CHECK(m.at("outputs").at(0) == d / "rates.csv");
}

TEST_CASE("layerize and signs") {
  const auto l = run({"layerize", "-t", test::fixture("fig6.json")});
  REQUIRE(l.code == 0);
  const auto j = io::Json::parse(l.out);
  CHECK(j.at("top_layer") == 3);
  CHECK(j.at("restructured") == true);
  const auto s = run({"signs", "enumerate", "-t", test::fixture("star.json")});
  REQUIRE(s.code == 0);
  CHECK(s.out.rfind("0,", 0) == 0);
  CHECK(s.out.find("\n1,") != std::string::npos);
}

TEST_CASE("synthesize, report and manifest rerun") {
  TempDir d;
  const std::vector<std::string> args{"synthesize", "-t", test::fixture("star.json"), "-N", "16", "--blocks", "300",
                                      "--samples", "5000", "--seed", "7", "-o", d / "out"};
  REQUIRE(run(args).code == 0);
  for (const char* f : {"blocks.csv", "lineage.json", "rates.csv", "synthesize.manifest.json"})
    CHECK(fs::exists(d.path / "out" / f));
  const std::string blocks = io::read_file(d / "out/blocks.csv");

  const auto rep = run({"report", "--run", d / "out", "--permutations", "99"});
  REQUIRE(rep.code == 0);
  const auto j = io::Json::parse(io::read_file(d / "out/report.json"));
  CHECK(j.at("fidelity").at("max_cov_error").get<double>() < 0.1);
  CHECK(fs::exists(d.path / "out" / "report.manifest.json"));

  fs::remove(d.path / "out" / "blocks.csv");
  REQUIRE(run({"--from-manifest", d / "out/synthesize.manifest.json"}).code == 0);
  CHECK(io::read_file(d / "out/blocks.csv") == blocks);
}
