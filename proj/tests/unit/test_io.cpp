#include <doctest.h>

#include <gtsynth/errors.hpp>
#include <gtsynth/io.hpp>
#include <gtsynth/layering.hpp>
#include <gtsynth/synthesis.hpp>

#include "support.hpp"

#include <cmath>
#include <filesystem>
#include <unistd.h>

using namespace gtsynth;

TEST_CASE("doubles round-trip through text") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.30000000000000004})
    CHECK(std::stod(io::format_double(v)) == v);
}

TEST_CASE("atomic writes create directories and replace files") {
  const auto dir = std::filesystem::temp_directory_path() / ("gtsynth_io_" + std::to_string(getpid()));
  const auto path = (dir / "a" / "b.txt").string();
  io::write_file_atomic(path, "one");
  CHECK(io::read_file(path) == "one");
  io::write_file_atomic(path, "two");
  CHECK(io::read_file(path) == "two");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "a")) ++entries;
  CHECK(entries == 1);
  std::filesystem::remove_all(dir);
  CHECK_THROWS(io::read_file(path));
}

TEST_CASE("a run survives the text round trip") {
  const auto t = test::load_fixture("fig6.json");
  SynthesisConfig cfg;
  cfg.N = 4;
  cfg.blocks = 12;
  cfg.seed = 2;
  cfg.rate_samples = 2000;
  const auto run = synthesize(t, restructure(t), cfg);
  const std::string csv = io::blocks_csv(run);
  CHECK(csv.rfind("block,t,x1,x2,x3,x4,x5,x6,x7\n", 0) == 0);
  const auto back = io::read_run(csv, io::lineage_json(run), io::codebooks_json(run.codebooks));
  CHECK(back.N == run.N);
  CHECK(back.blocks == run.blocks);
  CHECK(back.observed_ids == run.observed_ids);
  CHECK(back.data == run.data);
  REQUIRE(back.lineage.size() == run.lineage.size());
  for (std::size_t i = 0; i < run.lineage.size(); ++i) {
    CHECK(back.lineage[i].y == run.lineage[i].y);
    CHECK(back.lineage[i].b == run.lineage[i].b);
  }
  REQUIRE(back.codebooks.size() == run.codebooks.size());
  for (std::size_t i = 0; i < run.codebooks.size(); ++i) {
    CHECK(back.codebooks[i].m_y == run.codebooks[i].m_y);
    CHECK(back.codebooks[i].r_b == run.codebooks[i].r_b);
  }
  CHECK_THROWS_AS(io::read_run("block,t,x1\n0,0\n", io::lineage_json(run), io::codebooks_json(run.codebooks)),
                  Error);
}

TEST_CASE("rates table layout") {
  RateBounds a{0, {0.5, 0.25}, 1.0, 0.5, 0.01};
  RateBounds b{1, {0.5}, 2.0, 1.0, 0.02};
  const auto nats = io::rates_csv({a, b}, {"y1", "y2"}, false);
  CHECK(nats ==
        "layer,pi_y1,pi_y2,sum_rate_lb,y_rate_lb,ci\n"
        "0,0.5,0.25,1,0.5,0.01\n"
        "1,0.5,,2,1,0.02\n");
  const auto bits = io::rates_csv({b}, {"y1"}, true);
  CHECK(bits.find(io::format_double(2.0 / std::log(2.0))) != std::string::npos);
}
