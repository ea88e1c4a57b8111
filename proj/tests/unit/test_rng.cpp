#include <doctest.h>

#include <gtsynth/rng.hpp>

#include <cmath>
#include <set>

using namespace gtsynth::rng;

TEST_CASE("philox4x32-10 known-answer vectors") {
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are random access and keyed") {
  const Stream s(42, Tag::MonteCarlo, 3, 17);
  const double a = s.uniform(1000);
  for (int i = 0; i < 10; ++i) (void)s.uniform(static_cast<std::uint64_t>(i));
  CHECK(s.uniform(1000) == a);
  CHECK(Stream(42, Tag::MonteCarlo, 3, 17).uniform(1000) == a);
  CHECK(Stream(43, Tag::MonteCarlo, 3, 17).uniform(1000) != a);
  CHECK(Stream(42, Tag::Emit, 3, 17).uniform(1000) != a);
  CHECK(Stream(42, Tag::MonteCarlo, 4, 17).uniform(1000) != a);
  CHECK(Stream(42, Tag::MonteCarlo, 3, 18).uniform(1000) != a);
}

TEST_CASE("uniform, normal and below moments") {
  const Stream s(7, Tag::Test, 0, 0);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  std::set<std::uint64_t> seen;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform(static_cast<std::uint64_t>(i));
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = s.normal(static_cast<std::uint64_t>(i));
    sn += z;
    sn2 += z * z;
    const auto k = s.below(static_cast<std::uint64_t>(i), 5);
    REQUIRE(k < 5);
    seen.insert(k);
  }
  CHECK(std::abs(su / n - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(sn / n) < 4 / std::sqrt(double(n)));
  CHECK(std::abs(sn2 / n - 1.0) < 4 * std::sqrt(2.0 / n));
  CHECK(seen.size() == 5);
  CHECK(s.below(3, 1) == 0);
}

TEST_CASE("cursor replays the same sequence") {
  Cursor a(Stream(1, Tag::Test, 0, 9)), b(Stream(1, Tag::Test, 0, 9));
  for (int i = 0; i < 50; ++i) {
    CHECK(a.normal() == b.normal());
    CHECK(a.uniform() == b.uniform());
  }
}
