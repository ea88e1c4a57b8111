#include "gtsynth/rng.hpp"

#include <cmath>
#include <numbers>

namespace gtsynth::rng {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline Counter round(const Counter& c, const Key& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t x = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace

Counter philox4x32(Counter ctr, Key key) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    ctr = round(ctr, key);
  }
  return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Stream::Stream(std::uint64_t seed, Tag tag, std::uint64_t layer, std::uint64_t item) {
  const std::uint64_t k = splitmix64(splitmix64(seed) ^
                                     splitmix64((static_cast<std::uint64_t>(tag) << 40) ^ layer));
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  item_lo_ = static_cast<std::uint32_t>(item);
  item_hi_ = static_cast<std::uint32_t>(item >> 32);
}

Counter Stream::block(std::uint64_t i) const {
  return philox4x32({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32), item_lo_,
                     item_hi_},
                    key_);
}

std::uint64_t Stream::bits64(std::uint64_t i) const {
  const Counter c = block(i);
  return (static_cast<std::uint64_t>(c[0]) << 32) | c[1];
}

double Stream::uniform(std::uint64_t i) const {
  const Counter c = block(i);
  return to_unit(c[0], c[1]);
}

double Stream::normal(std::uint64_t i) const {
  const Counter c = block(i >> 1);
  const double u1 = 1.0 - to_unit(c[0], c[1]);  // (0,1]
  const double u2 = to_unit(c[2], c[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return (i & 1u) ? r * std::sin(theta) : r * std::cos(theta);
}

std::uint64_t Stream::below(std::uint64_t i, std::uint64_t bound) const {
  // Multiply-high range reduction; bias is at most bound / 2^64.
  const unsigned __int128 wide = static_cast<unsigned __int128>(bits64(i)) * bound;
  return static_cast<std::uint64_t>(wide >> 64);
}

double Cursor::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Normals use their own position range so uniforms and normals never
  // share a Philox block.
  const std::uint64_t j = (normal_pos_++) | (1ull << 62);
  spare_ = s_.normal(2 * j + 1);
  have_spare_ = true;
  return s_.normal(2 * j);
}

}  // namespace gtsynth::rng
