#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream tag, layer, item, position), so any codeword, block or
// Monte-Carlo sample can be regenerated independently of thread layout.

#include <array>
#include <cstdint>

namespace gtsynth::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds.
Counter philox4x32(Counter ctr, Key key);

std::uint64_t splitmix64(std::uint64_t x);

/// Tags separate the independent random sources of the pipeline.
enum class Tag : std::uint32_t {
  TopCodeword = 1,
  CodewordNoise = 2,
  SignCodeword = 3,
  Parent = 4,
  Block = 5,
  Emit = 6,
  MonteCarlo = 7,
  Permutation = 8,
  Concavity = 9,
  Test = 10,
};

/// One random-access stream: position `i` of item `item` under a key
/// derived from (seed, tag, layer).
class Stream {
 public:
  Stream(std::uint64_t seed, Tag tag, std::uint64_t layer, std::uint64_t item);

  Counter block(std::uint64_t i) const;
  std::uint64_t bits64(std::uint64_t i) const;
  /// Uniform on [0,1) with 53 random bits.
  double uniform(std::uint64_t i) const;
  /// Standard normal via Box-Muller; positions 2j and 2j+1 share one block.
  double normal(std::uint64_t i) const;
  /// Uniform integer in [0, bound), bound >= 1.
  std::uint64_t below(std::uint64_t i, std::uint64_t bound) const;

 private:
  Key key_;
  std::uint32_t item_lo_;
  std::uint32_t item_hi_;
};

/// Sequential reader over a Stream, for code that consumes a variable
/// number of draws per item.
class Cursor {
 public:
  explicit Cursor(Stream s) : s_(s) {}
  double uniform() { return s_.uniform(pos_++); }
  double normal();
  std::uint64_t below(std::uint64_t bound) { return s_.below(pos_++, bound); }

 private:
  Stream s_;
  std::uint64_t pos_ = 0;
  std::uint64_t normal_pos_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gtsynth::rng
