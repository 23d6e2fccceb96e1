#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace sheetcap {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based seeding: the generator for path `index` under `master` is
///
///     Engine(splitmix64(splitmix64(master) ^ splitmix64(index + stream * 2^32)))
///
/// so a path's draws depend only on (master, stream, index) and never on
/// which worker happens to run it.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    std::uint64_t stream = 0) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + (stream << 32)));
}

/// Standard normal draws (ziggurat) on top of an Engine.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : engine_(seed) {}

  double operator()() { return normal_(engine_); }

  Engine& engine() { return engine_; }

 private:
  Engine engine_;
  boost::random::normal_distribution<double> normal_;
};

}  // namespace sheetcap
