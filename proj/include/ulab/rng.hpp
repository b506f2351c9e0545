#pragma once

// Counter-based random streams (Philox4x32-10).  A draw is a pure function
// of (key, index, k), so results do not depend on thread scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace ulab {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_tag(std::string_view tag);
std::uint64_t stream_key(std::uint64_t seed, std::string_view experiment, std::uint64_t stratum = 0);

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

// Sequential view over one counter lane.
class Draws {
 public:
  Draws(std::uint64_t key, std::uint64_t index) : key_(key), index_(index) {}

  double uniform();                      // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t bits();

 private:
  std::uint64_t key_;
  std::uint64_t index_;
  std::uint64_t k_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int avail_ = 0;
};

inline Draws draws(std::uint64_t seed, std::string_view experiment, std::uint64_t stratum) {
  return Draws(stream_key(seed, experiment, 0), stratum);
}

}  // namespace ulab
