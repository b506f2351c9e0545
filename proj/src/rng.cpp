#include "ulab/rng.hpp"

namespace ulab {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t stream_key(std::uint64_t seed, std::string_view experiment, std::uint64_t stratum) {
  return splitmix64(splitmix64(seed) ^ splitmix64(hash_tag(experiment) + stratum));
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    std::uint64_t p0 = std::uint64_t(M0) * c[0];
    std::uint64_t p1 = std::uint64_t(M1) * c[2];
    std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
    std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += W0;
    k[1] += W1;
  }
  return c;
}

std::uint64_t Draws::bits() {
  if (avail_ < 2) {
    buf_ = philox4x32({std::uint32_t(index_), std::uint32_t(index_ >> 32), std::uint32_t(k_), std::uint32_t(k_ >> 32)},
                      {std::uint32_t(key_), std::uint32_t(key_ >> 32)});
    ++k_;
    avail_ = 4;
  }
  int i = 4 - avail_;
  avail_ -= 2;
  return (std::uint64_t(buf_[i]) << 32) | buf_[i + 1];
}

double Draws::uniform() { return double(bits() >> 11) * 0x1.0p-53; }

double Draws::normal() {
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace ulab
