#pragma once

#include <cstdint>
#include <initializer_list>

namespace fracquant {

// SplitMix64 step; used for seeding and for hashing stream coordinates.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256** generator. Streams are derived from a seed plus any number of
/// integer coordinates (point index, n, restart index, ...), so work split
/// across threads draws the same numbers regardless of schedule.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) { reseed(seed); }

  static Rng stream(std::uint64_t seed,
                    std::initializer_list<std::uint64_t> coords) {
    std::uint64_t h = seed;
    std::uint64_t mix = splitmix64(h);
    for (std::uint64_t c : coords) {
      std::uint64_t s = mix ^ (c + 0x632be59bd9b4e019ULL);
      mix = splitmix64(s);
    }
    return Rng(mix);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  // Uniform index in [0, n) by rejection-free multiply-shift.
  std::uint64_t below(std::uint64_t n) {
    __extension__ using wide = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<wide>((*this)()) * n) >> 64);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t s_[4]{};
};

}  // namespace fracquant
