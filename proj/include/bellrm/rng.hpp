#pragma once

// Counter-based random streams. Every draw in the simulator is addressed by
// (master seed, label, index), so any pulse can be regenerated in isolation
// and blocks of pulses can be produced in any order.

#include <cstdint>
#include <limits>
#include <string_view>

namespace bellrm {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Key for a named substream of the master seed.
constexpr std::uint64_t derive_key(std::uint64_t master_seed, std::string_view label) noexcept {
  return mix64(master_seed ^ mix64(fnv1a64(label)));
}

constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t sublabel) noexcept {
  return mix64(key ^ mix64(sublabel + 0x9e3779b97f4a7c15ULL));
}

// SplitMix64 sequence positioned at (key, counter). Satisfies
// UniformRandomBitGenerator so it plugs into <random> distributions.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  constexpr StreamRng(std::uint64_t key, std::uint64_t counter) noexcept
      : state_(mix64(key + counter * 0x9e3779b97f4a7c15ULL) ^ key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr std::uint8_t bit() noexcept { return static_cast<std::uint8_t>((*this)() >> 63); }

  // Uniform integer in [0, n), n > 0. Lemire's multiply-shift; the bias is
  // below 2^-64 * n, irrelevant for the menu sizes used here.
  constexpr std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

}  // namespace bellrm
