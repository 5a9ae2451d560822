#pragma once

// Brute-force count of all (a, b) pairs within a window, no one-to-one
// constraint. For independent streams its expectation is the textbook
// accidental rate r_A r_B (2W + 1) T on a 1 ns grid.

#include <bellrm/events.hpp>

#include <cstdint>
#include <vector>

namespace oracle {

inline std::uint64_t all_pairs_within(const std::vector<bellrm::DetectionEvent>& a,
                                      const std::vector<bellrm::DetectionEvent>& b, std::uint64_t window) {
  std::uint64_t count = 0;
  for (const auto& x : a) {
    for (const auto& y : b) {
      const auto d = x.timestamp_ns > y.timestamp_ns ? x.timestamp_ns - y.timestamp_ns
                                                     : y.timestamp_ns - x.timestamp_ns;
      count += d <= window ? 1 : 0;
    }
  }
  return count;
}

}  // namespace oracle
