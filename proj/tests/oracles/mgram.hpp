#pragma once

// Exhaustive m-gram counting over the cyclically extended sequence, the
// serial test's statistic built from string keys.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace oracle {

inline std::map<std::string, std::uint64_t> mgram_counts(const std::vector<std::uint8_t>& bits, int m) {
  std::map<std::string, std::uint64_t> counts;
  const std::size_t n = bits.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::string key;
    for (int j = 0; j < m; ++j) key.push_back(static_cast<char>('0' + bits[(i + j) % n]));
    ++counts[key];
  }
  return counts;
}

inline double psi2(const std::vector<std::uint8_t>& bits, int m) {
  if (m == 0) return 0.0;
  const double n = static_cast<double>(bits.size());
  double sum = 0.0;
  for (const auto& [k, c] : mgram_counts(bits, m)) sum += static_cast<double>(c) * static_cast<double>(c);
  return std::pow(2.0, m) / n * sum - n;
}

}  // namespace oracle
