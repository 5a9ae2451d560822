#pragma once

// Deterministic midpoint-rule integrals over the hidden variable
// lambda ~ U[0, pi) for the sign model: bit = 0 iff cos 2(theta - lambda) >= 0.

#include <cmath>
#include <cstddef>
#include <numbers>

namespace oracle {

inline int sign_bit(double lambda, double theta) { return std::cos(2.0 * (theta - lambda)) >= 0.0 ? 0 : 1; }

inline double hv_correlation(double alpha, double beta, std::size_t grid = 200'000) {
  double sum = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    const double lambda = (static_cast<double>(i) + 0.5) * std::numbers::pi / static_cast<double>(grid);
    sum += sign_bit(lambda, alpha) == sign_bit(lambda, beta) ? 1.0 : -1.0;
  }
  return sum / static_cast<double>(grid);
}

inline double hv_transmitted(double alpha, std::size_t grid = 200'000) {
  double sum = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    const double lambda = (static_cast<double>(i) + 0.5) * std::numbers::pi / static_cast<double>(grid);
    sum += sign_bit(lambda, alpha) == 0 ? 1.0 : 0.0;
  }
  return sum / static_cast<double>(grid);
}

}  // namespace oracle
