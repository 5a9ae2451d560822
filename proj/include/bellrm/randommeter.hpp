#pragma once

// Per-sequence battery reports, per-slice rejection rates and the
// first-half/second-half scenario classifier.

#include <bellrm/bell_stats.hpp>
#include <bellrm/compression.hpp>
#include <bellrm/errors.hpp>
#include <bellrm/randomness_tests.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bellrm {

struct RandomnessReport {
  std::uint64_t sequence_id = 0;
  int slice_index = 0;
  std::vector<TestResult> results;
  bool overall_rejected = false;
  double compression_ratio = 0.0;
};

inline RandomnessReport evaluate_sequence(std::span<const std::uint8_t> bits, const BatteryConfig& cfg = {},
                                          std::uint64_t sequence_id = 0, int slice_index = 0) {
  RandomnessReport r;
  r.sequence_id = sequence_id;
  r.slice_index = slice_index;
  r.results = run_battery(bits, cfg);
  r.overall_rejected = std::any_of(r.results.begin(), r.results.end(),
                                   [](const TestResult& t) { return t.rejected; });
  r.compression_ratio = compression_ratio(bits);
  return r;
}

inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

inline Interval wilson_interval(std::uint64_t successes, std::uint64_t total, double z = kZ95) {
  if (total == 0) return {0.0, 1.0};
  const double n = static_cast<double>(total);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct RejectionRate {
  std::uint64_t rejected = 0;
  std::uint64_t total = 0;
  double R = 0.0;
  Interval ci;
};

inline RejectionRate rejection_rate(std::span<const RandomnessReport> reports) {
  if (reports.empty()) throw NoDataError("rejection_rate: empty sequence set");
  RejectionRate rr;
  rr.total = reports.size();
  for (const auto& r : reports) rr.rejected += r.overall_rejected ? 1 : 0;
  rr.R = static_cast<double>(rr.rejected) / static_cast<double>(rr.total);
  rr.ci = wilson_interval(rr.rejected, rr.total);
  return rr;
}

inline RejectionRate rejection_rate(std::span<const std::vector<std::uint8_t>> sequences,
                                    const BatteryConfig& cfg = {}) {
  if (sequences.empty()) throw NoDataError("rejection_rate: empty sequence set");
  std::vector<RandomnessReport> reports;
  reports.reserve(sequences.size());
  for (const auto& s : sequences) {
    RandomnessReport r;
    const auto results = run_battery(s, cfg);
    r.overall_rejected = std::any_of(results.begin(), results.end(),
                                     [](const TestResult& t) { return t.rejected; });
    reports.push_back(std::move(r));
  }
  return rejection_rate(reports);
}

inline constexpr std::size_t kMinSequencesPerSlice = 30;

// Randomness in the paper's orientation: 1 at (or below) the battery's
// false-alarm level, 0 when every sequence is rejected.
inline double randomness_level(double R, double false_alarm) {
  if (false_alarm >= 1.0) return 0.0;
  return std::clamp(1.0 - std::max(0.0, R - false_alarm) / (1.0 - false_alarm), 0.0, 1.0);
}

struct SliceReading {
  int slice_index = 0;
  std::uint64_t count = 0;
  std::uint64_t rejected = 0;
  double R = 0.0;
  Interval ci;
  double mean_compression_ratio = 0.0;
  double randomness_level = 1.0;
  bool sufficient = false;
};

struct RandommeterCurve {
  double alpha_sig = kDefaultAlphaSig;
  double compound_false_alarm = 0.0;
  std::vector<SliceReading> slices;  // by within-pulse time
};

// Curve from already evaluated sequences, one report set per slice.
inline RandommeterCurve curve_from_reports(std::span<const std::vector<RandomnessReport>> per_slice,
                                           const BatteryConfig& cfg = {}) {
  if (per_slice.size() < 2) throw ConfigError("randommeter_curve: needs at least 2 slices");
  RandommeterCurve curve;
  curve.alpha_sig = cfg.alpha_sig;
  curve.compound_false_alarm = cfg.compound_false_alarm();
  for (std::size_t s = 0; s < per_slice.size(); ++s) {
    SliceReading reading;
    reading.slice_index = static_cast<int>(s);
    const auto& reports = per_slice[s];
    reading.count = reports.size();
    reading.sufficient = reports.size() >= kMinSequencesPerSlice;
    if (!reports.empty()) {
      const auto rr = rejection_rate(reports);
      reading.rejected = rr.rejected;
      reading.R = rr.R;
      reading.ci = rr.ci;
      double sum = 0.0;
      for (const auto& r : reports) sum += r.compression_ratio;
      reading.mean_compression_ratio = sum / static_cast<double>(reports.size());
    }
    reading.randomness_level = randomness_level(reading.R, curve.compound_false_alarm);
    curve.slices.push_back(reading);
  }
  return curve;
}

inline RandommeterCurve randommeter_curve(
    std::span<const std::vector<std::vector<std::uint8_t>>> per_slice_sequences,
    const BatteryConfig& cfg = {}) {
  if (per_slice_sequences.size() < 2) throw ConfigError("randommeter_curve: needs at least 2 slices");
  std::vector<std::vector<RandomnessReport>> per_slice(per_slice_sequences.size());
  std::uint64_t id = 0;
  for (std::size_t s = 0; s < per_slice_sequences.size(); ++s) {
    for (const auto& seq : per_slice_sequences[s]) {
      per_slice[s].push_back(evaluate_sequence(seq, cfg, id++, static_cast<int>(s)));
    }
  }
  return curve_from_reports(per_slice, cfg);
}

enum class ScenarioLabel { LocalityFalse, RealismFalse, ErgodicityFalse, Inconclusive };

inline std::string_view to_string(ScenarioLabel l) {
  switch (l) {
    case ScenarioLabel::LocalityFalse: return "LOCALITY_FALSE";
    case ScenarioLabel::RealismFalse: return "REALISM_FALSE";
    case ScenarioLabel::ErgodicityFalse: return "ERGODICITY_FALSE";
    case ScenarioLabel::Inconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

struct ClassifierConfig {
  double contrast_alpha = 0.01;
  double min_violation_sigma = 5.0;
  std::size_t min_sequences = kMinSequencesPerSlice;
};

struct ScenarioVerdict {
  ScenarioLabel label = ScenarioLabel::Inconclusive;
  double contrast_z = 0.0;  // positive when the first half rejects more
  double p_value = 1.0;
  double R_first = 0.0;
  double R_second = 0.0;
  std::uint64_t n_first = 0;
  std::uint64_t n_second = 0;
  std::vector<double> slice_S;
  std::vector<double> slice_S_err;
  std::string reason;
};

struct ProportionContrast {
  double z = 0.0;
  double p_value = 1.0;
};

// Pooled two-proportion z-test, two-sided.
inline ProportionContrast two_proportion_test(std::uint64_t k1, std::uint64_t n1, std::uint64_t k2,
                                              std::uint64_t n2) {
  if (n1 == 0 || n2 == 0) return {};
  const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
  const double pooled = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
  const double var = pooled * (1.0 - pooled) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2));
  if (var <= 0.0) return {};
  ProportionContrast c;
  c.z = (p1 - p2) / std::sqrt(var);
  c.p_value = std::erfc(std::abs(c.z) / std::numbers::sqrt2);
  return c;
}

// First half = slices [0, n/2), second half = slices [n - n/2, n); the
// middle slice of an odd count belongs to neither.
inline ScenarioVerdict classify_scenario(const RandommeterCurve& curve, std::span<const ChshEstimate> chsh,
                                         const ClassifierConfig& cfg = {}) {
  const std::size_t n = curve.slices.size();
  if (chsh.size() != n) {
    throw PreconditionError("classify_scenario: CHSH estimates for " + std::to_string(chsh.size()) +
                            " slices, curve has " + std::to_string(n));
  }
  if (n < 2) throw PreconditionError("classify_scenario: needs at least 2 slices");

  ScenarioVerdict v;
  for (const auto& c : chsh) {
    v.slice_S.push_back(c.S);
    v.slice_S_err.push_back(c.std_err);
  }
  const std::size_t half = n / 2;
  for (std::size_t s = 0; s < n; ++s) {
    const auto& r = curve.slices[s];
    if (s < half) {
      v.n_first += r.count;
      v.R_first += static_cast<double>(r.rejected);
    } else if (s >= n - half) {
      v.n_second += r.count;
      v.R_second += static_cast<double>(r.rejected);
    }
  }
  const auto k_first = static_cast<std::uint64_t>(v.R_first);
  const auto k_second = static_cast<std::uint64_t>(v.R_second);
  v.R_first = v.n_first ? v.R_first / static_cast<double>(v.n_first) : 0.0;
  v.R_second = v.n_second ? v.R_second / static_cast<double>(v.n_second) : 0.0;
  const auto contrast = two_proportion_test(k_first, v.n_first, k_second, v.n_second);
  v.contrast_z = contrast.z;
  v.p_value = contrast.p_value;

  for (std::size_t s = 0; s < n; ++s) {
    if (curve.slices[s].count < cfg.min_sequences) {
      v.reason = "slice " + std::to_string(s) + " has " + std::to_string(curve.slices[s].count) +
                 " sequences, needs " + std::to_string(cfg.min_sequences);
      return v;
    }
    const auto& c = chsh[s];
    if (!(c.S - 2.0 >= cfg.min_violation_sigma * c.std_err) || !(c.S > 2.0)) {
      v.reason = "slice " + std::to_string(s) + " S = " + std::to_string(c.S) + " +- " +
                 std::to_string(c.std_err) + " does not violate the CHSH bound at " +
                 std::to_string(cfg.min_violation_sigma) + " sigma";
      return v;
    }
  }

  if (v.p_value < cfg.contrast_alpha) {
    v.label = v.contrast_z > 0 ? ScenarioLabel::ErgodicityFalse : ScenarioLabel::LocalityFalse;
    v.reason = v.contrast_z > 0 ? "first half rejects more often" : "second half rejects more often";
  } else {
    v.label = ScenarioLabel::RealismFalse;
    v.reason = "no significant first/second half contrast";
  }
  return v;
}

}  // namespace bellrm
