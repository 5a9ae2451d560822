#pragma once

// Correlation and CHSH estimators, the S-vs-coincidence-window curve with
// its uncorrelated-accidentals prediction, and the ensemble-vs-time average
// comparison that defines ergodicity.

#include <bellrm/errors.hpp>
#include <bellrm/events.hpp>
#include <bellrm/model.hpp>
#include <bellrm/rng.hpp>
#include <bellrm/source.hpp>
#include <bellrm/timetag.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bellrm {

// Joint outcome counts; n[a][b]. Addition is exact, so partial counts from
// any partition of the records reduce to identical totals.
struct PairCounts {
  std::array<std::array<std::uint64_t, 2>, 2> n{};

  std::uint64_t total() const { return n[0][0] + n[0][1] + n[1][0] + n[1][1]; }

  void add(std::uint8_t a, std::uint8_t b) { ++n[a][b]; }

  PairCounts& operator+=(const PairCounts& o) {
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) n[a][b] += o.n[a][b];
    return *this;
  }
  friend bool operator==(const PairCounts&, const PairCounts&) = default;
};

struct CorrelationEstimate {
  SettingsPair setting;
  PairCounts counts;
  double E = 0.0;
  double std_err = 0.0;
};

inline CorrelationEstimate correlation_from_counts(const PairCounts& c, SettingsPair setting = {}) {
  const std::uint64_t total = c.total();
  if (total == 0) throw NoDataError("correlation undefined: zero coincidences");
  CorrelationEstimate est;
  est.setting = setting;
  est.counts = c;
  const double same = static_cast<double>(c.n[0][0] + c.n[1][1]);
  const double diff = static_cast<double>(c.n[0][1] + c.n[1][0]);
  est.E = (same - diff) / static_cast<double>(total);
  est.std_err = std::sqrt(std::max(0.0, 1.0 - est.E * est.E) / static_cast<double>(total));
  return est;
}

// Records are assumed to share one settings pair.
inline CorrelationEstimate estimate_correlation(std::span<const CoincidenceRecord> records,
                                                SettingsPair setting = {}) {
  PairCounts c;
  for (const auto& r : records) c.add(r.bit_a, r.bit_b);
  return correlation_from_counts(c, setting);
}

struct ChshEstimate {
  int slice_index = -1;  // -1: all records
  std::array<CorrelationEstimate, 4> correlations;  // (a,b), (a,b'), (a',b), (a',b')
  double S = 0.0;
  double std_err = 0.0;
};

// Menu indices of the four CHSH settings pairs, in ChshAngles::pairs() order.
inline std::array<std::uint16_t, 4> chsh_setting_indices(std::span<const SettingsPair> menu,
                                                         const ChshAngles& angles) {
  constexpr double kTol = 1e-9;
  const auto wanted = angles.pairs();
  std::array<std::uint16_t, 4> idx{};
  for (std::size_t k = 0; k < 4; ++k) {
    bool found = false;
    for (std::size_t m = 0; m < menu.size() && !found; ++m) {
      if (angular_distance(menu[m].alpha, wanted[k].alpha) < kTol &&
          angular_distance(menu[m].beta, wanted[k].beta) < kTol) {
        idx[k] = static_cast<std::uint16_t>(m);
        found = true;
      }
    }
    if (!found) {
      throw IncompleteSettingsError("settings menu lacks CHSH pair " + std::to_string(k) + " (alpha=" +
                                    std::to_string(wanted[k].alpha.radians()) + ", beta=" +
                                    std::to_string(wanted[k].beta.radians()) + ")");
    }
  }
  return idx;
}

inline ChshEstimate chsh_from_counts(const std::array<PairCounts, 4>& counts,
                                     std::span<const SettingsPair> menu,
                                     const std::array<std::uint16_t, 4>& idx, int slice_index) {
  ChshEstimate est;
  est.slice_index = slice_index;
  double var = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    if (counts[k].total() == 0) {
      throw IncompleteSettingsError("no coincidences for CHSH pair " + std::to_string(k) +
                                    (slice_index >= 0 ? " in slice " + std::to_string(slice_index) : ""));
    }
    est.correlations[k] = correlation_from_counts(counts[k], menu[idx[k]]);
    var += est.correlations[k].std_err * est.correlations[k].std_err;
  }
  const auto& c = est.correlations;
  est.S = std::abs(c[0].E - c[1].E + c[2].E + c[3].E);
  est.std_err = std::sqrt(var);
  return est;
}

// CHSH over the records of one slice (or all records when slice_index is
// nullopt). S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|.
inline ChshEstimate estimate_chsh(std::span<const CoincidenceRecord> records,
                                  std::span<const SettingsPair> menu, const ChshAngles& angles,
                                  std::optional<int> slice_index = std::nullopt) {
  const auto idx = chsh_setting_indices(menu, angles);
  std::array<PairCounts, 4> counts{};
  for (const auto& r : records) {
    if (slice_index && r.slice_index != *slice_index) continue;
    for (std::size_t k = 0; k < 4; ++k) {
      if (r.setting_index == idx[k]) {
        counts[k].add(r.bit_a, r.bit_b);
        break;
      }
    }
  }
  return chsh_from_counts(counts, menu, idx, slice_index.value_or(-1));
}

// ---------------------------------------------------------------------------
// S versus coincidence window

// Rates needed to predict how uncorrelated clicks dilute the true
// coincidences. All rates per nanosecond.
struct BackgroundRates {
  double run_ns = 0.0;
  double pulses = 0.0;
  double slots_per_pulse = 1.0;  // 1 ns time-tag slots inside one pulse
  std::array<double, 2> dark_rate{};       // uniform in time, measured outside pulses
  std::array<double, 2> in_pulse_events{};  // all clicks inside pulses
};

inline BackgroundRates measure_background(std::span<const DetectionEvent> a,
                                          std::span<const DetectionEvent> b,
                                          const PulseClock& clock, std::uint64_t n_pulses) {
  BackgroundRates r;
  r.pulses = static_cast<double>(n_pulses);
  r.run_ns = static_cast<double>(clock.pulse_start_ns(n_pulses));
  r.slots_per_pulse = std::max(1.0, std::ceil(clock.pulse_duration_ns));
  const std::array<std::span<const DetectionEvent>, 2> streams = {a, b};
  for (int s = 0; s < 2; ++s) {
    double outside = 0.0, inside = 0.0;
    for (const auto& e : streams[s]) {
      const double within = static_cast<double>(e.timestamp_ns) -
                            static_cast<double>(clock.pulse_start_ns(e.pulse_index));
      (within >= clock.pulse_duration_ns ? outside : inside) += 1.0;
    }
    const double off_time = r.run_ns - r.slots_per_pulse * r.pulses;
    r.dark_rate[s] = off_time > 0.0 ? outside / off_time : 0.0;
    r.in_pulse_events[s] = inside;
  }
  return r;
}

// First-order expectation of the greedy matcher's output for window W,
// given `true_pairs` correlated pairs stamped at identical times.
struct WindowPrediction {
  double accidentals = 0.0;  // uncorrelated-uncorrelated matches
  double stolen = 0.0;       // true pairs whose partner was taken by an earlier click
  double total = 0.0;
  double true_fraction = 1.0;
};

inline WindowPrediction predict_window(const BackgroundRates& r, double true_pairs,
                                       std::uint64_t window_ns) {
  const double W = static_cast<double>(window_ns);
  const double m = r.slots_per_pulse;
  const double duty_ns = m * r.pulses;
  std::array<double, 2> singles{};  // uncorrelated in-pulse clicks, excluding darks
  for (int s = 0; s < 2; ++s) {
    singles[s] = std::max(0.0, r.in_pulse_events[s] - true_pairs - r.dark_rate[s] * duty_ns);
  }
  // P(|U - V| <= W) for U, V uniform on m slots.
  const double p_same_pulse =
      W >= m - 1 ? 1.0 : (m + 2.0 * W * m - W * (W + 1.0)) / (m * m);
  // P(single lands in the W slots before a uniformly placed pair member).
  double before = 0.0;
  {
    const auto slots = static_cast<std::uint64_t>(m);
    for (std::uint64_t t = 0; t < slots; ++t) before += std::min(W, static_cast<double>(t));
    before /= m * m;
  }
  const double span = 2.0 * W + 1.0;
  WindowPrediction p;
  const double dd = r.dark_rate[0] * r.dark_rate[1] * span * r.run_ns;
  const double ds = singles[1] * r.dark_rate[0] * span + singles[0] * r.dark_rate[1] * span;
  const double ss = r.pulses > 0 ? singles[0] * singles[1] / r.pulses * p_same_pulse : 0.0;
  p.accidentals = dd + ds + ss;
  const double per_pulse_single = r.pulses > 0 ? (singles[0] + singles[1]) / r.pulses : 0.0;
  p.stolen = true_pairs * ((r.dark_rate[0] + r.dark_rate[1]) * W + per_pulse_single * before);
  p.total = true_pairs + p.accidentals;
  p.true_fraction = p.total > 0 ? (true_pairs - p.stolen) / p.total : 0.0;
  return p;
}

struct WindowPoint {
  std::uint64_t window_ns = 0;
  std::uint64_t coincidences = 0;
  double S = 0.0;
  double std_err = 0.0;
  double true_fraction = 1.0;  // predicted
  double S_predicted = 0.0;
};

struct WindowCurve {
  std::vector<WindowPoint> points;
  double S0 = 0.0;          // in-pulse S with accidentals removed
  double true_pairs = 0.0;  // estimated correlated pairs
  BackgroundRates rates;
};

// Measured S(W) over the given windows and the prediction
// S_pred(W) = S0 * f_true(W) for fully uncorrelated background clicks.
// S0 and the true-pair count are anchored at the smallest window.
inline WindowCurve s_vs_window(std::span<const DetectionEvent> a, std::span<const DetectionEvent> b,
                               std::vector<std::uint64_t> windows, std::span<const SettingsPair> menu,
                               const ChshAngles& angles, const PulseClock& clock,
                               std::uint64_t n_pulses) {
  if (windows.empty()) throw ConfigError("window list: must not be empty");
  std::sort(windows.begin(), windows.end());
  WindowCurve curve;
  curve.rates = measure_background(a, b, clock, n_pulses);
  for (auto w : windows) {
    const auto records = match_coincidences(a, b, w, clock);
    const ChshEstimate est = estimate_chsh(records, menu, angles);
    WindowPoint pt;
    pt.window_ns = w;
    pt.coincidences = records.size();
    pt.S = est.S;
    pt.std_err = est.std_err;
    curve.points.push_back(pt);
  }
  // N_total(W0) = N_true + accidentals(W0; N_true); a few fixed-point steps.
  const double n0 = static_cast<double>(curve.points.front().coincidences);
  double n_true = n0;
  for (int it = 0; it < 20; ++it) {
    n_true = n0 - predict_window(curve.rates, n_true, windows.front()).accidentals;
  }
  curve.true_pairs = n_true;
  const double f0 = predict_window(curve.rates, n_true, windows.front()).true_fraction;
  curve.S0 = f0 > 0 ? curve.points.front().S / f0 : 0.0;
  for (auto& pt : curve.points) {
    pt.true_fraction = predict_window(curve.rates, n_true, pt.window_ns).true_fraction;
    pt.S_predicted = curve.S0 * pt.true_fraction;
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Ensemble vs time averages

struct AverageEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  std::uint64_t n = 0;
};

// Monte Carlo integral of rho(lambda) * P+_A(alpha, lambda) over lambda.
template <class LambdaSampler>
AverageEstimate ensemble_average(LambdaSampler&& sample_lambda, PolarizerAngle alpha,
                                 std::uint64_t n_samples) {
  if (n_samples == 0) throw ConfigError("ensemble_average: n_samples must be > 0");
  double sum = 0.0;
  for (std::uint64_t i = 0; i < n_samples; ++i) sum += transmitted_probability(sample_lambda(i), alpha);
  AverageEstimate est;
  est.n = n_samples;
  est.mean = sum / static_cast<double>(n_samples);
  est.std_err = std::sqrt(est.mean * (1.0 - est.mean) / static_cast<double>(n_samples));
  return est;
}

inline AverageEstimate ensemble_average(const OutcomeModel& model, PolarizerAngle alpha,
                                        std::uint64_t n_samples, std::uint64_t seed) {
  if (!is_hidden_variable(model.kind)) {
    throw ConfigError("ensemble_average: " + std::string(to_string(model.kind)) +
                      " has no hidden-variable density");
  }
  const std::uint64_t key = derive_key(seed, "ensemble");
  return ensemble_average(
      [&](std::uint64_t i) {
        StreamRng rng(key, i);
        return sample_stationary_lambda(model, rng);
      },
      alpha, n_samples);
}

// One station-A outcome in a time trace.
struct TraceSample {
  double time_s = 0.0;
  PolarizerAngle angle;
  std::uint8_t bit = 0;
};

// Fraction of transmitted outcomes at setting alpha with time in
// [t_start, t_start + T). Uniform weight in time. The standard error uses
// the add-two-successes-and-failures estimate so that all-equal windows do
// not report zero spread.
inline AverageEstimate time_average(std::span<const TraceSample> trace, PolarizerAngle alpha,
                                    double t_start_s, double duration_s) {
  if (!(duration_s > 0.0)) throw ConfigError("time_average: T must be > 0");
  std::uint64_t n = 0, transmitted = 0;
  for (const auto& s : trace) {
    if (s.time_s < t_start_s || s.time_s >= t_start_s + duration_s) continue;
    if (angular_distance(s.angle, alpha) > 1e-9) continue;
    ++n;
    transmitted += s.bit == 0 ? 1 : 0;
  }
  if (n == 0) throw NoDataError("time_average: no outcomes for the setting in the window");
  AverageEstimate est;
  est.n = n;
  est.mean = static_cast<double>(transmitted) / static_cast<double>(n);
  const double pt = (static_cast<double>(transmitted) + 2.0) / (static_cast<double>(n) + 4.0);
  est.std_err = std::sqrt(pt * (1.0 - pt) / (static_cast<double>(n) + 4.0));
  return est;
}

// Station-A outcomes of a hidden-variable model sampled once per
// `sample_period_s` with the analyzer fixed at alpha.
inline std::vector<TraceSample> model_trace(const OutcomeModel& model, PolarizerAngle alpha,
                                            double t_start_s, double duration_s,
                                            double sample_period_s, std::uint64_t seed) {
  if (!(sample_period_s > 0.0)) throw ConfigError("model_trace: sample period must be > 0");
  const std::uint64_t key = derive_key(seed, "trace");
  std::vector<TraceSample> trace;
  const auto n = static_cast<std::uint64_t>(std::ceil(duration_s / sample_period_s - 1e-9));
  trace.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    const double t = t_start_s + static_cast<double>(k) * sample_period_s;
    StreamRng rng(key, k);
    const HiddenState st = evolve_lambda(model, t, rng);
    trace.push_back({t, alpha, local_hv_bit(st.lambda, alpha)});
  }
  return trace;
}

inline std::vector<TraceSample> trace_from_events(std::span<const DetectionEvent> events,
                                                  std::span<const SettingsPair> menu, Station station) {
  std::vector<TraceSample> trace;
  for (const auto& e : events) {
    if (e.station != station || e.setting_index >= menu.size()) continue;
    const auto& sp = menu[e.setting_index];
    trace.push_back({static_cast<double>(e.timestamp_ns) * 1e-9,
                     station == Station::A ? sp.alpha : sp.beta, e.port_bit});
  }
  return trace;
}

struct TimeWindow {
  double t_start_s = 0.0;
  double duration_s = 0.0;
};

struct ErgodicityReport {
  PolarizerAngle alpha;
  TimeWindow window;
  double ensemble_avg = 0.0;
  double time_avg = 0.0;
  double gap = 0.0;
  double combined_std_err = 0.0;
  double threshold = 0.0;  // 3 * combined_std_err
  std::uint64_t n_time = 0;

  bool ergodic() const { return gap < threshold; }
};

// Ensemble average against time averages over each window. Time averages
// sample the model once per `sample_period_s` (one repetition period in
// the default pulse train).
inline std::vector<ErgodicityReport> ergodicity_gap(const OutcomeModel& model, PolarizerAngle alpha,
                                                    std::span<const TimeWindow> windows,
                                                    double sample_period_s, std::uint64_t seed,
                                                    std::uint64_t n_lambda_samples = 1'000'000) {
  const AverageEstimate ens = ensemble_average(model, alpha, n_lambda_samples, seed);
  std::vector<ErgodicityReport> reports;
  for (const auto& w : windows) {
    const auto trace = model_trace(model, alpha, w.t_start_s, w.duration_s, sample_period_s, seed);
    const AverageEstimate tavg = time_average(trace, alpha, w.t_start_s, w.duration_s);
    ErgodicityReport r;
    r.alpha = alpha;
    r.window = w;
    r.ensemble_avg = ens.mean;
    r.time_avg = tavg.mean;
    r.gap = std::abs(ens.mean - tavg.mean);
    r.combined_std_err = std::sqrt(ens.std_err * ens.std_err + tavg.std_err * tavg.std_err);
    r.threshold = 3.0 * r.combined_std_err;
    r.n_time = tavg.n;
    reports.push_back(r);
  }
  return reports;
}

}  // namespace bellrm
