#pragma once

// Outcome models for a two-station polarization Bell test.
//
// Every model answers the same question: given the hidden state of a pulse,
// the two analyzer angles and the detection time inside the pulse, which
// ports (0 = transmitted, 1 = reflected) fire at A and B.

#include <bellrm/errors.hpp>
#include <bellrm/rng.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <string_view>

namespace bellrm {

inline constexpr double kPi = std::numbers::pi;

// Analyzer orientation. Polarization is periodic in pi, so the value is
// stored normalized into [0, pi).
class PolarizerAngle {
 public:
  constexpr PolarizerAngle() = default;
  explicit PolarizerAngle(double radians) : radians_(normalize(radians)) {}

  static PolarizerAngle degrees(double deg) { return PolarizerAngle(deg * kPi / 180.0); }

  double radians() const noexcept { return radians_; }

  static double normalize(double radians) {
    double r = std::fmod(radians, kPi);
    if (r < 0.0) r += kPi;
    if (r >= kPi) r = 0.0;  // fmod rounding can land exactly on pi
    return r;
  }

  friend PolarizerAngle operator+(PolarizerAngle a, PolarizerAngle b) {
    return PolarizerAngle(a.radians_ + b.radians_);
  }
  friend PolarizerAngle operator-(PolarizerAngle a, PolarizerAngle b) {
    return PolarizerAngle(a.radians_ - b.radians_);
  }
  friend bool operator==(PolarizerAngle, PolarizerAngle) = default;

 private:
  double radians_ = 0.0;
};

// Distance between two angles on the pi-periodic circle, in [0, pi/2].
inline double angular_distance(PolarizerAngle a, PolarizerAngle b) {
  const double d = (a - b).radians();
  return d > kPi / 2 ? kPi - d : d;
}

enum class ModelKind {
  QmNonlocal,
  LocalErgodic,
  Nonergodic,
  ScenarioLocalityFalse,
  ScenarioRealismFalse,
  ScenarioErgodicityFalse,
};

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::QmNonlocal: return "QM_NONLOCAL";
    case ModelKind::LocalErgodic: return "LOCAL_ERGODIC";
    case ModelKind::Nonergodic: return "NONERGODIC";
    case ModelKind::ScenarioLocalityFalse: return "SCENARIO_LOCALITY_FALSE";
    case ModelKind::ScenarioRealismFalse: return "SCENARIO_REALISM_FALSE";
    case ModelKind::ScenarioErgodicityFalse: return "SCENARIO_ERGODICITY_FALSE";
  }
  throw ConfigError("unknown model kind");
}

inline ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::QmNonlocal, ModelKind::LocalErgodic, ModelKind::Nonergodic,
                 ModelKind::ScenarioLocalityFalse, ModelKind::ScenarioRealismFalse,
                 ModelKind::ScenarioErgodicityFalse}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("model.kind: unknown model kind '" + std::string(name) + "'");
}

inline bool is_hidden_variable(ModelKind kind) {
  return kind == ModelKind::LocalErgodic || kind == ModelKind::Nonergodic;
}

inline bool is_scenario(ModelKind kind) {
  return kind == ModelKind::ScenarioLocalityFalse || kind == ModelKind::ScenarioRealismFalse ||
         kind == ModelKind::ScenarioErgodicityFalse;
}

namespace param {
// NONERGODIC: period of the hidden-variable drift, seconds.
inline constexpr std::string_view kDriftPeriod = "drift_period_s";
// LOCAL_ERGODIC / NONERGODIC: if present, rho(lambda) collapses to a point
// mass at this value (radians).
inline constexpr std::string_view kLambdaDelta = "lambda_delta";
}  // namespace param

struct OutcomeModel {
  ModelKind kind = ModelKind::QmNonlocal;
  std::map<std::string, double, std::less<>> params;

  bool has(std::string_view name) const { return params.find(name) != params.end(); }

  double get(std::string_view name, double fallback) const {
    auto it = params.find(name);
    return it == params.end() ? fallback : it->second;
  }

  double require(std::string_view name) const {
    auto it = params.find(name);
    if (it == params.end()) {
      throw ConfigError("model.params." + std::string(name) + ": required for " +
                        std::string(to_string(kind)));
    }
    return it->second;
  }
};

// All reference models carry a one-dimensional hidden variable.
struct HiddenState {
  double lambda = 0.0;
  double epoch_time_s = 0.0;
  // Position in the scenario models' deterministic generator (count of
  // earlier draws in the same pulse half).
  std::uint64_t draw_index = 0;
};

struct JointOutcome {
  std::uint8_t bit_a = 0;
  std::uint8_t bit_b = 0;
  bool detected = false;
};

// |phi+> joint outcome probability for analyzers at alpha, beta.
inline double qm_joint_probability(PolarizerAngle alpha, PolarizerAngle beta, int a, int b) {
  const double d = alpha.radians() - beta.radians();
  if (a == b) {
    const double c = std::cos(d);
    return 0.5 * c * c;
  }
  const double s = std::sin(d);
  return 0.5 * s * s;
}

inline double qm_correlation(PolarizerAngle alpha, PolarizerAngle beta) {
  return std::cos(2.0 * (alpha.radians() - beta.radians()));
}

// Reference local-realistic outcome: transmitted iff the analyzer is within
// pi/4 of the hidden polarization.
inline std::uint8_t local_hv_bit(double lambda, PolarizerAngle theta) {
  return std::cos(2.0 * (theta.radians() - lambda)) >= 0.0 ? 0 : 1;
}

// P+_A(alpha, lambda) for the sign model: probability of a transmitted click.
inline double transmitted_probability(double lambda, PolarizerAngle alpha) {
  return local_hv_bit(lambda, alpha) == 0 ? 1.0 : 0.0;
}

// Period and shape of the scenario models' compressible generator: 32 zeros
// followed by 32 ones. Balanced, so marginals stay at 1/2.
inline constexpr std::uint64_t kScenarioPatternPeriod = 64;

inline std::uint8_t scenario_pattern_bit(std::uint64_t index) {
  return (index % kScenarioPatternPeriod) >= kScenarioPatternPeriod / 2 ? 1 : 0;
}

// 0 for the first half of the pulse, 1 for the second.
inline int pulse_half(double within_pulse_time_s, double pulse_duration_s) {
  return within_pulse_time_s < 0.5 * pulse_duration_s ? 0 : 1;
}

// Whether the scenario model draws from the compressible generator in the
// given pulse half.
inline bool scenario_compressible(ModelKind kind, int half) {
  return (kind == ModelKind::ScenarioLocalityFalse && half == 1) ||
         (kind == ModelKind::ScenarioErgodicityFalse && half == 0);
}

inline double drift_period_s(const OutcomeModel& model) {
  const double period = model.require(param::kDriftPeriod);
  if (!(period > 0.0)) throw ConfigError("model.params.drift_period_s: must be > 0");
  return period;
}

// Draw from the stationary density rho(lambda).
inline double sample_stationary_lambda(const OutcomeModel& model, StreamRng& rng) {
  if (!is_hidden_variable(model.kind)) {
    throw ConfigError(std::string(to_string(model.kind)) + " has no hidden variable");
  }
  if (model.has(param::kLambdaDelta)) {
    return PolarizerAngle::normalize(model.get(param::kLambdaDelta, 0.0));
  }
  return kPi * rng.uniform();
}

// Hidden state for a pulse at epoch_time. The ergodic model redraws lambda
// independently every call; the non-ergodic model is a deterministic drift
// lambda(t) = (pi * t / drift_period) mod pi.
inline HiddenState evolve_lambda(const OutcomeModel& model, double epoch_time_s, StreamRng& rng) {
  HiddenState state;
  state.epoch_time_s = epoch_time_s;
  switch (model.kind) {
    case ModelKind::LocalErgodic:
      state.lambda = sample_stationary_lambda(model, rng);
      return state;
    case ModelKind::Nonergodic: {
      const double period = drift_period_s(model);
      const double phase = std::fmod(epoch_time_s / period, 1.0);
      state.lambda = PolarizerAngle::normalize(
          kPi * (phase < 0 ? phase + 1.0 : phase) + model.get(param::kLambdaDelta, 0.0));
      return state;
    }
    default:
      throw ConfigError("evolve_lambda: " + std::string(to_string(model.kind)) +
                        " has no hidden-variable dynamics");
  }
}

inline JointOutcome sample_outcome(const OutcomeModel& model, const HiddenState& state,
                                   PolarizerAngle alpha, PolarizerAngle beta,
                                   double within_pulse_time_s, double pulse_duration_s,
                                   StreamRng& rng) {
  if (within_pulse_time_s < 0.0 || within_pulse_time_s > pulse_duration_s) {
    throw PreconditionError("sample_outcome: within-pulse time outside [0, pulse_duration]");
  }
  JointOutcome out;
  out.detected = true;
  const auto qm_flip = [&] {
    const double s = std::sin(alpha.radians() - beta.radians());
    return static_cast<std::uint8_t>(rng.uniform() < s * s ? 1 : 0);
  };

  switch (model.kind) {
    case ModelKind::QmNonlocal:
    case ModelKind::ScenarioRealismFalse:
      out.bit_a = rng.bit();
      out.bit_b = out.bit_a ^ qm_flip();
      return out;
    case ModelKind::LocalErgodic:
    case ModelKind::Nonergodic:
      out.bit_a = local_hv_bit(state.lambda, alpha);
      out.bit_b = local_hv_bit(state.lambda, beta);
      return out;
    case ModelKind::ScenarioLocalityFalse:
    case ModelKind::ScenarioErgodicityFalse: {
      const int half = pulse_half(within_pulse_time_s, pulse_duration_s);
      out.bit_a = scenario_compressible(model.kind, half) ? scenario_pattern_bit(state.draw_index)
                                                          : rng.bit();
      out.bit_b = out.bit_a ^ qm_flip();
      return out;
    }
  }
  throw ConfigError("sample_outcome: unknown model kind");
}

}  // namespace bellrm
