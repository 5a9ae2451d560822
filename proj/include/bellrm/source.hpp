#pragma once

// Pulsed biphoton source and two-station time tagger.
//
// Per pulse: one settings pair drawn from the menu and held for the whole
// pulse; at most one entangled pair (probability coincidence_prob_per_pulse)
// stamped at the same instant at both stations; an independent unpaired
// single per station with probability detection_prob - coincidence_prob;
// homogeneous Poisson dark counts anywhere in the run.

#include <bellrm/errors.hpp>
#include <bellrm/events.hpp>
#include <bellrm/model.hpp>
#include <bellrm/rng.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bellrm {

inline constexpr double kSpeedOfLight = 299'792'458.0;

struct SettingsPair {
  PolarizerAngle alpha;
  PolarizerAngle beta;
};

// Standard CHSH angles: a = 0, a' = pi/4, b = pi/8, b' = 3pi/8.
struct ChshAngles {
  PolarizerAngle a{0.0};
  PolarizerAngle a_prime{kPi / 4};
  PolarizerAngle b{kPi / 8};
  PolarizerAngle b_prime{3 * kPi / 8};

  // (a,b), (a,b'), (a',b), (a',b')
  std::array<SettingsPair, 4> pairs() const {
    return {{{a, b}, {a, b_prime}, {a_prime, b}, {a_prime, b_prime}}};
  }
};

inline std::vector<SettingsPair> chsh_menu(const ChshAngles& angles = {}) {
  auto p = angles.pairs();
  return {p.begin(), p.end()};
}

struct RunConfig {
  double station_separation_m = 20.0;
  double rep_rate_hz = 1.0e6;
  std::optional<double> pulse_duration_s;  // unset: 2L/c
  double run_duration_s = 300.0;
  double detection_prob_per_pulse = 0.1;
  double coincidence_prob_per_pulse = 0.02;
  double dark_rate_hz = 100.0;
  std::vector<SettingsPair> settings_menu = chsh_menu();
  std::uint64_t seed = 1;
};

struct PulseGeometry {
  double pulse_duration_s = 0.0;
  double rep_period_s = 0.0;
  double duty_cycle = 0.0;
  double light_time_s = 0.0;

  PulseClock clock() const { return {rep_period_s * 1e9, pulse_duration_s * 1e9}; }
};

inline PulseGeometry pulse_geometry(const RunConfig& config) {
  if (!(config.rep_rate_hz > 0.0)) throw ConfigError("rep_rate_hz: must be > 0");
  if (!(config.station_separation_m >= 0.0)) {
    throw ConfigError("station_separation_m: must be >= 0");
  }
  PulseGeometry g;
  g.light_time_s = config.station_separation_m / kSpeedOfLight;
  g.pulse_duration_s = config.pulse_duration_s.value_or(2.0 * g.light_time_s);
  if (!(g.pulse_duration_s >= 0.0)) throw ConfigError("pulse_duration_s: must be >= 0");
  g.rep_period_s = 1.0 / config.rep_rate_hz;
  g.duty_cycle = g.pulse_duration_s * config.rep_rate_hz;
  if (g.duty_cycle > 1.0) {
    throw ConfigError("pulse_duration_s: duty cycle " + std::to_string(g.duty_cycle) +
                      " exceeds 1 at rep_rate_hz " + std::to_string(config.rep_rate_hz));
  }
  return g;
}

inline std::uint64_t pulse_count(const RunConfig& config) {
  const double n = config.run_duration_s * config.rep_rate_hz;
  return static_cast<std::uint64_t>(std::floor(n + 1e-9));
}

// Full validation for a simulation run. Throws ConfigError naming the
// offending field; returns non-fatal warnings.
inline std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> warnings;
  const PulseGeometry g = pulse_geometry(c);
  if (!(g.pulse_duration_s > 0.0)) {
    throw ConfigError("pulse_duration_s: must be > 0 (station_separation_m is 0 and no override)");
  }
  if (!(c.run_duration_s >= 0.0)) throw ConfigError("run_duration_s: must be >= 0");
  const double p = c.detection_prob_per_pulse;
  const double pc = c.coincidence_prob_per_pulse;
  if (!(pc >= 0.0 && pc < 1.0)) throw ConfigError("coincidence_prob_per_pulse: must be in [0, 1)");
  if (!(p >= 0.0 && p <= 0.2)) {
    throw ConfigError("detection_prob_per_pulse: must be in [0, 0.2] (p << 1 regime)");
  }
  if (p < pc) {
    throw ConfigError("detection_prob_per_pulse: must be >= coincidence_prob_per_pulse");
  }
  if (p > 0.1) {
    warnings.push_back("detection_prob_per_pulse " + std::to_string(p) +
                       " > 0.1: accidental coincidences become significant");
  }
  if (!(c.dark_rate_hz >= 0.0)) throw ConfigError("dark_rate_hz: must be >= 0");
  if (c.settings_menu.empty()) throw ConfigError("settings_menu: must not be empty");
  if (c.settings_menu.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ConfigError("settings_menu: too many entries for a u16 setting index");
  }
  if (pulse_count(c) > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("run_duration_s: pulse count exceeds the u32 pulse index range");
  }
  return warnings;
}

// Missing model parameters that depend on the run (drift period defaults to
// 10^4 repetition periods).
inline OutcomeModel with_run_defaults(OutcomeModel model, const RunConfig& config) {
  if (model.kind == ModelKind::Nonergodic && !model.has(param::kDriftPeriod)) {
    model.params.emplace(std::string(param::kDriftPeriod), 1.0e4 / config.rep_rate_hz);
  }
  return model;
}

namespace detail {
inline constexpr std::uint64_t kDarkBlockPulses = 4096;
}

// Settings pair index for pulse k. A pure function of (seed, k) so dark
// counts and replayed blocks agree with the pulse itself.
inline std::uint16_t pulse_setting(const RunConfig& config, std::uint64_t pulse_index) {
  StreamRng rng(derive_key(config.seed, "settings"), pulse_index);
  return static_cast<std::uint16_t>(rng.below(config.settings_menu.size()));
}

struct RunSummary {
  std::uint64_t pulses = 0;
  std::uint64_t pairs = 0;
  std::array<std::uint64_t, 2> singles{};
  std::array<std::uint64_t, 2> darks{};
  std::array<std::uint64_t, 2> events{};
  std::uint64_t run_end_ns = 0;
};

// Streams every DetectionEvent of the run to `sink` in global time order
// (station A first on equal timestamps). Events at one station are strictly
// increasing in time: a single or dark count landing on an already occupied
// nanosecond at the same station is dropped.
template <class Sink>
RunSummary generate_run(const RunConfig& config, const OutcomeModel& model_in, Sink&& sink) {
  validate(config);
  const OutcomeModel model = with_run_defaults(model_in, config);
  const PulseGeometry geom = pulse_geometry(config);
  const PulseClock clock = geom.clock();
  const std::uint64_t n_pulses = pulse_count(config);
  const double duration_ns = clock.pulse_duration_ns;
  const double unpaired = config.detection_prob_per_pulse - config.coincidence_prob_per_pulse;
  const double dark_rate_per_ns = config.dark_rate_hz * 1e-9;

  const std::uint64_t pulse_key = derive_key(config.seed, "pulse");
  const std::uint64_t model_key = derive_key(config.seed, "model");
  const std::array<std::uint64_t, 2> dark_key = {derive_key(config.seed, "dark.A"),
                                                 derive_key(config.seed, "dark.B")};

  RunSummary summary;
  summary.pulses = n_pulses;
  summary.run_end_ns = clock.pulse_start_ns(n_pulses);

  // Dark counts for one block of pulses, per station, already time ordered.
  struct Dark {
    std::uint64_t t;
    std::uint8_t bit;
  };
  std::array<std::vector<Dark>, 2> darks;
  std::array<std::size_t, 2> dark_pos{};
  std::uint64_t dark_block = std::numeric_limits<std::uint64_t>::max();
  const auto fill_darks = [&](std::uint64_t block) {
    const std::uint64_t first = block * detail::kDarkBlockPulses;
    const std::uint64_t last = std::min(n_pulses, first + detail::kDarkBlockPulses);
    const double t0 = static_cast<double>(clock.pulse_start_ns(first));
    const double t1 = static_cast<double>(clock.pulse_start_ns(last));
    for (int s = 0; s < 2; ++s) {
      darks[s].clear();
      dark_pos[s] = 0;
      if (dark_rate_per_ns <= 0.0) continue;
      StreamRng rng(dark_key[s], block);
      double t = t0;
      for (;;) {
        t += -std::log1p(-rng.uniform()) / dark_rate_per_ns;
        if (t >= t1) break;
        darks[s].push_back({static_cast<std::uint64_t>(t), rng.bit()});
      }
    }
  };

  std::uint64_t half_ordinal[2] = {0, 0};
  std::array<std::vector<DetectionEvent>, 2> local;
  local[0].reserve(8);
  local[1].reserve(8);

  const auto push_unique = [&](int s, const DetectionEvent& e) {
    for (const auto& other : local[s]) {
      if (other.timestamp_ns == e.timestamp_ns) return false;
    }
    local[s].push_back(e);
    return true;
  };

  for (std::uint64_t k = 0; k < n_pulses; ++k) {
    const std::uint64_t block = k / detail::kDarkBlockPulses;
    if (block != dark_block) {
      fill_darks(block);
      dark_block = block;
    }
    const std::uint64_t start = clock.pulse_start_ns(k);
    const std::uint64_t next_start = clock.pulse_start_ns(k + 1);
    local[0].clear();
    local[1].clear();

    StreamRng rng(pulse_key, k);
    const double u_pair = rng.uniform();
    const double u_single_a = rng.uniform();
    const double u_single_b = rng.uniform();

    bool have_setting = false;
    std::uint16_t setting = 0;
    const auto setting_of_pulse = [&] {
      if (!have_setting) {
        setting = pulse_setting(config, k);
        have_setting = true;
      }
      return setting;
    };
    const auto within_ns = [&] {
      auto t = static_cast<std::uint64_t>(rng.uniform() * duration_ns);
      return t;
    };

    if (u_pair < config.coincidence_prob_per_pulse) {
      const std::uint64_t tw = within_ns();
      const std::uint16_t si = setting_of_pulse();
      const SettingsPair& sp = config.settings_menu[si];
      const double tw_s = static_cast<double>(tw) * 1e-9;
      const double dur_s = geom.pulse_duration_s;
      StreamRng mrng(model_key, k);
      HiddenState state;
      if (is_hidden_variable(model.kind)) {
        state = evolve_lambda(model, static_cast<double>(start + tw) * 1e-9, mrng);
      } else if (is_scenario(model.kind)) {
        const int half = pulse_half(tw_s, dur_s);
        state.draw_index = half_ordinal[half]++;
      }
      const JointOutcome o = sample_outcome(model, state, sp.alpha, sp.beta,
                                            std::min(tw_s, dur_s), dur_s, mrng);
      const auto k32 = static_cast<std::uint32_t>(k);
      local[0].push_back({start + tw, k32, si, Station::A, o.bit_a});
      local[1].push_back({start + tw, k32, si, Station::B, o.bit_b});
      ++summary.pairs;
    }
    const double u_single[2] = {u_single_a, u_single_b};
    for (int s = 0; s < 2; ++s) {
      if (u_single[s] < unpaired) {
        const std::uint64_t tw = within_ns();
        const std::uint8_t bit = rng.bit();
        if (push_unique(s, {start + tw, static_cast<std::uint32_t>(k), setting_of_pulse(),
                            static_cast<Station>(s), bit})) {
          ++summary.singles[s];
        }
      }
    }
    for (int s = 0; s < 2; ++s) {
      auto& pos = dark_pos[s];
      while (pos < darks[s].size() && darks[s][pos].t < next_start) {
        const Dark& d = darks[s][pos++];
        if (d.t < start) continue;  // rounding at block edges
        if (push_unique(s, {d.t, static_cast<std::uint32_t>(k), setting_of_pulse(),
                            static_cast<Station>(s), d.bit})) {
          ++summary.darks[s];
        }
      }
    }

    for (auto& v : local) {
      if (v.size() > 1) {
        std::sort(v.begin(), v.end(), [](const DetectionEvent& x, const DetectionEvent& y) {
          return x.timestamp_ns < y.timestamp_ns;
        });
      }
    }
    std::size_t i = 0, j = 0;
    while (i < local[0].size() || j < local[1].size()) {
      if (j == local[1].size() ||
          (i < local[0].size() && local[0][i].timestamp_ns <= local[1][j].timestamp_ns)) {
        sink(local[0][i++]);
      } else {
        sink(local[1][j++]);
      }
    }
    summary.events[0] += local[0].size();
    summary.events[1] += local[1].size();
  }
  return summary;
}

struct GeneratedRun {
  std::vector<DetectionEvent> events_a;
  std::vector<DetectionEvent> events_b;
  RunSummary summary;
};

// Materialized run, split per station.
inline GeneratedRun generate_run(const RunConfig& config, const OutcomeModel& model) {
  GeneratedRun run;
  const double expected = static_cast<double>(pulse_count(config)) *
                              config.detection_prob_per_pulse +
                          config.dark_rate_hz * config.run_duration_s;
  run.events_a.reserve(static_cast<std::size_t>(expected * 1.01) + 16);
  run.events_b.reserve(static_cast<std::size_t>(expected * 1.01) + 16);
  run.summary = generate_run(config, model, [&](const DetectionEvent& e) {
    (e.station == Station::A ? run.events_a : run.events_b).push_back(e);
  });
  return run;
}

}  // namespace bellrm
