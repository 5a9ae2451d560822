#pragma once

#include <cmath>
#include <cstdint>

namespace bellrm {

enum class Station : std::uint8_t { A = 0, B = 1 };

inline char station_letter(Station s) { return s == Station::A ? 'A' : 'B'; }

// One time-tagged click.
struct DetectionEvent {
  std::uint64_t timestamp_ns = 0;  // from run start
  std::uint32_t pulse_index = 0;
  std::uint16_t setting_index = 0;
  Station station = Station::A;
  std::uint8_t port_bit = 0;  // 0 = transmitted, 1 = reflected

  friend bool operator==(const DetectionEvent&, const DetectionEvent&) = default;
};

// Maps absolute timestamps onto the pulse train. Pulse k starts at
// round(k * rep_period_ns) and is lit for pulse_duration_ns.
struct PulseClock {
  double rep_period_ns = 1000.0;
  double pulse_duration_ns = 0.0;

  std::uint64_t pulse_start_ns(std::uint64_t pulse_index) const {
    return static_cast<std::uint64_t>(std::llround(static_cast<double>(pulse_index) * rep_period_ns));
  }

  // Index of the repetition period containing t.
  std::uint64_t period_of(std::uint64_t timestamp_ns) const {
    auto k = static_cast<std::uint64_t>(static_cast<double>(timestamp_ns) / rep_period_ns);
    while (k > 0 && pulse_start_ns(k) > timestamp_ns) --k;
    while (pulse_start_ns(k + 1) <= timestamp_ns) ++k;
    return k;
  }
};

}  // namespace bellrm
