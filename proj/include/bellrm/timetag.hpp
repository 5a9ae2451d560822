#pragma once

// Coincidence extraction and pulse slicing.

#include <bellrm/errors.hpp>
#include <bellrm/events.hpp>

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bellrm {

inline constexpr std::uint64_t kDefaultWindowNs = 2;

struct CoincidenceRecord {
  std::uint64_t timestamp_ns = 0;  // station A click
  std::uint32_t pulse_index = 0;
  std::int64_t within_pulse_time_ns = 0;
  std::uint8_t bit_a = 0;
  std::uint8_t bit_b = 0;
  std::uint16_t setting_index = 0;
  int slice_index = 0;

  friend bool operator==(const CoincidenceRecord&, const CoincidenceRecord&) = default;
};

struct BinarySequence {
  Station station = Station::A;
  int slice_index = 0;
  std::optional<std::uint16_t> setting_filter;
  std::vector<std::uint8_t> bits;
};

inline void require_time_ordered(std::span<const DetectionEvent> events, const char* which) {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].timestamp_ns < events[i - 1].timestamp_ns) {
      throw StreamOrderError(std::string("stream ") + which + ": event " + std::to_string(i) +
                             " at " + std::to_string(events[i].timestamp_ns) +
                             " ns precedes its predecessor");
    }
  }
}

// Greedy one-to-one pairing in time order: compare the two stream heads,
// pair them if they lie within the window, otherwise discard the earlier
// one. Returns (index in a, index in b) pairs in time order.
inline std::vector<std::pair<std::size_t, std::size_t>> match_pairs(
    std::span<const DetectionEvent> a, std::span<const DetectionEvent> b,
    std::uint64_t window_ns) {
  if (window_ns == 0) throw ConfigError("window_ns: must be > 0");
  require_time_ordered(a, "A");
  require_time_ordered(b, "B");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const std::uint64_t ta = a[i].timestamp_ns;
    const std::uint64_t tb = b[j].timestamp_ns;
    const std::uint64_t gap = ta > tb ? ta - tb : tb - ta;
    if (gap <= window_ns) {
      pairs.emplace_back(i++, j++);
    } else if (ta < tb) {
      ++i;
    } else {
      ++j;
    }
  }
  return pairs;
}

inline CoincidenceRecord make_record(const DetectionEvent& ea, const DetectionEvent& eb,
                                     const PulseClock& clock) {
  CoincidenceRecord r;
  r.timestamp_ns = ea.timestamp_ns;
  r.pulse_index = ea.pulse_index;
  r.within_pulse_time_ns = static_cast<std::int64_t>(ea.timestamp_ns) -
                           static_cast<std::int64_t>(clock.pulse_start_ns(ea.pulse_index));
  r.bit_a = ea.port_bit;
  r.bit_b = eb.port_bit;
  r.setting_index = ea.setting_index;
  return r;
}

inline std::vector<CoincidenceRecord> match_coincidences(std::span<const DetectionEvent> a,
                                                         std::span<const DetectionEvent> b,
                                                         std::uint64_t window_ns,
                                                         const PulseClock& clock) {
  std::vector<CoincidenceRecord> records;
  const auto pairs = match_pairs(a, b, window_ns);
  records.reserve(pairs.size());
  for (auto [i, j] : pairs) records.push_back(make_record(a[i], b[j], clock));
  return records;
}

// Incremental form of match_pairs for event streams too large to hold.
// Events must be pushed in global time order (both stations interleaved);
// the matches are identical to the offline pass over the same events.
class StreamingMatcher {
 public:
  StreamingMatcher(std::uint64_t window_ns, PulseClock clock)
      : window_(window_ns), clock_(clock) {
    if (window_ns == 0) throw ConfigError("window_ns: must be > 0");
  }

  template <class OnRecord>
  void push(const DetectionEvent& e, OnRecord&& on_record) {
    if (e.timestamp_ns < last_time_) {
      throw StreamOrderError("streaming matcher: event at " + std::to_string(e.timestamp_ns) +
                             " ns pushed after " + std::to_string(last_time_) + " ns");
    }
    last_time_ = e.timestamp_ns;
    (e.station == Station::A ? a_ : b_).push_back(e);
    drain(on_record);
  }

  template <class OnRecord>
  void finish(OnRecord&& on_record) {
    drain(on_record);
    a_.clear();
    b_.clear();
  }

  std::uint64_t matched() const noexcept { return matched_; }

 private:
  template <class OnRecord>
  void drain(OnRecord& on_record) {
    for (;;) {
      if (!a_.empty() && !b_.empty()) {
        const std::uint64_t ta = a_.front().timestamp_ns;
        const std::uint64_t tb = b_.front().timestamp_ns;
        const std::uint64_t gap = ta > tb ? ta - tb : tb - ta;
        if (gap <= window_) {
          on_record(make_record(a_.front(), b_.front(), clock_));
          ++matched_;
          a_.pop_front();
          b_.pop_front();
        } else if (ta < tb) {
          a_.pop_front();
        } else {
          b_.pop_front();
        }
        continue;
      }
      // One side is empty. Any later event arrives at or after last_time_,
      // so a head older than last_time_ - window can never be paired.
      auto& q = a_.empty() ? b_ : a_;
      while (!q.empty() && q.front().timestamp_ns + window_ < last_time_) q.pop_front();
      return;
    }
  }

  std::uint64_t window_;
  PulseClock clock_;
  std::deque<DetectionEvent> a_, b_;
  std::uint64_t last_time_ = 0;
  std::uint64_t matched_ = 0;
};

// Slice index for a within-pulse time: equal-width slices, slice 0 starts
// at the pulse start, boundary values go to the later slice. Times outside
// [0, pulse_duration) map to -1.
inline int slice_of(std::int64_t within_pulse_time_ns, int n_slices, double pulse_duration_ns) {
  if (within_pulse_time_ns < 0) return -1;
  const double t = static_cast<double>(within_pulse_time_ns);
  if (t >= pulse_duration_ns) return -1;
  int s = static_cast<int>(std::floor(static_cast<double>(n_slices) * t / pulse_duration_ns));
  return s >= n_slices ? n_slices - 1 : s;
}

inline void slice_records(std::span<CoincidenceRecord> records, int n_slices,
                          double pulse_duration_ns) {
  if (n_slices < 2) throw ConfigError("slices: must be >= 2");
  if (!(pulse_duration_ns > 0.0)) throw ConfigError("pulse_duration_ns: must be > 0");
  for (auto& r : records) r.slice_index = slice_of(r.within_pulse_time_ns, n_slices, pulse_duration_ns);
}

inline BinarySequence extract_sequence(std::span<const CoincidenceRecord> records, int slice_index,
                                       Station station,
                                       std::optional<std::uint16_t> setting_filter = std::nullopt) {
  BinarySequence seq;
  seq.station = station;
  seq.slice_index = slice_index;
  seq.setting_filter = setting_filter;
  for (const auto& r : records) {
    if (r.slice_index != slice_index) continue;
    if (setting_filter && r.setting_index != *setting_filter) continue;
    seq.bits.push_back(station == Station::A ? r.bit_a : r.bit_b);
  }
  return seq;
}

// Non-overlapping consecutive blocks; the trailing remainder is dropped.
inline std::vector<std::vector<std::uint8_t>> sequence_partition(std::span<const std::uint8_t> bits,
                                                                 std::size_t target_length) {
  if (target_length < 100) throw ConfigError("sequence_length: must be >= 100");
  std::vector<std::vector<std::uint8_t>> blocks;
  const std::size_t n = bits.size() / target_length;
  blocks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto first = bits.begin() + static_cast<std::ptrdiff_t>(i * target_length);
    blocks.emplace_back(first, first + static_cast<std::ptrdiff_t>(target_length));
  }
  return blocks;
}

inline std::vector<std::vector<std::uint8_t>> sequence_partition(
    std::span<const BinarySequence> sequences, std::size_t target_length) {
  if (target_length < 100) throw ConfigError("sequence_length: must be >= 100");
  std::vector<std::vector<std::uint8_t>> blocks;
  for (const auto& s : sequences) {
    auto part = sequence_partition(std::span<const std::uint8_t>(s.bits), target_length);
    for (auto& b : part) blocks.push_back(std::move(b));
  }
  return blocks;
}

}  // namespace bellrm
