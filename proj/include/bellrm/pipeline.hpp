#pragma once

// Offline analysis of one run's detection events: coincidence matching,
// slicing, per-slice CHSH, randommeter curve and scenario verdict.

#include <bellrm/bell_stats.hpp>
#include <bellrm/config_json.hpp>
#include <bellrm/randommeter.hpp>
#include <bellrm/source.hpp>
#include <bellrm/timetag.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bellrm {

struct SliceChsh {
  int slice_index = 0;
  std::optional<ChshEstimate> estimate;  // empty when a CHSH pair has no data
  std::string missing_reason;
};

struct AnalysisResult {
  std::vector<CoincidenceRecord> records;
  std::vector<SliceChsh> chsh;
  std::vector<std::vector<RandomnessReport>> reports;  // per slice
  RandommeterCurve curve;
  ScenarioVerdict verdict;
  bool no_data = false;
};

// Sequences of one slice: each selected station's bit stream, cut into
// blocks of `sequence_length`, station A blocks first.
inline std::vector<std::vector<std::uint8_t>> slice_sequences(std::span<const CoincidenceRecord> records,
                                                              int slice_index,
                                                              std::span<const Station> stations,
                                                              std::size_t sequence_length) {
  std::vector<std::vector<std::uint8_t>> out;
  for (auto st : stations) {
    const BinarySequence seq = extract_sequence(records, slice_index, st);
    for (auto& block : sequence_partition(std::span<const std::uint8_t>(seq.bits), sequence_length)) {
      out.push_back(std::move(block));
    }
  }
  return out;
}

inline AnalysisResult analyze_events(std::span<const DetectionEvent> events_a,
                                     std::span<const DetectionEvent> events_b, const RunConfig& run,
                                     const AnalysisConfig& cfg) {
  cfg.validate();
  const PulseClock clock = pulse_geometry(run).clock();
  AnalysisResult res;
  res.records = match_coincidences(events_a, events_b, cfg.window_ns, clock);
  slice_records(res.records, cfg.slices, clock.pulse_duration_ns);

  res.reports.resize(static_cast<std::size_t>(cfg.slices));
  std::uint64_t id = 0;
  for (int s = 0; s < cfg.slices; ++s) {
    SliceChsh sc;
    sc.slice_index = s;
    try {
      auto est = estimate_chsh(res.records, run.settings_menu, cfg.chsh_angles, s);
      sc.estimate = est;
    } catch (const DataError& e) {
      sc.missing_reason = e.what();
    }
    res.chsh.push_back(std::move(sc));
    for (const auto& bits : slice_sequences(res.records, s, cfg.stations, cfg.sequence_length)) {
      res.reports[static_cast<std::size_t>(s)].push_back(evaluate_sequence(bits, cfg.battery, id++, s));
    }
  }
  res.curve = curve_from_reports(res.reports, cfg.battery);

  if (res.records.empty()) {
    res.no_data = true;
    res.verdict.reason = "no data: zero coincidences";
    for (int s = 0; s < cfg.slices; ++s) {
      res.verdict.slice_S.push_back(0.0);
      res.verdict.slice_S_err.push_back(0.0);
    }
    return res;
  }
  std::vector<ChshEstimate> per_slice;
  for (const auto& sc : res.chsh) {
    if (!sc.estimate) {
      // A slice without complete CHSH data cannot show a violation.
      ChshEstimate empty;
      empty.slice_index = sc.slice_index;
      per_slice.push_back(empty);
    } else {
      per_slice.push_back(*sc.estimate);
    }
  }
  res.verdict = classify_scenario(res.curve, per_slice, cfg.classifier);
  for (const auto& sc : res.chsh) {
    if (!sc.estimate) {
      res.verdict.reason = "slice " + std::to_string(sc.slice_index) + ": " + sc.missing_reason;
      break;
    }
  }
  return res;
}

}  // namespace bellrm
