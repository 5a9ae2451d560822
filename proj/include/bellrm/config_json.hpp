#pragma once

// JSON configuration: run parameters, outcome model and analysis settings.
//
//   {
//     "run":      { station_separation_m, rep_rate_hz, pulse_duration_s (null: 2L/c),
//                   run_duration_s, detection_prob_per_pulse,
//                   coincidence_prob_per_pulse, dark_rate_hz, seed,
//                   settings_menu: [ {alpha_rad, beta_rad} | {alpha_deg, beta_deg}, ... ] },
//     "model":    { kind, params: { name: number, ... } },
//     "analysis": { slices, window_ns, sequence_length, stations: ["A", "B"],
//                   alpha_sig, block_size, serial_m, contrast_alpha,
//                   min_violation_sigma, window_scan_ns: [...],
//                   chsh_angles: {a_rad, a_prime_rad, b_rad, b_prime_rad} }
//   }
//
// Every section and field is optional; missing values take the defaults
// below. Unknown fields are rejected. Serialization always writes every
// field with angles in radians.

#include <bellrm/errors.hpp>
#include <bellrm/model.hpp>
#include <bellrm/randommeter.hpp>
#include <bellrm/source.hpp>

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <iterator>
#include <string>
#include <vector>

namespace bellrm {

struct AnalysisConfig {
  int slices = 2;
  std::uint64_t window_ns = kDefaultWindowNs;
  std::size_t sequence_length = 10'000;
  std::vector<Station> stations = {Station::A, Station::B};
  BatteryConfig battery;
  ClassifierConfig classifier;
  std::vector<std::uint64_t> window_scan_ns = {1, 2, 4, 8, 12, 16};
  ChshAngles chsh_angles;

  void validate() const {
    if (slices < 2) throw ConfigError("analysis.slices: must be >= 2");
    if (window_ns == 0) throw ConfigError("analysis.window_ns: must be > 0");
    if (sequence_length < 100) throw ConfigError("analysis.sequence_length: must be >= 100");
    if (stations.empty()) throw ConfigError("analysis.stations: must not be empty");
    if (!(battery.alpha_sig > 0.0 && battery.alpha_sig < 1.0)) {
      throw ConfigError("analysis.alpha_sig: must be in (0, 1)");
    }
    if (battery.block_size < 2) throw ConfigError("analysis.block_size: must be >= 2");
    if (battery.serial_m < 2) throw ConfigError("analysis.serial_m: must be >= 2");
    if (!(classifier.contrast_alpha > 0.0 && classifier.contrast_alpha < 1.0)) {
      throw ConfigError("analysis.contrast_alpha: must be in (0, 1)");
    }
    for (auto w : window_scan_ns) {
      if (w == 0) throw ConfigError("analysis.window_scan_ns: windows must be > 0");
    }
  }
};

struct ExperimentConfig {
  RunConfig run;
  OutcomeModel model;
  AnalysisConfig analysis;
};

namespace config_detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(where + "." + it.key() + ": unknown field");
  }
}

inline double get_number(const json& j, const std::string& where, const char* key, double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return it->get<double>();
}

inline std::uint64_t get_unsigned(const json& j, const std::string& where, const char* key,
                                  std::uint64_t fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
    throw ConfigError(where + "." + key + ": expected a non-negative integer");
  }
  return it->get<std::uint64_t>();
}

inline std::int64_t get_integer(const json& j, const std::string& where, const char* key,
                                std::int64_t fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return it->get<std::int64_t>();
}

inline PolarizerAngle get_angle(const json& j, const std::string& where, const std::string& stem,
                                PolarizerAngle fallback) {
  const auto rad = j.find(stem + "_rad");
  const auto deg = j.find(stem + "_deg");
  if (rad != j.end() && deg != j.end()) {
    throw ConfigError(where + "." + stem + ": give either _rad or _deg, not both");
  }
  if (rad != j.end()) return PolarizerAngle(get_number(j, where, (stem + "_rad").c_str(), 0.0));
  if (deg != j.end()) return PolarizerAngle::degrees(get_number(j, where, (stem + "_deg").c_str(), 0.0));
  return fallback;
}

inline RunConfig parse_run(const json& j) {
  const std::string w = "run";
  check_keys(j, w,
             {"station_separation_m", "rep_rate_hz", "pulse_duration_s", "run_duration_s",
              "detection_prob_per_pulse", "coincidence_prob_per_pulse", "dark_rate_hz", "seed",
              "settings_menu"});
  RunConfig c;
  c.station_separation_m = get_number(j, w, "station_separation_m", c.station_separation_m);
  c.rep_rate_hz = get_number(j, w, "rep_rate_hz", c.rep_rate_hz);
  if (auto it = j.find("pulse_duration_s"); it != j.end() && !it->is_null()) {
    c.pulse_duration_s = get_number(j, w, "pulse_duration_s", 0.0);
  }
  c.run_duration_s = get_number(j, w, "run_duration_s", c.run_duration_s);
  c.detection_prob_per_pulse = get_number(j, w, "detection_prob_per_pulse", c.detection_prob_per_pulse);
  c.coincidence_prob_per_pulse =
      get_number(j, w, "coincidence_prob_per_pulse", c.coincidence_prob_per_pulse);
  c.dark_rate_hz = get_number(j, w, "dark_rate_hz", c.dark_rate_hz);
  c.seed = get_unsigned(j, w, "seed", c.seed);
  if (auto it = j.find("settings_menu"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("run.settings_menu: expected an array");
    c.settings_menu.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& e = (*it)[i];
      const std::string ew = "run.settings_menu[" + std::to_string(i) + "]";
      check_keys(e, ew, {"alpha_rad", "alpha_deg", "beta_rad", "beta_deg"});
      if (!e.contains("alpha_rad") && !e.contains("alpha_deg")) throw ConfigError(ew + ".alpha: missing");
      if (!e.contains("beta_rad") && !e.contains("beta_deg")) throw ConfigError(ew + ".beta: missing");
      c.settings_menu.push_back({get_angle(e, ew, "alpha", {}), get_angle(e, ew, "beta", {})});
    }
  }
  return c;
}

inline OutcomeModel parse_model(const json& j) {
  check_keys(j, "model", {"kind", "params"});
  OutcomeModel m;
  if (auto it = j.find("kind"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("model.kind: expected a string");
    m.kind = parse_model_kind(it->get<std::string>());
  }
  if (auto it = j.find("params"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("model.params: expected an object");
    for (auto p = it->begin(); p != it->end(); ++p) {
      if (p.key() != param::kDriftPeriod && p.key() != param::kLambdaDelta) {
        throw ConfigError("model.params." + p.key() + ": unknown parameter");
      }
      if (!p->is_number()) throw ConfigError("model.params." + p.key() + ": expected a number");
      m.params[p.key()] = p->get<double>();
    }
  }
  if (m.has(param::kDriftPeriod) && !(m.get(param::kDriftPeriod, 0.0) > 0.0)) {
    throw ConfigError("model.params.drift_period_s: must be > 0");
  }
  return m;
}

inline AnalysisConfig parse_analysis(const json& j) {
  const std::string w = "analysis";
  check_keys(j, w,
             {"slices", "window_ns", "sequence_length", "stations", "alpha_sig", "block_size", "serial_m",
              "contrast_alpha", "min_violation_sigma", "min_sequences", "window_scan_ns", "chsh_angles"});
  AnalysisConfig a;
  a.slices = static_cast<int>(get_integer(j, w, "slices", a.slices));
  a.window_ns = get_unsigned(j, w, "window_ns", a.window_ns);
  a.sequence_length = get_unsigned(j, w, "sequence_length", a.sequence_length);
  if (auto it = j.find("stations"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("analysis.stations: expected an array");
    a.stations.clear();
    for (const auto& s : *it) {
      if (s == "A") {
        a.stations.push_back(Station::A);
      } else if (s == "B") {
        a.stations.push_back(Station::B);
      } else {
        throw ConfigError("analysis.stations: entries must be \"A\" or \"B\"");
      }
    }
  }
  a.battery.alpha_sig = get_number(j, w, "alpha_sig", a.battery.alpha_sig);
  a.battery.block_size = get_unsigned(j, w, "block_size", a.battery.block_size);
  a.battery.serial_m = static_cast<int>(get_integer(j, w, "serial_m", a.battery.serial_m));
  a.classifier.contrast_alpha = get_number(j, w, "contrast_alpha", a.classifier.contrast_alpha);
  a.classifier.min_violation_sigma = get_number(j, w, "min_violation_sigma", a.classifier.min_violation_sigma);
  a.classifier.min_sequences = get_unsigned(j, w, "min_sequences", a.classifier.min_sequences);
  if (auto it = j.find("window_scan_ns"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("analysis.window_scan_ns: expected an array");
    a.window_scan_ns.clear();
    for (const auto& v : *it) {
      if (!v.is_number_unsigned()) throw ConfigError("analysis.window_scan_ns: expected positive integers");
      a.window_scan_ns.push_back(v.get<std::uint64_t>());
    }
  }
  if (auto it = j.find("chsh_angles"); it != j.end()) {
    const std::string cw = "analysis.chsh_angles";
    check_keys(*it, cw, {"a_rad", "a_deg", "a_prime_rad", "a_prime_deg", "b_rad", "b_deg", "b_prime_rad",
                         "b_prime_deg"});
    a.chsh_angles.a = get_angle(*it, cw, "a", a.chsh_angles.a);
    a.chsh_angles.a_prime = get_angle(*it, cw, "a_prime", a.chsh_angles.a_prime);
    a.chsh_angles.b = get_angle(*it, cw, "b", a.chsh_angles.b);
    a.chsh_angles.b_prime = get_angle(*it, cw, "b_prime", a.chsh_angles.b_prime);
  }
  a.validate();
  return a;
}

}  // namespace config_detail

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json menu = nlohmann::json::array();
  for (const auto& s : c.settings_menu) {
    menu.push_back({{"alpha_rad", s.alpha.radians()}, {"beta_rad", s.beta.radians()}});
  }
  return {{"station_separation_m", c.station_separation_m},
          {"rep_rate_hz", c.rep_rate_hz},
          {"pulse_duration_s", c.pulse_duration_s ? nlohmann::json(*c.pulse_duration_s) : nlohmann::json()},
          {"run_duration_s", c.run_duration_s},
          {"detection_prob_per_pulse", c.detection_prob_per_pulse},
          {"coincidence_prob_per_pulse", c.coincidence_prob_per_pulse},
          {"dark_rate_hz", c.dark_rate_hz},
          {"seed", c.seed},
          {"settings_menu", menu}};
}

inline nlohmann::json to_json(const OutcomeModel& m) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : m.params) params[k] = v;
  return {{"kind", std::string(to_string(m.kind))}, {"params", params}};
}

inline nlohmann::json to_json(const AnalysisConfig& a) {
  nlohmann::json stations = nlohmann::json::array();
  for (auto s : a.stations) stations.push_back(std::string(1, station_letter(s)));
  return {{"slices", a.slices},
          {"window_ns", a.window_ns},
          {"sequence_length", a.sequence_length},
          {"stations", stations},
          {"alpha_sig", a.battery.alpha_sig},
          {"block_size", a.battery.block_size},
          {"serial_m", a.battery.serial_m},
          {"contrast_alpha", a.classifier.contrast_alpha},
          {"min_violation_sigma", a.classifier.min_violation_sigma},
          {"min_sequences", a.classifier.min_sequences},
          {"window_scan_ns", a.window_scan_ns},
          {"chsh_angles",
           {{"a_rad", a.chsh_angles.a.radians()},
            {"a_prime_rad", a.chsh_angles.a_prime.radians()},
            {"b_rad", a.chsh_angles.b.radians()},
            {"b_prime_rad", a.chsh_angles.b_prime.radians()}}}};
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"run", to_json(c.run)}, {"model", to_json(c.model)}, {"analysis", to_json(c.analysis)}};
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  config_detail::check_keys(j, "config", {"run", "model", "analysis"});
  ExperimentConfig c;
  if (auto it = j.find("run"); it != j.end()) c.run = config_detail::parse_run(*it);
  if (auto it = j.find("model"); it != j.end()) c.model = config_detail::parse_model(*it);
  if (auto it = j.find("analysis"); it != j.end()) c.analysis = config_detail::parse_analysis(*it);
  validate(c.run);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

}  // namespace bellrm
