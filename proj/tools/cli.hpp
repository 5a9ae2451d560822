#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace bellrm::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kConfigError = 2, kDataError = 3 };

// Output file names inside a run directory.
namespace files {
inline constexpr const char* kTimetags = "timetags.btag";
inline constexpr const char* kTimetagsCsv = "timetags.csv";
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kLock = ".bellrm.lock";
inline constexpr const char* kSequences = "sequences.csv";
inline constexpr const char* kCurve = "curve.csv";
inline constexpr const char* kChsh = "chsh.csv";
inline constexpr const char* kWindowScan = "s_vs_window.csv";
inline constexpr const char* kErgodicity = "ergodicity.csv";
inline constexpr const char* kVerdict = "verdict.json";
inline constexpr const char* kAnalysis = "analysis.json";
inline constexpr const char* kSummary = "summary.txt";
inline constexpr const char* kCombined = "curves_combined.csv";
}  // namespace files

struct SimulateOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool csv = false;
};

struct AnalyzeOptions {
  std::string in_dir;
  std::optional<int> slices;
  std::optional<std::uint64_t> window_ns;
  std::optional<double> alpha_sig;
};

struct ReportOptions {
  std::vector<std::string> in_dirs;
  std::optional<std::string> out_dir;  // default: first input directory
};

// Commands throw ConfigError / DataError on failure.
void cmd_simulate(const SimulateOptions& opt, std::ostream& log);
void cmd_analyze(const AnalyzeOptions& opt, std::ostream& log);
void cmd_report(const ReportOptions& opt, std::ostream& log);

std::string sha256_file(const std::string& path);

// Full command line, including error-to-exit-code mapping.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace bellrm::cli
