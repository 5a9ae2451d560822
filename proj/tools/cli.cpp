#include "cli.hpp"

#include <bellrm/config_json.hpp>
#include <bellrm/errors.hpp>
#include <bellrm/pipeline.hpp>
#include <bellrm/source.hpp>
#include <bellrm/timetag_io.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace bellrm::cli {

namespace {

// Exclusive lock on an output directory, held for the command's lifetime.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / files::kLock) {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw DataError("output directory " + dir.string() + " is locked by another invocation (" +
                      path_.string() + ")");
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;
  ~DirLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
  int fd_ = -1;
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + p.string());
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::parse_error& e) {
    throw DataError(p.string() + ": invalid JSON: " + e.what());
  }
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

}  // namespace

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw DataError("sha256 init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{md[i]};
  return hex.str();
}

void cmd_simulate(const SimulateOptions& opt, std::ostream& log) {
  ExperimentConfig cfg = load_config(opt.config_path);
  if (opt.seed) cfg.run.seed = *opt.seed;
  for (const auto& w : validate(cfg.run)) log << "warning: " << w << '\n';
  cfg.model = with_run_defaults(cfg.model, cfg.run);

  const fs::path dir(opt.out_dir);
  ensure_dir(dir);
  DirLock lock(dir);

  const fs::path btag_path = dir / files::kTimetags;
  btag::Writer writer(btag_path.string());
  std::ofstream csv;
  if (opt.csv) {
    csv.open(dir / files::kTimetagsCsv, std::ios::trunc);
    csv << btag::kCsvHeader << '\n';
  }
  const RunSummary summary = generate_run(cfg.run, cfg.model, [&](const DetectionEvent& e) {
    writer.write(e);
    if (opt.csv) {
      csv << e.timestamp_ns << ',' << e.pulse_index << ',' << static_cast<int>(e.station) << ','
          << static_cast<int>(e.port_bit) << ',' << e.setting_index << '\n';
    }
  });
  writer.close();
  if (opt.csv) {
    csv.close();
    if (!csv) throw DataError("cannot write " + (dir / files::kTimetagsCsv).string());
  }

  const json effective = to_json(cfg);
  write_text(dir / files::kConfig, effective.dump(2) + "\n");

  json artifacts = {{"timetags", files::kTimetags}, {"config", files::kConfig}};
  if (opt.csv) artifacts["timetags_csv"] = files::kTimetagsCsv;
  json digests = json::object();
  for (auto it = artifacts.begin(); it != artifacts.end(); ++it) {
    digests[it.value().get<std::string>()] = sha256_file((dir / it.value().get<std::string>()).string());
  }
  const json manifest = {
      {"tool", "bellrm"},
      {"tool_version", kToolVersion},
      {"created_utc", utc_now()},
      {"seed", cfg.run.seed},
      {"config", effective},
      {"artifacts", artifacts},
      {"sha256", digests},
      {"summary",
       {{"pulses", summary.pulses},
        {"pairs", summary.pairs},
        {"singles", summary.singles},
        {"darks", summary.darks},
        {"events", summary.events},
        {"run_end_ns", summary.run_end_ns}}}};
  write_text(dir / files::kManifest, manifest.dump(2) + "\n");
  log << "simulated " << summary.pulses << " pulses, " << summary.pairs << " pairs, "
      << summary.events[0] + summary.events[1] << " events -> " << btag_path.string() << '\n';
}

namespace {

void write_sequences_csv(const fs::path& p, const AnalysisResult& res) {
  std::ofstream out(p, std::ios::trunc);
  out << "sequence_id,slice,monobit_p,runs_p,block_frequency_p,serial_p,cusum_p,rejected,compression_ratio\n";
  out << std::setprecision(10);
  for (const auto& slice : res.reports) {
    for (const auto& r : slice) {
      out << r.sequence_id << ',' << r.slice_index;
      for (const auto& t : r.results) out << ',' << t.p_value;
      out << ',' << (r.overall_rejected ? 1 : 0) << ',' << r.compression_ratio << '\n';
    }
  }
  if (!out) throw DataError("cannot write " + p.string());
}

void write_curve_csv(const fs::path& p, const RandommeterCurve& curve) {
  std::ofstream out(p, std::ios::trunc);
  out << "slice,R,ci_low,ci_high,mean_compression_ratio,n,rejected,randomness_level,sufficient\n";
  out << std::setprecision(10);
  for (const auto& s : curve.slices) {
    out << s.slice_index << ',' << s.R << ',' << s.ci.low << ',' << s.ci.high << ','
        << s.mean_compression_ratio << ',' << s.count << ',' << s.rejected << ',' << s.randomness_level << ','
        << (s.sufficient ? 1 : 0) << '\n';
  }
  if (!out) throw DataError("cannot write " + p.string());
}

void write_chsh_csv(const fs::path& p, const AnalysisResult& res) {
  std::ofstream out(p, std::ios::trunc);
  out << "slice,S,std_err,E_ab,E_abp,E_apb,E_apbp,n\n";
  out << std::setprecision(10);
  for (const auto& sc : res.chsh) {
    out << sc.slice_index;
    if (!sc.estimate) {
      out << ",,,,,,,0\n";
      continue;
    }
    const auto& e = *sc.estimate;
    std::uint64_t n = 0;
    out << ',' << e.S << ',' << e.std_err;
    for (const auto& c : e.correlations) {
      out << ',' << c.E;
      n += c.counts.total();
    }
    out << ',' << n << '\n';
  }
  if (!out) throw DataError("cannot write " + p.string());
}

void write_window_scan_csv(const fs::path& p, const std::optional<WindowCurve>& curve) {
  std::ofstream out(p, std::ios::trunc);
  out << "window_ns,coincidences,S,std_err,S_predicted,true_fraction\n";
  out << std::setprecision(10);
  if (curve) {
    for (const auto& pt : curve->points) {
      out << pt.window_ns << ',' << pt.coincidences << ',' << pt.S << ',' << pt.std_err << ','
          << pt.S_predicted << ',' << pt.true_fraction << '\n';
    }
  }
  if (!out) throw DataError("cannot write " + p.string());
}

// Ensemble vs time average of the configured hidden-variable model at the
// first menu angle: one window spanning the drift period (or the run) and
// one covering 1% of it.
void write_ergodicity_csv(const fs::path& p, const ExperimentConfig& cfg) {
  const double run_s = cfg.run.run_duration_s;
  const double period = 1.0 / cfg.run.rep_rate_hz;
  double span = cfg.model.kind == ModelKind::Nonergodic ? drift_period_s(cfg.model) : std::min(run_s, 0.1);
  if (!(span > 0.0)) span = 0.1;
  const std::vector<TimeWindow> windows = {{0.0, span}, {0.0, span / 100.0}};
  const auto reports = ergodicity_gap(cfg.model, cfg.run.settings_menu.front().alpha, windows, period,
                                      cfg.run.seed);
  std::ofstream out(p, std::ios::trunc);
  out << "alpha_rad,t_start_s,duration_s,ensemble_avg,time_avg,gap,combined_std_err,threshold,n_time,ergodic\n";
  out << std::setprecision(10);
  for (const auto& r : reports) {
    out << r.alpha.radians() << ',' << r.window.t_start_s << ',' << r.window.duration_s << ',' << r.ensemble_avg
        << ',' << r.time_avg << ',' << r.gap << ',' << r.combined_std_err << ',' << r.threshold << ','
        << r.n_time << ',' << (r.ergodic() ? 1 : 0) << '\n';
  }
  if (!out) throw DataError("cannot write " + p.string());
}

}  // namespace

void cmd_analyze(const AnalyzeOptions& opt, std::ostream& log) {
  const fs::path dir(opt.in_dir);
  std::vector<std::string> missing;
  for (const char* f : {files::kTimetags, files::kConfig}) {
    if (!fs::exists(dir / f)) missing.push_back((dir / f).string());
  }
  if (!missing.empty()) {
    std::string msg = "missing input files:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  ExperimentConfig cfg = parse_config(read_json(dir / files::kConfig));
  if (opt.slices) cfg.analysis.slices = *opt.slices;
  if (opt.window_ns) cfg.analysis.window_ns = *opt.window_ns;
  if (opt.alpha_sig) cfg.analysis.battery.alpha_sig = *opt.alpha_sig;
  cfg.analysis.validate();

  DirLock lock(dir);
  const auto events = btag::read_file((dir / files::kTimetags).string());
  const auto streams = btag::split_stations(events);
  const AnalysisResult res = analyze_events(streams[0], streams[1], cfg.run, cfg.analysis);

  std::optional<WindowCurve> scan;
  if (!res.no_data && !cfg.analysis.window_scan_ns.empty()) {
    try {
      scan = s_vs_window(streams[0], streams[1], cfg.analysis.window_scan_ns, cfg.run.settings_menu,
                         cfg.analysis.chsh_angles, pulse_geometry(cfg.run).clock(), pulse_count(cfg.run));
    } catch (const DataError& e) {
      log << "warning: window scan skipped: " << e.what() << '\n';
    }
  }

  write_sequences_csv(dir / files::kSequences, res);
  write_curve_csv(dir / files::kCurve, res.curve);
  write_chsh_csv(dir / files::kChsh, res);
  write_window_scan_csv(dir / files::kWindowScan, scan);
  if (is_hidden_variable(cfg.model.kind)) write_ergodicity_csv(dir / files::kErgodicity, cfg);
  write_text(dir / files::kAnalysis, to_json(cfg.analysis).dump(2) + "\n");

  const auto& v = res.verdict;
  json evidence = {{"contrast_z", v.contrast_z},
                   {"p_value", v.p_value},
                   {"R_first_half", v.R_first},
                   {"R_second_half", v.R_second},
                   {"n_first_half", v.n_first},
                   {"n_second_half", v.n_second},
                   {"reason", v.reason},
                   {"no_data", res.no_data}};
  const json verdict = {{"label", std::string(to_string(v.label))},
                        {"evidence", evidence},
                        {"slice_S", v.slice_S},
                        {"slice_S_err", v.slice_S_err},
                        {"coincidences", res.records.size()}};
  write_text(dir / files::kVerdict, verdict.dump(2) + "\n");
  log << "verdict: " << to_string(v.label) << " (" << v.reason << ")\n";
}

void cmd_report(const ReportOptions& opt, std::ostream& log) {
  if (opt.in_dirs.empty()) throw ConfigError("report: at least one --in directory is required");
  std::vector<std::string> missing;
  for (const auto& d : opt.in_dirs) {
    for (const char* f : {files::kManifest, files::kVerdict, files::kCurve, files::kChsh}) {
      if (!fs::exists(fs::path(d) / f)) missing.push_back((fs::path(d) / f).string());
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing analysis outputs:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }

  std::ostringstream summary;
  std::ostringstream combined;
  combined << "run,dir,slice,R,ci_low,ci_high,mean_compression_ratio,n,S,S_err\n";
  for (std::size_t i = 0; i < opt.in_dirs.size(); ++i) {
    const fs::path dir(opt.in_dirs[i]);
    const json manifest = read_json(dir / files::kManifest);
    const json verdict = read_json(dir / files::kVerdict);
    const std::string model = manifest.at("config").at("model").at("kind").get<std::string>();

    std::vector<std::vector<std::string>> curve_rows;
    {
      std::istringstream curve(read_text(dir / files::kCurve));
      std::string line;
      std::getline(curve, line);
      while (std::getline(curve, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cols.push_back(c);
        curve_rows.push_back(cols);
      }
    }
    const auto& S = verdict.at("slice_S");
    const auto& S_err = verdict.at("slice_S_err");

    summary << "== run " << i + 1 << ": " << dir.string() << " ==\n";
    summary << "model: " << model << "  seed: " << manifest.at("seed").get<std::uint64_t>()
            << "  coincidences: " << verdict.at("coincidences").get<std::uint64_t>() << '\n';
    for (std::size_t s = 0; s < curve_rows.size(); ++s) {
      const auto& row = curve_rows[s];
      const double s_val = s < S.size() ? S[s].get<double>() : 0.0;
      const double s_err = s < S_err.size() ? S_err[s].get<double>() : 0.0;
      summary << "slice " << row[0] << ": S = " << fmt(s_val, 5) << " +- " << fmt(s_err, 2) << "  R = "
              << fmt(std::stod(row[1]), 4) << " [" << fmt(std::stod(row[2]), 3) << ", "
              << fmt(std::stod(row[3]), 3) << "]  n = " << row[5]
              << "  compression = " << fmt(std::stod(row[4]), 4) << '\n';
      combined << i + 1 << ',' << dir.string() << ',' << row[0] << ',' << row[1] << ',' << row[2] << ','
               << row[3] << ',' << row[4] << ',' << row[5] << ',' << std::setprecision(10) << s_val << ','
               << s_err << '\n';
    }
    const auto& ev = verdict.at("evidence");
    summary << "verdict: " << verdict.at("label").get<std::string>()
            << " (contrast z = " << fmt(ev.at("contrast_z").get<double>(), 4)
            << ", p = " << fmt(ev.at("p_value").get<double>(), 4) << "; "
            << ev.at("reason").get<std::string>() << ")\n\n";
  }

  const fs::path out_dir = opt.out_dir ? fs::path(*opt.out_dir) : fs::path(opt.in_dirs.front());
  ensure_dir(out_dir);
  write_text(out_dir / files::kSummary, summary.str());
  write_text(out_dir / files::kCombined, combined.str());
  log << "report for " << opt.in_dirs.size() << " run(s) -> " << (out_dir / files::kSummary).string() << '\n';
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pulsed Bell-test simulator and randommeter"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate a run and write time tags");
  simulate->add_option("--config", sim.config_path, "Configuration JSON")->required()->envname("BELLRM_CONFIG");
  simulate->add_option("--out", sim.out_dir, "Output directory")->required()->envname("BELLRM_OUT");
  simulate->add_option("--seed", sim.seed, "Master seed (overrides the config)")->envname("BELLRM_SEED");
  simulate->add_flag("--csv", sim.csv, "Also write a CSV mirror of the time tags")->envname("BELLRM_CSV");

  AnalyzeOptions ana;
  auto* analyze = app.add_subcommand("analyze", "Analyze a simulated run directory");
  analyze->add_option("--in", ana.in_dir, "Run directory")->required()->envname("BELLRM_IN");
  analyze->add_option("--slices", ana.slices, "Number of pulse slices")->envname("BELLRM_SLICES");
  analyze->add_option("--window-ns", ana.window_ns, "Coincidence window, ns")->envname("BELLRM_WINDOW_NS");
  analyze->add_option("--alpha-sig", ana.alpha_sig, "Significance level of each test")
      ->envname("BELLRM_ALPHA_SIG");

  ReportOptions rep;
  std::string rep_out;
  auto* report = app.add_subcommand("report", "Summarize analyzed runs");
  report->add_option("--in", rep.in_dirs, "Analyzed run directories, in report order")
      ->required()
      ->envname("BELLRM_IN");
  report->add_option("--out", rep_out, "Where to write the summary (default: first --in)")
      ->envname("BELLRM_REPORT_OUT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) cmd_simulate(sim, out);
    if (*analyze) cmd_analyze(ana, out);
    if (*report) {
      if (!rep_out.empty()) rep.out_dir = rep_out;
      cmd_report(rep, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

}  // namespace bellrm::cli
