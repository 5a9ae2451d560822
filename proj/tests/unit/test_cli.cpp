#include "cli.hpp"

#include <bellrm/errors.hpp>
#include <bellrm/timetag_io.hpp>

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace bellrm;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bellrm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string config(const char* name) { return std::string(BELLRM_CONFIG_DIR) + "/" + name; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bellrm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& sub) const { return (dir_ / sub).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return path(name);
  }

  static std::string read(const std::string& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SimulateWritesTimetagsConfigAndManifest) {
  const auto r = run_cli({"simulate", "--config", config("quick_qm.json"), "--out", path("run"), "--csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"timetags.btag", "timetags.csv", "config.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir_ / "run" / cli::files::kLock));
  const auto manifest = nlohmann::json::parse(read(path("run/manifest.json")));
  EXPECT_EQ(manifest["sha256"]["timetags.btag"], cli::sha256_file(path("run/timetags.btag")));
  EXPECT_EQ(manifest["seed"], 11);
  // The effective config equals the manifest's echo and re-parses to itself.
  EXPECT_EQ(nlohmann::json::parse(read(path("run/config.json"))), manifest["config"]);
  const auto events = btag::read_file(path("run/timetags.btag"));
  std::ifstream csv(path("run/timetags.csv"));
  EXPECT_EQ(btag::read_csv(csv), events);
}

TEST_F(CliTest, SameConfigAndSeedGiveIdenticalDigests) {
  ASSERT_EQ(run_cli({"simulate", "--config", config("quick_qm.json"), "--out", path("a")}).code, 0);
  ASSERT_EQ(run_cli({"simulate", "--config", config("quick_qm.json"), "--out", path("b")}).code, 0);
  ASSERT_EQ(run_cli({"simulate", "--config", config("quick_qm.json"), "--out", path("c"), "--seed", "12"}).code, 0);
  const auto da = nlohmann::json::parse(read(path("a/manifest.json")))["sha256"];
  const auto db = nlohmann::json::parse(read(path("b/manifest.json")))["sha256"];
  const auto dc = nlohmann::json::parse(read(path("c/manifest.json")))["sha256"];
  EXPECT_EQ(da, db);
  EXPECT_NE(da["timetags.btag"], dc["timetags.btag"]);
}

TEST_F(CliTest, ZeroDurationGivesEmptyValidFileAndInconclusiveAnalysis) {
  const auto cfg = write("zero.json", R"({"run": {"run_duration_s": 0}})");
  ASSERT_EQ(run_cli({"simulate", "--config", cfg, "--out", path("run")}).code, 0);
  EXPECT_EQ(fs::file_size(path("run/timetags.btag")), 32u);
  EXPECT_TRUE(btag::read_file(path("run/timetags.btag")).empty());
  const auto r = run_cli({"analyze", "--in", path("run")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto verdict = nlohmann::json::parse(read(path("run/verdict.json")));
  EXPECT_EQ(verdict["label"], "INCONCLUSIVE");
  EXPECT_EQ(verdict["evidence"]["no_data"], true);
}

TEST_F(CliTest, AnalyzeAndReport) {
  ASSERT_EQ(run_cli({"simulate", "--config", config("quick_qm.json"), "--out", path("run")}).code, 0);
  const auto r = run_cli({"analyze", "--in", path("run")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"sequences.csv", "curve.csv", "chsh.csv", "s_vs_window.csv", "verdict.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir_ / "run" / "ergodicity.csv"));
  const auto verdict = nlohmann::json::parse(read(path("run/verdict.json")));
  ASSERT_EQ(verdict["slice_S"].size(), 2u);
  EXPECT_GT(verdict["slice_S"][0].get<double>(), 2.5);

  const auto rep = run_cli({"report", "--in", path("run")});
  ASSERT_EQ(rep.code, 0) << rep.err;
  const auto summary = read(path("run/summary.txt"));
  std::size_t verdict_lines = 0;
  std::istringstream lines(summary);
  for (std::string line; std::getline(lines, line);) verdict_lines += line.rfind("verdict:", 0) == 0;
  EXPECT_EQ(verdict_lines, 1u);
  EXPECT_TRUE(fs::exists(path("run/curves_combined.csv")));
}

TEST_F(CliTest, SliceRefinementIsConsistent) {
  ASSERT_EQ(run_cli({"simulate", "--config", config("quick_qm.json"), "--out", path("run")}).code, 0);
  const auto count_column = [&](int slices) {
    EXPECT_EQ(run_cli({"analyze", "--in", path("run"), "--slices", std::to_string(slices)}).code, 0);
    std::vector<std::uint64_t> n;
    std::istringstream csv(read(path("run/chsh.csv")));
    std::string line;
    std::getline(csv, line);
    while (std::getline(csv, line)) n.push_back(std::stoull(line.substr(line.rfind(',') + 1)));
    return n;
  };
  const auto two = count_column(2);
  const auto four = count_column(4);
  ASSERT_EQ(four.size(), 4u);
  EXPECT_EQ(four[0] + four[1], two[0]);
  EXPECT_EQ(four[2] + four[3], two[1]);
}

TEST_F(CliTest, ReportKeepsRunOrderAndListsMissingFiles) {
  ASSERT_EQ(run_cli({"simulate", "--config", config("quick_qm.json"), "--out", path("r1")}).code, 0);
  ASSERT_EQ(run_cli({"simulate", "--config", config("quick_qm.json"), "--out", path("r2"), "--seed", "5"}).code, 0);
  const auto missing = run_cli({"report", "--in", path("r1"), path("r2")});
  EXPECT_EQ(missing.code, cli::kDataError);
  EXPECT_NE(missing.err.find("verdict.json"), std::string::npos);
  EXPECT_NE(missing.err.find("r2"), std::string::npos);

  ASSERT_EQ(run_cli({"analyze", "--in", path("r1")}).code, 0);
  ASSERT_EQ(run_cli({"analyze", "--in", path("r2")}).code, 0);
  ASSERT_EQ(run_cli({"report", "--in", path("r2"), path("r1"), "--out", path("rep")}).code, 0);
  const auto summary = read(path("rep/summary.txt"));
  const auto p2 = summary.find("run 1: " + path("r2"));
  const auto p1 = summary.find("run 2: " + path("r1"));
  ASSERT_NE(p2, std::string::npos);
  ASSERT_NE(p1, std::string::npos);
  EXPECT_LT(p2, p1);
}

TEST_F(CliTest, ExitCodes) {
  const auto bad = write("bad.json", R"({"run": {"detection_prob_per_pulse": 0.9}})");
  auto r = run_cli({"simulate", "--config", bad, "--out", path("run")});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("detection_prob_per_pulse"), std::string::npos);

  ASSERT_EQ(run_cli({"simulate", "--config", config("quick_qm.json"), "--out", path("run")}).code, 0);
  fs::resize_file(path("run/timetags.btag"), 32 + 16 * 3 + 7);
  r = run_cli({"analyze", "--in", path("run")});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("offset 80"), std::string::npos) << r.err;

  r = run_cli({"analyze", "--in", path("nowhere")});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(run_cli({"frobnicate"}).code, 0);
}

TEST_F(CliTest, LockedOutputDirectoryIsRefused) {
  fs::create_directories(dir_ / "run");
  std::ofstream(dir_ / "run" / cli::files::kLock) << "";
  const auto r = run_cli({"simulate", "--config", config("quick_qm.json"), "--out", path("run")});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("locked"), std::string::npos);
}

TEST_F(CliTest, EnvironmentOverridesApply) {
  ::setenv("BELLRM_SEED", "99", 1);
  const auto r = run_cli({"simulate", "--config", config("quick_qm.json"), "--out", path("run")});
  ::unsetenv("BELLRM_SEED");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(read(path("run/manifest.json")))["seed"], 99);
}

TEST_F(CliTest, HiddenVariableRunsGetAnErgodicityReport) {
  const auto cfg = write("ne.json", R"({"run": {"run_duration_s": 0.2, "seed": 3},
    "model": {"kind": "NONERGODIC", "params": {"drift_period_s": 0.01}},
    "analysis": {"sequence_length": 1000}})");
  ASSERT_EQ(run_cli({"simulate", "--config", cfg, "--out", path("run")}).code, 0);
  ASSERT_EQ(run_cli({"analyze", "--in", path("run")}).code, 0);
  const auto csv = read(path("run/ergodicity.csv"));
  EXPECT_NE(csv.find("ensemble_avg"), std::string::npos);
}
