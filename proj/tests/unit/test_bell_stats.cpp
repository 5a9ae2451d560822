#include <bellrm/bell_stats.hpp>

#include "oracles/accidentals.hpp"
#include "oracles/hv_grid.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bellrm;

TEST(Correlation, FromCounts) {
  PairCounts c;
  c.n = {{{40, 10}, {10, 40}}};
  auto e = correlation_from_counts(c);
  EXPECT_DOUBLE_EQ(e.E, 0.6);
  EXPECT_DOUBLE_EQ(e.std_err, std::sqrt((1 - 0.36) / 100));
  EXPECT_THROW(correlation_from_counts(PairCounts{}), NoDataError);
}

TEST(Chsh, ExpectedQmCountsGiveTsirelsonBound) {
  ChshAngles ang;
  const auto menu = chsh_menu(ang);
  const auto idx = chsh_setting_indices(menu, ang);
  std::array<PairCounts, 4> counts{};
  const double n = 1e8;
  for (std::size_t k = 0; k < 4; ++k) {
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        counts[k].n[a][b] = static_cast<std::uint64_t>(
            std::llround(n * qm_joint_probability(menu[k].alpha, menu[k].beta, a, b)));
  }
  const auto est = chsh_from_counts(counts, menu, idx, -1);
  EXPECT_NEAR(est.S, 2 * std::sqrt(2.0), 1e-6);
}

TEST(Chsh, GridIntegratedLocalModelSitsOnTheBound) {
  ChshAngles ang;
  const auto p = ang.pairs();
  double e[4];
  for (int k = 0; k < 4; ++k) e[k] = oracle::hv_correlation(p[k].alpha.radians(), p[k].beta.radians());
  EXPECT_NEAR(std::abs(e[0] - e[1] + e[2] + e[3]), 2.0, 1e-4);
}

TEST(Chsh, MissingSettingIsReported) {
  std::vector<SettingsPair> menu = {{PolarizerAngle(0), PolarizerAngle(kPi / 8)}};
  EXPECT_THROW(chsh_setting_indices(menu, ChshAngles{}), IncompleteSettingsError);
  const auto full = chsh_menu();
  std::vector<CoincidenceRecord> recs(3);
  EXPECT_THROW(estimate_chsh(recs, full, ChshAngles{}), IncompleteSettingsError);
}

TEST(Chsh, PartitionedCountsReduceToTheSameEstimate) {
  RunConfig c;
  c.run_duration_s = 0.1;
  auto run = generate_run(c, OutcomeModel{});
  const auto clock = pulse_geometry(c).clock();
  auto recs = match_coincidences(run.events_a, run.events_b, 2, clock);
  const auto whole = estimate_chsh(recs, c.settings_menu, ChshAngles{});
  std::reverse(recs.begin(), recs.end());
  const auto reversed = estimate_chsh(recs, c.settings_menu, ChshAngles{});
  EXPECT_EQ(whole.S, reversed.S);
  EXPECT_GT(whole.S, 2.5);
}

TEST(Chsh, LocalModelStaysAtTheBound) {
  RunConfig c;
  c.run_duration_s = 1.0;
  c.dark_rate_hz = 0;
  c.detection_prob_per_pulse = c.coincidence_prob_per_pulse;
  auto run = generate_run(c, OutcomeModel{ModelKind::LocalErgodic, {}});
  auto recs = match_coincidences(run.events_a, run.events_b, 2, pulse_geometry(c).clock());
  const auto est = estimate_chsh(recs, c.settings_menu, ChshAngles{});
  EXPECT_NEAR(est.S, 2.0, 4 * est.std_err + 1e-9);
}

TEST(Accidentals, DarkDarkTermMatchesBruteForceCount) {
  // Dark-only streams: greedy matches, all-pairs count (oracle) and the
  // predicted r_A r_B (2W + 1) T agree.
  RunConfig c;
  c.run_duration_s = 0.01;
  c.detection_prob_per_pulse = 0;
  c.coincidence_prob_per_pulse = 0;
  c.dark_rate_hz = 2e6;
  const std::uint64_t W = 3;
  double predicted = 0, brute = 0, greedy = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    c.seed = seed;
    auto run = generate_run(c, OutcomeModel{});
    const auto clock = pulse_geometry(c).clock();
    const auto rates = measure_background(run.events_a, run.events_b, clock, pulse_count(c));
    predicted += predict_window(rates, 0.0, W).accidentals;
    brute += static_cast<double>(oracle::all_pairs_within(run.events_a, run.events_b, W));
    greedy += static_cast<double>(match_pairs(run.events_a, run.events_b, W).size());
  }
  EXPECT_NEAR(brute, predicted, 4 * std::sqrt(predicted));
  EXPECT_NEAR(greedy, predicted, 4 * std::sqrt(predicted));
}

TEST(WindowScan, MeasuredDecayTracksPrediction) {
  RunConfig c;
  c.run_duration_s = 1.0;
  c.detection_prob_per_pulse = 0.02;
  c.dark_rate_hz = 5e5;
  auto run = generate_run(c, OutcomeModel{});
  const auto curve = s_vs_window(run.events_a, run.events_b, {1, 2, 4, 8, 16}, c.settings_menu,
                                 ChshAngles{}, pulse_geometry(c).clock(), pulse_count(c));
  ASSERT_EQ(curve.points.size(), 5u);
  EXPECT_GT(curve.points.front().S, curve.points.back().S);
  for (const auto& pt : curve.points) {
    EXPECT_NEAR(pt.S, pt.S_predicted, 3 * pt.std_err) << "W = " << pt.window_ns;
  }
  EXPECT_THROW(s_vs_window(run.events_a, run.events_b, {}, c.settings_menu, ChshAngles{},
                           pulse_geometry(c).clock(), pulse_count(c)),
               ConfigError);
}

TEST(Ergodicity, EnsembleAverageMatchesGridIntegral) {
  OutcomeModel m{ModelKind::LocalErgodic, {}};
  const auto est = ensemble_average(m, PolarizerAngle(0.3), 200'000, 9);
  EXPECT_NEAR(est.mean, oracle::hv_transmitted(0.3), 4 * est.std_err);
  EXPECT_THROW(ensemble_average(OutcomeModel{}, PolarizerAngle(0), 10, 1), ConfigError);
}

TEST(Ergodicity, ErgodicModelHasNoGap) {
  OutcomeModel m{ModelKind::LocalErgodic, {}};
  const std::vector<TimeWindow> windows = {{0.0, 0.01}, {0.5, 0.05}};
  for (const auto& r : ergodicity_gap(m, PolarizerAngle(0), windows, 1e-6, 3, 200'000)) {
    EXPECT_TRUE(r.ergodic()) << r.gap << " vs " << r.threshold;
  }
}

TEST(Ergodicity, NonergodicModelShowsGapOnShortWindowsOnly) {
  OutcomeModel m{ModelKind::Nonergodic, {{"drift_period_s", 0.01}}};
  const std::vector<TimeWindow> windows = {{0.0, 1e-4}, {0.0, 0.01}};
  const auto r = ergodicity_gap(m, PolarizerAngle(0), windows, 1e-6, 3, 200'000);
  EXPECT_GT(r[0].gap, 10 * r[0].combined_std_err);
  EXPECT_TRUE(r[1].ergodic());
}

TEST(Ergodicity, TimeAverageNeedsData) {
  std::vector<TraceSample> empty;
  EXPECT_THROW(time_average(empty, PolarizerAngle(0), 0, 1), NoDataError);
  EXPECT_THROW(time_average(empty, PolarizerAngle(0), 0, 0), ConfigError);
}
