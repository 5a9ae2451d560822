#include <bellrm/randomness_tests.hpp>
#include <bellrm/rng.hpp>

#include "oracles/mgram.hpp"

#include <gtest/gtest.h>

#include <string>

using namespace bellrm;

namespace {

std::vector<std::uint8_t> from_string(const std::string& s) {
  std::vector<std::uint8_t> v;
  for (char c : s) v.push_back(static_cast<std::uint8_t>(c - '0'));
  return v;
}

// SP 800-22 section 2 worked example (first 100 binary digits of e).
const std::string kNistEpsilon =
    "1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000";

std::vector<std::uint8_t> random_bits(std::uint64_t seed, std::size_t n) {
  StreamRng rng(derive_key(seed, "bits"), 0);
  std::vector<std::uint8_t> v(n);
  for (auto& b : v) b = rng.bit();
  return v;
}

std::vector<std::uint8_t> flipped(std::vector<std::uint8_t> v) {
  for (auto& b : v) b ^= 1;
  return v;
}

}  // namespace

TEST(Monobit, Examples) {
  std::vector<std::uint8_t> zeros(100, 0);
  auto r = monobit_test(zeros);
  EXPECT_DOUBLE_EQ(r.statistic, 10.0);
  EXPECT_NEAR(r.p_value / 1.5239706048321e-23, 1.0, 1e-9);  // erfc(10/sqrt 2)
  EXPECT_TRUE(r.rejected);
  std::vector<std::uint8_t> alt(100);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = static_cast<std::uint8_t>(i % 2);
  r = monobit_test(alt);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_FALSE(r.rejected);
  EXPECT_NEAR(monobit_test(from_string(kNistEpsilon)).p_value, 0.109599, 1e-6);
  EXPECT_THROW(monobit_test(std::vector<std::uint8_t>(99, 0)), InsufficientLengthError);
}

TEST(Runs, Examples) {
  EXPECT_NEAR(runs_test(from_string(kNistEpsilon)).p_value, 0.500798, 1e-6);
  std::vector<std::uint8_t> alt(100);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = static_cast<std::uint8_t>(i % 2);
  auto r = runs_test(alt);
  EXPECT_EQ(r.statistic, 100.0);
  EXPECT_TRUE(r.rejected);
  std::vector<std::uint8_t> halves(100, 0);
  std::fill(halves.begin() + 50, halves.end(), 1);
  r = runs_test(halves);
  EXPECT_EQ(r.statistic, 2.0);
  EXPECT_TRUE(r.rejected);
}

TEST(Runs, GuardBandFailureIsNotApplicable) {
  auto r = runs_test(std::vector<std::uint8_t>(200, 0));
  EXPECT_FALSE(r.applicable);
  EXPECT_FALSE(r.rejected);
  EXPECT_EQ(r.p_value, 1.0);
}

TEST(BlockFrequency, NistExample) {
  EXPECT_NEAR(block_frequency_test(from_string(kNistEpsilon), 10).p_value, 0.706438, 1e-6);
  EXPECT_THROW(block_frequency_test(std::vector<std::uint8_t>(120, 0), 128), InsufficientLengthError);
}

TEST(Cusum, NistExample) { EXPECT_NEAR(cusum_test(from_string(kNistEpsilon)).p_value, 0.219194, 1e-6); }

TEST(Serial, StatisticMatchesExhaustiveMgramCount) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto bits = random_bits(seed, 2000);
    const double oracle_del = oracle::psi2(bits, 4) - oracle::psi2(bits, 3);
    EXPECT_NEAR(serial_test(bits, 4).statistic, oracle_del, 1e-6);
  }
  EXPECT_THROW(serial_test(std::vector<std::uint8_t>(100, 0), 6), InsufficientLengthError);
}

TEST(Serial, RejectsPeriodicSequenceOfPeriod2PowMMinus1) {
  // Period 15: an m-sequence of x^4 + x + 1, every nonzero 4-gram once.
  std::vector<std::uint8_t> period = {0, 0, 0, 1, 0, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1};
  std::vector<std::uint8_t> bits;
  while (bits.size() < 10'000) bits.insert(bits.end(), period.begin(), period.end());
  bits.resize(10'000);
  const auto counts = oracle::mgram_counts(bits, 4);
  EXPECT_LE(counts.count("0000"), 1u);  // the all-zero 4-gram only at the wrap
  EXPECT_TRUE(serial_test(bits, 4).rejected);
}

TEST(Battery, AllZerosRejectedByEveryApplicableTest) {
  for (const auto& r : run_battery(std::vector<std::uint8_t>(10'000, 0))) {
    if (r.applicable) {
      EXPECT_TRUE(r.rejected) << r.test_name;
    }
  }
}

TEST(Battery, PValuesInUnitIntervalAndRejectionMatchesAlpha) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& r : run_battery(random_bits(seed, 10'000))) {
      EXPECT_GE(r.p_value, 0.0);
      EXPECT_LE(r.p_value, 1.0);
      EXPECT_EQ(r.rejected, r.p_value < 0.01);
    }
  }
}

TEST(Battery, BitFlipSymmetric) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto bits = random_bits(seed, 5000);
    bits.resize(2500);
    bits.insert(bits.end(), 300, 1);  // make it biased
    const auto a = run_battery(bits);
    const auto b = run_battery(flipped(bits));
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(a[i].p_value, b[i].p_value, 1e-12) << a[i].test_name;
      EXPECT_EQ(a[i].rejected, b[i].rejected);
    }
  }
}

TEST(Battery, CompoundFalseAlarmUnderIndependence) {
  EXPECT_NEAR(BatteryConfig{}.compound_false_alarm(), 1 - std::pow(0.99, 5), 1e-15);
}
