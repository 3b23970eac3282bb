#include <gtest/gtest.h>

#include <numeric>

#include "homscope/acquisition.hpp"
#include "homscope/detectors.hpp"
#include "homscope/error.hpp"
#include "support.hpp"

using namespace homscope;
using namespace hstest;

namespace {

DetectorBank random_bank(Gen& g) {
  DetectorBank bank;
  for (auto& arm : bank.splitter_ratios) {
    for (double& r : arm) r = g.uniform(0.05, 1.0);
    const double total = std::accumulate(arm.begin(), arm.end(), 0.0);
    for (double& r : arm) r /= total;
    arm[3] = 1.0 - (arm[0] + arm[1] + arm[2]);
  }
  for (double& e : bank.efficiencies) e = g.uniform(0.0, 1.0);
  return bank;
}

// Enumerates where each photon ends up: channel k of its arm, or lost.
double enumerated_survival(Outcome o, const DetectorBank& bank, double tc, double td) {
  const auto fire = [&](int arm, int k) {
    return (arm == 0 ? td : tc) * bank.splitter_ratios[arm][k] * bank.efficiencies[arm * 4 + k];
  };
  const int arm1 = o == Outcome::n02 ? 0 : 1;
  const int arm2 = o == Outcome::n20 ? 1 : 0;
  double total = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      if (arm1 == arm2 && a == b) continue;  // one click, no coincidence
      total += fire(arm1, a) * fire(arm2, b);
    }
  return total;
}

CoincidenceTally tally_of(std::uint64_t n11, std::uint64_t n02, std::uint64_t n20) {
  CoincidenceTally t;
  t.pair_counts[0][4] = n11;
  t.pair_counts[0][1] = n02;
  t.pair_counts[4][5] = n20;
  t.n11_raw = n11;
  t.n02_raw = n02;
  t.n20_raw = n20;
  return t;
}

}  // namespace

TEST(Classify, Examples) {
  EXPECT_EQ(classify_coincidence(2, 7), CoincidenceClass::n11);
  EXPECT_EQ(classify_coincidence(1, 3), CoincidenceClass::n02);
  EXPECT_EQ(classify_coincidence(5, 8), CoincidenceClass::n20);
  EXPECT_EQ(classify_coincidence(4, 4), CoincidenceClass::invalid);
  EXPECT_EQ(classify_coincidence(0, 3), CoincidenceClass::invalid);
  EXPECT_EQ(classify_coincidence(1, 9), CoincidenceClass::invalid);
}

TEST(Classify, TotalAndSymmetric) {
  int counts[4] = {};
  for (int i = 1; i <= 8; ++i)
    for (int j = 1; j <= 8; ++j) {
      if (i == j) continue;
      const auto c = classify_coincidence(i, j);
      EXPECT_EQ(c, classify_coincidence(j, i));
      EXPECT_NE(c, CoincidenceClass::invalid);
      ++counts[static_cast<int>(c)];
    }
  EXPECT_EQ(counts[static_cast<int>(CoincidenceClass::n11)], 32);
  EXPECT_EQ(counts[static_cast<int>(CoincidenceClass::n20)], 12);
  EXPECT_EQ(counts[static_cast<int>(CoincidenceClass::n02)], 12);
}

TEST(Detection, SurvivalExamples) {
  DetectorBank unit;
  EXPECT_NEAR(coincidence_probability(Outcome::n20, unit), 0.75, 1e-15);
  EXPECT_NEAR(coincidence_probability(Outcome::n02, unit), 0.75, 1e-15);
  EXPECT_NEAR(coincidence_probability(Outcome::n11, unit), 1.0, 1e-15);
  DetectorBank half;
  half.efficiencies.fill(0.5);
  EXPECT_NEAR(coincidence_probability(Outcome::n11, half), 0.25, 1e-15);
  EXPECT_NEAR(coincidence_probability(Outcome::n20, half), 0.1875, 1e-15);
  EXPECT_NEAR(distinct_channel_probability(unit.splitter_ratios[0]), 0.75, 1e-15);
}

TEST(Detection, SampledSurvivalRates) {
  DetectorBank unit;
  RandomStream rng(301);
  int n11 = 0, n20 = 0;
  const int trials = 200000;
  for (int i = 0; i < trials; ++i) {
    const auto a = detect_pair(Outcome::n11, unit, rng);
    ASSERT_TRUE(a.coincidence.has_value());
    EXPECT_EQ(a.coincidence->kind, CoincidenceClass::n11);
    n11 += 1;
    const auto b = detect_pair(Outcome::n20, unit, rng);
    if (b.coincidence) {
      EXPECT_EQ(b.coincidence->kind, CoincidenceClass::n20);
      EXPECT_GE(b.coincidence->first, 4);
      EXPECT_LT(b.coincidence->first, b.coincidence->second);
      ++n20;
    } else {
      EXPECT_GE(b.clicks[0], 4);
      EXPECT_EQ(b.clicks[1], -1);
    }
  }
  EXPECT_EQ(n11, trials);
  const double sd = std::sqrt(0.75 * 0.25 / trials);
  EXPECT_NEAR(static_cast<double>(n20) / trials, 0.75, 4 * sd);

  DetectorBank half;
  half.efficiencies.fill(0.5);
  int hit = 0;
  for (int i = 0; i < trials; ++i) hit += detect_pair(Outcome::n02, half, rng).coincidence.has_value();
  EXPECT_NEAR(static_cast<double>(hit) / trials, 0.1875, 4 * std::sqrt(0.1875 * 0.8125 / trials));
}

TEST(Detection, MatchesEnumeration) {
  Gen g(302);
  for (int b = 0; b < 200; ++b) {
    const auto bank = random_bank(g);
    const double tc = g.uniform(0.01, 1.0), td = g.uniform(0.01, 1.0);
    for (auto o : {Outcome::n11, Outcome::n20, Outcome::n02})
      EXPECT_NEAR(coincidence_probability(o, bank, tc, td), enumerated_survival(o, bank, tc, td), 1e-12);
  }
}

TEST(Detection, SamplerFollowsExactProbability) {
  Gen g(303);
  const auto bank = random_bank(g);
  const PhotonRouter router(bank, 0.7, 0.9);
  RandomStream rng(304);
  for (auto o : {Outcome::n11, Outcome::n20, Outcome::n02}) {
    const int trials = 200000;
    int hit = 0;
    for (int i = 0; i < trials; ++i) hit += router.detect(o, rng).coincidence.has_value();
    const double p = coincidence_probability(o, bank, 0.7, 0.9);
    EXPECT_NEAR(static_cast<double>(hit) / trials, p, 4 * std::sqrt(p * (1 - p) / trials) + 1e-9);
  }
}

TEST(Bank, Validation) {
  DetectorBank b;
  EXPECT_NO_THROW(b.validate());
  b.efficiencies[2] = 1.2;
  EXPECT_THROW(b.validate(), Error);
  b = DetectorBank{};
  b.splitter_ratios[1][0] = 0.3;
  EXPECT_THROW(b.validate(), Error);
  b = DetectorBank{};
  b.dark_count_rate_hz = -1;
  EXPECT_THROW(b.validate(), Error);
}

TEST(Klyshko, Arithmetic) {
  CoincidenceMatrix c{};
  for (auto& row : c) row.fill(120.0);
  std::array<double, kChannels> s;
  s.fill(4000.0);
  for (double e : klyshko_coefficients(c, s)) EXPECT_NEAR(e, 3 * 120.0 / (2 * 4000.0), 1e-15);
  for (auto& row : c) row.fill(10.0);
  s.fill(100.0);
  for (double e : klyshko_coefficients(c, s)) EXPECT_NEAR(e, 0.15, 1e-15);
}

TEST(Klyshko, DarkChannelNamed) {
  CoincidenceMatrix c{};
  std::array<double, kChannels> s;
  s.fill(10.0);
  s[5] = 0.0;
  try {
    klyshko_coefficients(c, s);
    FAIL();
  } catch (const CalibrationError& e) {
    EXPECT_EQ(e.channel(), 6);
    EXPECT_EQ(e.kind(), ErrorKind::calibration);
    EXPECT_NE(std::string(e.what()).find("channel 6"), std::string::npos);
  }
}

TEST(Klyshko, RecoversSimulatedEfficiencies) {
  Gen g(305);
  DetectorBank bank;
  for (double& e : bank.efficiencies) e = g.uniform(0.3, 1.0);
  InterferenceParams p;
  AcquisitionConfig cfg;
  cfg.transmission = 1.0;
  RandomStream rng(306);
  const auto far = sample_pairs(1'000'000, 10 * p.temporal_width_s, p, cfg, bank, PhaseNoiseModel{}, rng);
  const auto m = coincidence_matrix(far);
  const auto eta = klyshko_efficiencies(m, singles_of(far), bank.splitter_ratios);
  for (int k = 0; k < kChannels; ++k) {
    double n = 0;  // coincidences heralding channel k
    for (int j = 0; j < 4; ++j) n += k < 4 ? m[k][j] : m[j][k - 4];
    EXPECT_NEAR(eta[k] / bank.efficiencies[k], 1.0, 3.0 / std::sqrt(n)) << "channel " << k + 1;
  }
}

TEST(Calibrate, Examples) {
  const DetectorBank unit;
  const auto cal = calibrate_tally(tally_of(300, 90, 90), unit.efficiencies, unit.splitter_ratios);
  EXPECT_NEAR(cal.n11_cal, 300.0, 1e-12);
  EXPECT_NEAR(cal.n02_cal, 120.0, 1e-12);
  EXPECT_NEAR(cal.n20_cal, 120.0, 1e-12);
  EXPECT_NEAR(normalized_p11(cal), 300.0 / 540.0, 1e-12);
  EXPECT_NEAR(normalized_p11(cal), 0.5556, 5e-5);

  auto eff = unit.efficiencies;
  eff[0] = 0.5;
  eff[4] = 0.8;
  const auto w = calibrate_tally(tally_of(100, 0, 0), eff, unit.splitter_ratios);
  EXPECT_NEAR(w.n11_cal, 100.0 / 0.4, 1e-12);
  eff[3] = 0.0;
  EXPECT_THROW(calibrate_tally(tally_of(1, 1, 1), eff, unit.splitter_ratios), Error);
}

TEST(Calibrate, IdentityAtUnitEfficiency) {
  Gen g(307);
  const DetectorBank unit;
  for (int i = 0; i < 200; ++i) {
    CoincidenceTally t;
    for (int a = 0; a < kChannels; ++a)
      for (int b = a + 1; b < kChannels; ++b) {
        const auto n = static_cast<std::uint64_t>(g.integer(0, 1000));
        t.pair_counts[a][b] = n;
        switch (classify_coincidence(a + 1, b + 1)) {
          case CoincidenceClass::n11: t.n11_raw += n; break;
          case CoincidenceClass::n20: t.n20_raw += n; break;
          default: t.n02_raw += n; break;
        }
      }
    const auto c = calibrate_tally(t, unit.efficiencies, unit.splitter_ratios);
    EXPECT_DOUBLE_EQ(c.n11_cal, static_cast<double>(t.n11_raw));
    EXPECT_NEAR(c.n20_cal, 4.0 / 3.0 * t.n20_raw, 1e-9);
    EXPECT_NEAR(c.n02_cal, 4.0 / 3.0 * t.n02_raw, 1e-9);

    auto eff = unit.efficiencies;
    for (double& e : eff) e = g.uniform(0.2, 1.0);
    const auto lossy = calibrate_tally(t, eff, unit.splitter_ratios);
    EXPECT_GE(lossy.n11_cal, static_cast<double>(t.n11_raw));
    EXPECT_GE(lossy.n20_cal, static_cast<double>(t.n20_raw));
    EXPECT_GE(lossy.n02_cal, static_cast<double>(t.n02_raw));
  }
}

TEST(NormalizedP11, Examples) {
  CoincidenceTally t;
  t.calibrated = true;
  t.n02_cal = 3;
  t.n20_cal = 4;
  EXPECT_EQ(normalized_p11(t), 0.0);
  t.n11_cal = 500;
  t.n02_cal = 125;
  t.n20_cal = 125;
  EXPECT_NEAR(normalized_p11(t), 2.0 / 3.0, 1e-15);
  CoincidenceTally empty;
  empty.calibrated = true;
  EXPECT_THROW(normalized_p11(empty), Error);
  CoincidenceTally raw;
  EXPECT_THROW(normalized_p11(raw), Error);
}

TEST(NormalizedP11, HalfAtLargeDelay) {
  InterferenceParams p;
  AcquisitionConfig cfg;
  cfg.transmission = 1.0;
  const DetectorBank unit;
  RandomStream rng(308);
  const auto raw = sample_pairs(400000, 5 * p.temporal_width_s, p, cfg, unit, PhaseNoiseModel{}, rng);
  const double est = normalized_p11(calibrate_tally(raw, unit.efficiencies, unit.splitter_ratios));
  EXPECT_NEAR(est, 0.5, 4 * std::sqrt(0.25 / raw.raw_total()));
}

TEST(CalibrationJson, RoundTripAndStrictness) {
  CalibrationData d;
  d.efficiencies = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.123456789012345678};
  d.splitter_ratios[0] = {0.1, 0.2, 0.3, 0.4};
  const auto back = calibration_from_json(calibration_to_json(d));
  EXPECT_EQ(back.efficiencies, d.efficiencies);
  EXPECT_EQ(back.splitter_ratios, d.splitter_ratios);

  const auto kind = [](const std::string& text) {
    try {
      calibration_from_json(text);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::parameter;
  };
  EXPECT_EQ(kind("{\"efficiencies\":[1,1,1,1,1,1,1,1],\"extra\":1}"), ErrorKind::config);
  EXPECT_EQ(kind("{\"efficiencies\":[1,1,1]}"), ErrorKind::config);
  EXPECT_EQ(kind("{\"efficiencies\":[1,1,1,1,1,1,1,0]}"), ErrorKind::config);
  EXPECT_EQ(kind("not json"), ErrorKind::config);
  EXPECT_EQ(kind("{\"efficiencies\":[1,1,1,1,1,1,1,1],\"splitter_ratios\":[[1,1,1,1],[0.25,0.25,0.25,0.25]]}"),
            ErrorKind::config);
  EXPECT_NO_THROW(calibration_from_json("{\"efficiencies\":[1,1,1,1,1,1,1,1]}"));
}
