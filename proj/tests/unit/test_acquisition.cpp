#include <gtest/gtest.h>

#include <vector>

#include "homscope/acquisition.hpp"
#include "homscope/error.hpp"
#include "homscope/inference.hpp"
#include "homscope/scene.hpp"
#include "support.hpp"

using namespace homscope;
using namespace hstest;

namespace {

bool same(const CoincidenceTally& a, const CoincidenceTally& b) {
  return a.n11_raw == b.n11_raw && a.n20_raw == b.n20_raw && a.n02_raw == b.n02_raw &&
         a.singles == b.singles && a.pair_counts == b.pair_counts && a.emitted_pairs == b.emitted_pairs;
}

}  // namespace

TEST(SamplePixel, DetectedFractionMatchesAnalyticSurvival) {
  InterferenceParams p;
  p.detuning_hz = 7.4 * THz;
  const double t = 20 * fs;
  for (double transmission : {1.0, 0.02}) {
    AcquisitionConfig cfg;
    cfg.transmission = transmission;
    double emitted = 0, detected = 0;
    for (int run = 0; run < 100; ++run) {
      cfg.seed = derive_seed(401, run);
      const auto tally = sample_pixel(t, p, cfg, DetectorBank{}, PhaseNoiseModel{});
      emitted += static_cast<double>(tally.emitted_pairs);
      detected += static_cast<double>(tally.raw_total());
    }
    const double expected = expected_detection_probability(p11(t, p), cfg, DetectorBank{});
    EXPECT_NEAR(emitted / 100, 1e5, 4 * std::sqrt(1e5 / 100));
    const double tol = std::max(0.01, 4 / std::sqrt(detected));
    EXPECT_NEAR(detected / emitted / expected, 1.0, tol) << "transmission " << transmission;
  }
}

TEST(SamplePixel, FlatVisibilityFractions) {
  InterferenceParams p;
  p.visibility = 0.0;
  AcquisitionConfig cfg;
  cfg.transmission = 1.0;
  cfg.pair_rate_hz = 4e5;
  const auto tally = sample_pixel(0.0, p, cfg, DetectorBank{}, PhaseNoiseModel{});
  const double n = static_cast<double>(tally.emitted_pairs);
  EXPECT_NEAR(tally.n11_raw / n, 0.5, 4 * std::sqrt(0.25 / n));
  EXPECT_NEAR(tally.n20_raw / n, 3.0 / 16, 4 * std::sqrt(3.0 / 16 * 13.0 / 16 / n));
  EXPECT_NEAR(tally.n02_raw / n, 3.0 / 16, 4 * std::sqrt(3.0 / 16 * 13.0 / 16 / n));
}

TEST(SamplePixel, NoAntiBunchingAtPerfectDip) {
  InterferenceParams p;
  p.detuning_hz = 7.4 * THz;
  p.visibility = 1.0;
  AcquisitionConfig cfg;
  cfg.transmission = 1.0;
  for (int run = 0; run < 20; ++run) {
    cfg.seed = run;
    const auto tally = sample_pixel(0.0, p, cfg, DetectorBank{}, PhaseNoiseModel{});
    EXPECT_EQ(tally.n11_raw, 0u);
    EXPECT_GT(tally.n20_raw + tally.n02_raw, 0u);
  }
}

TEST(SamplePixel, Reproducible) {
  Gen g(402);
  for (int i = 0; i < 20; ++i) {
    const auto p = g.params();
    AcquisitionConfig cfg;
    cfg.transmission = g.uniform(0.05, 1.0);
    cfg.pair_rate_hz = g.uniform(100, 20000);
    cfg.seed = static_cast<std::uint64_t>(g.integer(0, 1 << 30));
    PhaseNoiseModel noise;
    if (g.coin()) {
      noise.kind = PhaseNoiseKind::random_walk_with_hops;
      noise.diffusion_rad2_per_s = 0.1;
      noise.hop_rate_hz = 2;
      noise.hop_magnitude_rad = 0.5;
    }
    const double t = g.delay_in(p);
    EXPECT_TRUE(same(sample_pixel(t, p, cfg, DetectorBank{}, noise), sample_pixel(t, p, cfg, DetectorBank{}, noise)));
  }
}

TEST(SamplePixel, TallyBookkeeping) {
  InterferenceParams p;
  p.detuning_hz = 3 * THz;
  AcquisitionConfig cfg;
  cfg.transmission = 0.5;
  const auto t = sample_pixel(10 * fs, p, cfg, DetectorBank{}, PhaseNoiseModel{});
  std::uint64_t sums[3] = {};
  std::array<std::uint64_t, kChannels> clicks{};
  for (int a = 0; a < kChannels; ++a)
    for (int b = 0; b < kChannels; ++b) {
      if (b <= a) {
        EXPECT_EQ(t.pair_counts[a][b], 0u);
        continue;
      }
      const auto n = t.pair_counts[a][b];
      sums[static_cast<int>(classify_coincidence(a + 1, b + 1))] += n;
      clicks[a] += n;
      clicks[b] += n;
    }
  EXPECT_EQ(sums[static_cast<int>(CoincidenceClass::n11)], t.n11_raw);
  EXPECT_EQ(sums[static_cast<int>(CoincidenceClass::n20)], t.n20_raw);
  EXPECT_EQ(sums[static_cast<int>(CoincidenceClass::n02)], t.n02_raw);
  for (int k = 0; k < kChannels; ++k) EXPECT_GE(t.singles[k], clicks[k]);
  EXPECT_DOUBLE_EQ(t.window_s, 0.5);
}

TEST(SamplePixel, DarkCountsOnlyAddSingles) {
  InterferenceParams p;
  AcquisitionConfig cfg;
  DetectorBank dark;
  dark.dark_count_rate_hz = 1000;
  const auto a = sample_pixel(0.0, p, cfg, DetectorBank{}, PhaseNoiseModel{});
  const auto b = sample_pixel(0.0, p, cfg, dark, PhaseNoiseModel{});
  EXPECT_EQ(a.pair_counts, b.pair_counts);
  for (int k = 0; k < kChannels; ++k) EXPECT_NEAR(double(b.singles[k] - a.singles[k]), 500.0, 4 * std::sqrt(500.0));
}

TEST(SamplePixel, BlendMixesDelays) {
  InterferenceParams p;
  p.detuning_hz = 7.4 * THz;
  p.visibility = 1.0;
  AcquisitionConfig cfg;
  cfg.transmission = 1.0;
  const double a = 0.0, b = 0.5 / (7.4 * THz);  // P11 = 0 and near 1
  const auto pure = sample_pixel_blend(a, b, 0.0, p, cfg, DetectorBank{}, PhaseNoiseModel{});
  EXPECT_EQ(pure.n11_raw, 0u);
  const auto mixed = sample_pixel_blend(a, b, 0.3, p, cfg, DetectorBank{}, PhaseNoiseModel{});
  const double expected = 0.3 * p11(b, p) / expected_detection_probability(0.3 * p11(b, p), cfg, DetectorBank{});
  EXPECT_NEAR(mixed.n11_raw / double(mixed.raw_total()), expected, 0.01);
  EXPECT_THROW(sample_pixel_blend(a, b, 1.5, p, cfg, DetectorBank{}, PhaseNoiseModel{}), Error);
}

TEST(DipScan, DegenerateTraceFitsTriangle) {
  InterferenceParams p;
  p.degenerate = true;
  p.visibility = 0.95;
  AcquisitionConfig cfg;
  cfg.transmission = 1.0;
  cfg.pair_rate_hz = 20000;
  std::vector<double> delays;
  for (int k = 0; k < 61; ++k) delays.push_back((-750.0 + 25.0 * k) * fs);
  const auto tallies = sample_dip_scan(delays, p, cfg, DetectorBank{}, PhaseNoiseModel{});
  double chi2 = 0;
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const auto cal = calibrate_tally(tallies[i], DetectorBank{}.efficiencies, DetectorBank{}.splitter_ratios);
    const double model = p11(delays[i], p);
    // Delta method through the 4/3 reweighting of the detected anti-bunching fraction q.
    const double n = static_cast<double>(tallies[i].raw_total());
    const double q = model / (model + 0.75 * (1 - model));
    const double var = 16.0 / 9.0 * std::pow(model / q, 4) * q * (1 - q) / n;
    chi2 += std::pow(normalized_p11(cal) - model, 2) / var;
  }
  // 61 degrees of freedom: mean 61, sd 11.
  EXPECT_LT(chi2, 61 + 5 * 11.0);
  EXPECT_GT(chi2, 61 - 4 * 11.0);
}

TEST(DipScan, TwoColourBeatPeriod) {
  InterferenceParams p;
  p.detuning_hz = 7.4 * THz;
  p.visibility = 0.95;
  AcquisitionConfig cfg;
  cfg.transmission = 1.0;
  cfg.pair_rate_hz = 20000;
  std::vector<double> delays;
  for (int k = 0; k < 241; ++k) delays.push_back((-300.0 + 2.5 * k) * fs);
  const auto tallies = sample_dip_scan(delays, p, cfg, DetectorBank{}, PhaseNoiseModel{});
  std::vector<double> est;
  for (const auto& t : tallies)
    est.push_back(normalized_p11(calibrate_tally(t, DetectorBank{}.efficiencies, DetectorBank{}.splitter_ratios)));
  double best = 0, best_sse = 1e300;
  for (int k = 0; k <= 4000; ++k) {
    auto q = p;
    q.detuning_hz = (6.0 + 3.0 * k / 4000) * THz;
    double sse = 0;
    for (std::size_t i = 0; i < delays.size(); ++i) sse += std::pow(est[i] - p11(delays[i], q), 2);
    if (sse < best_sse) {
      best_sse = sse;
      best = 1.0 / q.detuning_hz;
    }
  }
  EXPECT_NEAR(best / fs, 135.1, 0.01 * 135.1);
  EXPECT_NEAR(best * kSpeedOfLight / um, 40.5, 0.01 * 40.5);
}

TEST(DipScan, ZeroDwellGivesEmptyTallies) {
  InterferenceParams p;
  AcquisitionConfig cfg;
  cfg.dwell_s = 0.0;
  const std::vector<double> delays{-1e-13, 0.0, 1e-13};
  for (const auto& t : sample_dip_scan(delays, p, cfg, DetectorBank{}, PhaseNoiseModel{})) {
    EXPECT_EQ(t.raw_total(), 0u);
    EXPECT_EQ(t.emitted_pairs, 0u);
  }
  EXPECT_THROW(sample_dip_scan(std::vector<double>{}, p, cfg, DetectorBank{}, PhaseNoiseModel{}), Error);
}

TEST(Drift, NoneIsConstant) {
  PhaseNoiseModel none;
  for (double x : drift_trace(none, 10.0, 0.1, 7)) EXPECT_EQ(x, 0.0);
}

TEST(Drift, BrownianVariance) {
  PhaseNoiseModel walk;
  walk.kind = PhaseNoiseKind::random_walk;
  walk.diffusion_rad2_per_s = 0.3;
  const double T = 2.0;
  double sum = 0, sumsq = 0;
  const int traces = 10000;
  for (int i = 0; i < traces; ++i) {
    const auto tr = drift_trace(walk, T, 0.1, derive_seed(403, i));
    EXPECT_EQ(tr.front(), 0.0);
    sum += tr.back();
    sumsq += tr.back() * tr.back();
  }
  const double var = sumsq / traces - std::pow(sum / traces, 2);
  EXPECT_NEAR(var / (0.3 * T), 1.0, 0.05);
}

TEST(Drift, HopsOnlyWhenEnabled) {
  PhaseNoiseModel walk;
  walk.kind = PhaseNoiseKind::random_walk_with_hops;
  walk.diffusion_rad2_per_s = 1e-4;
  walk.hop_rate_hz = 0.0;
  walk.hop_magnitude_rad = 1.0;
  const auto smooth = drift_trace(walk, 100.0, 0.01, 404);
  double max_step = 0;
  for (std::size_t i = 1; i < smooth.size(); ++i) max_step = std::max(max_step, std::abs(smooth[i] - smooth[i - 1]));
  EXPECT_LT(max_step, 0.01);

  walk.hop_rate_hz = 1.0;
  const auto hopping = drift_trace(walk, 100.0, 0.01, 404);
  int jumps = 0;
  for (std::size_t i = 1; i < hopping.size(); ++i) jumps += std::abs(hopping[i] - hopping[i - 1]) > 0.5;
  EXPECT_GT(jumps, 60);
  EXPECT_LT(jumps, 140);
}

TEST(Drift, DetuningScaling) {
  PhaseNoiseModel walk;
  walk.kind = PhaseNoiseKind::random_walk;
  walk.diffusion_rad2_per_s = 0.5;
  EXPECT_EQ(walk.effective_diffusion(3.7 * THz), 0.5);
  walk.detuning_exponent = 2.0;
  EXPECT_NEAR(walk.effective_diffusion(3.7 * THz), 0.125, 1e-15);
  EXPECT_NEAR(walk.effective_diffusion(7.4 * THz), 0.5, 1e-15);
  walk.diffusion_rad2_per_s = -1;
  EXPECT_THROW(walk.validate(), Error);
  EXPECT_EQ(phase_noise_kind_from_string("random_walk_with_hops"), PhaseNoiseKind::random_walk_with_hops);
  EXPECT_THROW(phase_noise_kind_from_string("pink"), Error);
}

TEST(Convergence, ErrorShrinksAsInverseRootN) {
  InterferenceParams p;
  p.detuning_hz = 7.4 * THz;
  const double t = 40 * fs;
  AcquisitionConfig cfg;
  cfg.transmission = 1.0;
  const DetectorBank unit;
  std::vector<double> x, y;
  for (double n : {1e3, 1e4, 1e5}) {
    double sse = 0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
      RandomStream rng(derive_seed(405 + static_cast<int>(std::log10(n)), r));
      const auto raw = sample_pairs(static_cast<std::uint64_t>(n), t, p, cfg, unit, PhaseNoiseModel{}, rng);
      sse += std::pow(normalized_p11(calibrate_tally(raw, unit.efficiencies, unit.splitter_ratios)) - p11(t, p), 2);
    }
    x.push_back(std::log(n));
    y.push_back(0.5 * std::log(sse / reps));
  }
  const double mx = (x[0] + x[1] + x[2]) / 3, my = (y[0] + y[1] + y[2]) / 3;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 3; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  EXPECT_NEAR(sxy / sxx, -0.5, 0.1);
}

TEST(PhaseNoise, PrecisionDegradesWithDiffusion) {
  InterferenceParams p;
  AcquisitionConfig cfg;
  cfg.transmission = 1.0;
  cfg.pair_rate_hz = 9143;
  cfg.seed = 406;
  double prev = 0;
  for (double d : {1e-2, 1e-1, 1.0, 10.0}) {
    PhaseNoiseModel noise;
    noise.kind = PhaseNoiseKind::random_walk;
    noise.diffusion_rad2_per_s = d;
    const auto row = single_pixel_sweep({7.4 * THz}, 200, 50, p, cfg, DetectorBank{}, noise).front();
    EXPECT_GT(row.sigma_t_s, prev) << "diffusion " << d;
    prev = row.sigma_t_s;
  }
}

TEST(Config, Validation) {
  AcquisitionConfig c;
  EXPECT_NO_THROW(c.validate());
  c.transmission = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = AcquisitionConfig{};
  c.pair_rate_hz = 0;
  EXPECT_THROW(c.validate(), Error);
  c = AcquisitionConfig{};
  c.dwell_s = -1;
  EXPECT_THROW(c.validate(), Error);
  c = AcquisitionConfig{};
  c.arm_transmission = std::array<double, 2>{0.5, 0.25};
  EXPECT_EQ(c.transmission_c(), 0.5);
  EXPECT_EQ(c.transmission_d(), 0.25);
  EXPECT_NEAR(expected_detected_rate(c, DetectorBank{}),
              c.pair_rate_hz * (0.5 * 0.125 + 0.25 * 0.75 * 0.25 + 0.25 * 0.75 * 0.0625), 1e-9);
}
