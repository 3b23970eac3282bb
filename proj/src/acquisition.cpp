#include "homscope/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "homscope/error.hpp"
#include "homscope/parallel.hpp"

namespace homscope {

void AcquisitionConfig::validate() const {
  require(std::isfinite(pair_rate_hz) && pair_rate_hz > 0.0, "pair rate must be positive");
  // A zero dwell is accepted and yields empty tallies.
  require(std::isfinite(dwell_s) && dwell_s >= 0.0, "dwell time must be non-negative");
  require(std::isfinite(transmission) && transmission > 0.0 && transmission <= 1.0,
          "transmission must lie in (0, 1]");
  if (arm_transmission) {
    for (double t : *arm_transmission)
      require(std::isfinite(t) && t > 0.0 && t <= 1.0, "arm transmission must lie in (0, 1]");
  }
}

std::string_view to_string(PhaseNoiseKind k) {
  switch (k) {
    case PhaseNoiseKind::none: return "none";
    case PhaseNoiseKind::random_walk: return "random_walk";
    case PhaseNoiseKind::random_walk_with_hops: return "random_walk_with_hops";
  }
  return "none";
}

PhaseNoiseKind phase_noise_kind_from_string(std::string_view s) {
  if (s == "none") return PhaseNoiseKind::none;
  if (s == "random_walk") return PhaseNoiseKind::random_walk;
  if (s == "random_walk_with_hops") return PhaseNoiseKind::random_walk_with_hops;
  fail(ErrorKind::parameter, "unknown phase noise kind '" + std::string(s) + "'");
}

void PhaseNoiseModel::validate() const {
  require(diffusion_rad2_per_s >= 0.0 && hop_rate_hz >= 0.0 && hop_magnitude_rad >= 0.0,
          "phase noise rates must be non-negative");
  require(std::isfinite(detuning_exponent), "detuning exponent must be finite");
  require(reference_detuning_hz > 0.0, "reference detuning must be positive");
}

double PhaseNoiseModel::effective_diffusion(double detuning_hz) const {
  if (detuning_exponent == 0.0 || detuning_hz <= 0.0) return diffusion_rad2_per_s;
  return diffusion_rad2_per_s * std::pow(detuning_hz / reference_detuning_hz, detuning_exponent);
}

double expected_detection_probability(double p11, const AcquisitionConfig& config,
                                      const DetectorBank& bank) {
  const auto probs = outcome_probabilities_from_p11(p11);
  const double tc = config.transmission_c(), td = config.transmission_d();
  return probs.p11 * coincidence_probability(Outcome::n11, bank, tc, td) +
         probs.p20 * coincidence_probability(Outcome::n20, bank, tc, td) +
         probs.p02 * coincidence_probability(Outcome::n02, bank, tc, td);
}

double expected_detected_rate(const AcquisitionConfig& config, const DetectorBank& bank) {
  return config.pair_rate_hz * expected_detection_probability(0.5, config, bank);
}

namespace {

// Phase increment over dt for the walk (with optional +/- hops).
double phase_step(const PhaseNoiseModel& noise, double diffusion, double dt, RandomStream& rng) {
  double d = diffusion > 0.0 ? std::sqrt(diffusion * dt) * rng.normal() : 0.0;
  if (noise.kind == PhaseNoiseKind::random_walk_with_hops && noise.hop_rate_hz > 0.0) {
    const std::uint64_t hops = rng.poisson(noise.hop_rate_hz * dt);
    for (std::uint64_t h = 0; h < hops; ++h)
      d += rng.bernoulli(0.5) ? noise.hop_magnitude_rad : -noise.hop_magnitude_rad;
  }
  return d;
}

Outcome draw_outcome(const OutcomeProbabilities& p, RandomStream& rng) {
  const double u = rng.uniform();
  if (u < p.p11) return Outcome::n11;
  if (u < p.p11 + p.p20) return Outcome::n20;
  return Outcome::n02;
}

CoincidenceTally sample_pairs_impl(std::uint64_t emitted, double delay_a, double delay_b,
                                   double weight_b, const InterferenceParams& params,
                                   const AcquisitionConfig& config, const DetectorBank& bank,
                                   const PhaseNoiseModel& noise, RandomStream& rng) {
  params.validate();
  config.validate();
  noise.validate();
  const PhotonRouter router(bank, config.transmission_c(), config.transmission_d());

  CoincidenceTally tally;
  tally.window_s = config.dwell_s;
  tally.emitted_pairs = emitted;

  require(weight_b >= 0.0 && weight_b <= 1.0, "blend weight must lie in [0, 1]");
  const bool blended = weight_b > 0.0;
  if (!noise.enabled()) {
    const auto probs_a = outcome_probabilities_from_p11(p11_unchecked(delay_a, params));
    const auto probs_b = outcome_probabilities_from_p11(p11_unchecked(delay_b, params));
    for (std::uint64_t k = 0; k < emitted; ++k) {
      const auto& probs = blended && rng.bernoulli(weight_b) ? probs_b : probs_a;
      tally.record(router.detect(draw_outcome(probs, rng), rng));
    }
  } else {
    std::vector<double> times(emitted);
    for (double& t : times) t = rng.uniform() * config.dwell_s;
    std::sort(times.begin(), times.end());
    const double diffusion = noise.effective_diffusion(params.detuning_hz);
    double phase = 0.0, last = 0.0;
    for (double t : times) {
      phase += phase_step(noise, diffusion, t - last, rng);
      last = t;
      const double delay = blended && rng.bernoulli(weight_b) ? delay_b : delay_a;
      const auto probs = outcome_probabilities_from_p11(p11_unchecked(delay, params, phase));
      tally.record(router.detect(draw_outcome(probs, rng), rng));
    }
  }

  if (bank.dark_count_rate_hz > 0.0 && config.dwell_s > 0.0) {
    for (auto& s : tally.singles) s += rng.poisson(bank.dark_count_rate_hz * config.dwell_s);
  }
  return tally;
}

}  // namespace

CoincidenceTally sample_pairs(std::uint64_t emitted, double delay_s,
                              const InterferenceParams& params, const AcquisitionConfig& config,
                              const DetectorBank& bank, const PhaseNoiseModel& noise,
                              RandomStream& rng) {
  return sample_pairs_impl(emitted, delay_s, delay_s, 0.0, params, config, bank, noise, rng);
}

CoincidenceTally sample_pixel_blend(double delay_a, double delay_b, double weight_b,
                                    const InterferenceParams& params,
                                    const AcquisitionConfig& config, const DetectorBank& bank,
                                    const PhaseNoiseModel& noise) {
  config.validate();
  RandomStream rng(config.seed);
  const std::uint64_t emitted = rng.poisson(config.pair_rate_hz * config.dwell_s);
  return sample_pairs_impl(emitted, delay_a, delay_b, weight_b, params, config, bank, noise, rng);
}

CoincidenceTally sample_pixel(double delay_s, const InterferenceParams& params,
                              const AcquisitionConfig& config, const DetectorBank& bank,
                              const PhaseNoiseModel& noise) {
  return sample_pixel_blend(delay_s, delay_s, 0.0, params, config, bank, noise);
}

std::vector<CoincidenceTally> sample_dip_scan(std::span<const double> delays,
                                              const InterferenceParams& params,
                                              const AcquisitionConfig& config,
                                              const DetectorBank& bank,
                                              const PhaseNoiseModel& noise) {
  require(!delays.empty(), "delay grid is empty");
  std::vector<CoincidenceTally> out(delays.size());
  parallel_for(delays.size(), [&](std::size_t i) {
    AcquisitionConfig c = config;
    c.seed = derive_seed(config.seed, i);
    out[i] = sample_pixel(delays[i], params, c, bank, noise);
  });
  return out;
}

std::vector<double> drift_trace(const PhaseNoiseModel& noise, double duration_s, double step_s,
                                std::uint64_t seed, double detuning_hz) {
  noise.validate();
  require(step_s > 0.0, "trace step must be positive");
  require(duration_s >= 0.0, "trace duration must be non-negative");
  const auto steps = static_cast<std::size_t>(std::floor(duration_s / step_s + 1e-9));
  std::vector<double> trace(steps + 1, 0.0);
  if (!noise.enabled()) return trace;
  RandomStream rng(seed);
  const double diffusion = noise.effective_diffusion(detuning_hz);
  for (std::size_t i = 1; i <= steps; ++i)
    trace[i] = trace[i - 1] + phase_step(noise, diffusion, step_s, rng);
  return trace;
}

}  // namespace homscope
