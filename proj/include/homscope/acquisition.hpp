#pragma once

// Monte Carlo generation of coincidence data for one pixel: Poissonian pair
// emission, interference outcomes, optical loss, multiplexed detection and
// interferometer phase noise.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "homscope/detectors.hpp"
#include "homscope/model.hpp"

namespace homscope {

struct AcquisitionConfig {
  double pair_rate_hz = 2e5;  // pairs reaching the microscope per second
  double dwell_s = 0.5;
  double transmission = 0.02;  // per-photon survival before the detector bank
  std::optional<std::array<double, 2>> arm_transmission;  // {arm C, arm D}; overrides the above
  std::uint64_t seed = 1;

  void validate() const;
  double transmission_c() const { return arm_transmission ? (*arm_transmission)[0] : transmission; }
  double transmission_d() const { return arm_transmission ? (*arm_transmission)[1] : transmission; }
};

enum class PhaseNoiseKind { none, random_walk, random_walk_with_hops };

std::string_view to_string(PhaseNoiseKind k);
PhaseNoiseKind phase_noise_kind_from_string(std::string_view s);

struct PhaseNoiseModel {
  PhaseNoiseKind kind = PhaseNoiseKind::none;
  double diffusion_rad2_per_s = 0.0;
  double hop_rate_hz = 0.0;
  double hop_magnitude_rad = 0.0;
  // Diffusion scales as (detuning / reference)^exponent. Exponent 2 makes the
  // walk a fixed delay jitter (path-length drift) rather than a fixed phase jitter.
  double detuning_exponent = 0.0;
  double reference_detuning_hz = 7.4e12;

  void validate() const;
  bool enabled() const { return kind != PhaseNoiseKind::none; }
  double effective_diffusion(double detuning_hz) const;
};

/// Expected coincidences per emitted pair for the given P11.
double expected_detection_probability(double p11, const AcquisitionConfig& config,
                                      const DetectorBank& bank);

/// Expected detected pairs per second with the dip far away (P11 = 1/2).
double expected_detected_rate(const AcquisitionConfig& config, const DetectorBank& bank);

/// Simulates a fixed number of emitted pairs spread over the dwell time.
CoincidenceTally sample_pairs(std::uint64_t emitted_pairs, double delay_s,
                              const InterferenceParams& params, const AcquisitionConfig& config,
                              const DetectorBank& bank, const PhaseNoiseModel& noise,
                              RandomStream& rng);

/// As sample_pixel, but a fraction weight_b of the pairs probes delay_b
/// (a pixel straddling a step edge).
CoincidenceTally sample_pixel_blend(double delay_a, double delay_b, double weight_b,
                                    const InterferenceParams& params,
                                    const AcquisitionConfig& config, const DetectorBank& bank,
                                    const PhaseNoiseModel& noise);

/// One pixel: Poisson(pair_rate * dwell) emitted pairs, seeded from config.seed.
CoincidenceTally sample_pixel(double delay_s, const InterferenceParams& params,
                              const AcquisitionConfig& config, const DetectorBank& bank,
                              const PhaseNoiseModel& noise);

/// Independent pixel per delay; pixel i uses derive_seed(config.seed, i).
std::vector<CoincidenceTally> sample_dip_scan(std::span<const double> delays,
                                              const InterferenceParams& params,
                                              const AcquisitionConfig& config,
                                              const DetectorBank& bank,
                                              const PhaseNoiseModel& noise);

/// Phase excursion sampled every step_s over duration_s, starting at 0.
std::vector<double> drift_trace(const PhaseNoiseModel& noise, double duration_s, double step_s,
                                std::uint64_t seed, double detuning_hz = 0.0);

}  // namespace homscope
