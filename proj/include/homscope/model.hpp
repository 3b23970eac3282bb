#pragma once

// Closed-form two-photon interference probabilities and the delay/thickness
// relations used throughout the toolkit. All delays are in seconds.

#include <string_view>

namespace homscope {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

struct InterferenceParams {
  double detuning_hz = 0.0;         // signal-idler frequency difference
  double temporal_width_s = 1e-12;  // photon temporal width (dip full width)
  double visibility = 0.95;
  double phase_rad = 0.0;           // relative phase of the two-colour sub-states
  bool degenerate = false;          // triangle dip without beat note

  void validate() const;
};

struct OutcomeProbabilities {
  double p11 = 0.5;  // one photon per output arm
  double p20 = 0.25; // both photons in arm C
  double p02 = 0.25; // both photons in arm D
};

enum class DelayConvention {
  paper_nd,      // t = n d / c
  differential,  // t = (n - n_medium) d / c
};

std::string_view to_string(DelayConvention c);
DelayConvention delay_convention_from_string(std::string_view s);

struct OpticalSample {
  double thickness_m = 0.0;
  double refractive_index = 1.58;
  double medium_index = 1.0;
};

/// Triangle HOM dip: 1/2 [1 - a (1 - |2t/tau|)] inside the envelope, 1/2 outside.
double p11_degenerate(double delay_s, const InterferenceParams& params);

/// Dip envelope modulated by cos(2 pi dnu t + phi).
double p11_two_colour(double delay_s, const InterferenceParams& params);

/// Dispatches on params.degenerate.
double p11(double delay_s, const InterferenceParams& params);

/// Same as p11() with an extra phase added to params.phase_rad (phase-noise path).
/// Skips parameter validation; callers validate once up front.
double p11_unchecked(double delay_s, const InterferenceParams& params, double extra_phase_rad = 0.0);

/// Analytic dP11/dt. At the envelope kink (t = 0) and edges (|2t/tau| = 1) the
/// right-hand derivative is returned.
double p11_derivative(double delay_s, const InterferenceParams& params);

OutcomeProbabilities outcome_probabilities(double delay_s, const InterferenceParams& params);
OutcomeProbabilities outcome_probabilities_from_p11(double p11);

/// First-order conversion about the degenerate centre: dnu = c dlambda / lambda^2.
double detuning_from_wavelengths(double center_wavelength_m, double delta_wavelength_m);

double delay_from_sample(const OpticalSample& sample, DelayConvention convention);

double thickness_from_delay(double delay_s, double refractive_index, double medium_index,
                            DelayConvention convention);

/// Half of the beat period expressed as optical path: c / (2 dnu).
double fringe_half_period_path(double detuning_hz);

/// Half of the beat period in delay units: 1 / (2 dnu). The unambiguous search width.
double fringe_half_period_delay(double detuning_hz);

}  // namespace homscope
