#include "homscope/model.hpp"

#include <cmath>
#include <string>

#include "homscope/error.hpp"

namespace homscope {

void InterferenceParams::validate() const {
  require(std::isfinite(visibility) && visibility >= 0.0 && visibility <= 1.0,
          "visibility must lie in [0, 1], got " + std::to_string(visibility));
  require(std::isfinite(temporal_width_s) && temporal_width_s > 0.0,
          "temporal width must be positive");
  require(std::isfinite(detuning_hz) && detuning_hz >= 0.0, "detuning must be non-negative");
  require(std::isfinite(phase_rad), "phase must be finite");
  require(!degenerate || detuning_hz == 0.0, "degenerate model requires zero detuning");
}

std::string_view to_string(DelayConvention c) {
  return c == DelayConvention::paper_nd ? "paper_nd" : "differential_n_minus_medium";
}

DelayConvention delay_convention_from_string(std::string_view s) {
  if (s == "paper_nd") return DelayConvention::paper_nd;
  if (s == "differential_n_minus_medium" || s == "differential") return DelayConvention::differential;
  fail(ErrorKind::parameter, "unknown delay convention '" + std::string(s) + "'");
}

namespace {

// Triangle envelope 1 - |2t/tau|, zero outside.
double envelope(double t, double tau) {
  const double x = std::abs(2.0 * t / tau);
  return x < 1.0 ? 1.0 - x : 0.0;
}

}  // namespace

double p11_unchecked(double t, const InterferenceParams& p, double extra_phase) {
  const double env = envelope(t, p.temporal_width_s);
  if (env == 0.0) return 0.5;
  if (p.degenerate) return 0.5 * (1.0 - p.visibility * env);
  const double fringe = std::cos(2.0 * kPi * p.detuning_hz * t + p.phase_rad + extra_phase);
  return 0.5 * (1.0 - p.visibility * env * fringe);
}

double p11_degenerate(double t, const InterferenceParams& params) {
  params.validate();
  InterferenceParams p = params;
  p.degenerate = true;
  return p11_unchecked(t, p);
}

double p11_two_colour(double t, const InterferenceParams& params) {
  params.validate();
  InterferenceParams p = params;
  p.degenerate = false;
  return p11_unchecked(t, p);
}

double p11(double t, const InterferenceParams& params) {
  params.validate();
  return p11_unchecked(t, params);
}

double p11_derivative(double t, const InterferenceParams& p) {
  p.validate();
  const double tau = p.temporal_width_s;
  const double x = 2.0 * t / tau;
  // Right-hand derivative: the envelope is flat from x = 1 onward and rising
  // with slope 2/tau on [-1, 0).
  if (x >= 1.0 || x < -1.0) return 0.0;
  const double env = 1.0 - std::abs(x);
  const double denv = (t >= 0.0 ? -2.0 : 2.0) / tau;
  if (p.degenerate) return -0.5 * p.visibility * denv;
  const double w = 2.0 * kPi * p.detuning_hz;
  const double arg = w * t + p.phase_rad;
  return -0.5 * p.visibility * (denv * std::cos(arg) - env * w * std::sin(arg));
}

OutcomeProbabilities outcome_probabilities_from_p11(double p11) {
  const double bunch = 0.5 * (1.0 - p11);
  return {p11, bunch, bunch};
}

OutcomeProbabilities outcome_probabilities(double t, const InterferenceParams& params) {
  return outcome_probabilities_from_p11(p11(t, params));
}

double detuning_from_wavelengths(double center, double delta) {
  require(std::isfinite(center) && center > 0.0, "centre wavelength must be positive");
  require(std::isfinite(delta) && delta >= 0.0, "wavelength separation must be non-negative");
  return kSpeedOfLight * delta / (center * center);
}

namespace {

double index_contrast(double n, double medium, DelayConvention convention) {
  require(n >= 1.0, "refractive index must be >= 1");
  require(medium > 0.0, "medium index must be positive");
  return convention == DelayConvention::paper_nd ? n : n - medium;
}

}  // namespace

double delay_from_sample(const OpticalSample& s, DelayConvention convention) {
  require(s.thickness_m >= 0.0, "thickness must be non-negative");
  return index_contrast(s.refractive_index, s.medium_index, convention) * s.thickness_m /
         kSpeedOfLight;
}

double thickness_from_delay(double delay_s, double n, double medium, DelayConvention convention) {
  const double k = index_contrast(n, medium, convention);
  require(k > 0.0, "differential convention needs n > medium index");
  return delay_s * kSpeedOfLight / k;
}

double fringe_half_period_path(double detuning_hz) {
  require(detuning_hz > 0.0, "fringe period undefined at zero detuning");
  return kSpeedOfLight / (2.0 * detuning_hz);
}

double fringe_half_period_delay(double detuning_hz) {
  require(detuning_hz > 0.0, "fringe period undefined at zero detuning");
  return 1.0 / (2.0 * detuning_hz);
}

}  // namespace homscope
