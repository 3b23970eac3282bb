#pragma once

// Run configuration shared by every command: one JSON document merging the
// model, apparatus, noise, sample and output settings.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "homscope/acquisition.hpp"
#include "homscope/detectors.hpp"
#include "homscope/inference.hpp"
#include "homscope/model.hpp"

namespace homscope {

struct SampleSpec {
  std::string kind = "ket";  // "ket", "flat" or "file"
  std::string path;          // height CSV when kind == "file"
  double step_height_m = 4.6e-6;
  int width_px = 78;
  int height_px = 27;
  double pixel_pitch_m = 15e-6;
  std::optional<double> substrate_delay_s;  // default: quadrature placement
};

struct ScanSettings {
  std::optional<double> grid_step_s;
  std::optional<std::pair<double, double>> window_s;
  double edge_blend = 0.0;
  std::string calibration_path;  // calibration JSON; empty uses the true efficiencies
  unsigned threads = 0;
};

struct DipSettings {
  double delay_lo_s = -1.0e-12;
  double delay_hi_s = 1.0e-12;
  int points = 201;
};

struct PrecisionSettings {
  std::string mode = "step";  // "step" or "single-pixel"
  std::vector<double> detunings_hz{3.4e12, 7.4e12};
  double step_height_m = 4.6e-6;
  int pixels_per_step = 200;
  int repeats = 500;
  int block_size = 50;
  int histogram_bins = 40;
};

struct PlanningSettings {
  double prior_lo_m = 0.0;
  double prior_hi_m = 40e-6;
  double target_sigma_m = 0.5e-6;
  double max_pairs_per_pass = 1e5;
  double min_pairs_per_pass = 100;
  std::optional<double> detected_pair_rate_hz;  // default: expected rate of the acquisition settings
  std::vector<double> available_detunings_hz;   // empty: default ladder
};

struct RunConfig {
  InterferenceParams interference;
  AcquisitionConfig acquisition;
  DetectorBank detectors;
  PhaseNoiseModel phase_noise;
  DepthMapping depth;
  SampleSpec sample;
  ScanSettings scan;
  DipSettings dip;
  PrecisionSettings precision;
  PlanningSettings planning;
  std::string output_dir = "homscope_out";
  std::uint64_t seed = 1;
  std::string base_dir = ".";  // relative paths resolve against this

  /// Every violated constraint, one line each.
  std::vector<std::string> problems() const;
  /// Throws Error(config) listing problems().
  void validate() const;
  std::string resolve(const std::string& path) const;
};

/// Parses a RunConfig document. Unknown keys, wrong types and out-of-range
/// values are collected and reported together as one config error.
RunConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

/// Fully resolved configuration, suitable for embedding in output artifacts.
std::string config_to_json(const RunConfig& config);

}  // namespace homscope
