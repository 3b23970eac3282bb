#pragma once

// Synthetic semi-transparent samples, raster scanning and the imaging and
// precision experiments assembled from the lower layers.

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

struct SampleMap {
  int width_px = 78;
  int height_px = 27;
  double pixel_pitch_m = 15e-6;
  std::vector<double> height_m;  // row-major, height_px rows of width_px
  double refractive_index = 1.58;
  double substrate_delay_s = 0.0;

  void validate() const;
  double at(int row, int col) const { return height_m[static_cast<std::size_t>(row) * width_px + col]; }
  std::size_t size() const { return height_m.size(); }
};

/// Two-level "|K>" glyph of the given step height on a rows x cols grid.
SampleMap make_ket_sample(double step_height_m, double refractive_index = 1.58, int width_px = 78,
                          int height_px = 27);

/// Substrate delay placing the middle of the map's delay range on the fringe
/// quadrature point nearest zero delay.
double quadrature_substrate_delay(const SampleMap& map, const InterferenceParams& params,
                                  DelayConvention convention, double medium_index = 1.0);

enum class PixelStatus { ok, non_identifiable, ambiguous };

std::string_view to_string(PixelStatus s);

struct PixelResult {
  PixelEstimate estimate;
  PixelStatus status = PixelStatus::ok;
  double true_delay_s = 0.0;
  double detected_pairs = 0.0;
};

struct DepthImage {
  int width_px = 0;
  int height_px = 0;
  std::vector<PixelResult> pixels;  // row-major scan order
  double detuning_hz = 0.0;
  double dwell_s = 0.0;
  std::uint64_t seed = 0;
  DelayConvention convention = DelayConvention::paper_nd;
  double refractive_index = 1.58;
  double medium_index = 1.0;
  std::string scan_order = "row-major";
  int passes = 1;

  const PixelResult& at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width_px + col];
  }
};

struct ScanOptions {
  DelayConvention convention = DelayConvention::paper_nd;
  double medium_index = 1.0;
  /// Heralding efficiencies used for calibration; defaults to the bank's true
  /// efficiencies times the arm transmission.
  std::optional<CalibrationData> calibration;
  /// Explicit search window; defaults to the fringe branch holding the map's mid delay.
  std::optional<std::pair<double, double>> window;
  std::optional<double> grid_step_s;
  /// Fraction of a pixel's area seeing its first differing 4-neighbour (0 = off).
  double edge_blend = 0.0;
  unsigned threads = 0;
};

DepthImage raster_scan(const SampleMap& map, const InterferenceParams& params,
                       const AcquisitionConfig& config, const DetectorBank& bank,
                       const PhaseNoiseModel& noise, const ScanOptions& options = {});

/// Multi-pass scan: each pass after the first searches within one half-period
/// around the previous pass's per-pixel estimate. Returns the final pass.
DepthImage raster_scan(const SampleMap& map, const ScanPlan& plan, const InterferenceParams& params,
                       const AcquisitionConfig& config, const DetectorBank& bank,
                       const PhaseNoiseModel& noise, const ScanOptions& options = {});

struct StepStatistics {
  std::string split;  // "height" or "checkerboard" (flat sample)
  std::size_t s1_pixels = 0;
  std::size_t s2_pixels = 0;
  double mean_s1_m = 0.0;
  double mean_s2_m = 0.0;
  double step_estimate_m = 0.0;
  double two_step_sigma_m = 0.0;  // NaN when a group has fewer than two pixels
  std::size_t ambiguous_pixels = 0;
  std::size_t non_identifiable_pixels = 0;
  double mean_detected_pairs = 0.0;
};

/// S1 = pixels above the mid height, S2 = the rest; flat maps split as a checkerboard.
StepStatistics step_statistics(const DepthImage& image, const SampleMap& map);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> s1;
  std::vector<std::size_t> s2;
};

Histogram make_histogram(const std::vector<double>& s1, const std::vector<double>& s2, int bins);

struct StepRow {
  double detuning_hz = 0.0;
  double sigma_d_m = 0.0;   // two-step precision
  double sigma_t_s = 0.0;
  double crb_sigma_t_s = 0.0;  // sqrt(CRB_S1^2 + CRB_S2^2) at the mean pair count
  double n_fisher_total = 0.0; // mean N F over both steps, s^-2
  double sd_s1_m = 0.0;
  double sd_s2_m = 0.0;
  double step_estimate_m = 0.0;
  double n_pairs_mean = 0.0;
  std::size_t failed_pixels = 0;
  std::vector<double> depths_s1;
  std::vector<double> depths_s2;
  Histogram histogram;
};

struct ExperimentOptions {
  ScanOptions scan;
  int histogram_bins = 40;
};

/// For each detuning scans pixels_per_step pixels on each of two steps, with the
/// pair placed symmetrically about the quadrature point nearest zero delay.
std::vector<StepRow> step_experiment(double step_height_m, const std::vector<double>& detunings_hz,
                                     int pixels_per_step, const InterferenceParams& params,
                                     const AcquisitionConfig& config, const DetectorBank& bank,
                                     const PhaseNoiseModel& noise,
                                     double refractive_index = 1.58,
                                     const ExperimentOptions& options = {});

struct SweepRow {
  double detuning_hz = 0.0;
  double operating_delay_s = 0.0;
  double n_pairs_mean = 0.0;
  double fisher_per_pair = 0.0;
  double n_fisher_total = 0.0;
  double crb_sigma_t_s = 0.0;
  double crb_sigma_d_m = 0.0;
  double sigma_t_s = 0.0;      // mean of block standard deviations
  double sigma_t_err_s = 0.0;  // spread across blocks
  double sigma_d_m = 0.0;
  std::size_t blocks = 0;
  std::size_t failed = 0;
  std::vector<double> delays_s;
};

/// Repeated single-pixel estimation at the quadrature point nearest zero delay.
std::vector<SweepRow> single_pixel_sweep(const std::vector<double>& detunings_hz, int repeats,
                                         int block_size, const InterferenceParams& params,
                                         const AcquisitionConfig& config, const DetectorBank& bank,
                                         const PhaseNoiseModel& noise,
                                         const DepthMapping& mapping = {},
                                         const ScanOptions& options = {});

}  // namespace homscope
