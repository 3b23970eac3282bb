#pragma once

// The experiments exposed on the command line. Each command reads a resolved
// RunConfig and writes its artifacts into config.output_dir.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "homscope/config.hpp"
#include "homscope/error.hpp"
#include "homscope/scene.hpp"

namespace homscope {

/// Process exit status for an error kind: 2 configuration, 3 data, 4 infeasible plan.
int exit_code(ErrorKind kind);

struct CommandResult {
  std::vector<std::string> files;  // artifacts written, in order
  std::string message;             // one-line human summary
};

struct DipOptions {
  std::optional<bool> degenerate;
  std::optional<double> delay_lo_s;
  std::optional<double> delay_hi_s;
  std::optional<int> points;
};

/// dip.csv: delay_s, p11_model, p11_est, n11, n20, n02, sigma.
CommandResult run_dip(const RunConfig& config, const DipOptions& options = {});

/// Sample described by the config (generated glyph, flat plate or CSV file),
/// with the substrate delay resolved.
SampleMap build_sample(const RunConfig& config);
ScanOptions scan_options(const RunConfig& config);

/// Depth-image matrices, preview and summary.json. An optional plan file
/// switches to a coarse-to-fine multi-pass scan.
CommandResult run_image(const RunConfig& config, const std::string& sample_path = {},
                        const std::string& plan_path = {});

/// precision.csv plus one histogram CSV per detuning.
CommandResult run_precision(const RunConfig& config, const std::optional<std::string>& mode = {},
                            const std::optional<std::vector<double>>& detunings_hz = {});

/// Simulates exactly `pairs` emitted pairs far outside the dip and writes
/// calibration.json (detector format) and calibration_run.json.
CommandResult run_calibrate(const RunConfig& config, std::uint64_t pairs);

/// plan.json; throws PlanningError when the target is out of reach.
CommandResult run_plan(const RunConfig& config, std::optional<double> prior_lo_m = {},
                       std::optional<double> prior_hi_m = {},
                       std::optional<double> target_sigma_m = {});

/// Writes the configured sample as CSV plus JSON sidecar.
CommandResult run_make_sample(const RunConfig& config, const std::string& csv_path);

ScanPlan plan_from_json(const std::string& text);
std::string plan_to_json(const ScanPlan& plan);

}  // namespace homscope
