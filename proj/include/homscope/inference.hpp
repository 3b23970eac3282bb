#pragma once

// Fisher information, Cramer-Rao bounds, maximum-likelihood delay estimation
// and the precision statistics built on top of it.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "homscope/detectors.hpp"
#include "homscope/model.hpp"

namespace homscope {

enum class DerivativeMode { analytic, finite_difference };

/// Per-pair Fisher information about the delay, in s^-2.
struct FisherValue {
  double value = 0.0;
  bool unbounded = false;  // some outcome has P = 0 with non-zero slope
};

FisherValue fisher_information(double delay_s, const InterferenceParams& params,
                               DerivativeMode mode = DerivativeMode::analytic);

/// How delays map onto sample thickness.
struct DepthMapping {
  double refractive_index = 1.58;
  double medium_index = 1.0;
  DelayConvention convention = DelayConvention::paper_nd;
  double reference_delay_s = 0.0;  // delay that maps to zero thickness

  double depth_from_delay(double delay_s) const;
  double delay_from_depth(double depth_m) const;
  /// Linear scale for uncertainties: sigma_d = scale * sigma_t.
  double depth_per_delay() const;
};

enum class InformationStatus { finite, degenerate, uninformative };

struct FisherReport {
  double fisher_per_pair = 0.0;    // s^-2
  double n_pairs = 0.0;
  double total_information = 0.0;  // N F, s^-2
  double crb_sigma_t = 0.0;        // s
  double crb_sigma_d = 0.0;        // m
  InformationStatus status = InformationStatus::finite;
};

FisherReport crb_report(double delay_s, const InterferenceParams& params, double n_pairs,
                        const DepthMapping& mapping = {});

/// Bound for a given total information N F (s^-2).
FisherReport crb_from_total_information(double total_information, double n_pairs,
                                        const DepthMapping& mapping = {});

struct PixelEstimate {
  double delay_s = 0.0;
  double sigma_s = 0.0;
  double depth_m = 0.0;
  int fringe_index = 0;
  double log_likelihood = 0.0;
  double n_pairs_used = 0.0;
};

struct MleOptions {
  double window_lo_s = 0.0;
  double window_hi_s = 0.0;
  std::optional<double> grid_step_s;    // default: fringe half-period / 400
  std::optional<int> fringe_hint;       // restrict the search to this branch
  std::optional<double> prior_delay_s;  // pick the candidate nearest to this
  double ambiguity_margin = 5.0;        // log-likelihood units
  DepthMapping mapping;
};

/// Fringe branch k covers cos-argument [k pi, (k+1) pi]; for the degenerate
/// dip branch 0 is t >= 0 and branch -1 is t < 0.
int fringe_branch(double delay_s, const InterferenceParams& params);
std::pair<double, double> branch_window(int branch, const InterferenceParams& params);

/// Delay of the fringe quadrature point (cos-argument pi/2 + k pi) closest to zero delay.
double nearest_quadrature_delay(const InterferenceParams& params);

double log_likelihood(double delay_s, const OutcomeCounts& counts, const InterferenceParams& params);

/// Multinomial MLE of the delay. Dense grid over the window, then golden-section
/// refinement; sigma from the observed information at the optimum.
PixelEstimate mle_delay(const OutcomeCounts& counts, const InterferenceParams& params,
                        const MleOptions& options);

/// Uses the calibrated outcome proportions rescaled to the detected pair count,
/// so the likelihood curvature reflects the photons actually recorded.
PixelEstimate mle_delay(const CoincidenceTally& calibrated, const InterferenceParams& params,
                        const MleOptions& options);

/// Unbiased sample variance.
double sample_variance(std::span<const double> values);

/// sqrt(var(S1) + var(S2)) on depth values.
double two_step_precision(std::span<const double> depths_s1, std::span<const double> depths_s2);
double two_step_precision(std::span<const PixelEstimate> s1, std::span<const PixelEstimate> s2);

struct BlockPrecision {
  double mean = 0.0;    // mean of per-block standard deviations
  double error_bar = 0.0; // standard deviation across blocks
  std::size_t blocks = 0;
};

BlockPrecision block_precision(std::span<const double> values, std::size_t block_size = 50);

struct PlanRequest {
  double prior_lo_m = 0.0;
  double prior_hi_m = 0.0;
  double target_sigma_m = 0.5e-6;
  InterferenceParams params;  // visibility and width; detuning/phase are chosen per pass
  DepthMapping mapping;
  std::vector<double> available_detunings_hz;  // empty: 0.1 THz ladder up to 30.1 THz
  double max_pairs_per_pass = 1e5;
  double min_pairs_per_pass = 100;             // below this the CRB is not a usable sigma
  double detected_pair_rate_hz = 8000.0;       // converts pair counts to dwell
};

struct ScanPass {
  double detuning_hz = 0.0;
  double n_pairs = 0.0;
  double dwell_s = 0.0;
  double expected_sigma_m = 0.0;
  double half_period_depth_m = 0.0;
};

struct ScanPlan {
  std::vector<ScanPass> passes;
};

std::vector<double> default_detuning_ladder();

/// Coarse-to-fine detuning schedule. The first pass holds the prior range, centred
/// on quadrature, inside one monotone stretch of the fringe. Each later pass uses a detuning
/// whose half-period (in depth) exceeds five times the previous pass's sigma.
/// Among admissible schedules the total pair count is minimised (ties go to the
/// larger detuning), with every pass holding at least min_pairs_per_pass.
/// Throws PlanningError carrying the best reachable sigma when infeasible.
ScanPlan plan_coarse_to_fine(const PlanRequest& request);

}  // namespace homscope
