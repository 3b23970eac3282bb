#include "homscope/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "homscope/error.hpp"
#include "homscope/parallel.hpp"
#include "homscope/random.hpp"

namespace homscope {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double dist_to_segment(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double u = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  const double ex = ax + u * dx - px, ey = ay + u * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

struct Segment {
  double ax, ay, bx, by;
};

DepthMapping mapping_for(const SampleMap& map, const ScanOptions& options) {
  DepthMapping m;
  m.refractive_index = map.refractive_index;
  m.medium_index = options.medium_index;
  m.convention = options.convention;
  m.reference_delay_s = map.substrate_delay_s;
  return m;
}

// The mapping's reference delay is the substrate delay, so zero height maps onto it.
double true_delay(const SampleMap& map, std::size_t idx, const DepthMapping& m) {
  return m.delay_from_depth(map.height_m[idx]);
}

CalibrationData resolve_calibration(const ScanOptions& options, const AcquisitionConfig& config,
                                    const DetectorBank& bank) {
  if (options.calibration) return *options.calibration;
  CalibrationData cal;
  cal.splitter_ratios = bank.splitter_ratios;
  for (int k = 0; k < kChannels; ++k)
    cal.efficiencies[k] =
        bank.efficiencies[k] * (k < kChannelsPerArm ? config.transmission_d() : config.transmission_c());
  return cal;
}

double mid_delay(const SampleMap& map, const DepthMapping& m) {
  const auto [lo, hi] = std::minmax_element(map.height_m.begin(), map.height_m.end());
  return m.delay_from_depth(0.5 * (*lo + *hi));
}

PixelResult failed_pixel(PixelStatus status, double t_true, double detected) {
  PixelResult r;
  r.status = status;
  r.true_delay_s = t_true;
  r.detected_pairs = detected;
  r.estimate.delay_s = kNaN;
  r.estimate.sigma_s = kNaN;
  r.estimate.depth_m = kNaN;
  r.estimate.log_likelihood = kNaN;
  r.estimate.n_pairs_used = detected;
  return r;
}

PixelResult estimate_pixel(const CoincidenceTally& raw, double t_true, const InterferenceParams& params,
                           const CalibrationData& cal, const MleOptions& mle) {
  const double detected = static_cast<double>(raw.raw_total());
  if (raw.raw_total() == 0) return failed_pixel(PixelStatus::non_identifiable, t_true, detected);
  try {
    const CoincidenceTally tally = calibrate_tally(raw, cal.efficiencies, cal.splitter_ratios);
    PixelResult r;
    r.estimate = mle_delay(tally, params, mle);
    r.true_delay_s = t_true;
    r.detected_pairs = detected;
    return r;
  } catch (const AmbiguityError&) {
    return failed_pixel(PixelStatus::ambiguous, t_true, detected);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::non_identifiable) throw;
    return failed_pixel(PixelStatus::non_identifiable, t_true, detected);
  }
}

// Index of the first 4-neighbour (up, left, right, down) with a different height.
std::optional<std::size_t> differing_neighbour(const SampleMap& map, int r, int c) {
  const double h = map.at(r, c);
  const int dr[] = {-1, 0, 0, 1};
  const int dc[] = {0, -1, 1, 0};
  for (int k = 0; k < 4; ++k) {
    const int rr = r + dr[k], cc = c + dc[k];
    if (rr < 0 || cc < 0 || rr >= map.height_px || cc >= map.width_px) continue;
    if (map.at(rr, cc) != h) return static_cast<std::size_t>(rr) * map.width_px + cc;
  }
  return std::nullopt;
}

DepthImage scan_pass(const SampleMap& map, const InterferenceParams& params,
                     const AcquisitionConfig& config, const DetectorBank& bank,
                     const PhaseNoiseModel& noise, const ScanOptions& options,
                     const std::vector<PixelResult>* previous) {
  map.validate();
  params.validate();
  config.validate();
  bank.validate();
  noise.validate();
  require(options.edge_blend >= 0.0 && options.edge_blend <= 1.0, "edge blend must lie in [0, 1]");

  const DepthMapping mapping = mapping_for(map, options);
  const CalibrationData cal = resolve_calibration(options, config, bank);

  MleOptions base;
  base.mapping = mapping;
  base.grid_step_s = options.grid_step_s;
  if (options.window) {
    base.window_lo_s = options.window->first;
    base.window_hi_s = options.window->second;
  } else {
    const auto w = branch_window(fringe_branch(mid_delay(map, mapping), params), params);
    base.window_lo_s = w.first;
    base.window_hi_s = w.second;
  }
  const double half = params.degenerate || params.detuning_hz == 0.0
                          ? 0.5 * params.temporal_width_s
                          : fringe_half_period_delay(params.detuning_hz);

  DepthImage image;
  image.width_px = map.width_px;
  image.height_px = map.height_px;
  image.detuning_hz = params.detuning_hz;
  image.dwell_s = config.dwell_s;
  image.seed = config.seed;
  image.convention = options.convention;
  image.refractive_index = map.refractive_index;
  image.medium_index = options.medium_index;
  image.pixels.resize(map.size());

  parallel_for(
      map.size(),
      [&](std::size_t idx) {
        const int r = static_cast<int>(idx / map.width_px);
        const int c = static_cast<int>(idx % map.width_px);
        const double t = true_delay(map, idx, mapping);
        AcquisitionConfig pc = config;
        pc.seed = derive_seed(config.seed, idx);

        CoincidenceTally raw;
        std::optional<std::size_t> nb;
        if (options.edge_blend > 0.0) nb = differing_neighbour(map, r, c);
        if (nb)
          raw = sample_pixel_blend(t, true_delay(map, *nb, mapping), options.edge_blend, params, pc,
                                   bank, noise);
        else
          raw = sample_pixel(t, params, pc, bank, noise);

        if (previous && (*previous)[idx].status != PixelStatus::ok) {
          image.pixels[idx] = failed_pixel((*previous)[idx].status, t,
                                           static_cast<double>(raw.raw_total()));
          return;
        }
        MleOptions mle = base;
        if (previous) {
          const double prior = (*previous)[idx].estimate.delay_s;
          mle.window_lo_s = prior - 0.5 * half;
          mle.window_hi_s = prior + 0.5 * half;
          mle.prior_delay_s = prior;
        }
        image.pixels[idx] = estimate_pixel(raw, t, params, cal, mle);
      },
      options.threads);
  return image;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  return v.size() < 2 ? kNaN : std::sqrt(sample_variance(v));
}

}  // namespace

void SampleMap::validate() const {
  require(width_px >= 1 && height_px >= 1, "sample map dimensions must be at least 1");
  require(height_m.size() == static_cast<std::size_t>(width_px) * height_px,
          "sample map height count does not match its dimensions");
  for (double h : height_m) require(std::isfinite(h) && h >= 0.0, "sample heights must be non-negative");
  require(std::isfinite(pixel_pitch_m) && pixel_pitch_m > 0.0, "pixel pitch must be positive");
  require(refractive_index >= 1.0, "refractive index must be at least 1");
  require(std::isfinite(substrate_delay_s), "substrate delay must be finite");
}

SampleMap make_ket_sample(double step_height_m, double refractive_index, int width_px,
                          int height_px) {
  require(std::isfinite(step_height_m) && step_height_m >= 0.0, "step height must be non-negative");
  require(width_px >= 1 && height_px >= 1, "sample map dimensions must be at least 1");
  SampleMap map;
  map.width_px = width_px;
  map.height_px = height_px;
  map.refractive_index = refractive_index;
  map.height_m.assign(static_cast<std::size_t>(width_px) * height_px, 0.0);

  // Glyph drawn on a 78 x 27 design canvas and scaled to the grid.
  static const Segment strokes[] = {
      {7, 3, 7, 24},           // |
      {20, 3, 20, 24},         // K stem
      {21, 14, 36, 3},         // K upper arm
      {24, 11.5, 37, 24},      // K lower arm
      {50, 2.5, 68, 13.5},     // > upper
      {68, 13.5, 50, 24.5},    // > lower
  };
  constexpr double half_width = 2.6;
  const double sx = 78.0 / width_px, sy = 27.0 / height_px;
  for (int r = 0; r < height_px; ++r) {
    for (int c = 0; c < width_px; ++c) {
      const double x = (c + 0.5) * sx, y = (r + 0.5) * sy;
      for (const auto& s : strokes) {
        if (dist_to_segment(x, y, s.ax, s.ay, s.bx, s.by) <= half_width) {
          map.height_m[static_cast<std::size_t>(r) * width_px + c] = step_height_m;
          break;
        }
      }
    }
  }
  map.validate();
  return map;
}

double quadrature_substrate_delay(const SampleMap& map, const InterferenceParams& params,
                                  DelayConvention convention, double medium_index) {
  map.validate();
  DepthMapping m;
  m.refractive_index = map.refractive_index;
  m.medium_index = medium_index;
  m.convention = convention;
  const auto [lo, hi] = std::minmax_element(map.height_m.begin(), map.height_m.end());
  return nearest_quadrature_delay(params) - m.delay_from_depth(0.5 * (*lo + *hi));
}

std::string_view to_string(PixelStatus s) {
  switch (s) {
    case PixelStatus::ok: return "ok";
    case PixelStatus::non_identifiable: return "non_identifiable";
    case PixelStatus::ambiguous: return "ambiguous";
  }
  return "ok";
}

DepthImage raster_scan(const SampleMap& map, const InterferenceParams& params,
                       const AcquisitionConfig& config, const DetectorBank& bank,
                       const PhaseNoiseModel& noise, const ScanOptions& options) {
  return scan_pass(map, params, config, bank, noise, options, nullptr);
}

DepthImage raster_scan(const SampleMap& map, const ScanPlan& plan, const InterferenceParams& params,
                       const AcquisitionConfig& config, const DetectorBank& bank,
                       const PhaseNoiseModel& noise, const ScanOptions& options) {
  require(!plan.passes.empty(), "scan plan has no passes");
  DepthImage image;
  for (std::size_t k = 0; k < plan.passes.size(); ++k) {
    InterferenceParams p = params;
    p.detuning_hz = plan.passes[k].detuning_hz;
    p.degenerate = p.detuning_hz == 0.0 && params.degenerate;
    AcquisitionConfig c = config;
    c.dwell_s = plan.passes[k].dwell_s;
    c.seed = derive_seed(config.seed, 0x9a55ULL + k);
    ScanOptions o = options;
    if (k > 0) o.window.reset();
    image = scan_pass(map, p, c, bank, noise, o, k > 0 ? &image.pixels : nullptr);
  }
  image.seed = config.seed;
  image.passes = static_cast<int>(plan.passes.size());
  return image;
}

StepStatistics step_statistics(const DepthImage& image, const SampleMap& map) {
  require(image.width_px == map.width_px && image.height_px == map.height_px &&
              image.pixels.size() == map.size(),
          "depth image does not match the sample map");
  StepStatistics st;
  const auto [lo, hi] = std::minmax_element(map.height_m.begin(), map.height_m.end());
  const bool flat = !(*hi > *lo);
  const double mid = 0.5 * (*lo + *hi);
  st.split = flat ? "checkerboard" : "height";

  std::vector<double> s1, s2;
  double pairs = 0.0;
  for (int r = 0; r < map.height_px; ++r) {
    for (int c = 0; c < map.width_px; ++c) {
      const PixelResult& px = image.at(r, c);
      pairs += px.detected_pairs;
      if (px.status == PixelStatus::ambiguous) ++st.ambiguous_pixels;
      if (px.status == PixelStatus::non_identifiable) ++st.non_identifiable_pixels;
      if (px.status != PixelStatus::ok) continue;
      const bool upper = flat ? (r + c) % 2 == 0 : map.at(r, c) > mid;
      (upper ? s1 : s2).push_back(px.estimate.depth_m);
    }
  }
  st.s1_pixels = s1.size();
  st.s2_pixels = s2.size();
  st.mean_s1_m = mean_of(s1);
  st.mean_s2_m = mean_of(s2);
  st.step_estimate_m = st.mean_s1_m - st.mean_s2_m;
  st.two_step_sigma_m = s1.size() >= 2 && s2.size() >= 2 ? two_step_precision(s1, s2) : kNaN;
  st.mean_detected_pairs = pairs / static_cast<double>(map.size());
  return st;
}

Histogram make_histogram(const std::vector<double>& s1, const std::vector<double>& s2, int bins) {
  require(bins >= 1, "histogram needs at least one bin");
  Histogram h;
  h.s1.assign(static_cast<std::size_t>(bins), 0);
  h.s2.assign(static_cast<std::size_t>(bins), 0);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* v : {&s1, &s2})
    for (double x : *v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (!(lo <= hi)) return h;
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  h.lo = lo;
  h.hi = hi;
  auto fill = [&](const std::vector<double>& v, std::vector<std::size_t>& out) {
    for (double x : v) {
      auto k = static_cast<long>(std::floor((x - lo) / (hi - lo) * bins));
      out[static_cast<std::size_t>(std::clamp(k, 0L, static_cast<long>(bins) - 1))]++;
    }
  };
  fill(s1, h.s1);
  fill(s2, h.s2);
  return h;
}

std::vector<StepRow> step_experiment(double step_height_m, const std::vector<double>& detunings_hz,
                                     int pixels_per_step, const InterferenceParams& params,
                                     const AcquisitionConfig& config, const DetectorBank& bank,
                                     const PhaseNoiseModel& noise, double refractive_index,
                                     const ExperimentOptions& options) {
  require(!detunings_hz.empty(), "detuning list is empty");
  require(step_height_m > 0.0, "step height must be positive");
  if (pixels_per_step < 2)
    fail(ErrorKind::insufficient_data, "two-step precision needs at least two pixels per step");

  SampleMap map;
  map.width_px = pixels_per_step;
  map.height_px = 2;
  map.refractive_index = refractive_index;
  map.height_m.assign(static_cast<std::size_t>(2 * pixels_per_step), 0.0);
  std::fill(map.height_m.begin(), map.height_m.begin() + pixels_per_step, step_height_m);

  std::vector<StepRow> rows;
  for (std::size_t k = 0; k < detunings_hz.size(); ++k) {
    InterferenceParams p = params;
    p.detuning_hz = detunings_hz[k];
    p.degenerate = false;
    p.validate();
    require(p.detuning_hz > 0.0, "step experiment needs positive detunings");
    map.substrate_delay_s =
        quadrature_substrate_delay(map, p, options.scan.convention, options.scan.medium_index);
    AcquisitionConfig c = config;
    c.seed = derive_seed(config.seed, k);

    const DepthImage image = raster_scan(map, p, c, bank, noise, options.scan);
    const DepthMapping mapping = mapping_for(map, options.scan);

    StepRow row;
    row.detuning_hz = p.detuning_hz;
    double pairs[2] = {0, 0}, fisher[2] = {0, 0};
    for (int r = 0; r < 2; ++r) {
      for (int col = 0; col < pixels_per_step; ++col) {
        const PixelResult& px = image.at(r, col);
        pairs[r] += px.detected_pairs;
        if (px.status != PixelStatus::ok) {
          ++row.failed_pixels;
          continue;
        }
        (r == 0 ? row.depths_s1 : row.depths_s2).push_back(px.estimate.depth_m);
      }
      pairs[r] /= pixels_per_step;
      fisher[r] = fisher_information(image.at(r, 0).true_delay_s, p).value;
    }
    if (row.depths_s1.size() < 2 || row.depths_s2.size() < 2)
      fail(ErrorKind::insufficient_data,
           "too few identifiable pixels per step at detuning " + std::to_string(p.detuning_hz));
    row.sigma_d_m = two_step_precision(row.depths_s1, row.depths_s2);
    row.sigma_t_s = row.sigma_d_m / mapping.depth_per_delay();
    row.sd_s1_m = sd_of(row.depths_s1);
    row.sd_s2_m = sd_of(row.depths_s2);
    row.step_estimate_m = mean_of(row.depths_s1) - mean_of(row.depths_s2);
    row.n_pairs_mean = 0.5 * (pairs[0] + pairs[1]);
    const double nf1 = pairs[0] * fisher[0], nf2 = pairs[1] * fisher[1];
    row.n_fisher_total = 0.5 * (nf1 + nf2);
    row.crb_sigma_t_s = nf1 > 0.0 && nf2 > 0.0 ? std::sqrt(1.0 / nf1 + 1.0 / nf2) : kNaN;
    row.histogram = make_histogram(row.depths_s1, row.depths_s2, options.histogram_bins);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> single_pixel_sweep(const std::vector<double>& detunings_hz, int repeats,
                                         int block_size, const InterferenceParams& params,
                                         const AcquisitionConfig& config, const DetectorBank& bank,
                                         const PhaseNoiseModel& noise, const DepthMapping& mapping,
                                         const ScanOptions& options) {
  require(!detunings_hz.empty(), "detuning list is empty");
  require(repeats >= 1 && block_size >= 1, "repeats and block size must be positive");
  config.validate();
  bank.validate();
  noise.validate();

  CalibrationData cal = resolve_calibration(options, config, bank);
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < detunings_hz.size(); ++k) {
    InterferenceParams p = params;
    p.detuning_hz = detunings_hz[k];
    p.degenerate = false;
    p.validate();
    require(p.detuning_hz > 0.0, "single-pixel sweep needs positive detunings");

    const double t_op = nearest_quadrature_delay(p);
    MleOptions mle;
    mle.mapping = mapping;
    mle.grid_step_s = options.grid_step_s;
    const auto w = options.window ? *options.window : branch_window(fringe_branch(t_op, p), p);
    mle.window_lo_s = w.first;
    mle.window_hi_s = w.second;

    const std::uint64_t seed_k = derive_seed(config.seed, k);
    std::vector<PixelResult> trials(static_cast<std::size_t>(repeats));
    parallel_for(
        trials.size(),
        [&](std::size_t i) {
          AcquisitionConfig c = config;
          c.seed = derive_seed(seed_k, i);
          trials[i] = estimate_pixel(sample_pixel(t_op, p, c, bank, noise), t_op, p, cal, mle);
        },
        options.threads);

    SweepRow row;
    row.detuning_hz = p.detuning_hz;
    row.operating_delay_s = t_op;
    double pairs = 0.0;
    for (const auto& tr : trials) {
      pairs += tr.detected_pairs;
      if (tr.status == PixelStatus::ok)
        row.delays_s.push_back(tr.estimate.delay_s);
      else
        ++row.failed;
    }
    row.n_pairs_mean = pairs / static_cast<double>(trials.size());
    row.fisher_per_pair = fisher_information(t_op, p).value;
    const FisherReport crb =
        crb_from_total_information(row.n_pairs_mean * row.fisher_per_pair, row.n_pairs_mean, mapping);
    row.n_fisher_total = crb.total_information;
    row.crb_sigma_t_s = crb.crb_sigma_t;
    row.crb_sigma_d_m = crb.crb_sigma_d;

    const std::size_t usable =
        row.delays_s.size() / static_cast<std::size_t>(block_size) * static_cast<std::size_t>(block_size);
    const BlockPrecision bp = block_precision(
        std::span<const double>(row.delays_s.data(), usable), static_cast<std::size_t>(block_size));
    row.sigma_t_s = bp.mean;
    row.sigma_t_err_s = bp.error_bar;
    row.blocks = bp.blocks;
    row.sigma_d_m = bp.mean * mapping.depth_per_delay();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace homscope
