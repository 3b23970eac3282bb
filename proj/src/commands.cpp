#include "homscope/commands.hpp"

#include <cmath>
#include <filesystem>
#include <limits>

#include <json.hpp>

#include "homscope/acquisition.hpp"
#include "homscope/io.hpp"
#include "homscope/random.hpp"

namespace homscope {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string out_path(const RunConfig& c, const std::string& name) {
  return (fs::path(c.resolve(c.output_dir)) / name).string();
}

json embedded_config(const RunConfig& c) { return json::parse(config_to_json(c)); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

CalibrationData derived_calibration(const RunConfig& c) {
  CalibrationData cal;
  cal.splitter_ratios = c.detectors.splitter_ratios;
  for (int k = 0; k < kChannels; ++k)
    cal.efficiencies[k] = c.detectors.efficiencies[k] *
                          (k < kChannelsPerArm ? c.acquisition.transmission_d()
                                               : c.acquisition.transmission_c());
  return cal;
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter:
    case ErrorKind::config: return 2;
    case ErrorKind::non_identifiable:
    case ErrorKind::ambiguous:
    case ErrorKind::insufficient_data:
    case ErrorKind::calibration:
    case ErrorKind::io: return 3;
    case ErrorKind::planning: return 4;
  }
  return 1;
}

ScanOptions scan_options(const RunConfig& c) {
  ScanOptions o;
  o.convention = c.depth.convention;
  o.medium_index = c.depth.medium_index;
  if (!c.scan.calibration_path.empty()) {
    const std::string path = c.resolve(c.scan.calibration_path);
    std::string text;
    try {
      text = read_file(path);
    } catch (const Error&) {
      fail(ErrorKind::config, "calibration file not found: " + path);
    }
    o.calibration = calibration_from_json(text);
  }
  o.window = c.scan.window_s;
  o.grid_step_s = c.scan.grid_step_s;
  o.edge_blend = c.scan.edge_blend;
  o.threads = c.scan.threads;
  return o;
}

SampleMap build_sample(const RunConfig& c) {
  SampleMap map;
  bool has_substrate = false;
  if (c.sample.kind == "file") {
    map = load_sample_map(c.resolve(c.sample.path));
    has_substrate = fs::exists(sidecar_path(c.resolve(c.sample.path)));
  } else if (c.sample.kind == "flat") {
    map.width_px = c.sample.width_px;
    map.height_px = c.sample.height_px;
    map.refractive_index = c.depth.refractive_index;
    map.height_m.assign(static_cast<std::size_t>(map.width_px) * map.height_px, c.sample.step_height_m);
  } else {
    map = make_ket_sample(c.sample.step_height_m, c.depth.refractive_index, c.sample.width_px,
                          c.sample.height_px);
  }
  if (c.sample.kind != "file") map.pixel_pitch_m = c.sample.pixel_pitch_m;
  if (c.sample.substrate_delay_s)
    map.substrate_delay_s = *c.sample.substrate_delay_s;
  else if (!has_substrate)
    map.substrate_delay_s =
        quadrature_substrate_delay(map, c.interference, c.depth.convention, c.depth.medium_index);
  map.validate();
  return map;
}

CommandResult run_dip(const RunConfig& config, const DipOptions& options) {
  RunConfig c = config;
  if (options.degenerate) {
    c.interference.degenerate = *options.degenerate;
    if (*options.degenerate) {
      c.interference.detuning_hz = 0.0;
      c.interference.phase_rad = 0.0;
    }
  }
  if (options.delay_lo_s) c.dip.delay_lo_s = *options.delay_lo_s;
  if (options.delay_hi_s) c.dip.delay_hi_s = *options.delay_hi_s;
  if (options.points) c.dip.points = *options.points;
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }

  std::vector<double> delays(static_cast<std::size_t>(c.dip.points));
  for (int i = 0; i < c.dip.points; ++i)
    delays[i] = c.dip.points == 1 ? c.dip.delay_lo_s
                                  : c.dip.delay_lo_s + (c.dip.delay_hi_s - c.dip.delay_lo_s) * i /
                                                           (c.dip.points - 1);
  const auto tallies = sample_dip_scan(delays, c.interference, c.acquisition, c.detectors, c.phase_noise);
  const CalibrationData cal = scan_options(c).calibration.value_or(derived_calibration(c));

  CsvWriter w({"delay_s", "p11_model", "p11_est", "n11", "n20", "n02", "sigma"});
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const CoincidenceTally& t = tallies[i];
    double est = kNaN, sigma = kNaN;
    if (t.raw_total() > 0) {
      est = normalized_p11(calibrate_tally(t, cal.efficiencies, cal.splitter_ratios));
      sigma = std::sqrt(est * (1.0 - est) / static_cast<double>(t.raw_total()));
    }
    w.add(delays[i]).add(p11(delays[i], c.interference)).add(est);
    w.add(static_cast<unsigned long long>(t.n11_raw))
        .add(static_cast<unsigned long long>(t.n20_raw))
        .add(static_cast<unsigned long long>(t.n02_raw))
        .add(sigma);
    w.end_row();
  }
  CommandResult res;
  res.files.push_back(out_path(c, "dip.csv"));
  w.save(res.files.back());
  json meta = {{"command", "dip"}, {"points", c.dip.points}, {"config", embedded_config(c)}};
  res.files.push_back(out_path(c, "dip.json"));
  write_file(res.files.back(), meta.dump(2) + "\n");
  res.message = "wrote " + std::to_string(delays.size()) + " dip points";
  return res;
}

ScanPlan plan_from_json(const std::string& text) {
  ScanPlan plan;
  try {
    const json j = json::parse(text);
    for (const auto& p : j.at("passes")) {
      ScanPass s;
      s.detuning_hz = p.at("detuning_hz").get<double>();
      s.dwell_s = p.at("dwell_s").get<double>();
      s.n_pairs = p.value("n_pairs", 0.0);
      s.expected_sigma_m = p.value("expected_sigma_m", 0.0);
      s.half_period_depth_m = p.value("half_period_depth_m", 0.0);
      plan.passes.push_back(s);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("plan file: ") + e.what());
  }
  if (plan.passes.empty()) fail(ErrorKind::config, "plan file lists no passes");
  return plan;
}

std::string plan_to_json(const ScanPlan& plan) {
  json passes = json::array();
  for (const auto& p : plan.passes)
    passes.push_back({{"detuning_hz", p.detuning_hz},
                      {"n_pairs", p.n_pairs},
                      {"dwell_s", p.dwell_s},
                      {"expected_sigma_m", p.expected_sigma_m},
                      {"half_period_depth_m", p.half_period_depth_m}});
  return json({{"passes", passes}}).dump(2);
}

CommandResult run_image(const RunConfig& config, const std::string& sample_path,
                        const std::string& plan_path) {
  RunConfig c = config;
  if (!sample_path.empty()) {
    c.sample.kind = "file";
    c.sample.path = sample_path;
    c.base_dir = ".";
    if (!fs::exists(sample_path)) fail(ErrorKind::config, "sample file not found: " + sample_path);
  }
  const SampleMap map = build_sample(c);
  const ScanOptions opts = scan_options(c);

  DepthImage image;
  if (!plan_path.empty()) {
    std::string text;
    try {
      text = read_file(plan_path);
    } catch (const Error&) {
      fail(ErrorKind::config, "plan file not found: " + plan_path);
    }
    image = raster_scan(map, plan_from_json(text), c.interference, c.acquisition, c.detectors,
                        c.phase_noise, opts);
  } else {
    image = raster_scan(map, c.interference, c.acquisition, c.detectors, c.phase_noise, opts);
  }
  const StepStatistics st = step_statistics(image, map);

  const std::string dir = c.resolve(c.output_dir);
  const json cfg = embedded_config(c);
  save_depth_image(image, dir, cfg.dump());

  const auto [lo, hi] = std::minmax_element(map.height_m.begin(), map.height_m.end());
  json summary = {{"command", "image"},
                  {"width_px", map.width_px},
                  {"height_px", map.height_px},
                  {"pixels", map.size()},
                  {"split", st.split},
                  {"s1_pixels", st.s1_pixels},
                  {"s2_pixels", st.s2_pixels},
                  {"mean_s1_m", number_or_null(st.mean_s1_m)},
                  {"mean_s2_m", number_or_null(st.mean_s2_m)},
                  {"step_estimate_m", number_or_null(st.step_estimate_m)},
                  {"true_step_m", *hi - *lo},
                  {"two_step_sigma_m", number_or_null(st.two_step_sigma_m)},
                  {"ambiguous_pixels", st.ambiguous_pixels},
                  {"non_identifiable_pixels", st.non_identifiable_pixels},
                  {"mean_detected_pairs", st.mean_detected_pairs},
                  {"substrate_delay_s", map.substrate_delay_s},
                  {"detuning_hz", image.detuning_hz},
                  {"passes", image.passes},
                  {"visibility", c.interference.visibility},
                  {"config", cfg}};
  CommandResult res;
  for (const char* f : {"depth_m.csv", "sigma_m.csv", "fringe_index.csv", "status.csv", "depth.pgm",
                        "image.json", "summary.json"})
    res.files.push_back(out_path(c, f));
  write_file(res.files.back(), summary.dump(2) + "\n");
  res.message = "step estimate " + format_number(st.step_estimate_m) + " m, two-step sigma " +
                format_number(st.two_step_sigma_m) + " m";
  return res;
}

CommandResult run_precision(const RunConfig& config, const std::optional<std::string>& mode,
                            const std::optional<std::vector<double>>& detunings_hz) {
  RunConfig c = config;
  if (mode) c.precision.mode = *mode;
  if (detunings_hz) c.precision.detunings_hz = *detunings_hz;
  if (c.precision.detunings_hz.empty()) fail(ErrorKind::config, "detuning list is empty");
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  const ScanOptions opts = scan_options(c);
  CommandResult res;
  const bool step = c.precision.mode == "step";

  auto histogram_csv = [&](std::size_t k, const Histogram& h, const char* unit) {
    const std::string u(unit);
    CsvWriter w({"bin_lo_" + u, "bin_hi_" + u, "count_s1", "count_s2"});
    const std::size_t bins = h.s1.size();
    for (std::size_t b = 0; b < bins; ++b) {
      const double width = (h.hi - h.lo) / static_cast<double>(bins);
      w.add(h.lo + width * b).add(h.lo + width * (b + 1));
      w.add(static_cast<unsigned long long>(h.s1[b])).add(static_cast<unsigned long long>(h.s2[b]));
      w.end_row();
    }
    char name[64];
    std::snprintf(name, sizeof name, "histogram_%02zu.csv", k);
    res.files.push_back(out_path(c, name));
    w.save(res.files.back());
  };

  json rows_meta = json::array();
  if (step) {
    ExperimentOptions eo;
    eo.scan = opts;
    eo.histogram_bins = c.precision.histogram_bins;
    const auto rows = step_experiment(c.precision.step_height_m, c.precision.detunings_hz,
                                      c.precision.pixels_per_step, c.interference, c.acquisition,
                                      c.detectors, c.phase_noise, c.depth.refractive_index, eo);
    CsvWriter w({"detuning_hz", "n_fisher_total", "sigma_t_s", "sigma_d_m", "crb_sigma_t_s", "blocks",
                 "sd_s1_m", "sd_s2_m", "step_estimate_m", "n_pairs_mean", "failed_pixels"});
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const StepRow& r = rows[k];
      w.add(r.detuning_hz).add(r.n_fisher_total).add(r.sigma_t_s).add(r.sigma_d_m).add(r.crb_sigma_t_s);
      w.add(1LL).add(r.sd_s1_m).add(r.sd_s2_m).add(r.step_estimate_m).add(r.n_pairs_mean);
      w.add(static_cast<unsigned long long>(r.failed_pixels));
      w.end_row();
      histogram_csv(k, r.histogram, "m");
      rows_meta.push_back({{"detuning_hz", r.detuning_hz}, {"histogram", fs::path(res.files.back()).filename()}});
    }
    res.files.insert(res.files.begin(), out_path(c, "precision.csv"));
    w.save(res.files.front());
  } else {
    const DepthMapping mapping{c.depth.refractive_index, c.depth.medium_index, c.depth.convention, 0.0};
    const auto rows = single_pixel_sweep(c.precision.detunings_hz, c.precision.repeats,
                                         c.precision.block_size, c.interference, c.acquisition,
                                         c.detectors, c.phase_noise, mapping, opts);
    CsvWriter w({"detuning_hz", "n_fisher_total", "sigma_t_s", "sigma_d_m", "crb_sigma_t_s", "blocks",
                 "sigma_t_err_s", "crb_sigma_d_m", "sigma_over_crb", "fisher_per_pair",
                 "n_pairs_mean", "operating_delay_s", "failed"});
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const SweepRow& r = rows[k];
      w.add(r.detuning_hz).add(r.n_fisher_total).add(r.sigma_t_s).add(r.sigma_d_m).add(r.crb_sigma_t_s);
      w.add(static_cast<unsigned long long>(r.blocks)).add(r.sigma_t_err_s).add(r.crb_sigma_d_m);
      w.add(r.sigma_t_s / r.crb_sigma_t_s).add(r.fisher_per_pair).add(r.n_pairs_mean);
      w.add(r.operating_delay_s).add(static_cast<unsigned long long>(r.failed));
      w.end_row();
      std::vector<double> offsets;
      for (double d : r.delays_s) offsets.push_back(d - r.operating_delay_s);
      histogram_csv(k, make_histogram(offsets, {}, c.precision.histogram_bins), "s");
      rows_meta.push_back({{"detuning_hz", r.detuning_hz}, {"histogram", fs::path(res.files.back()).filename()}});
    }
    res.files.insert(res.files.begin(), out_path(c, "precision.csv"));
    w.save(res.files.front());
  }
  json meta = {{"command", "precision"}, {"mode", c.precision.mode}, {"rows", rows_meta},
               {"config", embedded_config(c)}};
  res.files.push_back(out_path(c, "precision.json"));
  write_file(res.files.back(), meta.dump(2) + "\n");
  res.message = "wrote " + std::to_string(c.precision.detunings_hz.size()) + " precision rows";
  return res;
}

CommandResult run_calibrate(const RunConfig& config, std::uint64_t pairs) {
  if (pairs == 0) fail(ErrorKind::insufficient_data, "calibration needs at least one pair");
  const RunConfig& c = config;
  const double delay = 10.0 * c.interference.temporal_width_s;
  RandomStream rng(derive_seed(c.seed, 0xca1bULL));
  const CoincidenceTally t =
      sample_pairs(pairs, delay, c.interference, c.acquisition, c.detectors, c.phase_noise, rng);
  const CoincidenceMatrix m = coincidence_matrix(t);
  const auto singles = singles_of(t);
  const auto coeffs = klyshko_coefficients(m, singles);
  CalibrationData cal;
  cal.splitter_ratios = c.detectors.splitter_ratios;
  cal.efficiencies = klyshko_efficiencies(m, singles, cal.splitter_ratios);

  CommandResult res;
  res.files.push_back(out_path(c, "calibration.json"));
  write_file(res.files.back(), calibration_to_json(cal) + "\n");

  json run = {{"command", "calibrate"},
              {"pairs", pairs},
              {"delay_s", delay},
              {"singles", t.singles},
              {"coincidence_matrix", m},
              {"klyshko_coefficients", coeffs},
              {"efficiencies", cal.efficiencies},
              {"n11_raw", t.n11_raw},
              {"n20_raw", t.n20_raw},
              {"n02_raw", t.n02_raw},
              {"config", embedded_config(c)}};
  res.files.push_back(out_path(c, "calibration_run.json"));
  write_file(res.files.back(), run.dump(2) + "\n");
  res.message = "calibrated 8 channels from " + std::to_string(pairs) + " pairs";
  return res;
}

CommandResult run_plan(const RunConfig& config, std::optional<double> prior_lo_m,
                       std::optional<double> prior_hi_m, std::optional<double> target_sigma_m) {
  RunConfig c = config;
  if (prior_lo_m) c.planning.prior_lo_m = *prior_lo_m;
  if (prior_hi_m) c.planning.prior_hi_m = *prior_hi_m;
  if (target_sigma_m) c.planning.target_sigma_m = *target_sigma_m;
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  PlanRequest req;
  req.prior_lo_m = c.planning.prior_lo_m;
  req.prior_hi_m = c.planning.prior_hi_m;
  req.target_sigma_m = c.planning.target_sigma_m;
  req.params = c.interference;
  req.mapping = DepthMapping{c.depth.refractive_index, c.depth.medium_index, c.depth.convention, 0.0};
  req.available_detunings_hz = c.planning.available_detunings_hz;
  req.max_pairs_per_pass = c.planning.max_pairs_per_pass;
  req.min_pairs_per_pass = c.planning.min_pairs_per_pass;
  req.detected_pair_rate_hz =
      c.planning.detected_pair_rate_hz.value_or(expected_detected_rate(c.acquisition, c.detectors));
  const ScanPlan plan = plan_coarse_to_fine(req);

  json j = json::parse(plan_to_json(plan));
  j["prior_lo_m"] = req.prior_lo_m;
  j["prior_hi_m"] = req.prior_hi_m;
  j["target_sigma_m"] = req.target_sigma_m;
  j["detected_pair_rate_hz"] = req.detected_pair_rate_hz;
  j["config"] = embedded_config(c);
  CommandResult res;
  res.files.push_back(out_path(c, "plan.json"));
  write_file(res.files.back(), j.dump(2) + "\n");
  res.message = std::to_string(plan.passes.size()) + " pass plan, final sigma " +
                format_number(plan.passes.back().expected_sigma_m) + " m";
  return res;
}

CommandResult run_make_sample(const RunConfig& config, const std::string& csv_path) {
  const SampleMap map = build_sample(config);
  const std::string path = csv_path.empty() ? out_path(config, "sample.csv") : csv_path;
  save_sample_map(map, path);
  CommandResult res;
  res.files = {path, sidecar_path(path)};
  res.message = "wrote " + std::to_string(map.width_px) + "x" + std::to_string(map.height_px) + " sample";
  return res;
}

}  // namespace homscope
