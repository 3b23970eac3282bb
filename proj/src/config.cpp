#include "homscope/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "homscope/error.hpp"

namespace homscope {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

class Reader {
 public:
  std::vector<std::string> diagnostics;

  bool object(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) {
      diagnostics.push_back(path + ": expected an object");
      return false;
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool known = false;
      for (const char* k : keys) known = known || it.key() == k;
      if (!known) diagnostics.push_back(path + "." + it.key() + ": unknown key");
    }
    return true;
  }

  void number(const json& j, const std::string& path, const char* key, double& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number()) {
      diagnostics.push_back(path + "." + key + ": expected a number");
      return;
    }
    out = v.get<double>();
  }

  void number(const json& j, const std::string& path, const char* key, std::optional<double>& out) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
      out.reset();
      return;
    }
    double v = 0.0;
    const std::size_t before = diagnostics.size();
    number(j, path, key, v);
    if (diagnostics.size() == before) out = v;
  }

  template <class Int>
  void integer(const json& j, const std::string& path, const char* key, Int& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number_integer()) {
      diagnostics.push_back(path + "." + key + ": expected an integer");
      return;
    }
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned() || v.get<long long>() >= 0) {
        out = v.get<Int>();
        return;
      }
      diagnostics.push_back(path + "." + key + ": expected a non-negative integer");
    } else {
      out = v.get<Int>();
    }
  }

  void boolean(const json& j, const std::string& path, const char* key, bool& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_boolean()) {
      diagnostics.push_back(path + "." + key + ": expected true or false");
      return;
    }
    out = j.at(key).get<bool>();
  }

  void string(const json& j, const std::string& path, const char* key, std::string& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_string()) {
      diagnostics.push_back(path + "." + key + ": expected a string");
      return;
    }
    out = j.at(key).get<std::string>();
  }

  bool numbers(const json& j, const std::string& path, const char* key, std::vector<double>& out,
               std::optional<std::size_t> size = std::nullopt) {
    if (!j.contains(key)) return false;
    const json& v = j.at(key);
    if (!v.is_array() || (size && v.size() != *size)) {
      diagnostics.push_back(path + "." + key + ": expected " +
                            (size ? "an array of " + std::to_string(*size) + " numbers"
                                  : std::string("an array of numbers")));
      return false;
    }
    std::vector<double> tmp;
    for (const auto& x : v) {
      if (!x.is_number()) {
        diagnostics.push_back(path + "." + key + ": expected an array of numbers");
        return false;
      }
      tmp.push_back(x.get<double>());
    }
    out = std::move(tmp);
    return true;
  }

  template <class Fn>
  void section(const json& root, const char* key, Fn&& fn) {
    if (root.contains(key)) fn(root.at(key), std::string(key));
  }
};

void check(std::vector<std::string>& d, bool ok, const std::string& msg) {
  if (!ok) d.push_back(msg);
}

}  // namespace

std::string RunConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  const fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

std::vector<std::string> RunConfig::problems() const {
  std::vector<std::string> d;
  auto capture = [&](const char* where, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      d.push_back(std::string(where) + ": " + e.what());
    }
  };
  capture("interference", [&] { interference.validate(); });
  capture("acquisition", [&] { acquisition.validate(); });
  capture("detectors", [&] { detectors.validate(); });
  capture("phase_noise", [&] { phase_noise.validate(); });
  check(d, depth.refractive_index >= 1.0, "depth.refractive_index: must be at least 1");
  check(d, std::isfinite(depth.medium_index) && depth.medium_index > 0.0,
        "depth.medium_index: must be positive");
  check(d, depth.convention == DelayConvention::paper_nd || depth.refractive_index > depth.medium_index,
        "depth: differential convention needs refractive_index > medium_index");

  check(d, sample.kind == "ket" || sample.kind == "flat" || sample.kind == "file",
        "sample.kind: must be \"ket\", \"flat\" or \"file\"");
  if (sample.kind == "file") {
    check(d, !sample.path.empty(), "sample.path: required when kind is \"file\"");
    if (!sample.path.empty())
      check(d, fs::exists(resolve(sample.path)), "sample.path: file not found: " + resolve(sample.path));
  }
  check(d, sample.step_height_m >= 0.0, "sample.step_height_m: must be non-negative");
  check(d, sample.width_px >= 1 && sample.height_px >= 1, "sample: dimensions must be at least 1");
  check(d, sample.pixel_pitch_m > 0.0, "sample.pixel_pitch_m: must be positive");
  if (sample.substrate_delay_s)
    check(d, std::isfinite(*sample.substrate_delay_s), "sample.substrate_delay_s: must be finite");

  if (scan.grid_step_s) check(d, *scan.grid_step_s > 0.0, "scan.grid_step_s: must be positive");
  if (scan.window_s)
    check(d, scan.window_s->first < scan.window_s->second, "scan.window_s: lower bound must be below upper");
  check(d, scan.edge_blend >= 0.0 && scan.edge_blend <= 1.0, "scan.edge_blend: must lie in [0, 1]");
  if (!scan.calibration_path.empty())
    check(d, fs::exists(resolve(scan.calibration_path)),
          "scan.calibration_path: file not found: " + resolve(scan.calibration_path));

  check(d, dip.points >= 1, "dip.points: must be at least 1");
  check(d, dip.delay_lo_s <= dip.delay_hi_s, "dip: delay_lo_s must not exceed delay_hi_s");

  check(d, precision.mode == "step" || precision.mode == "single-pixel",
        "precision.mode: must be \"step\" or \"single-pixel\"");
  for (double v : precision.detunings_hz)
    check(d, std::isfinite(v) && v > 0.0, "precision.detunings_hz: entries must be positive");
  check(d, precision.step_height_m > 0.0, "precision.step_height_m: must be positive");
  check(d, precision.pixels_per_step >= 1, "precision.pixels_per_step: must be at least 1");
  check(d, precision.repeats >= 1, "precision.repeats: must be at least 1");
  check(d, precision.block_size >= 1, "precision.block_size: must be at least 1");
  check(d, precision.histogram_bins >= 1, "precision.histogram_bins: must be at least 1");

  check(d, planning.prior_hi_m > planning.prior_lo_m, "planning: prior_hi_m must exceed prior_lo_m");
  check(d, planning.target_sigma_m > 0.0, "planning.target_sigma_m: must be positive");
  check(d, planning.max_pairs_per_pass >= 1.0, "planning.max_pairs_per_pass: must be at least 1");
  check(d, planning.min_pairs_per_pass >= 1.0 && planning.min_pairs_per_pass <= planning.max_pairs_per_pass,
        "planning.min_pairs_per_pass: must lie between 1 and max_pairs_per_pass");
  if (planning.detected_pair_rate_hz)
    check(d, *planning.detected_pair_rate_hz > 0.0, "planning.detected_pair_rate_hz: must be positive");
  for (double v : planning.available_detunings_hz)
    check(d, std::isfinite(v) && v > 0.0, "planning.available_detunings_hz: entries must be positive");

  check(d, !output_dir.empty(), "output_dir: must not be empty");
  return d;
}

namespace {

void fail_with(const std::vector<std::string>& d) {
  std::string msg = "invalid configuration:";
  for (const auto& s : d) msg += "\n  " + s;
  fail(ErrorKind::config, msg);
}

}  // namespace

void RunConfig::validate() const {
  const auto d = problems();
  if (!d.empty()) fail_with(d);
}

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("configuration is not valid JSON: ") + e.what());
  }
  RunConfig c;
  c.base_dir = base_dir;
  Reader r;
  if (!r.object(root, "config",
                {"interference", "acquisition", "detectors", "phase_noise", "depth", "sample", "scan",
                 "dip", "precision", "planning", "output_dir", "seed"}))
    fail(ErrorKind::config, "invalid configuration:\n  config: expected an object");

  r.string(root, "config", "output_dir", c.output_dir);
  r.integer(root, "config", "seed", c.seed);

  r.section(root, "interference", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"detuning_hz", "temporal_width_s", "visibility", "phase_rad", "degenerate"}))
      return;
    r.number(j, p, "detuning_hz", c.interference.detuning_hz);
    r.number(j, p, "temporal_width_s", c.interference.temporal_width_s);
    r.number(j, p, "visibility", c.interference.visibility);
    r.number(j, p, "phase_rad", c.interference.phase_rad);
    r.boolean(j, p, "degenerate", c.interference.degenerate);
  });

  r.section(root, "acquisition", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"pair_rate_hz", "dwell_s", "transmission", "arm_transmission"})) return;
    r.number(j, p, "pair_rate_hz", c.acquisition.pair_rate_hz);
    r.number(j, p, "dwell_s", c.acquisition.dwell_s);
    r.number(j, p, "transmission", c.acquisition.transmission);
    if (j.contains("arm_transmission") && !j.at("arm_transmission").is_null()) {
      std::vector<double> v;
      if (r.numbers(j, p, "arm_transmission", v, 2)) c.acquisition.arm_transmission = {{v[0], v[1]}};
    }
  });

  r.section(root, "detectors", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"efficiencies", "splitter_ratios", "dark_count_rate_hz"})) return;
    std::vector<double> v;
    if (r.numbers(j, p, "efficiencies", v, kChannels))
      std::copy(v.begin(), v.end(), c.detectors.efficiencies.begin());
    if (j.contains("splitter_ratios")) {
      const json& s = j.at("splitter_ratios");
      if (!s.is_array() || s.size() != 2) {
        r.diagnostics.push_back(p + ".splitter_ratios: expected two arrays of 4 numbers");
      } else {
        for (int a = 0; a < 2; ++a) {
          json wrap = {{"arm", s[a]}};
          if (r.numbers(wrap, p + ".splitter_ratios[" + std::to_string(a) + "]", "arm", v,
                        kChannelsPerArm))
            std::copy(v.begin(), v.end(), c.detectors.splitter_ratios[a].begin());
        }
      }
    }
    r.number(j, p, "dark_count_rate_hz", c.detectors.dark_count_rate_hz);
  });

  r.section(root, "phase_noise", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"kind", "diffusion_rad2_per_s", "hop_rate_hz", "hop_magnitude_rad",
                         "detuning_exponent", "reference_detuning_hz"}))
      return;
    std::string kind(to_string(c.phase_noise.kind));
    r.string(j, p, "kind", kind);
    try {
      c.phase_noise.kind = phase_noise_kind_from_string(kind);
    } catch (const Error& e) {
      r.diagnostics.push_back(p + ".kind: " + e.what());
    }
    r.number(j, p, "diffusion_rad2_per_s", c.phase_noise.diffusion_rad2_per_s);
    r.number(j, p, "hop_rate_hz", c.phase_noise.hop_rate_hz);
    r.number(j, p, "hop_magnitude_rad", c.phase_noise.hop_magnitude_rad);
    r.number(j, p, "detuning_exponent", c.phase_noise.detuning_exponent);
    r.number(j, p, "reference_detuning_hz", c.phase_noise.reference_detuning_hz);
  });

  r.section(root, "depth", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"convention", "refractive_index", "medium_index"})) return;
    std::string conv(to_string(c.depth.convention));
    r.string(j, p, "convention", conv);
    try {
      c.depth.convention = delay_convention_from_string(conv);
    } catch (const Error& e) {
      r.diagnostics.push_back(p + ".convention: " + e.what());
    }
    r.number(j, p, "refractive_index", c.depth.refractive_index);
    r.number(j, p, "medium_index", c.depth.medium_index);
  });

  r.section(root, "sample", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"kind", "path", "step_height_m", "width_px", "height_px", "pixel_pitch_m",
                         "substrate_delay_s"}))
      return;
    r.string(j, p, "kind", c.sample.kind);
    r.string(j, p, "path", c.sample.path);
    r.number(j, p, "step_height_m", c.sample.step_height_m);
    r.integer(j, p, "width_px", c.sample.width_px);
    r.integer(j, p, "height_px", c.sample.height_px);
    r.number(j, p, "pixel_pitch_m", c.sample.pixel_pitch_m);
    r.number(j, p, "substrate_delay_s", c.sample.substrate_delay_s);
  });

  r.section(root, "scan", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"grid_step_s", "window_s", "edge_blend", "calibration_path", "threads"})) return;
    r.number(j, p, "grid_step_s", c.scan.grid_step_s);
    if (j.contains("window_s") && !j.at("window_s").is_null()) {
      std::vector<double> v;
      if (r.numbers(j, p, "window_s", v, 2)) c.scan.window_s = std::pair{v[0], v[1]};
    }
    r.number(j, p, "edge_blend", c.scan.edge_blend);
    r.string(j, p, "calibration_path", c.scan.calibration_path);
    r.integer(j, p, "threads", c.scan.threads);
  });

  r.section(root, "dip", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"delay_lo_s", "delay_hi_s", "points"})) return;
    r.number(j, p, "delay_lo_s", c.dip.delay_lo_s);
    r.number(j, p, "delay_hi_s", c.dip.delay_hi_s);
    r.integer(j, p, "points", c.dip.points);
  });

  r.section(root, "precision", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"mode", "detunings_hz", "step_height_m", "pixels_per_step", "repeats",
                         "block_size", "histogram_bins"}))
      return;
    r.string(j, p, "mode", c.precision.mode);
    r.numbers(j, p, "detunings_hz", c.precision.detunings_hz);
    r.number(j, p, "step_height_m", c.precision.step_height_m);
    r.integer(j, p, "pixels_per_step", c.precision.pixels_per_step);
    r.integer(j, p, "repeats", c.precision.repeats);
    r.integer(j, p, "block_size", c.precision.block_size);
    r.integer(j, p, "histogram_bins", c.precision.histogram_bins);
  });

  r.section(root, "planning", [&](const json& j, const std::string& p) {
    if (!r.object(j, p, {"prior_lo_m", "prior_hi_m", "target_sigma_m", "max_pairs_per_pass", "min_pairs_per_pass",
                         "detected_pair_rate_hz", "available_detunings_hz"}))
      return;
    r.number(j, p, "prior_lo_m", c.planning.prior_lo_m);
    r.number(j, p, "prior_hi_m", c.planning.prior_hi_m);
    r.number(j, p, "target_sigma_m", c.planning.target_sigma_m);
    r.number(j, p, "max_pairs_per_pass", c.planning.max_pairs_per_pass);
    r.number(j, p, "min_pairs_per_pass", c.planning.min_pairs_per_pass);
    r.number(j, p, "detected_pair_rate_hz", c.planning.detected_pair_rate_hz);
    r.numbers(j, p, "available_detunings_hz", c.planning.available_detunings_hz);
  });

  c.acquisition.seed = c.seed;
  auto d = r.diagnostics;
  for (auto& s : c.problems()) d.push_back(std::move(s));
  if (!d.empty()) fail_with(d);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::config, "cannot open configuration file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const fs::path parent = fs::path(path).parent_path();
  return parse_config(ss.str(), parent.empty() ? "." : parent.string());
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["interference"] = {{"detuning_hz", c.interference.detuning_hz},
                       {"temporal_width_s", c.interference.temporal_width_s},
                       {"visibility", c.interference.visibility},
                       {"phase_rad", c.interference.phase_rad},
                       {"degenerate", c.interference.degenerate}};
  j["acquisition"] = {{"pair_rate_hz", c.acquisition.pair_rate_hz},
                      {"dwell_s", c.acquisition.dwell_s},
                      {"transmission", c.acquisition.transmission},
                      {"arm_transmission", c.acquisition.arm_transmission
                                               ? json(*c.acquisition.arm_transmission)
                                               : json(nullptr)}};
  j["detectors"] = {{"efficiencies", c.detectors.efficiencies},
                    {"splitter_ratios", c.detectors.splitter_ratios},
                    {"dark_count_rate_hz", c.detectors.dark_count_rate_hz}};
  j["phase_noise"] = {{"kind", std::string(to_string(c.phase_noise.kind))},
                      {"diffusion_rad2_per_s", c.phase_noise.diffusion_rad2_per_s},
                      {"hop_rate_hz", c.phase_noise.hop_rate_hz},
                      {"hop_magnitude_rad", c.phase_noise.hop_magnitude_rad},
                      {"detuning_exponent", c.phase_noise.detuning_exponent},
                      {"reference_detuning_hz", c.phase_noise.reference_detuning_hz}};
  j["depth"] = {{"convention", std::string(to_string(c.depth.convention))},
                {"refractive_index", c.depth.refractive_index},
                {"medium_index", c.depth.medium_index}};
  j["sample"] = {{"kind", c.sample.kind},
                 {"path", c.sample.path},
                 {"step_height_m", c.sample.step_height_m},
                 {"width_px", c.sample.width_px},
                 {"height_px", c.sample.height_px},
                 {"pixel_pitch_m", c.sample.pixel_pitch_m},
                 {"substrate_delay_s",
                  c.sample.substrate_delay_s ? json(*c.sample.substrate_delay_s) : json(nullptr)}};
  j["scan"] = {{"grid_step_s", c.scan.grid_step_s ? json(*c.scan.grid_step_s) : json(nullptr)},
               {"window_s", c.scan.window_s ? json::array({c.scan.window_s->first, c.scan.window_s->second})
                                            : json(nullptr)},
               {"edge_blend", c.scan.edge_blend},
               {"calibration_path", c.scan.calibration_path},
               {"threads", c.scan.threads}};
  j["dip"] = {{"delay_lo_s", c.dip.delay_lo_s}, {"delay_hi_s", c.dip.delay_hi_s}, {"points", c.dip.points}};
  j["precision"] = {{"mode", c.precision.mode},
                    {"detunings_hz", c.precision.detunings_hz},
                    {"step_height_m", c.precision.step_height_m},
                    {"pixels_per_step", c.precision.pixels_per_step},
                    {"repeats", c.precision.repeats},
                    {"block_size", c.precision.block_size},
                    {"histogram_bins", c.precision.histogram_bins}};
  j["planning"] = {{"prior_lo_m", c.planning.prior_lo_m},
                   {"prior_hi_m", c.planning.prior_hi_m},
                   {"target_sigma_m", c.planning.target_sigma_m},
                   {"max_pairs_per_pass", c.planning.max_pairs_per_pass},
                   {"min_pairs_per_pass", c.planning.min_pairs_per_pass},
                   {"detected_pair_rate_hz", c.planning.detected_pair_rate_hz
                                                 ? json(*c.planning.detected_pair_rate_hz)
                                                 : json(nullptr)},
                   {"available_detunings_hz", c.planning.available_detunings_hz}};
  return j.dump(2);
}

}  // namespace homscope
