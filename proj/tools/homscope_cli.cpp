#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "homscope/homscope.h"

namespace {

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct Common {
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "Run configuration (JSON)");
  cmd->add_option("-o,--output-dir", c.output_dir, "Directory for the artifacts");
  cmd->add_option("--seed", c.seed, "Master random seed");
}

int report(hs_status st) {
  if (st == HS_OK) {
    std::printf("%s\n", hs_last_message());
    return 0;
  }
  std::fprintf(stderr, "error: %s\n", hs_last_error());
  if (hs_last_error_kind() == HS_KIND_PLANNING && !std::isnan(hs_last_error_best_sigma()))
    std::fprintf(stderr, "best achievable sigma: %.6g m\n", hs_last_error_best_sigma());
  return static_cast<int>(st);
}

// Loads the configuration and applies the command-line overrides.
hs_config* open_config(const Common& c, int& status) {
  hs_config* cfg = nullptr;
  hs_status st = c.config_path.empty() ? hs_config_default(&cfg) : hs_config_load(c.config_path.c_str(), &cfg);
  if (st == HS_OK && !c.output_dir.empty()) st = hs_config_set_output_dir(cfg, c.output_dir.c_str());
  if (st == HS_OK && c.seed) st = hs_config_set_seed(cfg, *c.seed);
  if (st != HS_OK) {
    status = report(st);
    hs_config_free(cfg);
    return nullptr;
  }
  return cfg;
}

std::optional<std::vector<double>> parse_list(const std::string& text, bool& ok) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  ok = true;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) ok = false;
    } catch (const std::exception&) {
      ok = false;
    }
  }
  return out;
}

int usage_error(const std::string& msg) {
  std::fprintf(stderr, "error: %s\n", msg.c_str());
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-colour Hong-Ou-Mandel depth microscopy simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hs_version()));

  Common dip_c, img_c, prec_c, cal_c, plan_c, mk_c;

  auto* dip = app.add_subcommand("dip", "Simulate an interference dip or beat trace");
  add_common(dip, dip_c);
  bool degenerate = false, two_colour = false;
  std::string delay_range;
  int points = 0;
  auto* deg_flag = dip->add_flag("--degenerate", degenerate, "Degenerate (triangular) dip");
  dip->add_flag("--two-colour", two_colour, "Two-colour beat note")->excludes(deg_flag);
  dip->add_option("--delay-range", delay_range, "LO,HI delay range in seconds");
  dip->add_option("--points", points, "Number of delay points");

  auto* image = app.add_subcommand("image", "Raster-scan a sample into a depth image");
  add_common(image, img_c);
  std::string sample_path, plan_path;
  image->add_option("sample", sample_path, "Sample height CSV (default: the configured sample)");
  image->add_option("--plan", plan_path, "Coarse-to-fine plan JSON");

  auto* precision = app.add_subcommand("precision", "Precision versus detuning tables");
  add_common(precision, prec_c);
  std::string mode;
  std::optional<std::string> detunings;
  precision->add_option("--mode", mode, "step or single-pixel")
      ->check(CLI::IsMember({"step", "single-pixel"}));
  precision->add_option("--detunings", detunings, "Comma-separated detunings in Hz");

  auto* calibrate = app.add_subcommand("calibrate", "Klyshko calibration run far from the dip");
  add_common(calibrate, cal_c);
  std::uint64_t pairs = 1000000;
  calibrate->add_option("--pairs", pairs, "Emitted pairs to simulate");

  auto* plan = app.add_subcommand("plan", "Coarse-to-fine detuning schedule");
  add_common(plan, plan_c);
  std::string prior_range;
  double target = kUnset;
  plan->add_option("--prior-range", prior_range, "Depth prior in metres: HI or LO,HI");
  plan->add_option("--target-sigma", target, "Target depth sigma in metres");

  auto* make = app.add_subcommand("make-sample", "Write the configured sample as CSV plus sidecar");
  add_common(make, mk_c);
  std::string make_out;
  make->add_option("output", make_out, "Output CSV path (default: <output-dir>/sample.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  int status = 0;
  if (dip->parsed()) {
    double lo = kUnset, hi = kUnset;
    if (!delay_range.empty()) {
      bool ok = false;
      const auto v = parse_list(delay_range, ok);
      if (!ok || v->size() != 2 || !((*v)[0] <= (*v)[1]))
        return usage_error("--delay-range expects LO,HI with LO <= HI");
      lo = (*v)[0];
      hi = (*v)[1];
    }
    if (dip->count("--points") && points < 1) return usage_error("--points must be at least 1");
    hs_config* cfg = open_config(dip_c, status);
    if (!cfg) return status;
    status = report(hs_cmd_dip(cfg, degenerate ? 1 : (two_colour ? 0 : -1), lo, hi, points));
    hs_config_free(cfg);
  } else if (image->parsed()) {
    hs_config* cfg = open_config(img_c, status);
    if (!cfg) return status;
    status = report(hs_cmd_image(cfg, sample_path.empty() ? nullptr : sample_path.c_str(),
                                 plan_path.empty() ? nullptr : plan_path.c_str()));
    hs_config_free(cfg);
  } else if (precision->parsed()) {
    std::vector<double> list;
    bool have_list = false;
    if (detunings) {
      bool ok = false;
      list = *parse_list(*detunings, ok);
      if (!ok) return usage_error("--detunings expects comma-separated numbers");
      have_list = true;
    }
    hs_config* cfg = open_config(prec_c, status);
    if (!cfg) return status;
    static const double empty_marker = 0.0;
    const double* data = have_list ? (list.empty() ? &empty_marker : list.data()) : nullptr;
    status = report(hs_cmd_precision(cfg, mode.empty() ? nullptr : mode.c_str(), data, list.size()));
    hs_config_free(cfg);
  } else if (calibrate->parsed()) {
    hs_config* cfg = open_config(cal_c, status);
    if (!cfg) return status;
    status = report(hs_cmd_calibrate(cfg, pairs));
    hs_config_free(cfg);
  } else if (plan->parsed()) {
    double lo = kUnset, hi = kUnset;
    if (!prior_range.empty()) {
      bool ok = false;
      const auto v = parse_list(prior_range, ok);
      if (!ok || v->empty() || v->size() > 2) return usage_error("--prior-range expects HI or LO,HI");
      if (v->size() == 1) {
        lo = 0.0;
        hi = (*v)[0];
      } else {
        lo = (*v)[0];
        hi = (*v)[1];
      }
    }
    hs_config* cfg = open_config(plan_c, status);
    if (!cfg) return status;
    status = report(hs_cmd_plan(cfg, lo, hi, target));
    hs_config_free(cfg);
  } else if (make->parsed()) {
    hs_config* cfg = open_config(mk_c, status);
    if (!cfg) return status;
    status = report(hs_cmd_make_sample(cfg, make_out.empty() ? nullptr : make_out.c_str()));
    hs_config_free(cfg);
  }
  return status;
}
