#include "homscope/homscope.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <string>

#include "homscope/commands.hpp"
#include "homscope/config.hpp"
#include "homscope/error.hpp"
#include "homscope/inference.hpp"
#include "homscope/model.hpp"

struct hs_config {
  homscope::RunConfig config;
};

namespace {

using namespace homscope;

struct LastError {
  std::string message;
  hs_error_kind kind = HS_KIND_NONE;
  int channel = 0;
  double best_sigma = std::numeric_limits<double>::quiet_NaN();
  std::string last_message;
};

thread_local LastError g_last;

hs_error_kind to_c(ErrorKind k) {
  switch (k) {
    case ErrorKind::parameter: return HS_KIND_PARAMETER;
    case ErrorKind::non_identifiable: return HS_KIND_NON_IDENTIFIABLE;
    case ErrorKind::ambiguous: return HS_KIND_AMBIGUOUS;
    case ErrorKind::insufficient_data: return HS_KIND_INSUFFICIENT_DATA;
    case ErrorKind::calibration: return HS_KIND_CALIBRATION;
    case ErrorKind::planning: return HS_KIND_PLANNING;
    case ErrorKind::config: return HS_KIND_CONFIG;
    case ErrorKind::io: return HS_KIND_IO;
  }
  return HS_KIND_NONE;
}

void clear_error() {
  g_last.message.clear();
  g_last.kind = HS_KIND_NONE;
  g_last.channel = 0;
  g_last.best_sigma = std::numeric_limits<double>::quiet_NaN();
}

hs_status set_error(hs_status status, hs_error_kind kind, std::string msg) {
  g_last.message = std::move(msg);
  g_last.kind = kind;
  return status;
}

template <class Fn>
hs_status guarded(Fn&& fn) {
  clear_error();
  try {
    fn();
    return HS_OK;
  } catch (const CalibrationError& e) {
    g_last.channel = e.channel();
    return set_error(static_cast<hs_status>(exit_code(e.kind())), to_c(e.kind()), e.what());
  } catch (const PlanningError& e) {
    g_last.best_sigma = e.best_sigma_m();
    return set_error(static_cast<hs_status>(exit_code(e.kind())), to_c(e.kind()), e.what());
  } catch (const Error& e) {
    return set_error(static_cast<hs_status>(exit_code(e.kind())), to_c(e.kind()), e.what());
  } catch (const std::exception& e) {
    return set_error(HS_ERR_INTERNAL, HS_KIND_NONE, e.what());
  } catch (...) {
    return set_error(HS_ERR_INTERNAL, HS_KIND_NONE, "unknown failure");
  }
}

hs_status null_argument(const char* what) {
  clear_error();
  return set_error(HS_ERR_ARGUMENT, HS_KIND_NONE, std::string("null argument: ") + what);
}

InterferenceParams from_c(const hs_params& p) {
  InterferenceParams q;
  q.detuning_hz = p.detuning_hz;
  q.temporal_width_s = p.temporal_width_s;
  q.visibility = p.visibility;
  q.phase_rad = p.phase_rad;
  q.degenerate = p.degenerate != 0;
  return q;
}

DelayConvention from_c(hs_convention c) {
  return c == HS_DIFFERENTIAL ? DelayConvention::differential : DelayConvention::paper_nd;
}

}  // namespace

extern "C" {

const char* hs_version(void) { return "1.0.0"; }
const char* hs_last_error(void) { return g_last.message.c_str(); }
hs_error_kind hs_last_error_kind(void) { return g_last.kind; }
int hs_last_error_channel(void) { return g_last.channel; }
double hs_last_error_best_sigma(void) { return g_last.best_sigma; }
const char* hs_last_message(void) { return g_last.last_message.c_str(); }

void hs_params_default(hs_params* out) {
  if (!out) return;
  const InterferenceParams d;
  *out = hs_params{d.detuning_hz, d.temporal_width_s, d.visibility, d.phase_rad, d.degenerate ? 1 : 0};
}

hs_status hs_config_default(hs_config** out) {
  if (!out) return null_argument("out");
  return guarded([&] { *out = new hs_config{}; });
}

hs_status hs_config_load(const char* path, hs_config** out) {
  if (!path || !out) return null_argument("path/out");
  return guarded([&] {
    auto c = std::make_unique<hs_config>();
    c->config = load_config(path);
    *out = c.release();
  });
}

hs_status hs_config_parse(const char* json_text, const char* base_dir, hs_config** out) {
  if (!json_text || !out) return null_argument("json_text/out");
  return guarded([&] {
    auto c = std::make_unique<hs_config>();
    c->config = parse_config(json_text, base_dir ? base_dir : ".");
    *out = c.release();
  });
}

void hs_config_free(hs_config* config) { delete config; }

hs_status hs_config_set_output_dir(hs_config* config, const char* dir) {
  if (!config || !dir) return null_argument("config/dir");
  return guarded([&] {
    if (!*dir) fail(ErrorKind::config, "output directory must not be empty");
    config->config.output_dir = dir;
  });
}

hs_status hs_config_set_seed(hs_config* config, uint64_t seed) {
  if (!config) return null_argument("config");
  return guarded([&] {
    config->config.seed = seed;
    config->config.acquisition.seed = seed;
  });
}

hs_status hs_config_to_json(const hs_config* config, char* buf, size_t capacity, size_t* needed) {
  if (!config) return null_argument("config");
  std::string text;
  const hs_status st = guarded([&] { text = config_to_json(config->config); });
  if (st != HS_OK) return st;
  if (needed) *needed = text.size() + 1;
  if (!buf || capacity < text.size() + 1)
    return set_error(HS_ERR_ARGUMENT, HS_KIND_NONE, "buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return HS_OK;
}

hs_status hs_p11(double delay_s, const hs_params* params, double* out) {
  if (!params || !out) return null_argument("params/out");
  return guarded([&] { *out = p11(delay_s, from_c(*params)); });
}

hs_status hs_outcome_probabilities(double delay_s, const hs_params* params, double out[3]) {
  if (!params || !out) return null_argument("params/out");
  return guarded([&] {
    const auto p = outcome_probabilities(delay_s, from_c(*params));
    out[0] = p.p11;
    out[1] = p.p20;
    out[2] = p.p02;
  });
}

hs_status hs_fisher_information(double delay_s, const hs_params* params, double* out, int* unbounded) {
  if (!params || !out) return null_argument("params/out");
  return guarded([&] {
    const FisherValue f = fisher_information(delay_s, from_c(*params));
    *out = f.value;
    if (unbounded) *unbounded = f.unbounded ? 1 : 0;
  });
}

hs_status hs_crb_from_total_information(double total, double n_pairs, double n, double medium,
                                        hs_convention convention, double* sigma_t_s,
                                        double* sigma_d_m) {
  if (!sigma_t_s || !sigma_d_m) return null_argument("sigma_t_s/sigma_d_m");
  return guarded([&] {
    const FisherReport r =
        crb_from_total_information(total, n_pairs, DepthMapping{n, medium, from_c(convention), 0.0});
    *sigma_t_s = r.crb_sigma_t;
    *sigma_d_m = r.crb_sigma_d;
  });
}

hs_status hs_detuning_from_wavelengths(double center_m, double delta_m, double* out_hz) {
  if (!out_hz) return null_argument("out_hz");
  return guarded([&] { *out_hz = detuning_from_wavelengths(center_m, delta_m); });
}

hs_status hs_fringe_half_period_path(double detuning_hz, double* out_m) {
  if (!out_m) return null_argument("out_m");
  return guarded([&] { *out_m = fringe_half_period_path(detuning_hz); });
}

hs_status hs_delay_from_thickness(double thickness_m, double n, double medium, hs_convention convention,
                                  double* out_s) {
  if (!out_s) return null_argument("out_s");
  return guarded([&] {
    *out_s = delay_from_sample(OpticalSample{thickness_m, n, medium}, from_c(convention));
  });
}

hs_status hs_thickness_from_delay(double delay_s, double n, double medium, hs_convention convention,
                                  double* out_m) {
  if (!out_m) return null_argument("out_m");
  return guarded([&] { *out_m = thickness_from_delay(delay_s, n, medium, from_c(convention)); });
}

hs_class hs_classify_coincidence(int i, int j) {
  switch (classify_coincidence(i, j)) {
    case CoincidenceClass::n11: return HS_N11;
    case CoincidenceClass::n20: return HS_N20;
    case CoincidenceClass::n02: return HS_N02;
    case CoincidenceClass::invalid: break;
  }
  return HS_INVALID;
}

hs_status hs_two_step_precision(const double* s1, size_t n1, const double* s2, size_t n2, double* out) {
  if ((!s1 && n1) || (!s2 && n2) || !out) return null_argument("s1/s2/out");
  return guarded([&] {
    *out = two_step_precision(std::span<const double>(s1, n1), std::span<const double>(s2, n2));
  });
}

hs_status hs_mle_delay(double n11, double n20, double n02, const hs_params* params, double lo,
                       double hi, hs_estimate* out) {
  if (!params || !out) return null_argument("params/out");
  return guarded([&] {
    MleOptions o;
    o.window_lo_s = lo;
    o.window_hi_s = hi;
    const PixelEstimate e = mle_delay(OutcomeCounts{n11, n20, n02}, from_c(*params), o);
    *out = hs_estimate{e.delay_s, e.sigma_s, e.depth_m, e.fringe_index, e.log_likelihood, e.n_pairs_used};
  });
}

hs_status hs_cmd_dip(const hs_config* config, int degenerate, double lo, double hi, int points) {
  if (!config) return null_argument("config");
  return guarded([&] {
    DipOptions o;
    if (degenerate >= 0) o.degenerate = degenerate != 0;
    if (!std::isnan(lo)) o.delay_lo_s = lo;
    if (!std::isnan(hi)) o.delay_hi_s = hi;
    if (points > 0) o.points = points;
    g_last.last_message = run_dip(config->config, o).message;
  });
}

hs_status hs_cmd_image(const hs_config* config, const char* sample_csv, const char* plan_json) {
  if (!config) return null_argument("config");
  return guarded([&] {
    g_last.last_message =
        run_image(config->config, sample_csv ? sample_csv : "", plan_json ? plan_json : "").message;
  });
}

hs_status hs_cmd_precision(const hs_config* config, const char* mode, const double* detunings,
                           size_t n) {
  if (!config) return null_argument("config");
  return guarded([&] {
    std::optional<std::string> m;
    if (mode) m = std::string(mode);
    std::optional<std::vector<double>> d;
    if (detunings) d = std::vector<double>(detunings, detunings + n);
    g_last.last_message = run_precision(config->config, m, d).message;
  });
}

hs_status hs_cmd_calibrate(const hs_config* config, uint64_t pairs) {
  if (!config) return null_argument("config");
  return guarded([&] { g_last.last_message = run_calibrate(config->config, pairs).message; });
}

hs_status hs_cmd_plan(const hs_config* config, double lo, double hi, double target) {
  if (!config) return null_argument("config");
  return guarded([&] {
    auto opt = [](double v) { return std::isnan(v) ? std::optional<double>{} : std::optional<double>{v}; };
    g_last.last_message = run_plan(config->config, opt(lo), opt(hi), opt(target)).message;
  });
}

hs_status hs_cmd_make_sample(const hs_config* config, const char* csv_path) {
  if (!config) return null_argument("config");
  return guarded([&] {
    g_last.last_message = run_make_sample(config->config, csv_path ? csv_path : "").message;
  });
}

}  // extern "C"
