#ifndef HOMSCOPE_H
#define HOMSCOPE_H

/* C interface to the homscope library. All functions return an hs_status;
 * on failure hs_last_error() describes the problem for the calling thread.
 * Status values double as process exit codes for the command-line tool. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(HOMSCOPE_BUILDING)
#    define HS_API __declspec(dllexport)
#  else
#    define HS_API __declspec(dllimport)
#  endif
#else
#  define HS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hs_status {
  HS_OK = 0,
  HS_ERR_INTERNAL = 1,
  HS_ERR_CONFIG = 2,   /* malformed configuration, invalid parameter, missing input */
  HS_ERR_DATA = 3,     /* calibration, identifiability, ambiguity, too little data, output I/O */
  HS_ERR_PLANNING = 4, /* coarse-to-fine target out of reach */
  HS_ERR_ARGUMENT = 5  /* null pointer or buffer too small */
} hs_status;

typedef enum hs_error_kind {
  HS_KIND_NONE = 0,
  HS_KIND_PARAMETER,
  HS_KIND_NON_IDENTIFIABLE,
  HS_KIND_AMBIGUOUS,
  HS_KIND_INSUFFICIENT_DATA,
  HS_KIND_CALIBRATION,
  HS_KIND_PLANNING,
  HS_KIND_CONFIG,
  HS_KIND_IO
} hs_error_kind;

typedef enum hs_convention { HS_PAPER_ND = 0, HS_DIFFERENTIAL = 1 } hs_convention;

typedef enum hs_class { HS_N11 = 0, HS_N20 = 1, HS_N02 = 2, HS_INVALID = 3 } hs_class;

typedef struct hs_params {
  double detuning_hz;
  double temporal_width_s;
  double visibility;
  double phase_rad;
  int degenerate;
} hs_params;

typedef struct hs_estimate {
  double delay_s;
  double sigma_s;
  double depth_m;
  int fringe_index;
  double log_likelihood;
  double n_pairs_used;
} hs_estimate;

typedef struct hs_config hs_config;

HS_API const char* hs_version(void);
HS_API const char* hs_last_error(void);
HS_API hs_error_kind hs_last_error_kind(void);
/* Calibration failures: 1-based channel with no singles, else 0. */
HS_API int hs_last_error_channel(void);
/* Planning failures: best reachable depth sigma in metres, else NaN. */
HS_API double hs_last_error_best_sigma(void);

HS_API void hs_params_default(hs_params* out);

/* Configuration handles. */
HS_API hs_status hs_config_default(hs_config** out);
HS_API hs_status hs_config_load(const char* path, hs_config** out);
HS_API hs_status hs_config_parse(const char* json_text, const char* base_dir, hs_config** out);
HS_API void hs_config_free(hs_config* config);
HS_API hs_status hs_config_set_output_dir(hs_config* config, const char* dir);
HS_API hs_status hs_config_set_seed(hs_config* config, uint64_t seed);
/* Copies the resolved JSON into buf (NUL-terminated); *needed receives the
 * required size including the terminator. */
HS_API hs_status hs_config_to_json(const hs_config* config, char* buf, size_t capacity, size_t* needed);

/* Model. */
HS_API hs_status hs_p11(double delay_s, const hs_params* params, double* out);
HS_API hs_status hs_outcome_probabilities(double delay_s, const hs_params* params, double out[3]);
HS_API hs_status hs_fisher_information(double delay_s, const hs_params* params, double* out,
                                       int* unbounded);
HS_API hs_status hs_crb_from_total_information(double total_information_s2, double n_pairs,
                                               double refractive_index, double medium_index,
                                               hs_convention convention, double* sigma_t_s,
                                               double* sigma_d_m);
HS_API hs_status hs_detuning_from_wavelengths(double center_m, double delta_m, double* out_hz);
HS_API hs_status hs_fringe_half_period_path(double detuning_hz, double* out_m);
HS_API hs_status hs_delay_from_thickness(double thickness_m, double refractive_index,
                                         double medium_index, hs_convention convention,
                                         double* out_s);
HS_API hs_status hs_thickness_from_delay(double delay_s, double refractive_index,
                                         double medium_index, hs_convention convention,
                                         double* out_m);
HS_API hs_class hs_classify_coincidence(int channel_i, int channel_j);
HS_API hs_status hs_two_step_precision(const double* s1, size_t n1, const double* s2, size_t n2,
                                       double* out);
/* Multinomial MLE from (possibly calibrated) outcome counts over [lo, hi]. */
HS_API hs_status hs_mle_delay(double n11, double n20, double n02, const hs_params* params,
                              double window_lo_s, double window_hi_s, hs_estimate* out);

/* Commands; artifacts go to the configuration's output directory. A NaN
 * number, a negative flag, a non-positive count or a NULL string keeps the
 * configured value. A non-NULL detuning array with n_detunings == 0 is an
 * empty list (a configuration error). */
HS_API hs_status hs_cmd_dip(const hs_config* config, int degenerate, double delay_lo_s,
                            double delay_hi_s, int points);
HS_API hs_status hs_cmd_image(const hs_config* config, const char* sample_csv, const char* plan_json);
HS_API hs_status hs_cmd_precision(const hs_config* config, const char* mode,
                                  const double* detunings_hz, size_t n_detunings);
HS_API hs_status hs_cmd_calibrate(const hs_config* config, uint64_t pairs);
HS_API hs_status hs_cmd_plan(const hs_config* config, double prior_lo_m, double prior_hi_m,
                             double target_sigma_m);
HS_API hs_status hs_cmd_make_sample(const hs_config* config, const char* csv_path);
/* One-line summary of the last successful command on this thread. */
HS_API const char* hs_last_message(void);

#ifdef __cplusplus
}
#endif

#endif
