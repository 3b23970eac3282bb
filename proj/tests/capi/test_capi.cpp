#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "homscope/homscope.h"

namespace fs = std::filesystem;

namespace {

struct Config {
  hs_config* ptr = nullptr;
  explicit Config(const char* json) { EXPECT_EQ(hs_config_parse(json, ".", &ptr), HS_OK) << hs_last_error(); }
  ~Config() { hs_config_free(ptr); }
};

struct Dir {
  fs::path path;
  explicit Dir(const std::string& name) : path(fs::temp_directory_path() / ("homscope_capi_" + name)) {
    fs::remove_all(path);
  }
  ~Dir() { fs::remove_all(path); }
};

}  // namespace

TEST(CApi, VersionAndDefaults) {
  EXPECT_STREQ(hs_version(), "1.0.0");
  hs_params p;
  hs_params_default(&p);
  EXPECT_EQ(p.temporal_width_s, 1e-12);
  EXPECT_EQ(p.visibility, 0.95);
  EXPECT_EQ(p.degenerate, 0);
}

TEST(CApi, ModelFunctions) {
  hs_params p;
  hs_params_default(&p);
  p.degenerate = 1;
  p.visibility = 1.0;
  p.temporal_width_s = 100e-15;
  double v = -1;
  ASSERT_EQ(hs_p11(25e-15, &p, &v), HS_OK);
  EXPECT_NEAR(v, 0.25, 1e-15);
  double probs[3];
  ASSERT_EQ(hs_outcome_probabilities(25e-15, &p, probs), HS_OK);
  EXPECT_NEAR(probs[1], 0.375, 1e-15);
  int unbounded = -1;
  ASSERT_EQ(hs_fisher_information(25e-15, &p, &v, &unbounded), HS_OK);
  EXPECT_NEAR(v * 1e-30, 5.333e-4, 5e-7);
  EXPECT_EQ(unbounded, 0);
  ASSERT_EQ(hs_fisher_information(0.0, &p, &v, &unbounded), HS_OK);
  EXPECT_EQ(unbounded, 1);

  double st, sd;
  ASSERT_EQ(hs_crb_from_total_information(0.2e30, 4000, 1.58, 1.0, HS_PAPER_ND, &st, &sd), HS_OK);
  EXPECT_NEAR(sd * 1e6, 0.4243, 5e-4);
  ASSERT_EQ(hs_detuning_from_wavelengths(808e-9, 65.6e-9, &v), HS_OK);
  EXPECT_NEAR(v / 30.1e12, 1.0, 0.01);
  ASSERT_EQ(hs_fringe_half_period_path(7.4e12, &v), HS_OK);
  EXPECT_NEAR(v * 1e6, 20.26, 0.005);
  ASSERT_EQ(hs_delay_from_thickness(4.6e-6, 1.58, 1.0, HS_DIFFERENTIAL, &v), HS_OK);
  EXPECT_NEAR(v * 1e15, 8.90, 0.005);
  double back;
  ASSERT_EQ(hs_thickness_from_delay(v, 1.58, 1.0, HS_DIFFERENTIAL, &back), HS_OK);
  EXPECT_NEAR(back, 4.6e-6, 1e-18);
  EXPECT_EQ(hs_classify_coincidence(2, 7), HS_N11);
  EXPECT_EQ(hs_classify_coincidence(1, 3), HS_N02);
  EXPECT_EQ(hs_classify_coincidence(5, 8), HS_N20);
  EXPECT_EQ(hs_classify_coincidence(3, 3), HS_INVALID);

  const double s1[] = {0.0, 0.3e-6 * std::sqrt(2.0)}, s2[] = {0.0, 0.4e-6 * std::sqrt(2.0)};
  ASSERT_EQ(hs_two_step_precision(s1, 2, s2, 2, &v), HS_OK);
  EXPECT_NEAR(v, 0.5e-6, 1e-18);
  EXPECT_EQ(hs_two_step_precision(s1, 1, s2, 2, &v), HS_ERR_DATA);
  EXPECT_EQ(hs_last_error_kind(), HS_KIND_INSUFFICIENT_DATA);
}

TEST(CApi, MleAndErrorState) {
  hs_params p;
  hs_params_default(&p);
  p.detuning_hz = 7.4e12;
  p.visibility = 1.0;
  const double quarter = 0.25 / 7.4e12;
  hs_estimate est;
  ASSERT_EQ(hs_mle_delay(0, 2000, 2000, &p, -quarter, quarter, &est), HS_OK);
  EXPECT_NEAR(est.delay_s, 0.0, 1e-4 / 7.4e12);

  EXPECT_EQ(hs_mle_delay(0, 0, 0, &p, -quarter, quarter, &est), HS_ERR_DATA);
  EXPECT_EQ(hs_last_error_kind(), HS_KIND_NON_IDENTIFIABLE);
  EXPECT_EQ(hs_mle_delay(1000, 500, 500, &p, -400e-15, 400e-15, &est), HS_ERR_DATA);
  EXPECT_EQ(hs_last_error_kind(), HS_KIND_AMBIGUOUS);

  p.visibility = 3.0;
  double v;
  EXPECT_EQ(hs_p11(0.0, &p, &v), HS_ERR_CONFIG);
  EXPECT_EQ(hs_last_error_kind(), HS_KIND_PARAMETER);
  EXPECT_NE(std::string(hs_last_error()).find("visibility"), std::string::npos);
  EXPECT_EQ(hs_p11(0.0, nullptr, &v), HS_ERR_ARGUMENT);
  EXPECT_EQ(hs_p11(0.0, &p, nullptr), HS_ERR_ARGUMENT);

  // Error state is per thread.
  std::string other;
  std::thread([&] { other = hs_last_error(); }).join();
  EXPECT_TRUE(other.empty());
}

TEST(CApi, ConfigHandles) {
  hs_config* cfg = nullptr;
  EXPECT_EQ(hs_config_parse("{\"bogus\": 1}", ".", &cfg), HS_ERR_CONFIG);
  EXPECT_EQ(cfg, nullptr);
  EXPECT_EQ(hs_last_error_kind(), HS_KIND_CONFIG);
  EXPECT_EQ(hs_config_load("/nonexistent/x.json", &cfg), HS_ERR_CONFIG);

  ASSERT_EQ(hs_config_default(&cfg), HS_OK);
  ASSERT_EQ(hs_config_set_seed(cfg, 99), HS_OK);
  ASSERT_EQ(hs_config_set_output_dir(cfg, "elsewhere"), HS_OK);
  size_t needed = 0;
  EXPECT_EQ(hs_config_to_json(cfg, nullptr, 0, &needed), HS_ERR_ARGUMENT);
  ASSERT_GT(needed, 10u);
  std::vector<char> buf(needed);
  ASSERT_EQ(hs_config_to_json(cfg, buf.data(), buf.size(), &needed), HS_OK);
  const std::string text(buf.data());
  EXPECT_EQ(text.size() + 1, needed);
  EXPECT_NE(text.find("\"seed\": 99"), std::string::npos);
  EXPECT_NE(text.find("elsewhere"), std::string::npos);
  hs_config_free(cfg);
  hs_config_free(nullptr);
}

TEST(CApi, Commands) {
  Dir out("commands");
  const std::string json = "{\"interference\": {\"detuning_hz\": 7.4e12}, \"acquisition\": {\"pair_rate_hz\": 9143, "
                           "\"transmission\": 1.0}, \"sample\": {\"width_px\": 12, \"height_px\": 5}, "
                           "\"precision\": {\"pixels_per_step\": 20, \"repeats\": 100}, \"output_dir\": \"" +
                           out.path.string() + "\"}";
  Config c(json.c_str());
  ASSERT_NE(c.ptr, nullptr);

  ASSERT_EQ(hs_cmd_dip(c.ptr, -1, NAN, NAN, 7), HS_OK) << hs_last_error();
  EXPECT_TRUE(fs::exists(out.path / "dip.csv"));
  EXPECT_FALSE(std::string(hs_last_message()).empty());

  ASSERT_EQ(hs_cmd_image(c.ptr, nullptr, nullptr), HS_OK) << hs_last_error();
  EXPECT_TRUE(fs::exists(out.path / "summary.json"));

  const double det[] = {7.4e12};
  ASSERT_EQ(hs_cmd_precision(c.ptr, "step", det, 1), HS_OK) << hs_last_error();
  EXPECT_TRUE(fs::exists(out.path / "precision.csv"));
  EXPECT_EQ(hs_cmd_precision(c.ptr, nullptr, det, 0), HS_ERR_CONFIG);
  EXPECT_EQ(hs_cmd_precision(c.ptr, "bogus", nullptr, 0), HS_ERR_CONFIG);

  ASSERT_EQ(hs_cmd_calibrate(c.ptr, 20000), HS_OK);
  EXPECT_TRUE(fs::exists(out.path / "calibration.json"));
  EXPECT_EQ(hs_cmd_calibrate(c.ptr, 0), HS_ERR_DATA);

  ASSERT_EQ(hs_cmd_plan(c.ptr, 0.0, 40e-6, 0.5e-6), HS_OK);
  EXPECT_TRUE(fs::exists(out.path / "plan.json"));
  EXPECT_EQ(hs_cmd_plan(c.ptr, 0.0, 40e-6, 1e-9), HS_ERR_PLANNING);
  EXPECT_EQ(hs_last_error_kind(), HS_KIND_PLANNING);
  EXPECT_GT(hs_last_error_best_sigma(), 1e-9);

  const std::string sample = (out.path / "s.csv").string();
  ASSERT_EQ(hs_cmd_make_sample(c.ptr, sample.c_str()), HS_OK);
  ASSERT_EQ(hs_cmd_image(c.ptr, sample.c_str(), (out.path / "plan.json").string().c_str()), HS_OK)
      << hs_last_error();
  EXPECT_EQ(hs_cmd_image(c.ptr, (out.path / "missing.csv").string().c_str(), nullptr), HS_ERR_CONFIG);
  EXPECT_EQ(hs_cmd_dip(nullptr, 0, NAN, NAN, 0), HS_ERR_ARGUMENT);
}

TEST(CApi, CalibrationDarkChannel) {
  Dir out("dark");
  const std::string json = "{\"detectors\": {\"efficiencies\": [1,1,1,1,1,0,1,1]}, \"output_dir\": \"" +
                           out.path.string() + "\"}";
  Config c(json.c_str());
  EXPECT_EQ(hs_cmd_calibrate(c.ptr, 10000), HS_ERR_DATA);
  EXPECT_EQ(hs_last_error_kind(), HS_KIND_CALIBRATION);
  EXPECT_EQ(hs_last_error_channel(), 6);
}
