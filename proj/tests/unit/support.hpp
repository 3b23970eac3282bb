#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "homscope/model.hpp"
#include "homscope/random.hpp"

namespace hstest {

inline constexpr double fs = 1e-15;
inline constexpr double um = 1e-6;
inline constexpr double THz = 1e12;

// Hand-rolled generators for property tests.
struct Gen {
  homscope::RandomStream rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(rng.uniform() * (hi - lo + 1)); }
  bool coin() { return rng.uniform() < 0.5; }

  homscope::InterferenceParams params() {
    homscope::InterferenceParams p;
    p.degenerate = coin();
    p.detuning_hz = p.degenerate ? 0.0 : uniform(0.1, 30.0) * THz;
    p.temporal_width_s = uniform(50.0, 3000.0) * fs;
    p.visibility = uniform(0.0, 1.0);
    p.phase_rad = p.degenerate ? 0.0 : uniform(-M_PI, M_PI);
    return p;
  }

  double delay_in(const homscope::InterferenceParams& p, double span = 0.6) {
    return uniform(-span, span) * p.temporal_width_s;
  }
};

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / ("homscope_test_" + name);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

inline std::string slurp(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& file, const std::string& text) {
  std::ofstream(file, std::ios::binary) << text;
}

}  // namespace hstest
