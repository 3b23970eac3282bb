#pragma once

// Multiplexed quasi-photon-number-resolving detection: two 1x4 splitters feed
// eight binary detectors. Channels 1-4 watch output arm D, channels 5-8 watch
// output arm C. Channel numbers are 1-based in the public interface and
// 0-based in arrays.

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "homscope/random.hpp"

namespace homscope {

inline constexpr int kChannels = 8;
inline constexpr int kChannelsPerArm = 4;

enum class Outcome { n11, n20, n02 };
enum class CoincidenceClass { n11, n20, n02, invalid };
enum class Arm { d, c };  // channels 1-4, channels 5-8

std::string_view to_string(CoincidenceClass c);

using SplitterRatios = std::array<std::array<double, kChannelsPerArm>, 2>;

struct DetectorBank {
  std::array<double, kChannels> efficiencies{1, 1, 1, 1, 1, 1, 1, 1};
  SplitterRatios splitter_ratios{{{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}}};
  double dark_count_rate_hz = 0.0;

  void validate() const;
};

/// Fraction of bunched pairs that land on two distinct channels of an arm: 1 - sum r_k^2.
double distinct_channel_probability(const std::array<double, kChannelsPerArm>& ratios);

/// Channels i, j in 1..8. Cross-arm pairs are anti-bunching, same-arm pairs bunching.
CoincidenceClass classify_coincidence(int i, int j);

struct Coincidence {
  int first = -1;   // 0-based, first < second
  int second = -1;
  CoincidenceClass kind = CoincidenceClass::invalid;
};

struct PairDetection {
  std::array<int, 2> clicks{-1, -1};  // 0-based channels that fired, -1 if none
  std::optional<Coincidence> coincidence;
};

/// Routes photons of a pair to detector clicks. A photon reaches channel k of
/// its arm and fires it with probability transmission * r_k * eta_k; two
/// photons firing the same channel give one click and no coincidence.
class PhotonRouter {
 public:
  explicit PhotonRouter(const DetectorBank& bank, double transmission_c = 1.0,
                        double transmission_d = 1.0);

  /// 0-based channel that fired, or -1 if the photon was lost.
  int route(Arm arm, RandomStream& rng) const noexcept;
  PairDetection detect(Outcome outcome, RandomStream& rng) const noexcept;

 private:
  std::array<std::array<double, kChannelsPerArm>, 2> cumulative_{};
};

PairDetection detect_pair(Outcome outcome, const DetectorBank& bank, RandomStream& rng);

/// Exact probability that a pair with the given outcome yields a coincidence.
double coincidence_probability(Outcome outcome, const DetectorBank& bank,
                               double transmission_c = 1.0, double transmission_d = 1.0);

struct OutcomeCounts {
  double n11 = 0.0;
  double n20 = 0.0;
  double n02 = 0.0;
  double total() const noexcept { return n11 + n20 + n02; }
};

struct CoincidenceTally {
  std::uint64_t n11_raw = 0;
  std::uint64_t n20_raw = 0;
  std::uint64_t n02_raw = 0;
  std::array<std::uint64_t, kChannels> singles{};
  // pair_counts[a][b] with a < b (0-based): coincidences between two channels.
  std::array<std::array<std::uint64_t, kChannels>, kChannels> pair_counts{};
  double n11_cal = 0.0;
  double n20_cal = 0.0;
  double n02_cal = 0.0;
  bool calibrated = false;
  double window_s = 0.0;
  std::uint64_t emitted_pairs = 0;

  std::uint64_t raw_total() const noexcept { return n11_raw + n20_raw + n02_raw; }
  OutcomeCounts raw_counts() const noexcept;
  OutcomeCounts calibrated_counts() const noexcept;
  void record(const PairDetection& detection) noexcept;
};

/// C[i][j]: coincidences between channel i+1 (arm D) and channel j+5 (arm C).
using CoincidenceMatrix = std::array<std::array<double, kChannelsPerArm>, kChannelsPerArm>;

CoincidenceMatrix coincidence_matrix(const CoincidenceTally& tally);
std::array<double, kChannels> singles_of(const CoincidenceTally& tally);

/// Klyshko heralding coefficients, eta_i = 1/4 sum_j C_ij / (2/3 S_j) over the
/// partner arm, mirrored for channels 5-8. Requires counts taken far outside
/// the dip (P11 = 1/2). Throws CalibrationError on a channel with zero singles.
std::array<double, kChannels> klyshko_coefficients(const CoincidenceMatrix& counts,
                                                   const std::array<double, kChannels>& singles);

/// Absolute per-channel heralding efficiencies (detector efficiency times the
/// upstream transmission) obtained by dividing the Klyshko coefficients by
/// their expectation under the detection model for the given splitter ratios.
std::array<double, kChannels> klyshko_efficiencies(const CoincidenceMatrix& counts,
                                                   const std::array<double, kChannels>& singles,
                                                   const SplitterRatios& ratios);

/// Divides each channel-pair count by the product of its channels' efficiencies
/// and undoes the same-channel collision loss of the bunching terms
/// (factor 1 / (1 - sum r^2), i.e. 4/3 for uniform splitting).
CoincidenceTally calibrate_tally(const CoincidenceTally& raw,
                                 const std::array<double, kChannels>& efficiencies,
                                 const SplitterRatios& ratios);

/// N11 / (N11 + N02 + N20) on calibrated counts.
double normalized_p11(const CoincidenceTally& calibrated);

struct CalibrationData {
  std::array<double, kChannels> efficiencies{1, 1, 1, 1, 1, 1, 1, 1};
  SplitterRatios splitter_ratios{{{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}}};
};

/// {"efficiencies":[8 numbers], "splitter_ratios":[[4],[4]]}
std::string calibration_to_json(const CalibrationData& data);
CalibrationData calibration_from_json(const std::string& text);

}  // namespace homscope
