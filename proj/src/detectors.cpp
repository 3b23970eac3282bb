#include "homscope/detectors.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include <json.hpp>

#include "homscope/error.hpp"

namespace homscope {

std::string_view to_string(CoincidenceClass c) {
  switch (c) {
    case CoincidenceClass::n11: return "N11";
    case CoincidenceClass::n20: return "N20";
    case CoincidenceClass::n02: return "N02";
    case CoincidenceClass::invalid: break;
  }
  return "invalid";
}

namespace {

void validate_ratios(const std::array<double, kChannelsPerArm>& r, const char* which) {
  double sum = 0.0;
  for (double x : r) {
    require(std::isfinite(x) && x >= 0.0, std::string("negative splitter ratio in ") + which);
    sum += x;
  }
  require(std::abs(sum - 1.0) <= 1e-12, std::string("splitter ratios must sum to 1 in ") + which);
}

int arm_offset(Arm arm) { return arm == Arm::d ? 0 : kChannelsPerArm; }

}  // namespace

void DetectorBank::validate() const {
  for (int k = 0; k < kChannels; ++k) {
    const double e = efficiencies[k];
    require(std::isfinite(e) && e >= 0.0 && e <= 1.0,
            "efficiency of channel " + std::to_string(k + 1) + " must lie in [0, 1]");
  }
  validate_ratios(splitter_ratios[0], "channels 1-4");
  validate_ratios(splitter_ratios[1], "channels 5-8");
  require(std::isfinite(dark_count_rate_hz) && dark_count_rate_hz >= 0.0,
          "dark count rate must be non-negative");
}

double distinct_channel_probability(const std::array<double, kChannelsPerArm>& ratios) {
  double sq = 0.0;
  for (double r : ratios) sq += r * r;
  return 1.0 - sq;
}

CoincidenceClass classify_coincidence(int i, int j) {
  if (i == j || i < 1 || j < 1 || i > kChannels || j > kChannels) return CoincidenceClass::invalid;
  const bool i_d = i <= kChannelsPerArm;
  const bool j_d = j <= kChannelsPerArm;
  if (i_d != j_d) return CoincidenceClass::n11;
  return i_d ? CoincidenceClass::n02 : CoincidenceClass::n20;
}

PhotonRouter::PhotonRouter(const DetectorBank& bank, double transmission_c, double transmission_d) {
  bank.validate();
  require(transmission_c >= 0.0 && transmission_c <= 1.0 && transmission_d >= 0.0 &&
              transmission_d <= 1.0,
          "transmission must lie in [0, 1]");
  for (Arm arm : {Arm::d, Arm::c}) {
    const int a = arm == Arm::d ? 0 : 1;
    const double t = arm == Arm::d ? transmission_d : transmission_c;
    double acc = 0.0;
    for (int k = 0; k < kChannelsPerArm; ++k) {
      acc += t * bank.splitter_ratios[a][k] * bank.efficiencies[arm_offset(arm) + k];
      cumulative_[a][k] = acc;
    }
  }
}

int PhotonRouter::route(Arm arm, RandomStream& rng) const noexcept {
  const auto& cum = cumulative_[arm == Arm::d ? 0 : 1];
  const double u = rng.uniform();
  for (int k = 0; k < kChannelsPerArm; ++k) {
    if (u < cum[k]) return arm_offset(arm) + k;
  }
  return -1;
}

PairDetection PhotonRouter::detect(Outcome outcome, RandomStream& rng) const noexcept {
  Arm first = Arm::d, second = Arm::c;
  if (outcome == Outcome::n20) first = second = Arm::c;
  if (outcome == Outcome::n02) first = second = Arm::d;
  PairDetection out;
  const int a = route(first, rng);
  const int b = route(second, rng);
  if (a >= 0 && b >= 0 && a == b) {
    out.clicks = {a, -1};
    return out;
  }
  out.clicks = {a, b};
  if (a >= 0 && b >= 0) {
    Coincidence c;
    c.first = std::min(a, b);
    c.second = std::max(a, b);
    c.kind = classify_coincidence(c.first + 1, c.second + 1);
    out.coincidence = c;
  }
  return out;
}

PairDetection detect_pair(Outcome outcome, const DetectorBank& bank, RandomStream& rng) {
  return PhotonRouter(bank).detect(outcome, rng);
}

double coincidence_probability(Outcome outcome, const DetectorBank& bank, double tc, double td) {
  bank.validate();
  std::array<double, kChannelsPerArm> xd{}, xc{};
  for (int k = 0; k < kChannelsPerArm; ++k) {
    xd[k] = td * bank.splitter_ratios[0][k] * bank.efficiencies[k];
    xc[k] = tc * bank.splitter_ratios[1][k] * bank.efficiencies[kChannelsPerArm + k];
  }
  const auto sum = [](const auto& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
  const auto sumsq = [](const auto& v) {
    return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
  };
  switch (outcome) {
    case Outcome::n11: return sum(xd) * sum(xc);
    case Outcome::n20: return sum(xc) * sum(xc) - sumsq(xc);
    case Outcome::n02: return sum(xd) * sum(xd) - sumsq(xd);
  }
  return 0.0;
}

OutcomeCounts CoincidenceTally::raw_counts() const noexcept {
  return {static_cast<double>(n11_raw), static_cast<double>(n20_raw),
          static_cast<double>(n02_raw)};
}

OutcomeCounts CoincidenceTally::calibrated_counts() const noexcept {
  return {n11_cal, n20_cal, n02_cal};
}

void CoincidenceTally::record(const PairDetection& d) noexcept {
  for (int ch : d.clicks) {
    if (ch >= 0) ++singles[ch];
  }
  if (!d.coincidence) return;
  ++pair_counts[d.coincidence->first][d.coincidence->second];
  switch (d.coincidence->kind) {
    case CoincidenceClass::n11: ++n11_raw; break;
    case CoincidenceClass::n20: ++n20_raw; break;
    case CoincidenceClass::n02: ++n02_raw; break;
    case CoincidenceClass::invalid: break;
  }
}

CoincidenceMatrix coincidence_matrix(const CoincidenceTally& tally) {
  CoincidenceMatrix m{};
  for (int i = 0; i < kChannelsPerArm; ++i)
    for (int j = 0; j < kChannelsPerArm; ++j)
      m[i][j] = static_cast<double>(tally.pair_counts[i][kChannelsPerArm + j]);
  return m;
}

std::array<double, kChannels> singles_of(const CoincidenceTally& tally) {
  std::array<double, kChannels> s{};
  for (int k = 0; k < kChannels; ++k) s[k] = static_cast<double>(tally.singles[k]);
  return s;
}

std::array<double, kChannels> klyshko_coefficients(const CoincidenceMatrix& c,
                                                   const std::array<double, kChannels>& s) {
  for (int k = 0; k < kChannels; ++k) {
    if (!(s[k] > 0.0)) {
      throw CalibrationError("channel " + std::to_string(k + 1) + " recorded no singles", k + 1);
    }
  }
  // At large delay P11 = 1/2 = 2 P20, so two thirds of a channel's singles
  // belong to anti-bunched pairs.
  constexpr double kAntiBunchedShare = 2.0 / 3.0;
  std::array<double, kChannels> eta{};
  for (int i = 0; i < kChannelsPerArm; ++i) {
    double acc_d = 0.0, acc_c = 0.0;
    for (int j = 0; j < kChannelsPerArm; ++j) {
      acc_d += c[i][j] / (kAntiBunchedShare * s[kChannelsPerArm + j]);
      acc_c += c[j][i] / (kAntiBunchedShare * s[j]);
    }
    eta[i] = 0.25 * acc_d;
    eta[kChannelsPerArm + i] = 0.25 * acc_c;
  }
  return eta;
}

std::array<double, kChannels> klyshko_efficiencies(const CoincidenceMatrix& c,
                                                   const std::array<double, kChannels>& s,
                                                   const SplitterRatios& ratios) {
  const auto coeff = klyshko_coefficients(c, s);
  // Expected coefficient for heralding efficiencies h with x = r h:
  //   coeff_i = (3/4) x_i * mean_j 1 / (1 - x_j / 4)
  // where the 1/4 term is the same-channel collision of bunched photons in the
  // partner arm's singles. Solved by fixed-point iteration from h = 1.
  std::array<double, kChannels> h;
  h.fill(1.0);
  for (int iter = 0; iter < 100; ++iter) {
    std::array<double, 2> mean_inv{};  // per arm: mean over that arm's channels
    for (int a = 0; a < 2; ++a) {
      double acc = 0.0;
      for (int k = 0; k < kChannelsPerArm; ++k)
        acc += 1.0 / (1.0 - ratios[a][k] * h[a * kChannelsPerArm + k] / 4.0);
      mean_inv[a] = acc / kChannelsPerArm;
    }
    double change = 0.0;
    std::array<double, kChannels> next{};
    for (int a = 0; a < 2; ++a) {
      for (int k = 0; k < kChannelsPerArm; ++k) {
        const int ch = a * kChannelsPerArm + k;
        const double r = ratios[a][k];
        if (r <= 0.0) {
          next[ch] = 0.0;
          continue;
        }
        next[ch] = coeff[ch] / (0.75 * r * mean_inv[1 - a]);
        change = std::max(change, std::abs(next[ch] - h[ch]));
      }
    }
    h = next;
    if (change < 1e-15) break;
  }
  return h;
}

CoincidenceTally calibrate_tally(const CoincidenceTally& raw,
                                 const std::array<double, kChannels>& eff,
                                 const SplitterRatios& ratios) {
  for (int k = 0; k < kChannels; ++k) {
    if (!(eff[k] > 0.0) || !std::isfinite(eff[k])) {
      fail(ErrorKind::calibration,
           "efficiency of channel " + std::to_string(k + 1) + " must be positive");
    }
  }
  const double distinct_d = distinct_channel_probability(ratios[0]);
  const double distinct_c = distinct_channel_probability(ratios[1]);
  require(distinct_d > 0.0 && distinct_c > 0.0,
          "splitter routes all photons to one channel; bunching is undetectable");
  CoincidenceTally out = raw;
  double n11 = 0.0, n20 = 0.0, n02 = 0.0;
  for (int a = 0; a < kChannels; ++a) {
    for (int b = a + 1; b < kChannels; ++b) {
      const double w = static_cast<double>(raw.pair_counts[a][b]) / (eff[a] * eff[b]);
      switch (classify_coincidence(a + 1, b + 1)) {
        case CoincidenceClass::n11: n11 += w; break;
        case CoincidenceClass::n20: n20 += w; break;
        case CoincidenceClass::n02: n02 += w; break;
        case CoincidenceClass::invalid: break;
      }
    }
  }
  out.n11_cal = n11;
  out.n20_cal = n20 / distinct_c;
  out.n02_cal = n02 / distinct_d;
  out.calibrated = true;
  return out;
}

double normalized_p11(const CoincidenceTally& t) {
  require(t.calibrated, "normalized P11 needs a calibrated tally");
  const double total = t.n11_cal + t.n20_cal + t.n02_cal;
  if (!(total > 0.0)) fail(ErrorKind::insufficient_data, "calibrated tally is empty");
  return t.n11_cal / total;
}

std::string calibration_to_json(const CalibrationData& data) {
  nlohmann::ordered_json j;
  j["efficiencies"] = data.efficiencies;
  j["splitter_ratios"] = data.splitter_ratios;
  return j.dump(2) + "\n";
}

CalibrationData calibration_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("calibration JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::config, "calibration JSON must be an object");
  CalibrationData out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "efficiencies" && it.key() != "splitter_ratios")
      fail(ErrorKind::config, "calibration JSON: unknown key '" + it.key() + "'");
  }
  try {
    if (!j.contains("efficiencies")) fail(ErrorKind::config, "calibration JSON: missing 'efficiencies'");
    if (!j["efficiencies"].is_array() || j["efficiencies"].size() != kChannels)
      fail(ErrorKind::config, "calibration JSON: 'efficiencies' must hold 8 numbers");
    if (j.contains("splitter_ratios") &&
        (!j["splitter_ratios"].is_array() || j["splitter_ratios"].size() != 2 ||
         j["splitter_ratios"][0].size() != kChannelsPerArm ||
         j["splitter_ratios"][1].size() != kChannelsPerArm))
      fail(ErrorKind::config, "calibration JSON: 'splitter_ratios' must be two lists of 4");
    out.efficiencies = j.at("efficiencies").get<std::array<double, kChannels>>();
    if (j.contains("splitter_ratios"))
      out.splitter_ratios = j.at("splitter_ratios").get<SplitterRatios>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("calibration JSON: ") + e.what());
  }
  DetectorBank check;
  check.splitter_ratios = out.splitter_ratios;
  try {
    check.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, std::string("calibration JSON: ") + e.what());
  }
  for (int k = 0; k < kChannels; ++k) {
    if (!(out.efficiencies[k] > 0.0))
      fail(ErrorKind::config,
           "calibration JSON: efficiency of channel " + std::to_string(k + 1) + " must be positive");
  }
  return out;
}

}  // namespace homscope
