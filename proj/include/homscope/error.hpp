#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace homscope {

/// Failure categories shared by the library, the C API and the CLI exit codes.
enum class ErrorKind {
  parameter,         // invalid model or apparatus parameters
  non_identifiable,  // likelihood carries no information about the delay
  ambiguous,         // several fringe branches explain the data equally well
  insufficient_data, // too few samples for a statistic
  calibration,       // Klyshko calibration impossible (e.g. a dark channel)
  planning,          // coarse-to-fine target cannot be met
  config,            // run configuration is malformed
  io,                // file could not be read or written
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the estimator when the search window holds several comparable optima.
class AmbiguityError : public Error {
 public:
  AmbiguityError(const std::string& what, std::vector<double> candidates)
      : Error(ErrorKind::ambiguous, what), candidates_(std::move(candidates)) {}
  const std::vector<double>& candidates() const noexcept { return candidates_; }

 private:
  std::vector<double> candidates_;
};

/// Raised when a scan plan cannot reach its target; carries the best reachable sigma.
class PlanningError : public Error {
 public:
  PlanningError(const std::string& what, double best_sigma_m)
      : Error(ErrorKind::planning, what), best_sigma_m_(best_sigma_m) {}
  double best_sigma_m() const noexcept { return best_sigma_m_; }

 private:
  double best_sigma_m_;
};

/// Raised when a detector channel recorded no singles during calibration.
class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, int channel)
      : Error(ErrorKind::calibration, what), channel_(channel) {}
  /// 1-based channel number.
  int channel() const noexcept { return channel_; }

 private:
  int channel_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::parameter, what);
}

}  // namespace homscope
