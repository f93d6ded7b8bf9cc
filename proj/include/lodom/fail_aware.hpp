#pragma once

#include <deque>
#include <limits>
#include <string>

#include "lodom/geometry.hpp"

namespace lodom {

enum class FailStatus { Ok, Warn, Failed };

std::string to_string(FailStatus status);

struct FailAwareConfig {
  double threshold = 0.001;      // accumulated |d2 sigma / dt2| at failure
  double warn_horizon = 10.0;    // s, WARN when time-to-failure drops below
  double rate_half_life = 1.0;   // s, exponential smoothing of eta_rate
  bool smooth_five_point = false;  // 5-sample smoothed second derivative
};

/// Fail-aware indicator: accumulate the absolute discrete second derivative
/// of the estimated heading standard deviation and extrapolate the time
/// until the accumulator crosses the failure threshold.
class FailAware {
 public:
  explicit FailAware(FailAwareConfig cfg = {}) : cfg_(cfg) {}

  /// Append one (t, sigma_psi) sample; t must be strictly increasing.
  /// Fewer than 3 samples leave eta unchanged (warm-up).
  void update(double t, double sigma_psi);

  /// Seconds until eta reaches the threshold at the current (smoothed)
  /// rate; +infinity when the rate is not positive; 0 once crossed.
  double time_to_failure() const;

  FailStatus status() const;
  double eta() const { return eta_; }
  double eta_rate() const { return eta_rate_; }
  double last_t() const { return last_t_; }
  double last_sigma() const { return history_.empty() ? 0.0 : history_.back().second; }
  bool warmed_up() const { return history_.size() >= 3; }
  const FailAwareConfig& config() const { return cfg_; }

  /// One CSV row: t, sigma_psi, eta, eta_rate, time_to_failure, status.
  std::string csv_row() const;
  static std::string csv_header();

 private:
  FailAwareConfig cfg_;
  std::deque<std::pair<double, double>> history_;  // (t, sigma)
  double eta_ = 0.0;
  double eta_rate_ = 0.0;
  double last_t_ = -std::numeric_limits<double>::infinity();
};

}  // namespace lodom
