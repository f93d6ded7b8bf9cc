#include "lodom/fail_aware.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace lodom {

std::string to_string(FailStatus status) {
  switch (status) {
    case FailStatus::Ok: return "OK";
    case FailStatus::Warn: return "WARN";
    case FailStatus::Failed: return "FAILED";
  }
  return "?";
}

void FailAware::update(double t, double sigma_psi) {
  if (!(t > last_t_))
    throw std::invalid_argument("FailAware::update: t must be strictly increasing");
  last_t_ = t;
  history_.emplace_back(t, sigma_psi);
  while (history_.size() > 5) history_.pop_front();

  const std::size_t need = cfg_.smooth_five_point ? 5 : 3;
  if (history_.size() < need) return;

  const double dt_step = history_.back().first - history_[history_.size() - 2].first;
  double second;
  if (cfg_.smooth_five_point) {
    // Savitzky-Golay quadratic-fit second derivative over 5 samples.
    const double dt = (history_.back().first - history_.front().first) / 4.0;
    second = (2.0 * history_[0].second - history_[1].second -
              2.0 * history_[2].second - history_[3].second +
              2.0 * history_[4].second) / (7.0 * dt * dt);
  } else {
    const auto& s0 = history_[history_.size() - 3];
    const auto& s1 = history_[history_.size() - 2];
    const auto& s2 = history_[history_.size() - 1];
    const double dt = (s2.first - s0.first) / 2.0;
    second = (s2.second - 2.0 * s1.second + s0.second) / (dt * dt);
  }

  const double prev_eta = eta_;
  eta_ += std::abs(second);
  const double raw_rate = (eta_ - prev_eta) / dt_step;
  // The raw two-sample rate jitters; smooth it before extrapolating.
  const double alpha = 1.0 - std::exp2(-dt_step / cfg_.rate_half_life);
  eta_rate_ += alpha * (raw_rate - eta_rate_);
}

double FailAware::time_to_failure() const {
  if (eta_ >= cfg_.threshold) return 0.0;
  if (eta_rate_ <= 0.0) return std::numeric_limits<double>::infinity();
  return (cfg_.threshold - eta_) / eta_rate_;
}

FailStatus FailAware::status() const {
  if (eta_ >= cfg_.threshold) return FailStatus::Failed;
  if (time_to_failure() < cfg_.warn_horizon) return FailStatus::Warn;
  return FailStatus::Ok;
}

std::string FailAware::csv_header() {
  return "t,sigma_psi,eta,eta_rate,time_to_failure,status";
}

std::string FailAware::csv_row() const {
  char buf[160];
  const double ttf = time_to_failure();
  std::snprintf(buf, sizeof(buf), "%.6f,%.9g,%.9g,%.9g,%.9g,%s", last_t_,
                last_sigma(), eta_, eta_rate_,
                std::isinf(ttf) ? -1.0 : ttf, to_string(status()).c_str());
  return buf;
}

}  // namespace lodom
