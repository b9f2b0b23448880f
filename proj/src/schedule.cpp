#include "vdd/schedule.hpp"

#include <cmath>

namespace vdd {

NoiseSchedule NoiseSchedule::ve(double sigma_min, double sigma_max) {
  require(sigma_min > 0.0 && sigma_max > sigma_min, "VE schedule needs 0 < sigma_min < sigma_max");
  NoiseSchedule s;
  s.kind_ = ScheduleKind::VE;
  s.sigma_min_ = sigma_min;
  s.sigma_max_ = sigma_max;
  return s;
}

NoiseSchedule NoiseSchedule::vp(int steps, double beta_start, double beta_end) {
  require(steps >= 1, "VP schedule needs at least one step");
  require(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end,
          "VP betas must satisfy 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.kind_ = ScheduleKind::VP;
  s.vp_steps_ = steps;
  s.beta_start_ = beta_start;
  s.beta_end_ = beta_end;
  s.log_alpha_bar_.assign(steps + 1, 0.0);
  for (int k = 1; k <= steps; ++k) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(k - 1) / (steps - 1);
    const double beta = beta_start + (beta_end - beta_start) * frac;
    s.log_alpha_bar_[k] = s.log_alpha_bar_[k - 1] + std::log1p(-beta);
  }
  return s;
}

int NoiseSchedule::vp_index(double t) const {
  int k = static_cast<int>(std::lround(t * vp_steps_));
  if (k < 0) k = 0;
  if (k > vp_steps_) k = vp_steps_;
  return k;
}

double NoiseSchedule::alpha(double t) const {
  require(t >= 0.0 && t <= 1.0, "schedule time must lie in [0,1]");
  if (kind_ == ScheduleKind::VE) return 1.0;
  return std::exp(0.5 * log_alpha_bar_[vp_index(t)]);
}

double NoiseSchedule::sigma(double t) const {
  require(t >= 0.0 && t <= 1.0, "schedule time must lie in [0,1]");
  if (kind_ == ScheduleKind::VE)
    return std::pow(sigma_min_, 1.0 - t) * std::pow(sigma_max_, t);
  return std::sqrt(-std::expm1(log_alpha_bar_[vp_index(t)]));
}

double NoiseSchedule::drift_coeff(double t) const {
  if (kind_ == ScheduleKind::VE) return 0.0;
  // Piecewise-constant b(t) matching the discrete schedule: on ((k-1)/K, k/K]
  // the cumulative log abar drops by log(1-beta_k) over a 1/K interval.
  int k = static_cast<int>(std::ceil(t * vp_steps_ - 1e-12));
  if (k < 1) k = 1;
  if (k > vp_steps_) k = vp_steps_;
  const double b = vp_steps_ * (log_alpha_bar_[k - 1] - log_alpha_bar_[k]);
  return -0.5 * b;
}

double NoiseSchedule::g2(double t) const {
  if (kind_ == ScheduleKind::VE) {
    const double s = sigma(t);
    return 2.0 * s * s * std::log(sigma_max_ / sigma_min_);
  }
  return -2.0 * drift_coeff(t);
}

double NoiseSchedule::sigma_to_t(double sigma) const {
  require(kind_ == ScheduleKind::VE, "sigma_to_t is defined for VE schedules only");
  require(sigma > 0.0, "sigma must be positive");
  return std::log(sigma / sigma_min_) / std::log(sigma_max_ / sigma_min_);
}

double NoiseSchedule::sigma_min() const {
  if (kind_ == ScheduleKind::VE) return sigma_min_;
  return sigma(1.0 / vp_steps_);
}

double NoiseSchedule::sigma_max() const {
  if (kind_ == ScheduleKind::VE) return sigma_max_;
  return sigma(1.0);
}

double NoiseSchedule::terminal_std() const {
  return kind_ == ScheduleKind::VE ? sigma_max_ : 1.0;
}

}  // namespace vdd
