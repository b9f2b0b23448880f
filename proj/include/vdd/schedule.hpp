#pragma once

#include <vector>

#include "vdd/types.hpp"

namespace vdd {

enum class ScheduleKind { VE, VP };

// Diffusion noise schedule on normalized time t in [0,1].
//
// VE: sigma(t) = sigma_min^(1-t) sigma_max^t, alpha(t) = 1.
// VP: discrete linear-beta DDPM with K internal steps; t is quantized to the
//     grid k/K, alpha = sqrt(abar_k), sigma = sqrt(1 - abar_k).
class NoiseSchedule {
 public:
  static NoiseSchedule ve(double sigma_min, double sigma_max);
  static NoiseSchedule vp(int steps, double beta_start, double beta_end);

  ScheduleKind kind() const { return kind_; }
  double alpha(double t) const;
  double sigma(double t) const;

  // Reverse-SDE coefficients: drift f(a,t) = drift_coeff(t) * a, and the
  // squared diffusion coefficient g(t)^2.
  double drift_coeff(double t) const;
  double g2(double t) const;

  // VE only: invert sigma(t).
  double sigma_to_t(double sigma) const;

  double sigma_min() const;
  double sigma_max() const;

  // Standard deviation of the terminal prior at t=1 (VE: sigma_max, VP: 1).
  double terminal_std() const;

  int vp_steps() const { return vp_steps_; }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }
  double ve_sigma_min() const { return sigma_min_; }
  double ve_sigma_max() const { return sigma_max_; }

 private:
  NoiseSchedule() = default;
  int vp_index(double t) const;

  ScheduleKind kind_ = ScheduleKind::VE;
  double sigma_min_ = 0.0, sigma_max_ = 0.0;      // VE
  int vp_steps_ = 0;
  double beta_start_ = 0.0, beta_end_ = 0.0;       // VP
  std::vector<double> log_alpha_bar_;              // VP prefix sums, size K+1
};

}  // namespace vdd
