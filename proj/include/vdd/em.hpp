#pragma once

#include <string>
#include <vector>

#include "vdd/moe.hpp"

namespace vdd {

struct EmConfig {
  int num_experts = 8;
  int iterations = 50;
  double ridge = 1e-6;
  double cov_floor = 1e-8;
  int gating_max_steps = 100;
  double gating_tol = 1e-6;
  uint64_t seed = 0;
};

struct EmLog {
  std::vector<double> log_likelihood;  // dataset average per outer iteration
  std::vector<std::string> events;     // component reseeds etc.
};

// Maximum-likelihood EM over the same MoE family: responsibilities on data
// pairs, weighted ridge least-squares for the mean maps, weighted empirical
// covariances (eigenvalue-floored), gradient-based gating M-step.
MoEParams em_train(const PairSet& data, const FeatureMap& features, const EmConfig& cfg,
                   EmLog* log = nullptr);

}  // namespace vdd
