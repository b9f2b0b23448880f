#pragma once

#include <string>
#include <vector>

#include "vdd/tasks.hpp"

namespace vdd {

struct EntropyEstimate {
  double entropy = 0.0;
  int flagged_s0 = 0;  // initial states where every rollout failed
  int n_s0 = 0;
};

// Behavior entropy in [0,1]: per initial state, entropy (base |B|) of the
// empirical behavior frequencies over successful rollouts, averaged over
// initial states. Failed rollouts are excluded and the frequencies
// renormalized; all-fail states contribute 0 and are flagged.
EntropyEstimate task_entropy(Policy& policy, const ToyTask& task, int n_s0, int rollouts_per_s0,
                             const Rng& base, int threads = 1);

struct SuccessEstimate {
  double rate = 0.0;
  double se = 0.0;
};

SuccessEstimate success_rate(Policy& policy, const ToyTask& task, int n_s0, int rollouts_per_s0,
                             const Rng& base, int threads = 1);

// Entropy of a fixed behavior-frequency table (helper shared with tests).
double behavior_entropy(const std::vector<double>& frequencies);

struct KlEstimate {
  double kl = 0.0;
  double se = 0.0;
};

// (1/|S|) sum_s (1/n) sum_i [log q(a_i|s) - log pi(a_i|s)], a_i ~ q(.|s).
// Requires a teacher with tractable log-density.
KlEstimate reverse_kl_mc(const MoEParams& q, const ScoreFunction& teacher,
                         const std::vector<Vec>& states, int n_samples, Rng& rng);

// Draw n samples from q at state s, assign to nearest target mode; a mode is
// covered when it receives at least (0.2 / k) of the mass.
int mode_coverage(const MoEParams& q, const ConditionalGmmTarget& target, const Vec& s,
                  int n_samples, Rng& rng);

struct BenchResult {
  std::string method;
  int nfe = 1;
  double median_us = 0.0;
  double q25_us = 0.0;
  double q75_us = 0.0;
};

// Wall-clock per action: one MoE forward (NFE=1) vs. reverse-SDE sampling at
// each NFE in nfe_list.
std::vector<BenchResult> inference_benchmark(const MoEParams& moe, const ScoreFunction& teacher,
                                             const std::vector<int>& nfe_list, int repetitions,
                                             const Vec& state, Rng& rng);

}  // namespace vdd
