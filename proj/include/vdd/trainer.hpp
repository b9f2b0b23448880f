#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vdd/moe.hpp"
#include "vdd/teacher.hpp"

namespace vdd {

// Diffusion-time distribution p(t) used by the per-expert surrogate. For VE
// schedules the bounds and draws live in sigma space; for VP in normalized t
// (quantized to the step grid).
struct TimestepSampler {
  enum class Kind { Min, Max, Uniform, Interval };
  Kind kind = Kind::Interval;
  double lo = 0.2, hi = 0.5;

  double sample_sigma(const NoiseSchedule& sched, Rng& rng) const;
  double sample_t(const NoiseSchedule& sched, Rng& rng) const;
};

struct VddConfig {
  int num_experts = 8;
  int iterations = 1000;
  int batch_states = 64;
  int mc_samples = 1;
  double step_size = 1e-3;
  double step_size_final = -1.0;  // <0: constant step size
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  TimestepSampler timesteps;
  uint64_t seed = 0;
  bool perturb_action_before_score = false;
  bool learn_gating = true;
  bool use_entropy_term = true;
  bool use_score_term = true;
  bool use_repulsion_term = true;
  bool check_identity = false;  // per-iteration bound-tightness assertion
  int log_every = 25;
  int kl_eval_states = 16;
  int kl_eval_samples = 16;
};

struct ExpertGrad {
  Mat dW;
  Vec db;
  Mat dchol_raw;
};

struct GatingGrad {
  Mat dV;
  Vec dc;
};

// Posterior responsibilities under the frozen snapshot (the E-step of the
// alternation; the snapshot realizes the stop-gradient).
Vec e_step_responsibilities(const MoEParams& snapshot, const Vec& a, const Vec& s);

// grad_a log q~(z | a, s) under the snapshot. Gating terms drop since they do
// not depend on a.
Vec repulsion_grad(const MoEParams& snapshot, const Vec& a, const Vec& s, int z);

// Reparameterized gradient of the per-expert upper-bound objective, averaged
// over the state batch and MC draws. The entropy term uses its closed form.
ExpertGrad expert_m_step_grad(const MoEParams& m, const MoEParams& snapshot, int z,
                              const std::vector<Vec>& states, const ScoreFunction& teacher,
                              const TimestepSampler& ts, const VddConfig& cfg, Rng& rng);

// Softmax cross-entropy gradient with E-step responsibilities as targets.
GatingGrad gating_m_step_grad(const MoEParams& m, const MoEParams& snapshot,
                              const std::vector<Vec>& states, const std::vector<Vec>& actions);

struct VddTrainLog {
  struct Row {
    int iteration;
    double reverse_kl = std::numeric_limits<double>::quiet_NaN();
    double reverse_kl_se = std::numeric_limits<double>::quiet_NaN();
    double gating_entropy = 0.0;
    std::vector<double> expert_mean_norms;
  };
  std::vector<Row> rows;
};

using IterationHook =
    std::function<void(int iteration, const MoEParams& current, const MoEParams& snapshot)>;

// Algorithm: per iteration take a parameter snapshot (E-step), update every
// expert on a fresh state minibatch with Adam, then update the gating on a
// minibatch of dataset pairs. Deterministic for a fixed config.
MoEParams vdd_train(const VddConfig& cfg, const FeatureMap& features, const ScoreFunction& teacher,
                    const PairSet& data, VddTrainLog* log = nullptr,
                    const IterationHook& hook = {});

// Paired MC estimates of the upper bound U and the reverse-KL objective J over
// shared hierarchical samples; requires a teacher with tractable log-density.
struct BoundEstimate {
  double U = 0.0, J = 0.0;
  double se_U = 0.0, se_J = 0.0;
  double diff = 0.0, se_diff = 0.0;
  int n = 0;
};

BoundEstimate estimate_bounds(const MoEParams& q, const MoEParams& q_tilde,
                              const ScoreFunction& teacher, const std::vector<Vec>& states,
                              int samples_per_state, Rng& rng);

// Per-sample tightness of the bound after an E-step:
// log q(a|s) = log gating(z|s) + log expert(a|s,z) - log resp(z|a,s).
// Returns the largest absolute violation over `n` sampled triples.
double bound_identity_max_violation(const MoEParams& m, const PairSet& data, int n, Rng& rng);

}  // namespace vdd
