#pragma once

#include <vector>

#include "vdd/data.hpp"
#include "vdd/features.hpp"
#include "vdd/gaussian.hpp"
#include "vdd/rng.hpp"

namespace vdd {

// One expert: affine-in-features mean a = W phi(s) + b, state-independent
// covariance held in the unconstrained Cholesky parameterization.
struct ExpertParams {
  Mat W;
  Vec b;
  Mat chol_raw;
};

struct GatingParams {
  Mat V;
  Vec c;
};

enum class ModeActionPolicy { SampleThenMean, ArgmaxThenMean };

// Conditional Gaussian mixture of experts over a fixed feature map.
struct MoEParams {
  int action_dim = 0;
  int state_dim = 0;
  FeatureMap features = FeatureMap::identity(2);
  std::vector<ExpertParams> experts;
  GatingParams gating;

  int num_experts() const { return static_cast<int>(experts.size()); }

  GaussianParams expert_forward(const Vec& s, int z) const;
  GaussianParams expert_from_features(const Vec& phi, int z) const;

  Vec gating_logits(const Vec& s) const { return gating.V * features(s) + gating.c; }
  Vec gating_log_probs(const Vec& s) const;

  double log_pdf(const Vec& a, const Vec& s) const;

  // Hierarchical sample: one uniform for the component, then d normals.
  std::pair<int, Vec> sample(const Vec& s, Rng& rng) const;

  // Component by gating sample or argmax (ties -> lowest index), then the
  // expert mean.
  std::pair<int, Vec> mode_action(const Vec& s, ModeActionPolicy policy, Rng& rng) const;
};

// Posterior over experts given (a, s) by Bayes' rule, in log space.
Vec posterior_log_responsibilities(const MoEParams& m, const Vec& a, const Vec& s);
Vec posterior_responsibilities(const MoEParams& m, const Vec& a, const Vec& s);

// Expert means seeded from random dataset actions with jitter, W = 0,
// covariance 0.25 * var(actions) * I; gating uniform (V=0, c=0).
MoEParams init_moe(int num_experts, int action_dim, const FeatureMap& features,
                   const PairSet& data, Rng& rng);

}  // namespace vdd
