#include "vdd/moe.hpp"

#include <cmath>

#include "vdd/categorical.hpp"

namespace vdd {

GaussianParams MoEParams::expert_forward(const Vec& s, int z) const {
  return expert_from_features(features(s), z);
}

GaussianParams MoEParams::expert_from_features(const Vec& phi, int z) const {
  require(z >= 0 && z < num_experts(), "expert index out of range");
  const ExpertParams& e = experts[static_cast<size_t>(z)];
  return GaussianParams{e.W * phi + e.b, chol_from_raw(e.chol_raw)};
}

Vec MoEParams::gating_log_probs(const Vec& s) const { return log_softmax(gating_logits(s)); }

double MoEParams::log_pdf(const Vec& a, const Vec& s) const {
  const Vec phi = features(s);
  const Vec glp = log_softmax(gating.V * phi + gating.c);
  Vec terms(num_experts());
  for (int z = 0; z < num_experts(); ++z)
    terms[z] = glp[z] + gaussian_log_pdf(a, expert_from_features(phi, z));
  return log_sum_exp(terms);
}

std::pair<int, Vec> MoEParams::sample(const Vec& s, Rng& rng) const {
  const int z = categorical_sample(gating_logits(s), rng.uniform());
  const Vec eps = rng.normal_vec(action_dim);
  return {z, reparameterize(expert_forward(s, z), eps)};
}

std::pair<int, Vec> MoEParams::mode_action(const Vec& s, ModeActionPolicy policy, Rng& rng) const {
  const Vec logits = gating_logits(s);
  int z = 0;
  if (policy == ModeActionPolicy::SampleThenMean) {
    z = categorical_sample(logits, rng.uniform());
  } else {
    for (int i = 1; i < logits.size(); ++i)
      if (logits[i] > logits[z]) z = i;
  }
  return {z, expert_forward(s, z).mean};
}

Vec posterior_log_responsibilities(const MoEParams& m, const Vec& a, const Vec& s) {
  const Vec phi = m.features(s);
  const Vec glp = log_softmax(m.gating.V * phi + m.gating.c);
  Vec terms(m.num_experts());
  for (int z = 0; z < m.num_experts(); ++z)
    terms[z] = glp[z] + gaussian_log_pdf(a, m.expert_from_features(phi, z));
  return log_softmax(terms);
}

Vec posterior_responsibilities(const MoEParams& m, const Vec& a, const Vec& s) {
  return posterior_log_responsibilities(m, a, s).array().exp();
}

MoEParams init_moe(int num_experts, int action_dim, const FeatureMap& features,
                   const PairSet& data, Rng& rng) {
  require(num_experts >= 1, "need at least one expert");
  require(!data.empty(), "init_moe: empty dataset");

  // Pooled action standard deviation across dimensions.
  Vec mean = Vec::Zero(action_dim);
  for (const Vec& a : data.actions) mean += a;
  mean /= static_cast<double>(data.size());
  double var = 0.0;
  for (const Vec& a : data.actions) var += (a - mean).squaredNorm();
  var /= static_cast<double>(data.size()) * action_dim;
  const double action_std = std::sqrt(std::max(var, 1e-12));

  MoEParams m;
  m.action_dim = action_dim;
  m.state_dim = features.spec().state_dim;
  m.features = features;
  const double init_chol = 0.5 * action_std;  // covariance 0.25 * std^2 * I
  for (int z = 0; z < num_experts; ++z) {
    ExpertParams e;
    e.W = Mat::Zero(action_dim, features.dim());
    const Vec& anchor = data.actions[rng.integer(data.size())];
    e.b = anchor + 0.1 * action_std * rng.normal_vec(action_dim);
    e.chol_raw = Mat::Zero(action_dim, action_dim);
    for (int i = 0; i < action_dim; ++i) e.chol_raw(i, i) = std::log(init_chol);
    m.experts.push_back(std::move(e));
  }
  m.gating.V = Mat::Zero(num_experts, features.dim());
  m.gating.c = Vec::Zero(num_experts);
  return m;
}

}  // namespace vdd
