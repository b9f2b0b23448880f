#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vdd/gaussian.hpp"
#include "vdd/rng.hpp"
#include "vdd/schedule.hpp"

namespace vdd {

// Gaussian mixture in one state: log-weights plus per-component parameters.
struct GmmParams {
  Vec log_weights;
  std::vector<GaussianParams> comps;

  int dim() const { return comps.empty() ? 0 : comps.front().dim(); }
  double log_pdf(const Vec& x) const;
  Vec score(const Vec& x) const;
};

// Contract for anything that can provide scores of a noised target
// distribution: score(a, s, t) ~ grad_a log pi_t(a|s).
class ScoreFunction {
 public:
  virtual ~ScoreFunction() = default;
  virtual Vec score(const Vec& a, const Vec& s, double t) const = 0;
  virtual int action_dim() const = 0;
  virtual const NoiseSchedule& schedule() const = 0;

  // Analytic teachers expose exact clean log-densities; trained nets do not.
  virtual bool has_log_density() const { return false; }
  virtual double log_density(const Vec& /*a*/, const Vec& /*s*/) const {
    throw std::runtime_error("this score function has no tractable log-density");
  }
};

// Conditional GMM teacher with exact scores at every noise level. The state
// dependence of weights and means is a fixed analytic rule supplied at
// construction; covariances are state-independent Cholesky factors.
class ConditionalGmmTarget : public ScoreFunction {
 public:
  using StateRule = std::function<void(const Vec& s, Vec& weights, std::vector<Vec>& means)>;

  ConditionalGmmTarget(int action_dim, int state_dim, std::vector<Mat> chols,
                       StateRule rule, NoiseSchedule sched);

  // Clean mixture at state s (t = 0 for VP; exactly the data distribution).
  GmmParams components(const Vec& s) const;

  // Mixture after forward diffusion to time t: component i becomes
  // N(alpha mu_i, alpha^2 Sigma_i + sigma^2 I); weights unchanged.
  GmmParams noised_marginal(const Vec& s, double t) const;

  double log_pdf(const Vec& a, const Vec& s, double t) const;

  Vec score(const Vec& a, const Vec& s, double t) const override;
  int action_dim() const override { return action_dim_; }
  int state_dim() const { return state_dim_; }
  const NoiseSchedule& schedule() const override { return sched_; }
  bool has_log_density() const override { return true; }
  double log_density(const Vec& a, const Vec& s) const override;

  int num_components() const { return static_cast<int>(chols_.size()); }

 private:
  int action_dim_, state_dim_;
  std::vector<Mat> chols_;
  StateRule rule_;
  NoiseSchedule sched_;
};

// Fixed mixture that ignores the state.
std::shared_ptr<ConditionalGmmTarget> make_static_gmm(std::vector<Vec> means,
                                                      std::vector<Mat> chols, Vec weights,
                                                      int state_dim, NoiseSchedule sched);

// Means translated by the state: mu_i(s) = mu_i + s.
std::shared_ptr<ConditionalGmmTarget> make_translated_gmm(std::vector<Vec> means,
                                                          std::vector<Mat> chols, Vec weights,
                                                          NoiseSchedule sched);

// k equally weighted modes on a circle of the given radius, isotropic std.
std::shared_ptr<ConditionalGmmTarget> make_circle_gmm(int modes, double radius, double mode_std,
                                                      int state_dim, NoiseSchedule sched);

// alpha(t) a0 + sigma(t) eps
Vec forward_perturb(const Vec& a0, double t, const Vec& eps, const NoiseSchedule& sched);

// Euler-Maruyama integration of the reverse SDE from t=1 to t=0 on a uniform
// grid, starting from the schedule's terminal prior. Throws (with the step
// index) if the state goes non-finite.
Vec reverse_sde_sample(const ScoreFunction& score, const Vec& s, int n_steps, Rng& rng);

}  // namespace vdd
