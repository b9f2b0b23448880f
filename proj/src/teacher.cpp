#include "vdd/teacher.hpp"

#include <cmath>

#include "vdd/categorical.hpp"

namespace vdd {

double GmmParams::log_pdf(const Vec& x) const {
  Vec terms(log_weights.size());
  for (int i = 0; i < log_weights.size(); ++i)
    terms[i] = log_weights[i] + gaussian_log_pdf(x, comps[i]);
  return log_sum_exp(terms);
}

Vec GmmParams::score(const Vec& x) const {
  // Posterior responsibilities in log-space, then responsibility-weighted
  // component scores.
  const int k = static_cast<int>(comps.size());
  Vec terms(k);
  for (int i = 0; i < k; ++i) terms[i] = log_weights[i] + gaussian_log_pdf(x, comps[i]);
  const Vec log_r = log_softmax(terms);
  Vec out = Vec::Zero(x.size());
  for (int i = 0; i < k; ++i) out += std::exp(log_r[i]) * gaussian_score(x, comps[i]);
  return out;
}

ConditionalGmmTarget::ConditionalGmmTarget(int action_dim, int state_dim, std::vector<Mat> chols,
                                           StateRule rule, NoiseSchedule sched)
    : action_dim_(action_dim),
      state_dim_(state_dim),
      chols_(std::move(chols)),
      rule_(std::move(rule)),
      sched_(sched) {
  require(!chols_.empty(), "target needs at least one component");
  for (const auto& L : chols_)
    require(L.rows() == action_dim_ && L.cols() == action_dim_, "component chol dimension mismatch");
}

GmmParams ConditionalGmmTarget::components(const Vec& s) const {
  const int k = num_components();
  Vec weights;
  std::vector<Vec> means;
  rule_(s, weights, means);
  require(static_cast<int>(means.size()) == k && weights.size() == k,
          "state rule returned wrong component count");
  require(std::abs(weights.sum() - 1.0) < 1e-9 && weights.minCoeff() > 0.0,
          "component weights must be positive and sum to 1");
  GmmParams g;
  g.log_weights = weights.array().log();
  g.comps.reserve(k);
  for (int i = 0; i < k; ++i) g.comps.push_back({means[i], chols_[i]});
  return g;
}

GmmParams ConditionalGmmTarget::noised_marginal(const Vec& s, double t) const {
  require(t >= 0.0 && t <= 1.0, "noised_marginal: t must lie in [0,1]");
  GmmParams g = components(s);
  const double a = sched_.alpha(t);
  const double sig = sched_.sigma(t);
  if (a == 1.0 && sig == 0.0) return g;
  const Mat noise = sig * sig * Mat::Identity(action_dim_, action_dim_);
  for (auto& c : g.comps) {
    const Mat cov = a * a * c.chol * c.chol.transpose() + noise;
    c.mean *= a;
    c.chol = Eigen::LLT<Mat>(cov).matrixL();
  }
  return g;
}

double ConditionalGmmTarget::log_pdf(const Vec& a, const Vec& s, double t) const {
  return noised_marginal(s, t).log_pdf(a);
}

Vec ConditionalGmmTarget::score(const Vec& a, const Vec& s, double t) const {
  return noised_marginal(s, t).score(a);
}

double ConditionalGmmTarget::log_density(const Vec& a, const Vec& s) const {
  return components(s).log_pdf(a);
}

std::shared_ptr<ConditionalGmmTarget> make_static_gmm(std::vector<Vec> means,
                                                      std::vector<Mat> chols, Vec weights,
                                                      int state_dim, NoiseSchedule sched) {
  const int d = static_cast<int>(means.front().size());
  auto rule = [means, weights](const Vec&, Vec& w, std::vector<Vec>& m) {
    w = weights;
    m = means;
  };
  return std::make_shared<ConditionalGmmTarget>(d, state_dim, std::move(chols), rule, sched);
}

std::shared_ptr<ConditionalGmmTarget> make_translated_gmm(std::vector<Vec> means,
                                                          std::vector<Mat> chols, Vec weights,
                                                          NoiseSchedule sched) {
  const int d = static_cast<int>(means.front().size());
  auto rule = [means, weights](const Vec& s, Vec& w, std::vector<Vec>& m) {
    w = weights;
    m = means;
    for (auto& mu : m) mu += s;
  };
  return std::make_shared<ConditionalGmmTarget>(d, d, std::move(chols), rule, sched);
}

std::shared_ptr<ConditionalGmmTarget> make_circle_gmm(int modes, double radius, double mode_std,
                                                      int state_dim, NoiseSchedule sched) {
  std::vector<Vec> means;
  std::vector<Mat> chols;
  for (int i = 0; i < modes; ++i) {
    const double ang = 2.0 * M_PI * i / modes;
    Vec mu(2);
    mu << radius * std::cos(ang), radius * std::sin(ang);
    means.push_back(mu);
    chols.push_back(mode_std * Mat::Identity(2, 2));
  }
  const Vec w = Vec::Constant(modes, 1.0 / modes);
  return make_static_gmm(std::move(means), std::move(chols), w, state_dim, sched);
}

Vec forward_perturb(const Vec& a0, double t, const Vec& eps, const NoiseSchedule& sched) {
  require(eps.size() == a0.size(), "forward_perturb: dimension mismatch");
  return sched.alpha(t) * a0 + sched.sigma(t) * eps;
}

Vec reverse_sde_sample(const ScoreFunction& score, const Vec& s, int n_steps, Rng& rng) {
  require(n_steps >= 1, "reverse_sde_sample: n_steps must be >= 1");
  const NoiseSchedule& sched = score.schedule();
  const int d = score.action_dim();
  Vec a = sched.terminal_std() * rng.normal_vec(d);
  const double dt = 1.0 / n_steps;
  for (int i = 0; i < n_steps; ++i) {
    const double t = 1.0 - i * dt;
    const double g2 = sched.g2(t);
    const Vec drift = sched.drift_coeff(t) * a - g2 * score.score(a, s, t);
    a = a - drift * dt + std::sqrt(g2 * dt) * rng.normal_vec(d);
    if (!all_finite(a))
      throw std::runtime_error("reverse_sde_sample: non-finite state at step " + std::to_string(i));
  }
  return a;
}

}  // namespace vdd
