#include <doctest.h>

#include <cmath>

#include "vdd/teacher.hpp"

using namespace vdd;

namespace {

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

std::shared_ptr<ConditionalGmmTarget> two_mode_target(double w0, NoiseSchedule sched) {
  std::vector<Vec> means = {v2(-1.5, 0.0), v2(1.5, 0.0)};
  std::vector<Mat> chols = {0.3 * Mat::Identity(2, 2), 0.3 * Mat::Identity(2, 2)};
  Vec w(2);
  w << w0, 1.0 - w0;
  return make_static_gmm(means, chols, w, 2, sched);
}

}  // namespace

TEST_CASE("VE schedule endpoints and monotonicity") {
  const NoiseSchedule s = NoiseSchedule::ve(0.1, 2.0);
  CHECK(s.sigma(0.0) == doctest::Approx(0.1));
  CHECK(s.sigma(1.0) == doctest::Approx(2.0));
  CHECK(s.alpha(0.37) == 1.0);
  double prev = 0.0;
  for (int i = 0; i <= 50; ++i) {
    const double cur = s.sigma(i / 50.0);
    CHECK(cur >= prev);
    CHECK(cur > 0.0);
    prev = cur;
  }
  CHECK(s.sigma_to_t(s.sigma(0.42)) == doctest::Approx(0.42).epsilon(1e-12));
}

TEST_CASE("VP schedule: alpha(0)=1, near-unit terminal noise, grid positivity") {
  const NoiseSchedule s = NoiseSchedule::vp(100, 1e-4, 0.2);
  CHECK(s.alpha(0.0) == doctest::Approx(1.0));
  CHECK(s.sigma(0.0) == doctest::Approx(0.0));
  CHECK(s.sigma(1.0) > 0.999);
  CHECK(s.alpha(1.0) < 0.02);
  double prev = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double cur = s.sigma(static_cast<double>(k) / 100);
    CHECK(cur > 0.0);
    CHECK(cur >= prev);
    prev = cur;
  }
  // alpha^2 + sigma^2 = 1 on the grid (variance preserving).
  for (int k = 0; k <= 100; k += 10) {
    const double t = static_cast<double>(k) / 100;
    CHECK(s.alpha(t) * s.alpha(t) + s.sigma(t) * s.sigma(t) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("noised_marginal: isotropic single component, VE") {
  const NoiseSchedule sched = NoiseSchedule::ve(0.1, 1.0);
  const double s0 = 0.4;
  auto target = make_static_gmm({v2(0.3, -0.2)}, {s0 * Mat::Identity(2, 2)}, Vec::Ones(1), 2, sched);
  const double t = 0.6;
  const GmmParams g = target->noised_marginal(Vec::Zero(2), t);
  const double sig = sched.sigma(t);
  const double expected = std::sqrt(s0 * s0 + sig * sig);
  CHECK(g.comps[0].chol(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(g.comps[0].chol(1, 1) == doctest::Approx(expected).epsilon(1e-12));
  CHECK((g.comps[0].mean - v2(0.3, -0.2)).norm() < 1e-15);
}

TEST_CASE("noised_marginal: VP at t=0 is the identity") {
  const NoiseSchedule sched = NoiseSchedule::vp(100, 1e-4, 0.2);
  auto target = two_mode_target(0.5, sched);
  const GmmParams clean = target->components(Vec::Zero(2));
  const GmmParams at0 = target->noised_marginal(Vec::Zero(2), 0.0);
  for (int i = 0; i < 2; ++i) {
    CHECK((at0.comps[i].mean - clean.comps[i].mean).norm() < 1e-15);
    CHECK((at0.comps[i].chol - clean.comps[i].chol).norm() < 1e-15);
  }
}

TEST_CASE("noised_marginal matches forward-perturbed sample moments") {
  const NoiseSchedule sched = NoiseSchedule::ve(0.1, 1.0);
  auto target = two_mode_target(0.65, sched);
  const Vec s = Vec::Zero(2);
  const double t = 0.5;
  Rng rng(99);
  const GmmParams clean = target->components(s);
  const int n = 100000;
  Vec mean = Vec::Zero(2);
  Mat second = Mat::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const int comp = rng.uniform() < 0.65 ? 0 : 1;
    const Vec a0 = reparameterize(clean.comps[comp], rng.normal_vec(2));
    const Vec at = forward_perturb(a0, t, rng.normal_vec(2), sched);
    mean += at;
    second += at * at.transpose();
  }
  mean /= n;
  const Mat cov = second / n - mean * mean.transpose();

  const GmmParams noised = target->noised_marginal(s, t);
  Vec mean_th = Vec::Zero(2);
  Mat second_th = Mat::Zero(2, 2);
  for (int i = 0; i < 2; ++i) {
    const double w = std::exp(noised.log_weights[i]);
    mean_th += w * noised.comps[i].mean;
    second_th += w * (noised.comps[i].chol * noised.comps[i].chol.transpose() +
                      noised.comps[i].mean * noised.comps[i].mean.transpose());
  }
  const Mat cov_th = second_th - mean_th * mean_th.transpose();
  CHECK((mean - mean_th).norm() < 0.02);
  CHECK((cov - cov_th).norm() / cov_th.norm() < 0.03);
}

TEST_CASE("analytic_score: single Gaussian closed form") {
  const NoiseSchedule sched = NoiseSchedule::ve(0.1, 1.0);
  const double s0 = 0.5;
  auto target = make_static_gmm({v2(0.2, 0.4)}, {s0 * Mat::Identity(2, 2)}, Vec::Ones(1), 2, sched);
  const double t = 0.7;
  const double var = s0 * s0 + sched.sigma(t) * sched.sigma(t);
  Rng rng(3);
  const Vec a = rng.normal_vec(2);
  const Vec score = target->score(a, Vec::Zero(2), t);
  CHECK((score + (a - v2(0.2, 0.4)) / var).norm() < 1e-12);
}

TEST_CASE("analytic_score: symmetry on the perpendicular bisector") {
  const NoiseSchedule sched = NoiseSchedule::ve(0.1, 1.0);
  auto target = two_mode_target(0.5, sched);
  // Modes sit at x = +-1.5; on the bisector x=0 the x-component vanishes.
  const Vec a = v2(0.0, 0.7);
  const Vec score = target->score(a, Vec::Zero(2), 0.4);
  CHECK(std::abs(score[0]) < 1e-12);
}

TEST_CASE("analytic_score matches finite differences of the noised log-density") {
  const NoiseSchedule sched = NoiseSchedule::ve(0.05, 1.5);
  auto target = two_mode_target(0.3, sched);
  Rng rng(77);
  const Vec s = Vec::Zero(2);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec a = 2.0 * rng.normal_vec(2);
    const double t = rng.uniform(0.05, 1.0);
    const Vec score = target->score(a, s, t);
    const double h = 1e-5;
    for (int i = 0; i < 2; ++i) {
      Vec ap = a, am = a;
      ap[i] += h;
      am[i] -= h;
      const double fd = (target->log_pdf(ap, s, t) - target->log_pdf(am, s, t)) / (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(score[i]), 1e-4});
      CHECK(std::abs(score[i] - fd) / denom < 1e-5);
    }
  }
}

TEST_CASE("forward_perturb basics") {
  const NoiseSchedule vp = NoiseSchedule::vp(100, 1e-4, 0.2);
  const Vec a0 = v2(0.5, -1.0);
  CHECK((forward_perturb(a0, 0.0, v2(3.0, 3.0), vp) - a0).norm() < 1e-15);
  const double t = 0.5;
  CHECK((forward_perturb(a0, t, Vec::Zero(2), vp) - vp.alpha(t) * a0).norm() < 1e-15);
}

TEST_CASE("noised marginal at t->0 stays close to the clean target (VE)") {
  // Component-wise Gaussian KL bound; sigma_min at 2 percent of the mode scale.
  const double s0 = 0.5;
  const NoiseSchedule sched = NoiseSchedule::ve(0.02 * s0, 1.0);
  auto target = two_mode_target(0.5, sched);
  const GmmParams clean = target->components(Vec::Zero(2));
  const GmmParams noised = target->noised_marginal(Vec::Zero(2), 0.0);
  double kl = 0.0;
  for (int i = 0; i < 2; ++i) {
    const Mat S0 = clean.comps[i].chol * clean.comps[i].chol.transpose();
    const Mat S1 = noised.comps[i].chol * noised.comps[i].chol.transpose();
    const Mat S0inv = S0.inverse();
    const double term =
        0.5 * ((S0inv * S1).trace() - 2.0 + std::log(S0.determinant() / S1.determinant()));
    kl += std::exp(clean.log_weights[i]) * term;
  }
  CHECK(std::abs(kl) < 1e-3);
}

TEST_CASE("reverse_sde_sample is deterministic in the seed") {
  const NoiseSchedule sched = NoiseSchedule::ve(0.02, 3.0);
  auto target = two_mode_target(0.5, sched);
  Rng a(1234), b(1234);
  const Vec x = reverse_sde_sample(*target, Vec::Zero(2), 32, a);
  const Vec y = reverse_sde_sample(*target, Vec::Zero(2), 32, b);
  CHECK((x - y).norm() == 0.0);
}

TEST_CASE("reverse_sde_sample recovers single-Gaussian moments within 5%") {
  const NoiseSchedule sched = NoiseSchedule::ve(0.02, 3.0);
  auto target =
      make_static_gmm({v2(0.4, -0.2)}, {0.5 * Mat::Identity(2, 2)}, Vec::Ones(1), 2, sched);
  Rng rng(555);
  const int n = 10000;
  Vec mean = Vec::Zero(2);
  Mat second = Mat::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const Vec x = reverse_sde_sample(*target, Vec::Zero(2), 64, rng);
    mean += x;
    second += x * x.transpose();
  }
  mean /= n;
  const Mat cov = second / n - mean * mean.transpose();
  const Mat cov_target = 0.25 * Mat::Identity(2, 2);
  CHECK((mean - v2(0.4, -0.2)).norm() < 0.05 * 0.5 + 4.0 * 0.5 / std::sqrt(n));
  CHECK((cov - cov_target).norm() / cov_target.norm() < 0.05);
}

TEST_CASE("reverse_sde_sample splits mass by the mode weights") {
  // The terminal prior N(0, sigma_max^2 I) must dominate the data spread or
  // the basin assignment inherits its mismatch; sigma_max = 10 vs modes at
  // +-1.5 keeps that bias well under the sampling noise.
  const NoiseSchedule sched = NoiseSchedule::ve(0.02, 10.0);
  auto target = two_mode_target(0.7, sched);
  Rng rng(808);
  const int n = 4000;
  int left = 0;
  for (int i = 0; i < n; ++i) {
    const Vec x = reverse_sde_sample(*target, Vec::Zero(2), 128, rng);
    // Nearest-mode classifier.
    if ((x - v2(-1.5, 0.0)).norm() < (x - v2(1.5, 0.0)).norm()) ++left;
  }
  const double p = left / static_cast<double>(n);
  const double se = std::sqrt(0.7 * 0.3 / n);
  CHECK(std::abs(p - 0.7) < 3.0 * se);
}

TEST_CASE("refining the reverse-SDE grid leaves moments within sampling noise") {
  const NoiseSchedule sched = NoiseSchedule::ve(0.02, 3.0);
  auto target =
      make_static_gmm({v2(0.0, 0.0)}, {0.5 * Mat::Identity(2, 2)}, Vec::Ones(1), 2, sched);
  auto moments = [&](int steps, uint64_t seed) {
    Rng rng(seed);
    const int n = 10000;
    Vec mean = Vec::Zero(2);
    double second = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec x = reverse_sde_sample(*target, Vec::Zero(2), steps, rng);
      mean += x;
      second += x.squaredNorm();
    }
    mean /= n;
    return std::make_pair(mean, second / n);
  };
  const auto [m32, s32] = moments(32, 42);
  const auto [m64, s64] = moments(64, 43);
  const double se_mean = 0.5 / std::sqrt(10000.0);  // per-coordinate std / sqrt(n)
  CHECK((m32 - m64).norm() < 3.0 * se_mean * std::sqrt(2.0));
  const double se_second = std::sqrt(2.0 * 0.25 * 0.25 * 2.0 / 10000.0) * 2.0;
  CHECK(std::abs(s32 - s64) < 3.0 * se_second);
}

TEST_CASE("reverse_sde_sample reports the failing step on blow-up") {
  const NoiseSchedule sched = NoiseSchedule::ve(0.1, 1.0);

  struct BadScore : ScoreFunction {
    NoiseSchedule s = NoiseSchedule::ve(0.1, 1.0);
    Vec score(const Vec& a, const Vec&, double) const override {
      return Vec::Constant(a.size(), std::numeric_limits<double>::quiet_NaN());
    }
    int action_dim() const override { return 2; }
    const NoiseSchedule& schedule() const override { return s; }
  } bad;

  Rng rng(1);
  CHECK_THROWS_WITH_AS(reverse_sde_sample(bad, Vec::Zero(2), 8, rng),
                       doctest::Contains("step 0"), std::runtime_error);
}
