#include <doctest.h>

#include <cmath>

#include "vdd/categorical.hpp"
#include "vdd/checkpoint.hpp"
#include "vdd/moe.hpp"

using namespace vdd;

namespace {

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

MoEParams small_moe(int Z, const FeatureMap& fm, uint64_t seed) {
  Rng rng(seed);
  MoEParams m;
  m.action_dim = 2;
  m.state_dim = fm.spec().state_dim;
  m.features = fm;
  for (int z = 0; z < Z; ++z) {
    ExpertParams e;
    e.W = Mat::Zero(2, fm.dim());
    for (int i = 0; i < e.W.size(); ++i) e.W.data()[i] = 0.3 * rng.normal();
    e.b = rng.normal_vec(2);
    e.chol_raw = Mat::Zero(2, 2);
    e.chol_raw(0, 0) = std::log(0.4 + 0.3 * rng.uniform());
    e.chol_raw(1, 1) = std::log(0.4 + 0.3 * rng.uniform());
    e.chol_raw(1, 0) = 0.2 * rng.normal();
    m.experts.push_back(std::move(e));
  }
  m.gating.V = Mat::Zero(Z, fm.dim());
  for (int i = 0; i < m.gating.V.size(); ++i) m.gating.V.data()[i] = 0.2 * rng.normal();
  m.gating.c = 0.1 * rng.normal_vec(Z);
  return m;
}

}  // namespace

TEST_CASE("expert_forward: identity features and degenerate weights") {
  const FeatureMap fm = FeatureMap::identity(2);
  MoEParams m = small_moe(1, fm, 1);
  m.experts[0].W = Mat::Identity(2, 2);
  m.experts[0].b = Vec::Zero(2);
  const Vec s = v2(0.4, -1.1);
  CHECK((m.expert_forward(s, 0).mean - s).norm() < 1e-15);

  m.experts[0].W.setZero();
  m.experts[0].b = v2(2.0, 3.0);
  CHECK((m.expert_forward(v2(5.0, -7.0), 0).mean - v2(2.0, 3.0)).norm() < 1e-15);
  CHECK_THROWS_AS(m.expert_forward(s, 3), std::invalid_argument);
}

TEST_CASE("expert_forward: degree-2 polynomial features match hand expansion") {
  const FeatureMap fm = FeatureMap::polynomial(2, 2);
  // Exponent order: s1, s2, s1^2, s1*s2, s2^2.
  MoEParams m = small_moe(1, fm, 2);
  Mat W = Mat::Zero(2, 5);
  W << 1.0, 2.0, 3.0, 4.0, 5.0, -1.0, 0.5, 0.0, 2.0, 1.0;
  m.experts[0].W = W;
  m.experts[0].b = v2(0.5, -0.5);
  const double s1 = 0.7, s2 = -1.3;
  const Vec mean = m.expert_forward(v2(s1, s2), 0).mean;
  CHECK(mean[0] == doctest::Approx(0.5 + s1 + 2 * s2 + 3 * s1 * s1 + 4 * s1 * s2 + 5 * s2 * s2)
                       .epsilon(1e-12));
  CHECK(mean[1] ==
        doctest::Approx(-0.5 - s1 + 0.5 * s2 + 2 * s1 * s2 + s2 * s2).epsilon(1e-12));
}

TEST_CASE("gating_log_probs: uniform cases and dense-softmax oracle") {
  const FeatureMap fm = FeatureMap::identity(2);
  MoEParams m = small_moe(4, fm, 3);
  m.gating.V.setZero();
  m.gating.c.setZero();
  const Vec lp = m.gating_log_probs(v2(0.3, 0.4));
  for (int z = 0; z < 4; ++z) CHECK(lp[z] == doctest::Approx(-std::log(4.0)).epsilon(1e-12));

  MoEParams one = small_moe(1, fm, 4);
  CHECK(one.gating_log_probs(v2(1.0, 1.0))[0] == doctest::Approx(0.0));

  MoEParams m2 = small_moe(3, fm, 5);
  const Vec s = v2(-0.7, 0.2);
  const Vec logits = m2.gating.V * s + m2.gating.c;
  double norm = 0.0;
  for (int z = 0; z < 3; ++z) norm += std::exp(logits[z]);
  const Vec lp2 = m2.gating_log_probs(s);
  for (int z = 0; z < 3; ++z)
    CHECK(lp2[z] == doctest::Approx(logits[z] - std::log(norm)).epsilon(1e-12));
}

TEST_CASE("moe_log_pdf: collapse cases and naive-sum oracle") {
  const FeatureMap fm = FeatureMap::identity(2);
  MoEParams one = small_moe(1, fm, 6);
  const Vec s = v2(0.2, 0.1), a = v2(-0.4, 0.9);
  CHECK(one.log_pdf(a, s) ==
        doctest::Approx(gaussian_log_pdf(a, one.expert_forward(s, 0))).epsilon(1e-12));

  MoEParams twin = small_moe(2, fm, 7);
  twin.experts[1] = twin.experts[0];
  twin.gating.V.setZero();
  twin.gating.c.setZero();
  CHECK(twin.log_pdf(a, s) ==
        doctest::Approx(gaussian_log_pdf(a, twin.expert_forward(s, 0))).epsilon(1e-12));

  MoEParams m4 = small_moe(4, fm, 8);
  const Vec glp = m4.gating_log_probs(s);
  double naive = 0.0;
  for (int z = 0; z < 4; ++z)
    naive += std::exp(glp[z]) * std::exp(gaussian_log_pdf(a, m4.expert_forward(s, z)));
  CHECK(m4.log_pdf(a, s) == doctest::Approx(std::log(naive)).epsilon(1e-10));
}

TEST_CASE("moe_sample: determinism and Z=1 reparameterization equivalence") {
  const FeatureMap fm = FeatureMap::identity(2);
  const MoEParams m = small_moe(3, fm, 9);
  const Vec s = v2(0.5, -0.5);
  Rng r1(42), r2(42);
  const auto [z1, a1] = m.sample(s, r1);
  const auto [z2, a2] = m.sample(s, r2);
  CHECK(z1 == z2);
  CHECK((a1 - a2).norm() == 0.0);

  const MoEParams one = small_moe(1, fm, 10);
  Rng r3(7), r4(7);
  const auto [z3, a3] = one.sample(s, r3);
  (void)r4.uniform();  // the component draw
  const Vec eps = r4.normal_vec(2);
  CHECK(z3 == 0);
  CHECK((a3 - reparameterize(one.expert_forward(s, 0), eps)).norm() == 0.0);
}

TEST_CASE("moe_sample: component frequencies match the gating softmax") {
  const FeatureMap fm = FeatureMap::identity(2);
  const MoEParams m = small_moe(3, fm, 11);
  const Vec s = v2(0.3, 0.9);
  const Vec probs = m.gating_log_probs(s).array().exp();
  Rng rng(2025);
  const int n = 100000;
  Eigen::Vector3i counts = Eigen::Vector3i::Zero();
  for (int i = 0; i < n; ++i) counts[m.sample(s, rng).first]++;
  for (int z = 0; z < 3; ++z) {
    const double se = std::sqrt(probs[z] * (1 - probs[z]) / n);
    CHECK(std::abs(counts[z] / static_cast<double>(n) - probs[z]) < 3.0 * se);
  }
}

TEST_CASE("moe_mode_action: trivial cases and tie-break") {
  const FeatureMap fm = FeatureMap::identity(2);
  MoEParams one = small_moe(1, fm, 12);
  Rng rng(1);
  const Vec s = v2(0.0, 0.0);
  CHECK((one.mode_action(s, ModeActionPolicy::ArgmaxThenMean, rng).second -
         one.expert_forward(s, 0).mean)
            .norm() < 1e-15);

  MoEParams m3 = small_moe(3, fm, 13);
  m3.gating.V.setZero();
  m3.gating.c << 2.0, 1.0, 1.0;
  CHECK(m3.mode_action(s, ModeActionPolicy::ArgmaxThenMean, rng).first == 0);

  MoEParams tie = small_moe(2, fm, 14);
  tie.gating.V.setZero();
  tie.gating.c << 1.0, 1.0;
  CHECK(tie.mode_action(s, ModeActionPolicy::ArgmaxThenMean, rng).first == 0);
}

TEST_CASE("moe density normalizes on a 2D grid") {
  const FeatureMap fm = FeatureMap::identity(2);
  const MoEParams m = small_moe(3, fm, 15);
  const Vec s = v2(0.1, -0.2);
  // Cover all experts to +-8 of the widest scale.
  double cmax = 0.0;
  Vec lo = Vec::Constant(2, 1e30), hi = Vec::Constant(2, -1e30);
  for (int z = 0; z < 3; ++z) {
    const GaussianParams g = m.expert_forward(s, z);
    for (int i = 0; i < 2; ++i) {
      lo[i] = std::min(lo[i], g.mean[i]);
      hi[i] = std::max(hi[i], g.mean[i]);
    }
    cmax = std::max(cmax, g.chol.norm());
  }
  const double pad = 8.0 * cmax;
  const int grid = 600;
  double total = 0.0;
  const double hx = (hi[0] - lo[0] + 2 * pad) / grid;
  const double hy = (hi[1] - lo[1] + 2 * pad) / grid;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j)
      total += std::exp(m.log_pdf(v2(lo[0] - pad + (i + 0.5) * hx, lo[1] - pad + (j + 0.5) * hy), s)) *
               hx * hy;
  CHECK(std::abs(total - 1.0) < 1e-3);
}

TEST_CASE("well-separated mixture beats any single expert on its own samples") {
  const FeatureMap fm = FeatureMap::identity(2);
  MoEParams m = small_moe(2, fm, 16);
  m.experts[0].W.setZero();
  m.experts[1].W.setZero();
  m.experts[0].b = v2(-3.0, 0.0);
  m.experts[1].b = v2(3.0, 0.0);
  m.experts[0].chol_raw = Mat::Zero(2, 2);
  m.experts[1].chol_raw = Mat::Zero(2, 2);
  m.experts[0].chol_raw.diagonal().setConstant(std::log(0.4));
  m.experts[1].chol_raw.diagonal().setConstant(std::log(0.4));
  m.gating.V.setZero();
  m.gating.c.setZero();

  Rng rng(77);
  const Vec s = Vec::Zero(2);
  double mix = 0.0, only0 = 0.0, only1 = 0.0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const Vec a = m.sample(s, rng).second;
    mix += m.log_pdf(a, s);
    only0 += gaussian_log_pdf(a, m.expert_forward(s, 0));
    only1 += gaussian_log_pdf(a, m.expert_forward(s, 1));
  }
  CHECK(mix > only0);
  CHECK(mix > only1);
}

TEST_CASE("checkpoint round-trip reproduces evaluations bit-exactly") {
  const FeatureMap fm = FeatureMap::random_fourier(2, 16, 0.8, 99);
  const MoEParams m = small_moe(4, fm, 17);
  const MoEParams r = moe_from_json(moe_to_json(m));
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Vec s = rng.normal_vec(2), a = rng.normal_vec(2);
    CHECK(m.log_pdf(a, s) == r.log_pdf(a, s));
    CHECK((m.gating_log_probs(s) - r.gating_log_probs(s)).norm() == 0.0);
    Rng ra(i), rb(i);
    const auto [z1, a1] = m.sample(s, ra);
    const auto [z2, a2] = r.sample(s, rb);
    CHECK(z1 == z2);
    CHECK((a1 - a2).norm() == 0.0);
  }
}
