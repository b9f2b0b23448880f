#include <doctest.h>

#include <cmath>

#include "vdd/categorical.hpp"
#include "vdd/gaussian.hpp"
#include "vdd/rng.hpp"

using namespace vdd;

namespace {

Mat lower2(double l11, double l21, double l22) {
  Mat L = Mat::Zero(2, 2);
  L(0, 0) = l11;
  L(1, 0) = l21;
  L(1, 1) = l22;
  return L;
}

GaussianParams random_gaussian(int d, Rng& rng) {
  GaussianParams p;
  p.mean = rng.normal_vec(d);
  p.chol = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    p.chol(i, i) = 0.3 + std::abs(rng.normal());
    for (int j = 0; j < i; ++j) p.chol(i, j) = 0.5 * rng.normal();
  }
  return p;
}

// Dense oracle with an explicit inverse, kept independent of the triangular
// solve the implementation uses.
double dense_log_pdf(const Vec& x, const GaussianParams& p) {
  const Mat sigma = p.chol * p.chol.transpose();
  const Vec diff = x - p.mean;
  const double quad = diff.dot(sigma.inverse() * diff);
  const double logdet = std::log((2.0 * M_PI * sigma).determinant());
  return -0.5 * (quad + logdet);
}

}  // namespace

TEST_CASE("gaussian_log_pdf closed forms") {
  GaussianParams std2{Vec::Zero(2), Mat::Identity(2, 2)};
  CHECK(gaussian_log_pdf(Vec::Zero(2), std2) == doctest::Approx(-1.8378770664).epsilon(1e-9));

  GaussianParams diag{Vec::Zero(2), lower2(0.7, 0.0, 1.9)};
  CHECK(gaussian_log_pdf(Vec::Zero(2), diag) ==
        doctest::Approx(-kLog2Pi - std::log(0.7 * 1.9)).epsilon(1e-12));
}

TEST_CASE("gaussian_log_pdf matches dense oracle, d=3") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const GaussianParams p = random_gaussian(3, rng);
    const Vec x = rng.normal_vec(3);
    CHECK(gaussian_log_pdf(x, p) == doctest::Approx(dense_log_pdf(x, p)).epsilon(1e-10));
  }
}

TEST_CASE("gaussian_log_pdf error paths") {
  GaussianParams p{Vec::Zero(2), Mat::Identity(2, 2)};
  CHECK_THROWS_AS(gaussian_log_pdf(Vec::Zero(3), p), std::invalid_argument);
  GaussianParams bad{Vec::Zero(2), lower2(1.0, 0.0, -0.5)};
  CHECK_THROWS_AS(gaussian_log_pdf(Vec::Zero(2), bad), std::invalid_argument);
}

TEST_CASE("reparameterize basics") {
  Rng rng(7);
  const GaussianParams p = random_gaussian(2, rng);
  CHECK((reparameterize(p, Vec::Zero(2)) - p.mean).norm() == doctest::Approx(0.0));

  GaussianParams id{Vec::Zero(3), Mat::Identity(3, 3)};
  const Vec e = rng.normal_vec(3);
  CHECK((reparameterize(id, e) - e).norm() == doctest::Approx(0.0));
  CHECK_THROWS_AS(reparameterize(p, Vec::Zero(3)), std::invalid_argument);
}

TEST_CASE("reparameterize Monte Carlo moments") {
  Rng rng(2024);
  const GaussianParams p = random_gaussian(2, rng);
  const int n = 100000;
  Vec mean = Vec::Zero(2);
  Mat second = Mat::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const Vec x = reparameterize(p, rng.normal_vec(2));
    mean += x;
    second += x * x.transpose();
  }
  mean /= n;
  const Mat cov = second / n - mean * mean.transpose();
  const Mat sigma = p.chol * p.chol.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> eig(sigma);
  const double sigma_max = std::sqrt(eig.eigenvalues().maxCoeff());
  CHECK((mean - p.mean).norm() < 4.0 * sigma_max / std::sqrt(static_cast<double>(n)));
  CHECK((cov - sigma).norm() / sigma.norm() < 0.05);
}

TEST_CASE("gaussian_entropy closed forms and MC oracle") {
  GaussianParams std2{Vec::Zero(2), Mat::Identity(2, 2)};
  CHECK(gaussian_entropy(std2) == doctest::Approx(2.8378770664).epsilon(1e-9));

  GaussianParams two{Vec::Zero(2), 2.0 * Mat::Identity(2, 2)};
  CHECK(gaussian_entropy(two) ==
        doctest::Approx(gaussian_entropy(std2) + std::log(4.0)).epsilon(1e-12));

  Rng rng(5);
  const GaussianParams p = random_gaussian(2, rng);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lp = gaussian_log_pdf(reparameterize(p, rng.normal_vec(2)), p);
    sum += lp;
    sumsq += lp * lp;
  }
  const double est = -sum / n;
  const double se = std::sqrt((sumsq / n - (sum / n) * (sum / n)) / n);
  CHECK(std::abs(est - gaussian_entropy(p)) < 3.0 * se);
}

TEST_CASE("entropy depends only on the diagonal product") {
  Rng rng(17);
  const GaussianParams p = random_gaussian(3, rng);
  double prod = 1.0;
  for (int i = 0; i < 3; ++i) prod *= p.chol(i, i);
  // Rescaled diagonal with the same product, off-diagonals dropped.
  Mat L2 = Mat::Zero(3, 3);
  L2(0, 0) = 2.0 * p.chol(0, 0);
  L2(1, 1) = 0.5 * p.chol(1, 1);
  L2(2, 2) = prod / (L2(0, 0) * L2(1, 1));
  GaussianParams q{p.mean, L2};
  CHECK(gaussian_entropy(q) == doctest::Approx(gaussian_entropy(p)).epsilon(1e-12));
}

TEST_CASE("gaussian_score closed forms") {
  Rng rng(23);
  const GaussianParams p = random_gaussian(2, rng);
  CHECK(gaussian_score(p.mean, p).norm() == doctest::Approx(0.0));

  const double s = 0.8;
  GaussianParams iso{Vec::Ones(2), s * Mat::Identity(2, 2)};
  const Vec x = rng.normal_vec(2);
  CHECK((gaussian_score(x, iso) + (x - iso.mean) / (s * s)).norm() < 1e-12);
}

TEST_CASE("gaussian_score equals the gradient of gaussian_log_pdf") {
  Rng rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const GaussianParams p = random_gaussian(3, rng);
    const Vec x = p.mean + rng.normal_vec(3);
    const Vec score = gaussian_score(x, p);
    const double h = 1e-5;
    for (int i = 0; i < 3; ++i) {
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (gaussian_log_pdf(xp, p) - gaussian_log_pdf(xm, p)) / (2 * h);
      CHECK(std::abs(score[i] - fd) < 1e-6);
      if (std::abs(fd) > 1e-3) CHECK(std::abs(score[i] - fd) / std::abs(fd) < 1e-5);
    }
  }
}

TEST_CASE("log_pdf normalizes: 2D quadrature over +-8 sigma") {
  Rng rng(41);
  const GaussianParams p = random_gaussian(2, rng);
  const Mat sigma = p.chol * p.chol.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> eig(sigma);
  const double smax = std::sqrt(eig.eigenvalues().maxCoeff());
  const double half = 8.0 * smax;
  const int grid = 500;
  const double h = 2.0 * half / grid;
  double total = 0.0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      Vec x(2);
      x << p.mean[0] - half + (i + 0.5) * h, p.mean[1] - half + (j + 0.5) * h;
      total += std::exp(gaussian_log_pdf(x, p)) * h * h;
    }
  }
  CHECK(std::abs(total - 1.0) < 1e-3);
}

TEST_CASE("unconstrained Cholesky parameterization round-trips") {
  Rng rng(53);
  const GaussianParams p = random_gaussian(3, rng);
  const Mat raw = raw_from_chol(p.chol);
  CHECK((chol_from_raw(raw) - p.chol).norm() < 1e-14);
  const Mat sigma = p.chol * p.chol.transpose();
  Eigen::LLT<Mat> llt(sigma);
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("log_softmax basics") {
  const Vec lp = log_softmax(Vec::Constant(4, 3.7));
  for (int i = 0; i < 4; ++i) CHECK(lp[i] == doctest::Approx(-std::log(4.0)).epsilon(1e-12));

  Vec extreme(2);
  extreme << 1000.0, 0.0;
  const Vec lp2 = log_softmax(extreme);
  CHECK(std::isfinite(lp2[0]));
  CHECK(std::exp(lp2[0]) == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(3);
  const Vec lp3 = log_softmax(rng.normal_vec(6));
  double total = 0.0;
  for (int i = 0; i < 6; ++i) total += std::exp(lp3[i]);
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("categorical_sample frequencies within multinomial bounds") {
  Rng rng(61);
  Vec logits(4);
  logits << 0.3, -0.5, 1.1, 0.0;
  const Vec probs = log_softmax(logits).array().exp();
  const int n = 100000;
  Eigen::Vector4i counts = Eigen::Vector4i::Zero();
  for (int i = 0; i < n; ++i) counts[categorical_sample(logits, rng.uniform())]++;
  for (int k = 0; k < 4; ++k) {
    const double se = std::sqrt(probs[k] * (1 - probs[k]) / n);
    CHECK(std::abs(counts[k] / static_cast<double>(n) - probs[k]) < 3.0 * se);
  }
}
