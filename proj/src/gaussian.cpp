#include "vdd/gaussian.hpp"

#include <cmath>

namespace vdd {

namespace {
constexpr double kDiagFloor = 1e-300;
}

void validate(const GaussianParams& p) {
  require(p.chol.rows() == p.chol.cols(), "chol must be square");
  require(p.chol.rows() == p.mean.size(), "mean/chol dimension mismatch");
  require(all_finite(p.mean) && all_finite(p.chol), "non-finite Gaussian parameters");
  for (int i = 0; i < p.chol.rows(); ++i) {
    require(p.chol(i, i) > 0.0, "Cholesky diagonal must be strictly positive");
    for (int j = i + 1; j < p.chol.cols(); ++j)
      require(p.chol(i, j) == 0.0, "chol must be lower-triangular");
  }
}

double gaussian_log_pdf(const Vec& x, const GaussianParams& p) {
  require(x.size() == p.mean.size(), "gaussian_log_pdf: dimension mismatch");
  validate(p);
  const int d = p.dim();
  const Vec y = p.chol.triangularView<Eigen::Lower>().solve(x - p.mean);
  double log_det = 0.0;
  for (int i = 0; i < d; ++i) log_det += std::log(p.chol(i, i));
  return -0.5 * d * kLog2Pi - log_det - 0.5 * y.squaredNorm();
}

Vec reparameterize(const GaussianParams& p, const Vec& eps) {
  require(eps.size() == p.mean.size(), "reparameterize: dimension mismatch");
  return p.mean + p.chol.triangularView<Eigen::Lower>() * eps;
}

double gaussian_entropy(const GaussianParams& p) {
  validate(p);
  const int d = p.dim();
  double log_det = 0.0;
  for (int i = 0; i < d; ++i) log_det += std::log(p.chol(i, i));
  return 0.5 * d * (1.0 + kLog2Pi) + log_det;
}

Vec gaussian_score(const Vec& x, const GaussianParams& p) {
  require(x.size() == p.mean.size(), "gaussian_score: dimension mismatch");
  for (int i = 0; i < p.chol.rows(); ++i)
    require(p.chol(i, i) > kDiagFloor, "gaussian_score: singular Cholesky factor");
  const Vec y = p.chol.triangularView<Eigen::Lower>().solve(x - p.mean);
  const Vec w = p.chol.transpose().triangularView<Eigen::Upper>().solve(y);
  return -w;
}

Mat chol_from_raw(const Mat& raw) {
  require(raw.rows() == raw.cols(), "chol_from_raw: raw must be square");
  const int d = static_cast<int>(raw.rows());
  Mat L = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    L(i, i) = std::exp(raw(i, i));
    for (int j = 0; j < i; ++j) L(i, j) = raw(i, j);
  }
  return L;
}

Mat raw_from_chol(const Mat& chol) {
  const int d = static_cast<int>(chol.rows());
  Mat raw = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    require(chol(i, i) > 0.0, "raw_from_chol: diagonal must be positive");
    raw(i, i) = std::log(chol(i, i));
    for (int j = 0; j < i; ++j) raw(i, j) = chol(i, j);
  }
  return raw;
}

Mat chol_grad_to_raw(const Mat& grad_chol, const Mat& chol) {
  const int d = static_cast<int>(chol.rows());
  Mat g = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    g(i, i) = grad_chol(i, i) * chol(i, i);
    for (int j = 0; j < i; ++j) g(i, j) = grad_chol(i, j);
  }
  return g;
}

}  // namespace vdd
