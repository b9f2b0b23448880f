#pragma once

#include "vdd/types.hpp"

namespace vdd {

// Multivariate Gaussian stored as mean and lower-triangular Cholesky factor L
// of the covariance (Sigma = L L^T). The diagonal of L must be strictly
// positive; all densities and scores go through triangular solves, never an
// explicit inverse.
struct GaussianParams {
  Vec mean;
  Mat chol;

  int dim() const { return static_cast<int>(mean.size()); }
  Mat covariance() const { return chol * chol.transpose(); }
};

void validate(const GaussianParams& p);

double gaussian_log_pdf(const Vec& x, const GaussianParams& p);

// x = mean + L * eps
Vec reparameterize(const GaussianParams& p, const Vec& eps);

// d/2 (1 + log 2pi) + sum_i log L_ii
double gaussian_entropy(const GaussianParams& p);

// grad_x log N(x; mean, LL^T) = -Sigma^{-1} (x - mean)
Vec gaussian_score(const Vec& x, const GaussianParams& p);

// Unconstrained Cholesky parameterization: diagonal entries hold log L_ii,
// the strict lower triangle holds L_ij raw, the upper triangle is ignored.
Mat chol_from_raw(const Mat& raw);
Mat raw_from_chol(const Mat& chol);

// Map a gradient w.r.t. L into the raw parameterization (chain rule through
// the exp on the diagonal). Off-diagonal entries pass through unchanged.
Mat chol_grad_to_raw(const Mat& grad_chol, const Mat& chol);

}  // namespace vdd
