#include "vdd/features.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "vdd/rng.hpp"

namespace vdd {

namespace {

// Monomial exponent tuples of total degree 1..p over n variables, graded
// lexicographic, no constant term (the affine bias lives in the model).
void enumerate_exponents(int n, int degree, std::vector<std::vector<int>>& out) {
  std::vector<int> current(n, 0);
  std::function<void(int, int)> rec = [&](int pos, int remaining) {
    if (pos == n - 1) {
      current[pos] = remaining;
      out.push_back(current);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      current[pos] = e;
      rec(pos + 1, remaining - e);
    }
  };
  for (int total = 1; total <= degree; ++total) rec(0, total);
}

}  // namespace

FeatureMap FeatureMap::identity(int state_dim) {
  FeatureMap f;
  f.spec_ = FeatureSpec{FeatureKind::Identity, state_dim, 0, 0, 0.0, 0};
  f.dim_ = state_dim;
  return f;
}

FeatureMap FeatureMap::polynomial(int state_dim, int degree) {
  require(degree >= 1, "polynomial feature degree must be >= 1");
  FeatureMap f;
  f.spec_ = FeatureSpec{FeatureKind::Polynomial, state_dim, degree, 0, 0.0, 0};
  enumerate_exponents(state_dim, degree, f.exponents_);
  f.dim_ = static_cast<int>(f.exponents_.size());
  return f;
}

FeatureMap FeatureMap::random_fourier(int state_dim, int m, double bandwidth, uint64_t seed) {
  require(m >= 1 && bandwidth > 0.0, "random fourier features need m >= 1, bandwidth > 0");
  FeatureMap f;
  f.spec_ = FeatureSpec{FeatureKind::RandomFourier, state_dim, 0, m, bandwidth, seed};
  Rng rng(seed);
  f.freq_.resize(m, state_dim);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < state_dim; ++j) f.freq_(i, j) = rng.normal() / bandwidth;
  f.phase_.resize(m);
  for (int i = 0; i < m; ++i) f.phase_[i] = rng.uniform() * 2.0 * M_PI;
  f.dim_ = m;
  return f;
}

FeatureMap FeatureMap::from_spec(const FeatureSpec& spec) {
  switch (spec.kind) {
    case FeatureKind::Identity:
      return identity(spec.state_dim);
    case FeatureKind::Polynomial:
      return polynomial(spec.state_dim, spec.degree);
    case FeatureKind::RandomFourier:
      return random_fourier(spec.state_dim, spec.num_features, spec.bandwidth, spec.seed);
  }
  throw std::invalid_argument("unknown feature kind");
}

void FeatureMap::set_frozen(Mat freq, Vec phase) {
  freq_ = std::move(freq);
  phase_ = std::move(phase);
  dim_ = static_cast<int>(phase_.size());
}

Vec FeatureMap::operator()(const Vec& s) const {
  require(s.size() == spec_.state_dim, "feature map: state dimension mismatch");
  switch (spec_.kind) {
    case FeatureKind::Identity:
      return s;
    case FeatureKind::Polynomial: {
      Vec out(dim_);
      for (size_t k = 0; k < exponents_.size(); ++k) {
        double v = 1.0;
        for (int j = 0; j < spec_.state_dim; ++j)
          for (int e = 0; e < exponents_[k][j]; ++e) v *= s[j];
        out[static_cast<int>(k)] = v;
      }
      return out;
    }
    case FeatureKind::RandomFourier: {
      const Vec proj = freq_ * s + phase_;
      const double scale = std::sqrt(2.0 / dim_);
      Vec out(dim_);
      for (int i = 0; i < dim_; ++i) out[i] = scale * std::cos(proj[i]);
      return out;
    }
  }
  throw std::logic_error("unreachable");
}

double median_heuristic_bandwidth(const std::vector<Vec>& states, int max_points) {
  require(!states.empty(), "median heuristic needs states");
  const int n = static_cast<int>(states.size());
  const int stride = std::max(1, n / max_points);
  std::vector<const Vec*> pts;
  for (int i = 0; i < n; i += stride) pts.push_back(&states[i]);
  std::vector<double> dists;
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j) dists.push_back((*pts[i] - *pts[j]).norm());
  if (dists.empty()) return 1.0;
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  const double med = dists[dists.size() / 2];
  return med > 1e-12 ? med : 1.0;
}

}  // namespace vdd
