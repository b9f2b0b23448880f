#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdd/types.hpp"

namespace vdd {

enum class FeatureKind { Identity, Polynomial, RandomFourier };

struct FeatureSpec {
  FeatureKind kind = FeatureKind::RandomFourier;
  int state_dim = 2;
  int degree = 2;           // polynomial
  int num_features = 64;    // random fourier
  double bandwidth = 1.0;   // random fourier
  uint64_t seed = 0;        // random fourier
};

// Deterministic state feature map. Random Fourier frequencies are frozen at
// construction; an identical spec always yields the identical map.
class FeatureMap {
 public:
  static FeatureMap identity(int state_dim);
  static FeatureMap polynomial(int state_dim, int degree);
  static FeatureMap random_fourier(int state_dim, int m, double bandwidth, uint64_t seed);
  static FeatureMap from_spec(const FeatureSpec& spec);

  Vec operator()(const Vec& s) const;
  int dim() const { return dim_; }
  const FeatureSpec& spec() const { return spec_; }

  const Mat& frequencies() const { return freq_; }
  const Vec& phases() const { return phase_; }
  void set_frozen(Mat freq, Vec phase);

 private:
  FeatureSpec spec_;
  int dim_ = 0;
  Mat freq_;                                  // m x state_dim
  Vec phase_;                                 // m
  std::vector<std::vector<int>> exponents_;   // polynomial monomials
};

// Median pairwise distance over (a subsample of) the states; the usual
// bandwidth heuristic for Fourier features.
double median_heuristic_bandwidth(const std::vector<Vec>& states, int max_points = 256);

}  // namespace vdd
