#pragma once

#include <vector>

#include "vdd/types.hpp"

namespace vdd {

// Adam over named parameter blocks. Blocks are registered once in a fixed
// order; every block is expected to be updated on each begin_step/apply cycle
// so the shared bias-correction counter stays meaningful.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  int add(Eigen::Index n) {
    blocks_.push_back(Block{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
    return static_cast<int>(blocks_.size()) - 1;
  }

  void begin_step() { ++t_; }

  void apply(int id, double* p, const double* g, Eigen::Index n, double lr) {
    Block& b = blocks_[static_cast<size_t>(id)];
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (Eigen::Index i = 0; i < n; ++i) {
      b.m[i] = beta1_ * b.m[i] + (1.0 - beta1_) * g[i];
      b.v[i] = beta2_ * b.v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = b.m[i] / bc1;
      const double vhat = b.v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }

  template <typename Derived>
  void apply(int id, Eigen::MatrixBase<Derived>& param, const Eigen::MatrixBase<Derived>& grad,
             double lr) {
    apply(id, param.derived().data(), grad.derived().data(), param.size(), lr);
  }

 private:
  struct Block {
    std::vector<double> m, v;
  };
  std::vector<Block> blocks_;
  long t_ = 0;
  double beta1_, beta2_, eps_;
};

}  // namespace vdd
