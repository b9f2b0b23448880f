#pragma once

#include <string>
#include <vector>

#include "vdd/data.hpp"
#include "vdd/rng.hpp"
#include "vdd/teacher.hpp"

namespace vdd {

enum class Activation { Tanh, Identity };

struct ScoreNetTape {
  Vec in, z1, a1, z2, a2, out;
};

struct ScoreNetGrads {
  Mat W1, W2, W3;
  Vec b1, b2, b3;

  void resize_like(const class ScoreNet& net);
  void set_zero();
  void scale(double f);
};

// Fixed two-hidden-layer perceptron mapping (a, s, log sigma) -> a d-vector,
// with hand-written backpropagation. Gradients are exact, both w.r.t. the
// weights and w.r.t. the action input, so a trained net can act as a
// ScoreFunction. The score is the noise-scaled head output
//   score(a, s, t) = forward(a, s, sigma(t)) / sigma(t),
// which keeps the regression target at unit scale across noise levels.
class ScoreNet : public ScoreFunction {
 public:
  ScoreNet() = default;
  ScoreNet(int action_dim, int state_dim, int hidden1, int hidden2, Activation act,
           NoiseSchedule sched, uint64_t seed);

  Vec forward(const Vec& a, const Vec& s, double sigma, ScoreNetTape* tape = nullptr) const;

  // Backpropagate an upstream gradient on the output; accumulates weight
  // gradients into `accum` (if given) and returns the gradient w.r.t. the
  // full input vector [a; s; log sigma].
  Vec backward(const ScoreNetTape& tape, const Vec& g_out, ScoreNetGrads* accum) const;

  Vec score(const Vec& a, const Vec& s, double t) const override;
  int action_dim() const override { return action_dim_; }
  int state_dim() const { return state_dim_; }
  const NoiseSchedule& schedule() const override { return sched_; }

  int hidden1() const { return static_cast<int>(b1_.size()); }
  int hidden2() const { return static_cast<int>(b2_.size()); }
  Activation activation() const { return act_; }

  Mat W1_, W2_, W3_;
  Vec b1_, b2_, b3_;

  void set_schedule(NoiseSchedule sched) { sched_ = sched; }
  void set_dims(int action_dim, int state_dim, Activation act) {
    action_dim_ = action_dim;
    state_dim_ = state_dim;
    act_ = act;
  }

 private:
  int action_dim_ = 0, state_dim_ = 0;
  Activation act_ = Activation::Tanh;
  NoiseSchedule sched_ = NoiseSchedule::ve(0.1, 1.0);
};

struct DsmConfig {
  int epochs = 100;
  int batch_size = 128;
  double step_size = 1e-3;
  double step_size_final = -1.0;  // <0: constant
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  uint64_t seed = 0;
};

// Denoising score matching: minimize E || f(alpha a + sigma eps, s, t) + eps/sigma ||^2
// with the noise level drawn log-uniformly over [sigma_min, sigma_max] (VE) or
// uniformly on the step grid (VP). Returns the per-epoch mean loss.
std::vector<double> dsm_train(ScoreNet& net, const PairSet& data, const DsmConfig& cfg);

}  // namespace vdd
