#include "vdd/scorenet.hpp"

#include <algorithm>
#include <cmath>

#include "vdd/adam.hpp"

namespace vdd {

namespace {

inline double act_fn(double x, Activation a) { return a == Activation::Tanh ? std::tanh(x) : x; }

// Derivative expressed through the activated value.
inline double act_deriv(double y, Activation a) {
  return a == Activation::Tanh ? 1.0 - y * y : 1.0;
}

}  // namespace

void ScoreNetGrads::resize_like(const ScoreNet& net) {
  W1 = Mat::Zero(net.W1_.rows(), net.W1_.cols());
  W2 = Mat::Zero(net.W2_.rows(), net.W2_.cols());
  W3 = Mat::Zero(net.W3_.rows(), net.W3_.cols());
  b1 = Vec::Zero(net.b1_.size());
  b2 = Vec::Zero(net.b2_.size());
  b3 = Vec::Zero(net.b3_.size());
}

void ScoreNetGrads::set_zero() {
  W1.setZero();
  W2.setZero();
  W3.setZero();
  b1.setZero();
  b2.setZero();
  b3.setZero();
}

void ScoreNetGrads::scale(double f) {
  W1 *= f;
  W2 *= f;
  W3 *= f;
  b1 *= f;
  b2 *= f;
  b3 *= f;
}

ScoreNet::ScoreNet(int action_dim, int state_dim, int hidden1, int hidden2, Activation act,
                   NoiseSchedule sched, uint64_t seed)
    : action_dim_(action_dim), state_dim_(state_dim), act_(act), sched_(sched) {
  const int in = action_dim + state_dim + 1;
  Rng rng(seed);
  auto init = [&rng](Mat& W, int rows, int cols) {
    W.resize(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) W(i, j) = scale * rng.normal();
  };
  init(W1_, hidden1, in);
  init(W2_, hidden2, hidden1);
  init(W3_, action_dim, hidden2);
  b1_ = Vec::Zero(hidden1);
  b2_ = Vec::Zero(hidden2);
  b3_ = Vec::Zero(action_dim);
}

Vec ScoreNet::forward(const Vec& a, const Vec& s, double sigma, ScoreNetTape* tape) const {
  require(a.size() == action_dim_ && s.size() == state_dim_, "scorenet: input shape mismatch");
  require(sigma > 0.0, "scorenet: sigma must be positive");
  Vec in(action_dim_ + state_dim_ + 1);
  in << a, s, std::log(sigma);
  const Vec z1 = W1_ * in + b1_;
  Vec a1(z1.size());
  for (int i = 0; i < z1.size(); ++i) a1[i] = act_fn(z1[i], act_);
  const Vec z2 = W2_ * a1 + b2_;
  Vec a2(z2.size());
  for (int i = 0; i < z2.size(); ++i) a2[i] = act_fn(z2[i], act_);
  Vec out = W3_ * a2 + b3_;
  if (tape) {
    tape->in = in;
    tape->z1 = z1;
    tape->a1 = a1;
    tape->z2 = z2;
    tape->a2 = a2;
    tape->out = out;
  }
  return out;
}

Vec ScoreNet::backward(const ScoreNetTape& tape, const Vec& g_out, ScoreNetGrads* accum) const {
  Vec g_a2 = W3_.transpose() * g_out;
  Vec g_z2(g_a2.size());
  for (int i = 0; i < g_a2.size(); ++i) g_z2[i] = g_a2[i] * act_deriv(tape.a2[i], act_);
  Vec g_a1 = W2_.transpose() * g_z2;
  Vec g_z1(g_a1.size());
  for (int i = 0; i < g_a1.size(); ++i) g_z1[i] = g_a1[i] * act_deriv(tape.a1[i], act_);
  if (accum) {
    accum->W3 += g_out * tape.a2.transpose();
    accum->b3 += g_out;
    accum->W2 += g_z2 * tape.a1.transpose();
    accum->b2 += g_z2;
    accum->W1 += g_z1 * tape.in.transpose();
    accum->b1 += g_z1;
  }
  return W1_.transpose() * g_z1;
}

Vec ScoreNet::score(const Vec& a, const Vec& s, double t) const {
  const double sigma = std::max(sched_.sigma(t), sched_.sigma_min());
  return forward(a, s, sigma) / sigma;
}

std::vector<double> dsm_train(ScoreNet& net, const PairSet& data, const DsmConfig& cfg) {
  require(!data.empty(), "dsm_train: empty dataset");
  const int n = static_cast<int>(data.size());
  const int d = net.action_dim();
  const NoiseSchedule& sched = net.schedule();

  Rng rng(cfg.seed);
  Adam opt(cfg.beta1, cfg.beta2, cfg.eps);
  const int idW1 = opt.add(net.W1_.size());
  const int idb1 = opt.add(net.b1_.size());
  const int idW2 = opt.add(net.W2_.size());
  const int idb2 = opt.add(net.b2_.size());
  const int idW3 = opt.add(net.W3_.size());
  const int idb3 = opt.add(net.b3_.size());

  ScoreNetGrads grads;
  grads.resize_like(net);
  ScoreNetTape tape;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  std::vector<double> epoch_loss;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double frac = cfg.epochs > 1 ? static_cast<double>(epoch) / (cfg.epochs - 1) : 0.0;
    const double lr = cfg.step_size_final > 0.0
                          ? cfg.step_size + (cfg.step_size_final - cfg.step_size) * frac
                          : cfg.step_size;
    // Fisher-Yates with our rng, for reproducibility.
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<int>(rng.integer(static_cast<uint64_t>(i) + 1))]);

    double total = 0.0;
    int count = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int end = std::min(n, start + cfg.batch_size);
      const int bs = end - start;
      grads.set_zero();
      for (int b = start; b < end; ++b) {
        const int i = order[b];
        double sigma, t;
        if (sched.kind() == ScheduleKind::VE) {
          sigma = sched.sigma_min() *
                  std::exp(rng.uniform() * std::log(sched.sigma_max() / sched.sigma_min()));
          t = sched.sigma_to_t(sigma);
        } else {
          const int k = 1 + static_cast<int>(rng.integer(static_cast<uint64_t>(sched.vp_steps())));
          t = static_cast<double>(k) / sched.vp_steps();
          sigma = sched.sigma(t);
        }
        const Vec eps = rng.normal_vec(d);
        const Vec x = forward_perturb(data.actions[i], t, eps, sched);
        // sigma^2-weighted DSM: with score = head / sigma the per-sample term
        // sigma^2 || score + eps/sigma ||^2 reduces to || head + eps ||^2,
        // which trains every noise level at unit scale.
        const Vec head = net.forward(x, data.states[i], sigma, &tape);
        const Vec resid = head + eps;
        total += resid.squaredNorm();
        ++count;
        net.backward(tape, (2.0 / bs) * resid, &grads);
      }
      opt.begin_step();
      opt.apply(idW1, net.W1_, grads.W1, lr);
      opt.apply(idb1, net.b1_, grads.b1, lr);
      opt.apply(idW2, net.W2_, grads.W2, lr);
      opt.apply(idb2, net.b2_, grads.b2, lr);
      opt.apply(idW3, net.W3_, grads.W3, lr);
      opt.apply(idb3, net.b3_, grads.b3, lr);
    }
    const double mean_loss = total / count;
    if (!std::isfinite(mean_loss))
      throw std::runtime_error("dsm_train: loss diverged (non-finite) at epoch " +
                               std::to_string(epoch));
    epoch_loss.push_back(mean_loss);
  }
  return epoch_loss;
}

}  // namespace vdd
