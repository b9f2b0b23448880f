#include "vdd/trainer.hpp"

#include <cmath>

#include "vdd/adam.hpp"
#include "vdd/categorical.hpp"

namespace vdd {

double TimestepSampler::sample_sigma(const NoiseSchedule& sched, Rng& rng) const {
  require(sched.kind() == ScheduleKind::VE, "sigma sampling is for VE schedules");
  switch (kind) {
    case Kind::Min:
      return sched.sigma_min();
    case Kind::Max:
      return sched.sigma_max();
    case Kind::Uniform:
      return rng.uniform(sched.sigma_min(), sched.sigma_max());
    case Kind::Interval:
      require(lo <= hi && lo >= sched.sigma_min() - 1e-12 && hi <= sched.sigma_max() + 1e-12,
              "interval sigma bounds must lie inside the schedule range");
      return rng.uniform(lo, hi);
  }
  throw std::logic_error("unreachable");
}

double TimestepSampler::sample_t(const NoiseSchedule& sched, Rng& rng) const {
  if (sched.kind() == ScheduleKind::VE) return sched.sigma_to_t(sample_sigma(sched, rng));
  const int K = sched.vp_steps();
  auto grid = [&](double t) {
    int k = static_cast<int>(std::lround(t * K));
    if (k < 1) k = 1;
    if (k > K) k = K;
    return k;
  };
  switch (kind) {
    case Kind::Min:
      return 1.0 / K;
    case Kind::Max:
      return 1.0;
    case Kind::Uniform:
      return static_cast<double>(1 + rng.integer(static_cast<uint64_t>(K))) / K;
    case Kind::Interval: {
      const int k_lo = grid(lo), k_hi = grid(hi);
      require(k_lo <= k_hi, "interval t bounds out of order");
      return static_cast<double>(k_lo + rng.integer(static_cast<uint64_t>(k_hi - k_lo + 1))) / K;
    }
  }
  throw std::logic_error("unreachable");
}

Vec e_step_responsibilities(const MoEParams& snapshot, const Vec& a, const Vec& s) {
  return posterior_responsibilities(snapshot, a, s);
}

Vec repulsion_grad(const MoEParams& snapshot, const Vec& a, const Vec& s, int z) {
  const int Z = snapshot.num_experts();
  require(z >= 0 && z < Z, "repulsion_grad: expert index out of range");
  if (Z == 1) return Vec::Zero(a.size());
  const Vec phi = snapshot.features(s);
  std::vector<GaussianParams> comps;
  comps.reserve(Z);
  for (int k = 0; k < Z; ++k) comps.push_back(snapshot.expert_from_features(phi, k));
  const Vec glp = log_softmax(snapshot.gating.V * phi + snapshot.gating.c);
  Vec terms(Z);
  for (int k = 0; k < Z; ++k) terms[k] = glp[k] + gaussian_log_pdf(a, comps[k]);
  const Vec resp = log_softmax(terms).array().exp();
  Vec grad = gaussian_score(a, comps[static_cast<size_t>(z)]);
  for (int k = 0; k < Z; ++k) grad -= resp[k] * gaussian_score(a, comps[static_cast<size_t>(k)]);
  return grad;
}

ExpertGrad expert_m_step_grad(const MoEParams& m, const MoEParams& snapshot, int z,
                              const std::vector<Vec>& states, const ScoreFunction& teacher,
                              const TimestepSampler& ts, const VddConfig& cfg, Rng& rng) {
  require(!states.empty(), "expert_m_step_grad: empty state batch");
  require(z >= 0 && z < m.num_experts(), "expert_m_step_grad: expert index out of range");
  const int d = m.action_dim;
  const NoiseSchedule& sched = teacher.schedule();
  const Mat chol = chol_from_raw(m.experts[static_cast<size_t>(z)].chol_raw);

  ExpertGrad g;
  g.dW = Mat::Zero(d, m.features.dim());
  g.db = Vec::Zero(d);
  Mat dchol = Mat::Zero(d, d);

  const int draws = std::max(1, cfg.mc_samples);
  for (size_t si = 0; si < states.size(); ++si) {
    const Vec& s = states[si];
    const Vec phi = m.features(s);
    const Vec mu = m.experts[static_cast<size_t>(z)].W * phi + m.experts[static_cast<size_t>(z)].b;
    for (int j = 0; j < draws; ++j) {
      const Vec eps = rng.normal_vec(d);
      const Vec a = mu + chol.triangularView<Eigen::Lower>() * eps;
      const double t = ts.sample_t(sched, rng);

      Vec grad_a = Vec::Zero(d);
      if (cfg.use_score_term) {
        Vec a_eval = a;
        if (cfg.perturb_action_before_score) a_eval = forward_perturb(a, t, rng.normal_vec(d), sched);
        const Vec f = teacher.score(a_eval, s, t);
        if (!all_finite(f))
          throw std::runtime_error("expert_m_step_grad: non-finite score term at state " +
                                   std::to_string(si));
        grad_a -= f;
      }
      if (cfg.use_repulsion_term) {
        const Vec r = repulsion_grad(snapshot, a, s, z);
        if (!all_finite(r))
          throw std::runtime_error("expert_m_step_grad: non-finite repulsion term at state " +
                                   std::to_string(si));
        grad_a -= r;
      }
      g.db += grad_a;
      g.dW += grad_a * phi.transpose();
      for (int r = 0; r < d; ++r)
        for (int c = 0; c <= r; ++c) dchol(r, c) += grad_a[r] * eps[c];
    }
  }
  const double inv = 1.0 / (static_cast<double>(states.size()) * draws);
  g.db *= inv;
  g.dW *= inv;
  dchol *= inv;

  g.dchol_raw = chol_grad_to_raw(dchol, chol);
  if (cfg.use_entropy_term) {
    // d(-H)/d raw_ii = -1 with the log-diagonal parameterization.
    for (int i = 0; i < d; ++i) g.dchol_raw(i, i) -= 1.0;
  }
  if (!all_finite(g.dW) || !all_finite(g.db) || !all_finite(g.dchol_raw))
    throw std::runtime_error("expert_m_step_grad: non-finite accumulated gradient (expert " +
                             std::to_string(z) + ")");
  return g;
}

GatingGrad gating_m_step_grad(const MoEParams& m, const MoEParams& snapshot,
                              const std::vector<Vec>& states, const std::vector<Vec>& actions) {
  require(!states.empty() && states.size() == actions.size(),
          "gating_m_step_grad: bad batch");
  const int Z = m.num_experts();
  GatingGrad g;
  g.dV = Mat::Zero(Z, m.features.dim());
  g.dc = Vec::Zero(Z);
  for (size_t i = 0; i < states.size(); ++i) {
    const Vec phi = m.features(states[i]);
    const Vec target = e_step_responsibilities(snapshot, actions[i], states[i]);
    const Vec p = log_softmax(m.gating.V * phi + m.gating.c).array().exp();
    const Vec diff = p - target;
    g.dV += diff * phi.transpose();
    g.dc += diff;
  }
  const double inv = 1.0 / static_cast<double>(states.size());
  g.dV *= inv;
  g.dc *= inv;
  return g;
}

namespace {

std::vector<int> sample_indices_without_replacement(int n, int k, Rng& rng) {
  // Partial Fisher-Yates over an index pool.
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  const int take = std::min(k, n);
  for (int i = 0; i < take; ++i) {
    const int j = i + static_cast<int>(rng.integer(static_cast<uint64_t>(n - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

}  // namespace

MoEParams vdd_train(const VddConfig& cfg, const FeatureMap& features, const ScoreFunction& teacher,
                    const PairSet& data, VddTrainLog* log, const IterationHook& hook) {
  require(cfg.num_experts >= 1, "vdd_train: need at least one expert");
  require(!data.empty(), "vdd_train: empty dataset");
  require(cfg.batch_states <= static_cast<int>(data.size()),
          "vdd_train: batch_states exceeds dataset size");

  Rng rng(cfg.seed);
  const int d = teacher.action_dim();
  MoEParams model = init_moe(cfg.num_experts, d, features, data, rng);

  Adam opt(cfg.beta1, cfg.beta2, cfg.epsilon);
  struct ExpertBlocks {
    int W, b, raw;
  };
  std::vector<ExpertBlocks> eb;
  for (int z = 0; z < cfg.num_experts; ++z)
    eb.push_back({opt.add(model.experts[z].W.size()), opt.add(model.experts[z].b.size()),
                  opt.add(model.experts[z].chol_raw.size())});
  const int gV = opt.add(model.gating.V.size());
  const int gc = opt.add(model.gating.c.size());

  const int n = static_cast<int>(data.size());
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const double frac = cfg.iterations > 1 ? static_cast<double>(iter) / (cfg.iterations - 1) : 0.0;
    const double lr = cfg.step_size_final > 0.0
                          ? cfg.step_size + (cfg.step_size_final - cfg.step_size) * frac
                          : cfg.step_size;

    const MoEParams snapshot = model;  // E-step (stop-gradient copy)

    if (cfg.check_identity) {
      // Off the main stream so the flag does not alter the training trajectory.
      Rng check_rng = rng.split(0x1d3a0000u + static_cast<uint64_t>(iter));
      const double viol = bound_identity_max_violation(model, data, 100, check_rng);
      if (viol > 1e-10)
        throw std::runtime_error("vdd_train: bound identity violated (" + std::to_string(viol) +
                                 ") at iteration " + std::to_string(iter));
    }

    opt.begin_step();
    for (int z = 0; z < cfg.num_experts; ++z) {
      const std::vector<int> idx = sample_indices_without_replacement(n, cfg.batch_states, rng);
      std::vector<Vec> batch;
      batch.reserve(idx.size());
      for (int i : idx) batch.push_back(data.states[static_cast<size_t>(i)]);
      const ExpertGrad g = expert_m_step_grad(model, snapshot, z, batch, teacher, cfg.timesteps,
                                              cfg, rng);
      ExpertParams& e = model.experts[static_cast<size_t>(z)];
      opt.apply(eb[z].W, e.W.data(), g.dW.data(), e.W.size(), lr);
      opt.apply(eb[z].b, e.b.data(), g.db.data(), e.b.size(), lr);
      opt.apply(eb[z].raw, e.chol_raw.data(), g.dchol_raw.data(), e.chol_raw.size(), lr);
    }

    if (cfg.learn_gating && cfg.num_experts > 1) {
      const std::vector<int> idx = sample_indices_without_replacement(n, cfg.batch_states, rng);
      std::vector<Vec> bs, ba;
      bs.reserve(idx.size());
      ba.reserve(idx.size());
      for (int i : idx) {
        bs.push_back(data.states[static_cast<size_t>(i)]);
        ba.push_back(data.actions[static_cast<size_t>(i)]);
      }
      const GatingGrad g = gating_m_step_grad(model, snapshot, bs, ba);
      opt.apply(gV, model.gating.V.data(), g.dV.data(), model.gating.V.size(), lr);
      opt.apply(gc, model.gating.c.data(), g.dc.data(), model.gating.c.size(), lr);
    }

    for (const ExpertParams& e : model.experts)
      if (!all_finite(e.W) || !all_finite(e.b) || !all_finite(e.chol_raw))
        throw std::runtime_error("vdd_train: non-finite parameters at iteration " +
                                 std::to_string(iter));

    if (log && (iter % cfg.log_every == 0 || iter == cfg.iterations - 1)) {
      VddTrainLog::Row row;
      row.iteration = iter;
      Rng log_rng = rng.split(0x10900000u + static_cast<uint64_t>(iter));
      const std::vector<int> idx =
          sample_indices_without_replacement(n, std::min(n, cfg.kl_eval_states), log_rng);
      double ent = 0.0;
      std::vector<double> norms(static_cast<size_t>(cfg.num_experts), 0.0);
      for (int i : idx) {
        const Vec& s = data.states[static_cast<size_t>(i)];
        ent += categorical_entropy(model.gating_logits(s));
        for (int z = 0; z < cfg.num_experts; ++z)
          norms[static_cast<size_t>(z)] += model.expert_forward(s, z).mean.norm();
      }
      row.gating_entropy = ent / idx.size();
      for (double& v : norms) v /= idx.size();
      row.expert_mean_norms = std::move(norms);
      if (teacher.has_log_density()) {
        double sum = 0.0, sumsq = 0.0;
        int cnt = 0;
        for (int i : idx) {
          const Vec& s = data.states[static_cast<size_t>(i)];
          for (int j = 0; j < cfg.kl_eval_samples; ++j) {
            const auto [z, a] = model.sample(s, log_rng);
            const double v = model.log_pdf(a, s) - teacher.log_density(a, s);
            sum += v;
            sumsq += v * v;
            ++cnt;
          }
        }
        row.reverse_kl = sum / cnt;
        row.reverse_kl_se =
            std::sqrt(std::max(0.0, sumsq / cnt - row.reverse_kl * row.reverse_kl) / cnt);
      }
      log->rows.push_back(std::move(row));
    }

    if (hook) hook(iter, model, snapshot);
  }
  return model;
}

BoundEstimate estimate_bounds(const MoEParams& q, const MoEParams& q_tilde,
                              const ScoreFunction& teacher, const std::vector<Vec>& states,
                              int samples_per_state, Rng& rng) {
  require(teacher.has_log_density(), "estimate_bounds needs a tractable teacher density");
  BoundEstimate est;
  double sU = 0, sU2 = 0, sJ = 0, sJ2 = 0, sD = 0, sD2 = 0;
  for (const Vec& s : states) {
    const Vec phi = q.features(s);
    const Vec glp = log_softmax(q.gating.V * phi + q.gating.c);
    for (int j = 0; j < samples_per_state; ++j) {
      const int z = categorical_sample(glp, rng.uniform());
      const GaussianParams ez = q.expert_from_features(phi, z);
      const Vec a = reparameterize(ez, rng.normal_vec(q.action_dim));
      const double log_pi = teacher.log_density(a, s);
      const double log_q = q.log_pdf(a, s);
      const double log_tilde = posterior_log_responsibilities(q_tilde, a, s)[z];
      const double termJ = log_q - log_pi;
      const double termU = glp[z] + gaussian_log_pdf(a, ez) - log_tilde - log_pi;
      const double diff = termU - termJ;
      sJ += termJ;
      sJ2 += termJ * termJ;
      sU += termU;
      sU2 += termU * termU;
      sD += diff;
      sD2 += diff * diff;
      ++est.n;
    }
  }
  const double n = est.n;
  est.U = sU / n;
  est.J = sJ / n;
  est.diff = sD / n;
  est.se_U = std::sqrt(std::max(0.0, sU2 / n - est.U * est.U) / n);
  est.se_J = std::sqrt(std::max(0.0, sJ2 / n - est.J * est.J) / n);
  est.se_diff = std::sqrt(std::max(0.0, sD2 / n - est.diff * est.diff) / n);
  return est;
}

double bound_identity_max_violation(const MoEParams& m, const PairSet& data, int n, Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec& s = data.states[rng.integer(data.size())];
    const auto [z, a] = m.sample(s, rng);
    const Vec glp = m.gating_log_probs(s);
    const double lhs = m.log_pdf(a, s);
    const double rhs = glp[z] + gaussian_log_pdf(a, m.expert_forward(s, z)) -
                       posterior_log_responsibilities(m, a, s)[z];
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

}  // namespace vdd
