#include "vdd/em.hpp"

#include <cmath>

#include "vdd/categorical.hpp"

namespace vdd {

namespace {

double gating_ce_loss(const Mat& V, const Vec& c, const std::vector<Vec>& phis, const Mat& resp) {
  double loss = 0.0;
  for (size_t i = 0; i < phis.size(); ++i) {
    const Vec lp = log_softmax(V * phis[i] + c);
    loss -= resp.row(static_cast<Eigen::Index>(i)).dot(lp);
  }
  return loss / static_cast<double>(phis.size());
}

}  // namespace

MoEParams em_train(const PairSet& data, const FeatureMap& features, const EmConfig& cfg,
                   EmLog* log) {
  require(!data.empty(), "em_train: empty dataset");
  const int n = static_cast<int>(data.size());
  const int Z = cfg.num_experts;
  const int d = static_cast<int>(data.actions.front().size());
  const int p = features.dim();

  Rng rng(cfg.seed);
  MoEParams model = init_moe(Z, d, features, data, rng);

  std::vector<Vec> phis(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) phis[static_cast<size_t>(i)] = features(data.states[static_cast<size_t>(i)]);

  // Features augmented with a constant for the joint (W, b) solve.
  std::vector<Vec> psis(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vec psi(p + 1);
    psi << phis[static_cast<size_t>(i)], 1.0;
    psis[static_cast<size_t>(i)] = psi;
  }

  Mat resp(n, Z);
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // E-step on the data pairs.
    for (int i = 0; i < n; ++i)
      resp.row(i) =
          posterior_responsibilities(model, data.actions[static_cast<size_t>(i)],
                                     data.states[static_cast<size_t>(i)])
              .transpose();

    // M-step: per-expert weighted ridge regression + weighted covariance.
    for (int z = 0; z < Z; ++z) {
      const double mass = resp.col(z).sum();
      if (mass < 1e-8) {
        const size_t pick = rng.integer(data.size());
        ExpertParams& e = model.experts[static_cast<size_t>(z)];
        e.W.setZero();
        e.b = data.actions[pick];
        if (log)
          log->events.push_back("iteration " + std::to_string(iter) + ": reseeded expert " +
                                std::to_string(z) + " from data pair " + std::to_string(pick));
        continue;
      }
      Mat gram = Mat::Zero(p + 1, p + 1);
      Mat rhs = Mat::Zero(p + 1, d);
      for (int i = 0; i < n; ++i) {
        const double w = resp(i, z);
        if (w == 0.0) continue;
        gram.noalias() += w * psis[static_cast<size_t>(i)] * psis[static_cast<size_t>(i)].transpose();
        rhs.noalias() += w * psis[static_cast<size_t>(i)] * data.actions[static_cast<size_t>(i)].transpose();
      }
      gram += cfg.ridge * Mat::Identity(p + 1, p + 1);
      const Mat theta = gram.ldlt().solve(rhs);  // (p+1) x d

      ExpertParams& e = model.experts[static_cast<size_t>(z)];
      e.W = theta.topRows(p).transpose();
      e.b = theta.row(p).transpose();

      Mat cov = Mat::Zero(d, d);
      for (int i = 0; i < n; ++i) {
        const double w = resp(i, z);
        if (w == 0.0) continue;
        const Vec r = data.actions[static_cast<size_t>(i)] - (e.W * phis[static_cast<size_t>(i)] + e.b);
        cov.noalias() += w * r * r.transpose();
      }
      cov /= mass;
      Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
      Vec evals = eig.eigenvalues().cwiseMax(cfg.cov_floor);
      const Mat floored =
          eig.eigenvectors() * evals.asDiagonal() * eig.eigenvectors().transpose();
      const Mat L = Eigen::LLT<Mat>(floored).matrixL();
      e.chol_raw = raw_from_chol(L);
    }

    // M-step: gating by descent on the weighted cross-entropy.
    if (Z > 1) {
      Mat V = model.gating.V;
      Vec c = model.gating.c;
      double loss = gating_ce_loss(V, c, phis, resp);
      for (int step = 0; step < cfg.gating_max_steps; ++step) {
        Mat dV = Mat::Zero(Z, p);
        Vec dc = Vec::Zero(Z);
        for (int i = 0; i < n; ++i) {
          const Vec pi = log_softmax(V * phis[static_cast<size_t>(i)] + c).array().exp();
          const Vec diff = pi - resp.row(i).transpose();
          dV.noalias() += diff * phis[static_cast<size_t>(i)].transpose();
          dc += diff;
        }
        dV /= n;
        dc /= n;
        // Backtracking: only accept steps that decrease the loss, so the EM
        // ascent property is preserved.
        double step_size = 4.0;
        bool accepted = false;
        for (int half = 0; half < 30; ++half) {
          const Mat Vn = V - step_size * dV;
          const Vec cn = c - step_size * dc;
          const double ln = gating_ce_loss(Vn, cn, phis, resp);
          if (ln < loss) {
            const double delta = loss - ln;
            V = Vn;
            c = cn;
            loss = ln;
            accepted = delta > cfg.gating_tol;
            break;
          }
          step_size *= 0.5;
        }
        if (!accepted) break;
      }
      model.gating.V = V;
      model.gating.c = c;
    }

    if (log) {
      double ll = 0.0;
      for (int i = 0; i < n; ++i)
        ll += model.log_pdf(data.actions[static_cast<size_t>(i)], data.states[static_cast<size_t>(i)]);
      log->log_likelihood.push_back(ll / n);
    }
  }
  return model;
}

}  // namespace vdd
