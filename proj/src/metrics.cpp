#include "vdd/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace vdd {

namespace {

// Runs all (s0, rollout) cells deterministically (seeded per cell) and in a
// fixed reduction order regardless of thread count.
struct RolloutGrid {
  std::vector<Vec> initial_states;
  std::vector<RolloutResult> results;  // row-major [s0][rollout]
  int n_s0 = 0, per_s0 = 0;
};

RolloutGrid run_grid(Policy& policy, const ToyTask& task, int n_s0, int rollouts_per_s0,
                     const Rng& base, int threads) {
  require(n_s0 >= 1 && rollouts_per_s0 >= 1, "rollout grid needs positive counts");
  RolloutGrid grid;
  grid.n_s0 = n_s0;
  grid.per_s0 = rollouts_per_s0;
  grid.initial_states.resize(static_cast<size_t>(n_s0));
  for (int i = 0; i < n_s0; ++i) {
    Rng r = base.split(0xA0000000ULL + static_cast<uint64_t>(i));
    grid.initial_states[static_cast<size_t>(i)] = task.initial_state(r);
  }
  const int total = n_s0 * rollouts_per_s0;
  grid.results.resize(static_cast<size_t>(total));
  auto work = [&](int lo, int hi) {
    for (int idx = lo; idx < hi; ++idx) {
      const int i = idx / rollouts_per_s0;
      Rng r = base.split(0xB0000000ULL + static_cast<uint64_t>(idx));
      grid.results[static_cast<size_t>(idx)] =
          rollout(policy, task, grid.initial_states[static_cast<size_t>(i)], task.horizon(), r);
    }
  };
  if (threads <= 1) {
    work(0, total);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (total + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int lo = t * chunk, hi = std::min(total, lo + chunk);
      if (lo < hi) pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return grid;
}

}  // namespace

double behavior_entropy(const std::vector<double>& frequencies) {
  const double base = static_cast<double>(frequencies.size());
  if (base < 2.0) return 0.0;
  double h = 0.0;
  for (double p : frequencies) {
    if (p > 0.0) h -= p * std::log(p) / std::log(base);
  }
  return h;
}

EntropyEstimate task_entropy(Policy& policy, const ToyTask& task, int n_s0, int rollouts_per_s0,
                             const Rng& base, int threads) {
  const RolloutGrid grid = run_grid(policy, task, n_s0, rollouts_per_s0, base, threads);
  const int B = task.num_behaviors();
  EntropyEstimate est;
  est.n_s0 = n_s0;
  for (int i = 0; i < n_s0; ++i) {
    std::vector<double> counts(static_cast<size_t>(B), 0.0);
    int successes = 0;
    for (int j = 0; j < rollouts_per_s0; ++j) {
      const RolloutResult& r = grid.results[static_cast<size_t>(i * rollouts_per_s0 + j)];
      if (r.success && r.behavior >= 0) {
        counts[static_cast<size_t>(r.behavior)] += 1.0;
        ++successes;
      }
    }
    if (successes == 0) {
      ++est.flagged_s0;
      continue;
    }
    for (double& c : counts) c /= successes;
    est.entropy += behavior_entropy(counts);
  }
  est.entropy /= n_s0;
  return est;
}

SuccessEstimate success_rate(Policy& policy, const ToyTask& task, int n_s0, int rollouts_per_s0,
                             const Rng& base, int threads) {
  const RolloutGrid grid = run_grid(policy, task, n_s0, rollouts_per_s0, base, threads);
  int ok = 0;
  for (const RolloutResult& r : grid.results) ok += r.success ? 1 : 0;
  const double n = static_cast<double>(grid.results.size());
  SuccessEstimate est;
  est.rate = ok / n;
  est.se = std::sqrt(std::max(0.0, est.rate * (1.0 - est.rate)) / n);
  return est;
}

KlEstimate reverse_kl_mc(const MoEParams& q, const ScoreFunction& teacher,
                         const std::vector<Vec>& states, int n_samples, Rng& rng) {
  if (!teacher.has_log_density())
    throw std::runtime_error("reverse_kl_mc: teacher does not expose a tractable log-density");
  require(!states.empty() && n_samples >= 1, "reverse_kl_mc: bad arguments");
  double sum = 0.0, sumsq = 0.0;
  int n = 0;
  for (const Vec& s : states) {
    for (int j = 0; j < n_samples; ++j) {
      const auto [z, a] = q.sample(s, rng);
      const double v = q.log_pdf(a, s) - teacher.log_density(a, s);
      sum += v;
      sumsq += v * v;
      ++n;
    }
  }
  KlEstimate est;
  est.kl = sum / n;
  est.se = std::sqrt(std::max(0.0, sumsq / n - est.kl * est.kl) / n);
  return est;
}

int mode_coverage(const MoEParams& q, const ConditionalGmmTarget& target, const Vec& s,
                  int n_samples, Rng& rng) {
  const GmmParams modes = target.components(s);
  const int k = static_cast<int>(modes.comps.size());
  std::vector<int> counts(static_cast<size_t>(k), 0);
  for (int i = 0; i < n_samples; ++i) {
    const auto [z, a] = q.sample(s, rng);
    int best = 0;
    double best_d = (a - modes.comps[0].mean).norm();
    for (int m = 1; m < k; ++m) {
      const double d = (a - modes.comps[static_cast<size_t>(m)].mean).norm();
      if (d < best_d) {
        best_d = d;
        best = m;
      }
    }
    ++counts[static_cast<size_t>(best)];
  }
  const double threshold = 0.2 / k * n_samples;
  int covered = 0;
  for (int c : counts) covered += c >= threshold ? 1 : 0;
  return covered;
}

namespace {

BenchResult summarize(std::string method, int nfe, std::vector<double>& times_us) {
  std::sort(times_us.begin(), times_us.end());
  auto pct = [&times_us](double p) {
    const size_t i = static_cast<size_t>(p * (times_us.size() - 1));
    return times_us[i];
  };
  return BenchResult{std::move(method), nfe, pct(0.5), pct(0.25), pct(0.75)};
}

}  // namespace

std::vector<BenchResult> inference_benchmark(const MoEParams& moe, const ScoreFunction& teacher,
                                             const std::vector<int>& nfe_list, int repetitions,
                                             const Vec& state, Rng& rng) {
  require(repetitions >= 100, "inference_benchmark: need at least 100 repetitions");
  using clock = std::chrono::steady_clock;
  volatile double sink = 0.0;  // keep the timed work alive

  std::vector<BenchResult> out;
  {
    std::vector<double> times;
    times.reserve(static_cast<size_t>(repetitions));
    for (int r = 0; r < repetitions; ++r) {
      const auto t0 = clock::now();
      const auto [z, a] = moe.mode_action(state, ModeActionPolicy::SampleThenMean, rng);
      const auto t1 = clock::now();
      sink = sink + a[0];
      times.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    }
    out.push_back(summarize("moe", 1, times));
  }
  for (int nfe : nfe_list) {
    std::vector<double> times;
    times.reserve(static_cast<size_t>(repetitions));
    for (int r = 0; r < repetitions; ++r) {
      const auto t0 = clock::now();
      const Vec a = reverse_sde_sample(teacher, state, nfe, rng);
      const auto t1 = clock::now();
      sink = sink + a[0];
      times.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    }
    out.push_back(summarize("reverse_sde", nfe, times));
  }
  (void)sink;
  return out;
}

}  // namespace vdd
