#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vdd/data.hpp"
#include "vdd/moe.hpp"
#include "vdd/rng.hpp"
#include "vdd/teacher.hpp"

namespace vdd {

enum class TaskKind { StaticGmm, Avoid2D };

struct TaskSpec {
  TaskKind kind = TaskKind::Avoid2D;
  // StaticGmm: modes on a circle.
  int modes = 8;
  double radius = 2.0;
  double mode_std = 0.2;
};

// 2D toy behavior tasks. State and action are both 2D; dynamics integrate the
// position by dt * action per step.
//
// Avoid2D: start near the origin, reach the goal line x >= 3 while avoiding a
// first obstacle at (1, 0) and a second row at (2, +-0.8). Four scripted
// routes: {above, below} the first obstacle x {outer, middle} gap.
class ToyTask {
 public:
  explicit ToyTask(TaskSpec spec);

  const TaskSpec& spec() const { return spec_; }
  int state_dim() const { return 2; }
  int action_dim() const { return 2; }
  int horizon() const { return spec_.kind == TaskKind::StaticGmm ? 1 : 60; }
  int num_behaviors() const { return spec_.kind == TaskKind::StaticGmm ? spec_.modes : 4; }

  Vec initial_state(Rng& rng) const;
  Vec step(const Vec& s, const Vec& a) const;

  // Deterministic controller action for a behavior at state s (unit speed).
  Vec scripted_action(int behavior, const Vec& s) const;

  bool collision(const Vec& s) const;
  bool out_of_bounds(const Vec& s) const;
  bool reached_goal(const Vec& s) const;

  // StaticGmm: the action itself is the sample; success = within capture
  // radius of a mode.
  bool static_success(const Vec& a) const;
  int nearest_mode(const Vec& a) const;
  Vec mode_mean(int mode) const;

  // Behavior of a completed trajectory; -1 if it cannot be classified.
  int classify(const std::vector<Vec>& states) const;

  double dt() const { return 0.25; }
  double goal_x() const { return 3.0; }

  // Route geometry for the analytic teacher: distance from s to route b's
  // reference path.
  double route_distance(int behavior, const Vec& s) const;

 private:
  Vec pursue(const std::vector<Vec>& waypoints, const Vec& s) const;
  const std::vector<Vec>& route(int behavior) const;

  TaskSpec spec_;
  std::vector<std::vector<Vec>> routes_;
  std::vector<Vec> obstacles_;
  double obstacle_radius_ = 0.3;
};

struct Dataset {
  struct Row {
    int traj_id = 0;
    int step = 0;
    Vec s, a;
    int behavior = 0;
  };
  std::vector<Row> rows;
  TaskSpec task;
  uint64_t seed = 0;
  double noise_std = 0.0;
  int trajectories_per_behavior = 0;
  std::vector<int> behavior_counts;  // trajectories per behavior

  PairSet pairs() const;
  std::vector<Vec> states() const;
};

// Scripted demonstrations with additive action noise; per-behavior counts are
// exact and generation is deterministic in the seed.
Dataset generate_dataset(const ToyTask& task, int trajectories_per_behavior, double noise_std,
                         uint64_t seed);

void save_dataset_jsonl(const Dataset& ds, const std::string& path);
Dataset load_dataset_jsonl(const std::string& path);

// Closed-loop policy queried once per step.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Vec act(const Vec& s, Rng& rng) = 0;
};

class MoePolicy : public Policy {
 public:
  MoePolicy(const MoEParams& m, ModeActionPolicy mode = ModeActionPolicy::SampleThenMean)
      : m_(&m), mode_(mode) {}
  Vec act(const Vec& s, Rng& rng) override { return m_->mode_action(s, mode_, rng).second; }

 private:
  const MoEParams* m_;
  ModeActionPolicy mode_;
};

class SdePolicy : public Policy {
 public:
  SdePolicy(const ScoreFunction& f, int steps) : f_(&f), steps_(steps) {}
  Vec act(const Vec& s, Rng& rng) override { return reverse_sde_sample(*f_, s, steps_, rng); }

 private:
  const ScoreFunction* f_;
  int steps_;
};

class ScriptedPolicy : public Policy {
 public:
  ScriptedPolicy(const ToyTask& task, int behavior, double noise_std = 0.0)
      : task_(&task), behavior_(behavior), noise_std_(noise_std) {}
  Vec act(const Vec& s, Rng& rng) override {
    Vec a = task_->scripted_action(behavior_, s);
    if (noise_std_ > 0.0) a += noise_std_ * rng.normal_vec(2);
    return a;
  }

 private:
  const ToyTask* task_;
  int behavior_;
  double noise_std_;
};

struct RolloutResult {
  std::vector<Vec> states;
  std::vector<Vec> actions;
  bool success = false;
  int behavior = -1;  // -1 = fail
};

RolloutResult rollout(Policy& policy, const ToyTask& task, const Vec& s0, int max_steps, Rng& rng);

// Analytic teacher for Avoid2D: mixture over the scripted routes with
// proximity-softened weights and controller-action means.
std::shared_ptr<ConditionalGmmTarget> make_route_teacher(const ToyTask& task, double action_std,
                                                         double proximity, NoiseSchedule sched);

// Analytic teacher matching the StaticGmm task's action distribution.
std::shared_ptr<ConditionalGmmTarget> make_task_teacher(const ToyTask& task, NoiseSchedule sched,
                                                        double route_action_std = 0.06,
                                                        double route_proximity = 0.35);

}  // namespace vdd
