#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vdd/em.hpp"
#include "vdd/tasks.hpp"
#include "vdd/trainer.hpp"

namespace vdd {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Plain sections + key=value text config ('#' starts a comment). Order is
// preserved; duplicate keys and keys outside a section are errors.
struct ConfigFile {
  using Section = std::vector<std::pair<std::string, std::string>>;
  std::vector<std::pair<std::string, Section>> sections;

  static ConfigFile parse_text(const std::string& text);
  static ConfigFile parse_file(const std::string& path);
  std::string serialize() const;

  const std::string* find(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);
};

struct SchemaEntry {
  const char* section;
  const char* key;
  const char* default_value;
  const char* module;  // the single consuming module
};

const std::vector<SchemaEntry>& config_schema();

// Rejects unknown sections/keys and duplicate schema ownership.
void validate_config(const ConfigFile& file);

// Fully-typed run configuration; `resolved` carries every schema key with
// defaults applied, in canonical order, and round-trips unchanged.
struct RunConfig {
  ConfigFile resolved;

  uint64_t seed = 0;
  int threads = 1;

  TaskSpec task;
  int trajectories_per_behavior = 32;
  double noise_std = 0.05;

  std::string teacher_kind = "analytic";
  double route_action_std = 0.06;
  double route_proximity = 0.35;
  int hidden1 = 64, hidden2 = 64;
  std::string activation = "tanh";
  int dsm_epochs = 80, dsm_batch = 128;
  double dsm_step_size = 1e-3;
  int sde_steps = 64;

  std::string schedule_kind = "ve";
  double sigma_min = 0.1, sigma_max = 1.0;
  int vp_steps = 100;
  double beta_start = 1e-4, beta_end = 0.2;

  VddConfig vdd;
  std::string feature_kind = "random_fourier";
  int feature_degree = 2;
  int feature_count = 64;
  double feature_bandwidth = 0.0;  // 0 -> median heuristic over dataset states

  EmConfig em;

  int n_s0 = 20, rollouts_per_s0 = 25;
  int kl_states = 32, kl_samples = 64;
  int coverage_samples = 4000;
  std::vector<int> bench_nfe = {1, 4, 8, 16};
  int bench_reps = 200;
  std::string eval_policy = "sample_then_mean";
  std::string eval_subject = "moe";

  static RunConfig from_config(ConfigFile file);
  static RunConfig defaults();

  NoiseSchedule make_schedule() const;
  ToyTask make_task() const { return ToyTask(task); }
  FeatureMap build_features(const std::vector<Vec>& dataset_states) const;
  ModeActionPolicy mode_action_policy() const;
};

}  // namespace vdd
