#include "vdd/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace vdd {

namespace {

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_text(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  Section* current = nullptr;
  std::string current_name;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      current_name = trim(line.substr(1, line.size() - 2));
      if (current_name.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
      for (const auto& [name, sec] : cfg.sections)
        if (name == current_name)
          throw ConfigError("config line " + std::to_string(lineno) + ": duplicate section [" +
                            current_name + "]");
      cfg.sections.emplace_back(current_name, Section{});
      current = &cfg.sections.back().second;
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    if (!current)
      throw ConfigError("config line " + std::to_string(lineno) + ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    for (const auto& [k, v] : *current)
      if (k == key)
        throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key +
                          "' in [" + current_name + "]");
    current->emplace_back(key, value);
  }
  return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

std::string ConfigFile::serialize() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [name, sec] : sections) {
    if (!first) out << "\n";
    first = false;
    out << "[" << name << "]\n";
    for (const auto& [k, v] : sec) out << k << " = " << v << "\n";
  }
  return out.str();
}

const std::string* ConfigFile::find(const std::string& section, const std::string& key) const {
  for (const auto& [name, sec] : sections) {
    if (name != section) continue;
    for (const auto& [k, v] : sec)
      if (k == key) return &v;
  }
  return nullptr;
}

void ConfigFile::set(const std::string& section, const std::string& key, const std::string& value) {
  for (auto& [name, sec] : sections) {
    if (name != section) continue;
    for (auto& [k, v] : sec) {
      if (k == key) {
        v = value;
        return;
      }
    }
    sec.emplace_back(key, value);
    return;
  }
  sections.emplace_back(section, Section{{key, value}});
}

const std::vector<SchemaEntry>& config_schema() {
  static const std::vector<SchemaEntry> schema = {
      {"io", "seed", "0", "cli-io"},
      {"io", "threads", "1", "cli-io"},

      {"task", "kind", "avoid2d", "tasks-eval"},
      {"task", "modes", "8", "tasks-eval"},
      {"task", "radius", "2.0", "tasks-eval"},
      {"task", "mode_std", "0.2", "tasks-eval"},
      {"task", "trajectories_per_behavior", "32", "tasks-eval"},
      {"task", "noise_std", "0.05", "tasks-eval"},

      {"teacher", "kind", "analytic", "sde-teacher"},
      {"teacher", "route_action_std", "0.06", "sde-teacher"},
      {"teacher", "route_proximity", "0.35", "sde-teacher"},
      {"teacher", "hidden1", "64", "sde-teacher"},
      {"teacher", "hidden2", "64", "sde-teacher"},
      {"teacher", "activation", "tanh", "sde-teacher"},
      {"teacher", "dsm_epochs", "80", "sde-teacher"},
      {"teacher", "dsm_batch", "128", "sde-teacher"},
      {"teacher", "dsm_step_size", "0.001", "sde-teacher"},
      {"teacher", "sde_steps", "64", "sde-teacher"},

      {"schedule", "kind", "ve", "sde-teacher"},
      {"schedule", "sigma_min", "0.1", "sde-teacher"},
      {"schedule", "sigma_max", "1.0", "sde-teacher"},
      {"schedule", "vp_steps", "100", "sde-teacher"},
      {"schedule", "beta_start", "0.0001", "sde-teacher"},
      {"schedule", "beta_end", "0.2", "sde-teacher"},

      {"vdd", "experts", "8", "vdd-train"},
      {"vdd", "iterations", "1500", "vdd-train"},
      {"vdd", "batch_states", "64", "vdd-train"},
      {"vdd", "mc_samples", "1", "vdd-train"},
      {"vdd", "step_size", "0.001", "vdd-train"},
      {"vdd", "step_size_final", "-1", "vdd-train"},
      {"vdd", "beta1", "0.9", "vdd-train"},
      {"vdd", "beta2", "0.999", "vdd-train"},
      {"vdd", "epsilon", "1e-8", "vdd-train"},
      {"vdd", "timestep_kind", "interval", "vdd-train"},
      {"vdd", "timestep_lo", "0.2", "vdd-train"},
      {"vdd", "timestep_hi", "0.5", "vdd-train"},
      {"vdd", "perturb_action_before_score", "false", "vdd-train"},
      {"vdd", "learn_gating", "true", "vdd-train"},
      {"vdd", "use_entropy_term", "true", "vdd-train"},
      {"vdd", "use_score_term", "true", "vdd-train"},
      {"vdd", "use_repulsion_term", "true", "vdd-train"},
      {"vdd", "check_identity", "false", "vdd-train"},
      {"vdd", "log_every", "25", "vdd-train"},
      {"vdd", "kl_eval_states", "16", "vdd-train"},
      {"vdd", "kl_eval_samples", "16", "vdd-train"},
      {"vdd", "feature_kind", "random_fourier", "moe-model"},
      {"vdd", "feature_degree", "2", "moe-model"},
      {"vdd", "feature_count", "64", "moe-model"},
      {"vdd", "feature_bandwidth", "0", "moe-model"},

      {"em", "experts", "8", "baselines"},
      {"em", "iterations", "50", "baselines"},
      {"em", "ridge", "1e-6", "baselines"},
      {"em", "cov_floor", "1e-8", "baselines"},
      {"em", "gating_max_steps", "100", "baselines"},
      {"em", "gating_tol", "1e-6", "baselines"},

      {"eval", "n_s0", "20", "tasks-eval"},
      {"eval", "rollouts_per_s0", "25", "tasks-eval"},
      {"eval", "kl_states", "32", "tasks-eval"},
      {"eval", "kl_samples", "64", "tasks-eval"},
      {"eval", "coverage_samples", "4000", "tasks-eval"},
      {"eval", "bench_nfe", "1,4,8,16", "tasks-eval"},
      {"eval", "bench_reps", "200", "tasks-eval"},
      {"eval", "policy", "sample_then_mean", "tasks-eval"},
      {"eval", "subject", "moe", "tasks-eval"},
  };
  return schema;
}

void validate_config(const ConfigFile& file) {
  const auto& schema = config_schema();
  // Each key must have exactly one owner.
  std::set<std::pair<std::string, std::string>> seen;
  for (const SchemaEntry& e : schema) {
    if (!seen.insert({e.section, e.key}).second)
      throw ConfigError(std::string("schema defines key twice: ") + e.section + "." + e.key);
  }
  for (const auto& [name, sec] : file.sections) {
    for (const auto& [k, v] : sec) {
      const bool known = std::any_of(schema.begin(), schema.end(), [&](const SchemaEntry& e) {
        return name == e.section && k == e.key;
      });
      if (!known) throw ConfigError("unknown config key: " + name + "." + k);
    }
  }
}

namespace {

double parse_double(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config value for " + where + " is not a number: '" + v + "'");
  }
}

long long parse_int(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config value for " + where + " is not an integer: '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config value for " + where + " must be true or false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v, const std::string& where) {
  std::vector<int> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(static_cast<int>(parse_int(item, where)));
  if (out.empty()) throw ConfigError("config value for " + where + " is an empty list");
  return out;
}

}  // namespace

RunConfig RunConfig::defaults() { return from_config(ConfigFile{}); }

RunConfig RunConfig::from_config(ConfigFile file) {
  validate_config(file);
  // Resolve: every schema key present, canonical order.
  ConfigFile resolved;
  for (const SchemaEntry& e : config_schema()) {
    const std::string* v = file.find(e.section, e.key);
    resolved.set(e.section, e.key, v ? *v : e.default_value);
  }

  auto get = [&resolved](const char* sec, const char* key) -> const std::string& {
    return *resolved.find(sec, key);
  };
  auto where = [](const char* sec, const char* key) { return std::string(sec) + "." + key; };
  auto geti = [&](const char* s, const char* k) { return parse_int(get(s, k), where(s, k)); };
  auto getd = [&](const char* s, const char* k) { return parse_double(get(s, k), where(s, k)); };
  auto getb = [&](const char* s, const char* k) { return parse_bool(get(s, k), where(s, k)); };

  RunConfig rc;
  rc.resolved = resolved;
  rc.seed = static_cast<uint64_t>(geti("io", "seed"));
  rc.threads = static_cast<int>(geti("io", "threads"));
  if (rc.threads < 1) throw ConfigError("io.threads must be >= 1");

  const std::string task_kind = get("task", "kind");
  if (task_kind == "avoid2d") {
    rc.task.kind = TaskKind::Avoid2D;
  } else if (task_kind == "static_gmm") {
    rc.task.kind = TaskKind::StaticGmm;
  } else {
    throw ConfigError("task.kind must be avoid2d or static_gmm, got '" + task_kind + "'");
  }
  rc.task.modes = static_cast<int>(geti("task", "modes"));
  rc.task.radius = getd("task", "radius");
  rc.task.mode_std = getd("task", "mode_std");
  rc.trajectories_per_behavior = static_cast<int>(geti("task", "trajectories_per_behavior"));
  rc.noise_std = getd("task", "noise_std");

  rc.teacher_kind = get("teacher", "kind");
  if (rc.teacher_kind != "analytic" && rc.teacher_kind != "scorenet")
    throw ConfigError("teacher.kind must be analytic or scorenet");
  rc.route_action_std = getd("teacher", "route_action_std");
  rc.route_proximity = getd("teacher", "route_proximity");
  rc.hidden1 = static_cast<int>(geti("teacher", "hidden1"));
  rc.hidden2 = static_cast<int>(geti("teacher", "hidden2"));
  rc.activation = get("teacher", "activation");
  if (rc.activation != "tanh" && rc.activation != "identity")
    throw ConfigError("teacher.activation must be tanh or identity");
  rc.dsm_epochs = static_cast<int>(geti("teacher", "dsm_epochs"));
  rc.dsm_batch = static_cast<int>(geti("teacher", "dsm_batch"));
  rc.dsm_step_size = getd("teacher", "dsm_step_size");
  rc.sde_steps = static_cast<int>(geti("teacher", "sde_steps"));

  rc.schedule_kind = get("schedule", "kind");
  if (rc.schedule_kind != "ve" && rc.schedule_kind != "vp")
    throw ConfigError("schedule.kind must be ve or vp");
  rc.sigma_min = getd("schedule", "sigma_min");
  rc.sigma_max = getd("schedule", "sigma_max");
  rc.vp_steps = static_cast<int>(geti("schedule", "vp_steps"));
  rc.beta_start = getd("schedule", "beta_start");
  rc.beta_end = getd("schedule", "beta_end");

  rc.vdd.num_experts = static_cast<int>(geti("vdd", "experts"));
  if (rc.vdd.num_experts < 1) throw ConfigError("vdd.experts must be >= 1");
  rc.vdd.iterations = static_cast<int>(geti("vdd", "iterations"));
  rc.vdd.batch_states = static_cast<int>(geti("vdd", "batch_states"));
  rc.vdd.mc_samples = static_cast<int>(geti("vdd", "mc_samples"));
  rc.vdd.step_size = getd("vdd", "step_size");
  rc.vdd.step_size_final = getd("vdd", "step_size_final");
  rc.vdd.beta1 = getd("vdd", "beta1");
  rc.vdd.beta2 = getd("vdd", "beta2");
  rc.vdd.epsilon = getd("vdd", "epsilon");
  const std::string ts = get("vdd", "timestep_kind");
  if (ts == "min") {
    rc.vdd.timesteps.kind = TimestepSampler::Kind::Min;
  } else if (ts == "max") {
    rc.vdd.timesteps.kind = TimestepSampler::Kind::Max;
  } else if (ts == "uniform") {
    rc.vdd.timesteps.kind = TimestepSampler::Kind::Uniform;
  } else if (ts == "interval") {
    rc.vdd.timesteps.kind = TimestepSampler::Kind::Interval;
  } else {
    throw ConfigError("vdd.timestep_kind must be one of min, max, uniform, interval");
  }
  rc.vdd.timesteps.lo = getd("vdd", "timestep_lo");
  rc.vdd.timesteps.hi = getd("vdd", "timestep_hi");
  rc.vdd.perturb_action_before_score = getb("vdd", "perturb_action_before_score");
  rc.vdd.learn_gating = getb("vdd", "learn_gating");
  rc.vdd.use_entropy_term = getb("vdd", "use_entropy_term");
  rc.vdd.use_score_term = getb("vdd", "use_score_term");
  rc.vdd.use_repulsion_term = getb("vdd", "use_repulsion_term");
  rc.vdd.check_identity = getb("vdd", "check_identity");
  rc.vdd.log_every = static_cast<int>(geti("vdd", "log_every"));
  rc.vdd.kl_eval_states = static_cast<int>(geti("vdd", "kl_eval_states"));
  rc.vdd.kl_eval_samples = static_cast<int>(geti("vdd", "kl_eval_samples"));
  rc.vdd.seed = rc.seed;

  rc.feature_kind = get("vdd", "feature_kind");
  if (rc.feature_kind != "identity" && rc.feature_kind != "polynomial" &&
      rc.feature_kind != "random_fourier")
    throw ConfigError("vdd.feature_kind must be identity, polynomial or random_fourier");
  rc.feature_degree = static_cast<int>(geti("vdd", "feature_degree"));
  rc.feature_count = static_cast<int>(geti("vdd", "feature_count"));
  rc.feature_bandwidth = getd("vdd", "feature_bandwidth");

  rc.em.num_experts = static_cast<int>(geti("em", "experts"));
  rc.em.iterations = static_cast<int>(geti("em", "iterations"));
  rc.em.ridge = getd("em", "ridge");
  rc.em.cov_floor = getd("em", "cov_floor");
  rc.em.gating_max_steps = static_cast<int>(geti("em", "gating_max_steps"));
  rc.em.gating_tol = getd("em", "gating_tol");
  rc.em.seed = rc.seed;

  rc.n_s0 = static_cast<int>(geti("eval", "n_s0"));
  rc.rollouts_per_s0 = static_cast<int>(geti("eval", "rollouts_per_s0"));
  rc.kl_states = static_cast<int>(geti("eval", "kl_states"));
  rc.kl_samples = static_cast<int>(geti("eval", "kl_samples"));
  rc.coverage_samples = static_cast<int>(geti("eval", "coverage_samples"));
  rc.bench_nfe = parse_int_list(get("eval", "bench_nfe"), "eval.bench_nfe");
  rc.bench_reps = static_cast<int>(geti("eval", "bench_reps"));
  rc.eval_policy = get("eval", "policy");
  if (rc.eval_policy != "sample_then_mean" && rc.eval_policy != "argmax_then_mean")
    throw ConfigError("eval.policy must be sample_then_mean or argmax_then_mean");
  rc.eval_subject = get("eval", "subject");
  if (rc.eval_subject != "moe" && rc.eval_subject != "teacher")
    throw ConfigError("eval.subject must be moe or teacher");
  return rc;
}

NoiseSchedule RunConfig::make_schedule() const {
  if (schedule_kind == "ve") return NoiseSchedule::ve(sigma_min, sigma_max);
  return NoiseSchedule::vp(vp_steps, beta_start, beta_end);
}

FeatureMap RunConfig::build_features(const std::vector<Vec>& dataset_states) const {
  const int sd = 2;
  if (feature_kind == "identity") return FeatureMap::identity(sd);
  if (feature_kind == "polynomial") return FeatureMap::polynomial(sd, feature_degree);
  double bw = feature_bandwidth;
  if (bw <= 0.0) bw = median_heuristic_bandwidth(dataset_states);
  return FeatureMap::random_fourier(sd, feature_count, bw, seed ^ 0xfea7u);
}

ModeActionPolicy RunConfig::mode_action_policy() const {
  return eval_policy == "argmax_then_mean" ? ModeActionPolicy::ArgmaxThenMean
                                           : ModeActionPolicy::SampleThenMean;
}

}  // namespace vdd
