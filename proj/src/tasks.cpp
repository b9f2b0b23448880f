#include "vdd/tasks.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "vdd/categorical.hpp"

namespace vdd {

namespace {

// Distance from point p to segment [a, b].
double segment_distance(const Vec& p, const Vec& a, const Vec& b) {
  const Vec ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-16) return (p - a).norm();
  double u = (p - a).dot(ab) / len2;
  u = std::clamp(u, 0.0, 1.0);
  return (p - (a + u * ab)).norm();
}

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

}  // namespace

ToyTask::ToyTask(TaskSpec spec) : spec_(spec) {
  if (spec_.kind == TaskKind::Avoid2D) {
    obstacles_ = {v2(1.0, 0.0), v2(2.0, 0.8), v2(2.0, -0.8)};
    // Routes: {above, below} the first obstacle x {outer, middle} gap.
    auto route = [](double y1, double y2) {
      return std::vector<Vec>{v2(0.0, 0.0), v2(0.4, y1), v2(1.3, y1), v2(1.9, y2), v2(3.4, y2)};
    };
    routes_ = {route(0.6, 1.3), route(0.6, 0.0), route(-0.6, 0.0), route(-0.6, -1.3)};
  } else {
    require(spec_.modes >= 1, "StaticGmm needs at least one mode");
  }
}

Vec ToyTask::initial_state(Rng& rng) const {
  if (spec_.kind == TaskKind::StaticGmm)
    return v2(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
  return v2(0.0, rng.uniform(-0.05, 0.05));
}

Vec ToyTask::step(const Vec& s, const Vec& a) const { return s + dt() * a; }

Vec ToyTask::mode_mean(int mode) const {
  const double ang = 2.0 * M_PI * mode / spec_.modes;
  return v2(spec_.radius * std::cos(ang), spec_.radius * std::sin(ang));
}

const std::vector<Vec>& ToyTask::route(int behavior) const {
  require(behavior >= 0 && behavior < 4, "route index out of range");
  return routes_[static_cast<size_t>(behavior)];
}

Vec ToyTask::pursue(const std::vector<Vec>& waypoints, const Vec& s) const {
  // Waypoints advance strictly in x; aim at the first one still ahead.
  for (const Vec& w : waypoints) {
    if (w[0] > s[0] + 0.02) {
      Vec dir = w - s;
      const double n = dir.norm();
      return n > 1e-9 ? Vec(dir / n) : v2(1.0, 0.0);
    }
  }
  return v2(1.0, 0.0);
}

Vec ToyTask::scripted_action(int behavior, const Vec& s) const {
  if (spec_.kind == TaskKind::StaticGmm) {
    require(behavior >= 0 && behavior < spec_.modes, "behavior out of range");
    return mode_mean(behavior);
  }
  return pursue(route(behavior), s);
}

bool ToyTask::collision(const Vec& s) const {
  if (spec_.kind != TaskKind::Avoid2D) return false;
  for (const Vec& c : obstacles_)
    if ((s - c).norm() <= obstacle_radius_) return true;
  return false;
}

bool ToyTask::out_of_bounds(const Vec& s) const {
  if (spec_.kind != TaskKind::Avoid2D) return false;
  return s[0] < -0.5 || s[0] > 3.6 || std::abs(s[1]) > 1.8;
}

bool ToyTask::reached_goal(const Vec& s) const {
  return spec_.kind == TaskKind::Avoid2D && s[0] >= goal_x();
}

bool ToyTask::static_success(const Vec& a) const {
  const double spacing = 2.0 * spec_.radius * std::sin(M_PI / std::max(2, spec_.modes));
  const double capture = std::min(3.0 * spec_.mode_std, 0.45 * spacing);
  return (a - mode_mean(nearest_mode(a))).norm() <= capture;
}

int ToyTask::nearest_mode(const Vec& a) const {
  int best = 0;
  double best_d = (a - mode_mean(0)).norm();
  for (int i = 1; i < spec_.modes; ++i) {
    const double d = (a - mode_mean(i)).norm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

int ToyTask::classify(const std::vector<Vec>& states) const {
  require(spec_.kind == TaskKind::Avoid2D, "classify is for Avoid2D trajectories");
  auto crossing_y = [&states](double x) -> std::pair<bool, double> {
    for (size_t i = 0; i + 1 < states.size(); ++i) {
      const double x0 = states[i][0], x1 = states[i + 1][0];
      if (x0 < x && x1 >= x) {
        const double u = (x - x0) / std::max(1e-12, x1 - x0);
        return {true, states[i][1] + u * (states[i + 1][1] - states[i][1])};
      }
    }
    return {false, 0.0};
  };
  const auto [ok1, y1] = crossing_y(1.0);
  const auto [ok2, y2] = crossing_y(2.0);
  if (!ok1 || !ok2) return -1;
  const bool above = y1 > 0.0;
  if (y2 > 0.55) return 0;
  if (y2 < -0.55) return 3;
  return above ? 1 : 2;
}

double ToyTask::route_distance(int behavior, const Vec& s) const {
  const std::vector<Vec>& r = route(behavior);
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < r.size(); ++i)
    best = std::min(best, segment_distance(s, r[i], r[i + 1]));
  return best;
}

PairSet Dataset::pairs() const {
  PairSet p;
  p.states.reserve(rows.size());
  p.actions.reserve(rows.size());
  for (const Row& r : rows) {
    p.states.push_back(r.s);
    p.actions.push_back(r.a);
  }
  return p;
}

std::vector<Vec> Dataset::states() const {
  std::vector<Vec> out;
  out.reserve(rows.size());
  for (const Row& r : rows) out.push_back(r.s);
  return out;
}

Dataset generate_dataset(const ToyTask& task, int trajectories_per_behavior, double noise_std,
                         uint64_t seed) {
  require(trajectories_per_behavior > 0, "need positive trajectory counts");
  Dataset ds;
  ds.task = task.spec();
  ds.seed = seed;
  ds.noise_std = noise_std;
  ds.trajectories_per_behavior = trajectories_per_behavior;
  ds.behavior_counts.assign(static_cast<size_t>(task.num_behaviors()), 0);

  Rng rng(seed);
  int traj_id = 0;
  for (int b = 0; b < task.num_behaviors(); ++b) {
    for (int k = 0; k < trajectories_per_behavior; ++k) {
      Vec s = task.initial_state(rng);
      for (int step = 0; step < task.horizon(); ++step) {
        Vec a = task.scripted_action(b, s);
        if (noise_std > 0.0) a += noise_std * rng.normal_vec(2);
        ds.rows.push_back({traj_id, step, s, a, b});
        s = task.step(s, a);
        if (task.reached_goal(s)) break;
      }
      ++ds.behavior_counts[static_cast<size_t>(b)];
      ++traj_id;
    }
  }
  return ds;
}

namespace {

nlohmann::json vec_to_json(const Vec& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec vec_from_json(const nlohmann::json& arr) {
  Vec v(static_cast<Eigen::Index>(arr.size()));
  for (size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

void save_dataset_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open dataset file for writing: " + path);
  nlohmann::json meta;
  meta["meta"]["task"]["kind"] = ds.task.kind == TaskKind::StaticGmm ? "static_gmm" : "avoid2d";
  meta["meta"]["task"]["modes"] = ds.task.modes;
  meta["meta"]["task"]["radius"] = ds.task.radius;
  meta["meta"]["task"]["mode_std"] = ds.task.mode_std;
  meta["meta"]["seed"] = ds.seed;
  meta["meta"]["noise_std"] = ds.noise_std;
  meta["meta"]["trajectories_per_behavior"] = ds.trajectories_per_behavior;
  meta["meta"]["behavior_counts"] = ds.behavior_counts;
  out << meta.dump() << "\n";
  for (const Dataset::Row& r : ds.rows) {
    nlohmann::json j;
    j["traj_id"] = r.traj_id;
    j["step"] = r.step;
    j["s"] = vec_to_json(r.s);
    j["a"] = vec_to_json(r.a);
    j["behavior"] = r.behavior;
    out << j.dump() << "\n";
  }
}

Dataset load_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open dataset file: " + path);
  Dataset ds;
  std::string line;
  bool have_meta = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    if (!have_meta) {
      require(j.contains("meta"), "dataset file missing metadata line");
      const auto& m = j["meta"];
      ds.task.kind =
          m["task"]["kind"].get<std::string>() == "static_gmm" ? TaskKind::StaticGmm : TaskKind::Avoid2D;
      ds.task.modes = m["task"]["modes"].get<int>();
      ds.task.radius = m["task"]["radius"].get<double>();
      ds.task.mode_std = m["task"]["mode_std"].get<double>();
      ds.seed = m["seed"].get<uint64_t>();
      ds.noise_std = m["noise_std"].get<double>();
      ds.trajectories_per_behavior = m["trajectories_per_behavior"].get<int>();
      ds.behavior_counts = m["behavior_counts"].get<std::vector<int>>();
      have_meta = true;
      continue;
    }
    Dataset::Row r;
    r.traj_id = j["traj_id"].get<int>();
    r.step = j["step"].get<int>();
    r.s = vec_from_json(j["s"]);
    r.a = vec_from_json(j["a"]);
    r.behavior = j["behavior"].get<int>();
    ds.rows.push_back(std::move(r));
  }
  require(have_meta, "dataset file has no metadata line");
  return ds;
}

RolloutResult rollout(Policy& policy, const ToyTask& task, const Vec& s0, int max_steps, Rng& rng) {
  RolloutResult res;
  res.states.push_back(s0);
  Vec s = s0;
  if (task.spec().kind == TaskKind::StaticGmm) {
    const Vec a = policy.act(s, rng);
    if (!all_finite(a)) return res;
    res.actions.push_back(a);
    res.states.push_back(task.step(s, a));
    if (task.static_success(a)) {
      res.success = true;
      res.behavior = task.nearest_mode(a);
    }
    return res;
  }
  if (task.collision(s) || task.out_of_bounds(s)) return res;
  for (int i = 0; i < max_steps; ++i) {
    const Vec a = policy.act(s, rng);
    if (!all_finite(a)) return res;
    s = task.step(s, a);
    res.actions.push_back(a);
    res.states.push_back(s);
    if (task.collision(s) || task.out_of_bounds(s)) return res;
    if (task.reached_goal(s)) {
      res.success = true;
      break;
    }
  }
  if (res.success) res.behavior = task.classify(res.states);
  return res;
}

std::shared_ptr<ConditionalGmmTarget> make_route_teacher(const ToyTask& task, double action_std,
                                                         double proximity, NoiseSchedule sched) {
  require(task.spec().kind == TaskKind::Avoid2D, "route teacher is an Avoid2D construction");
  const int B = task.num_behaviors();
  std::vector<Mat> chols(static_cast<size_t>(B), action_std * Mat::Identity(2, 2));
  const ToyTask task_copy = task;
  auto rule = [task_copy, B, proximity](const Vec& s, Vec& w, std::vector<Vec>& means) {
    Vec logits(B);
    means.resize(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b) {
      const double d = task_copy.route_distance(b, s);
      logits[b] = -0.5 * d * d / (proximity * proximity);
      means[static_cast<size_t>(b)] = task_copy.scripted_action(b, s);
    }
    w = log_softmax(logits).array().exp();
  };
  return std::make_shared<ConditionalGmmTarget>(2, 2, std::move(chols), rule, sched);
}

std::shared_ptr<ConditionalGmmTarget> make_task_teacher(const ToyTask& task, NoiseSchedule sched,
                                                        double route_action_std,
                                                        double route_proximity) {
  if (task.spec().kind == TaskKind::StaticGmm)
    return make_circle_gmm(task.spec().modes, task.spec().radius, task.spec().mode_std, 2, sched);
  return make_route_teacher(task, route_action_std, route_proximity, sched);
}

}  // namespace vdd
