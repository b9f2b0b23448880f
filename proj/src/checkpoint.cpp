#include "vdd/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace vdd {

namespace {

using nlohmann::json;

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const json& rows) {
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)].get<double>();
  return m;
}

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec vec_from_json(const json& arr) {
  Vec v(static_cast<Eigen::Index>(arr.size()));
  for (size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

void check_version(const json& j, const char* expected) {
  const std::string got = j.value("version", "<missing>");
  if (got != expected)
    throw std::runtime_error("checkpoint version mismatch: file has '" + got + "', expected '" +
                             expected + "'");
}

json feature_spec_to_json(const FeatureMap& f) {
  const FeatureSpec& spec = f.spec();
  json j;
  switch (spec.kind) {
    case FeatureKind::Identity:
      j["kind"] = "identity";
      break;
    case FeatureKind::Polynomial:
      j["kind"] = "polynomial";
      break;
    case FeatureKind::RandomFourier:
      j["kind"] = "random_fourier";
      break;
  }
  j["state_dim"] = spec.state_dim;
  j["degree"] = spec.degree;
  j["num_features"] = spec.num_features;
  j["bandwidth"] = spec.bandwidth;
  j["seed"] = spec.seed;
  if (spec.kind == FeatureKind::RandomFourier) {
    j["frequencies"] = mat_to_json(f.frequencies());
    j["phases"] = vec_to_json(f.phases());
  }
  return j;
}

FeatureMap feature_spec_from_json(const json& j) {
  FeatureSpec spec;
  const std::string kind = j["kind"].get<std::string>();
  spec.state_dim = j["state_dim"].get<int>();
  spec.degree = j["degree"].get<int>();
  spec.num_features = j["num_features"].get<int>();
  spec.bandwidth = j["bandwidth"].get<double>();
  spec.seed = j["seed"].get<uint64_t>();
  if (kind == "identity") {
    spec.kind = FeatureKind::Identity;
  } else if (kind == "polynomial") {
    spec.kind = FeatureKind::Polynomial;
  } else if (kind == "random_fourier") {
    spec.kind = FeatureKind::RandomFourier;
  } else {
    throw std::runtime_error("unknown feature kind in checkpoint: " + kind);
  }
  FeatureMap f = FeatureMap::from_spec(spec);
  if (spec.kind == FeatureKind::RandomFourier)
    f.set_frozen(mat_from_json(j["frequencies"]), vec_from_json(j["phases"]));
  return f;
}

json schedule_to_json(const NoiseSchedule& s) {
  json j;
  if (s.kind() == ScheduleKind::VE) {
    j["kind"] = "ve";
    j["sigma_min"] = s.ve_sigma_min();
    j["sigma_max"] = s.ve_sigma_max();
  } else {
    j["kind"] = "vp";
    j["steps"] = s.vp_steps();
    j["beta_start"] = s.beta_start();
    j["beta_end"] = s.beta_end();
  }
  return j;
}

NoiseSchedule schedule_from_json(const json& j) {
  if (j["kind"].get<std::string>() == "ve")
    return NoiseSchedule::ve(j["sigma_min"].get<double>(), j["sigma_max"].get<double>());
  return NoiseSchedule::vp(j["steps"].get<int>(), j["beta_start"].get<double>(),
                           j["beta_end"].get<double>());
}

}  // namespace

std::string moe_to_json(const MoEParams& m) {
  json j;
  j["version"] = kMoeCheckpointVersion;
  j["num_experts"] = m.num_experts();
  j["action_dim"] = m.action_dim;
  j["state_dim"] = m.state_dim;
  j["features"] = feature_spec_to_json(m.features);
  json experts = json::array();
  for (const ExpertParams& e : m.experts) {
    json je;
    je["W"] = mat_to_json(e.W);
    je["b"] = vec_to_json(e.b);
    je["chol_raw"] = mat_to_json(e.chol_raw);
    experts.push_back(std::move(je));
  }
  j["experts"] = std::move(experts);
  j["gating"]["V"] = mat_to_json(m.gating.V);
  j["gating"]["c"] = vec_to_json(m.gating.c);
  return j.dump(2);
}

MoEParams moe_from_json(const std::string& text) {
  const json j = json::parse(text);
  check_version(j, kMoeCheckpointVersion);
  MoEParams m;
  m.action_dim = j["action_dim"].get<int>();
  m.state_dim = j["state_dim"].get<int>();
  m.features = feature_spec_from_json(j["features"]);
  for (const json& je : j["experts"]) {
    ExpertParams e;
    e.W = mat_from_json(je["W"]);
    e.b = vec_from_json(je["b"]);
    e.chol_raw = mat_from_json(je["chol_raw"]);
    m.experts.push_back(std::move(e));
  }
  m.gating.V = mat_from_json(j["gating"]["V"]);
  m.gating.c = vec_from_json(j["gating"]["c"]);
  require(m.num_experts() == j["num_experts"].get<int>(), "expert count mismatch in checkpoint");
  return m;
}

std::string scorenet_to_json(const ScoreNet& net) {
  json j;
  j["version"] = kScoreNetCheckpointVersion;
  j["action_dim"] = net.action_dim();
  j["state_dim"] = net.state_dim();
  j["widths"] = {net.hidden1(), net.hidden2()};
  j["activation"] = net.activation() == Activation::Tanh ? "tanh" : "identity";
  j["schedule"] = schedule_to_json(net.schedule());
  j["W1"] = mat_to_json(net.W1_);
  j["b1"] = vec_to_json(net.b1_);
  j["W2"] = mat_to_json(net.W2_);
  j["b2"] = vec_to_json(net.b2_);
  j["W3"] = mat_to_json(net.W3_);
  j["b3"] = vec_to_json(net.b3_);
  return j.dump(2);
}

ScoreNet scorenet_from_json(const std::string& text) {
  const json j = json::parse(text);
  check_version(j, kScoreNetCheckpointVersion);
  ScoreNet net;
  net.set_dims(j["action_dim"].get<int>(), j["state_dim"].get<int>(),
               j["activation"].get<std::string>() == "tanh" ? Activation::Tanh
                                                            : Activation::Identity);
  net.set_schedule(schedule_from_json(j["schedule"]));
  net.W1_ = mat_from_json(j["W1"]);
  net.b1_ = vec_from_json(j["b1"]);
  net.W2_ = mat_from_json(j["W2"]);
  net.b2_ = vec_from_json(j["b2"]);
  net.W3_ = mat_from_json(j["W3"]);
  net.b3_ = vec_from_json(j["b3"]);
  return net;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), "cannot open file for writing: " + path);
  out << text << "\n";
}

}  // namespace

void save_moe(const MoEParams& m, const std::string& path) { write_file(path, moe_to_json(m)); }
MoEParams load_moe(const std::string& path) { return moe_from_json(read_file(path)); }
void save_scorenet(const ScoreNet& net, const std::string& path) {
  write_file(path, scorenet_to_json(net));
}
ScoreNet load_scorenet(const std::string& path) { return scorenet_from_json(read_file(path)); }

}  // namespace vdd
