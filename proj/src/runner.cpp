#include "vdd/runner.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "vdd/checkpoint.hpp"
#include "vdd/metrics.hpp"

namespace vdd {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path.string());
  out << text;
}

void prepare_out(const RunOptions& opt) {
  if (fs::exists(opt.out) && !fs::is_directory(opt.out))
    throw ConfigError("output path is not a directory: " + opt.out.string());
  fs::create_directories(opt.out);
}

void guard_overwrite(const RunOptions& opt, const fs::path& file) {
  // Run directories are append-only; refreshing an artifact needs --force.
  if (fs::exists(file) && !opt.force)
    throw ConfigError("refusing to overwrite " + file.string() + " (use --force)");
}

void write_manifest(const RunOptions& opt) {
  nlohmann::json j;
  j["tool"] = "vdd";
  j["version"] = kToolVersion;
  j["command"] = opt.command;
  j["seed"] = opt.cfg.seed;
  write_text(opt.out / ("manifest-" + opt.command + ".json"), j.dump(2) + "\n");
  const fs::path cfg_path = opt.out / "config.toml";
  if (!fs::exists(cfg_path) || opt.force) write_text(cfg_path, opt.cfg.resolved.serialize());
}

fs::path default_path(const RunOptions& opt, const std::string& override_path,
                      const char* filename) {
  return override_path.empty() ? opt.out / filename : fs::path(override_path);
}

Dataset load_data(const RunOptions& opt) {
  const fs::path p = default_path(opt, opt.data_path, "dataset.jsonl");
  if (!fs::exists(p))
    throw ConfigError("dataset not found: " + p.string() + " (run gen-data first or pass --data)");
  return load_dataset_jsonl(p.string());
}

void cmd_gen_data(const RunOptions& opt) {
  const fs::path out = opt.out / "dataset.jsonl";
  guard_overwrite(opt, out);
  const ToyTask task = opt.cfg.make_task();
  const Dataset ds =
      generate_dataset(task, opt.cfg.trajectories_per_behavior, opt.cfg.noise_std, opt.cfg.seed);
  save_dataset_jsonl(ds, out.string());
}

void cmd_train_teacher(const RunOptions& opt) {
  const fs::path out = opt.out / "scorenet.json";
  guard_overwrite(opt, out);
  const Dataset ds = load_data(opt);
  ScoreNet net(2, 2, opt.cfg.hidden1, opt.cfg.hidden2,
               opt.cfg.activation == "tanh" ? Activation::Tanh : Activation::Identity,
               opt.cfg.make_schedule(), opt.cfg.seed);
  DsmConfig dc;
  dc.epochs = opt.cfg.dsm_epochs;
  dc.batch_size = opt.cfg.dsm_batch;
  dc.step_size = opt.cfg.dsm_step_size;
  dc.seed = opt.cfg.seed;
  const std::vector<double> losses = dsm_train(net, ds.pairs(), dc);
  save_scorenet(net, out.string());
  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (size_t i = 0; i < losses.size(); ++i) csv << i << "," << fmt(losses[i]) << "\n";
  write_text(opt.out / "dsm_loss.csv", csv.str());
}

void cmd_sample_teacher(const RunOptions& opt) {
  const fs::path out = opt.out / "teacher_samples.csv";
  guard_overwrite(opt, out);
  const auto teacher = build_teacher(opt.cfg, default_path(opt, opt.teacher_path, "scorenet.json").string());
  const ToyTask task = opt.cfg.make_task();
  Rng base(opt.cfg.seed);
  std::ostringstream csv;
  csv << "s0_idx,sx,sy,ax,ay\n";
  for (int i = 0; i < opt.cfg.n_s0; ++i) {
    Rng r0 = base.split(0xA0000000ULL + static_cast<uint64_t>(i));
    const Vec s0 = task.initial_state(r0);
    for (int j = 0; j < opt.cfg.kl_samples; ++j) {
      Rng rs = base.split(0xC0000000ULL + static_cast<uint64_t>(i) * 100003ULL + j);
      const Vec a = reverse_sde_sample(*teacher, s0, opt.cfg.sde_steps, rs);
      csv << i << "," << fmt(s0[0]) << "," << fmt(s0[1]) << "," << fmt(a[0]) << "," << fmt(a[1])
          << "\n";
    }
  }
  write_text(out, csv.str());
}

void write_train_log(const fs::path& path, const VddTrainLog& log, int num_experts) {
  std::ostringstream csv;
  csv << "iteration,reverse_kl_mc,reverse_kl_se,gating_entropy";
  for (int z = 0; z < num_experts; ++z) csv << ",expert" << z << "_mean_norm";
  csv << "\n";
  for (const auto& row : log.rows) {
    csv << row.iteration << "," << fmt(row.reverse_kl) << "," << fmt(row.reverse_kl_se) << ","
        << fmt(row.gating_entropy);
    for (double v : row.expert_mean_norms) csv << "," << fmt(v);
    csv << "\n";
  }
  write_text(path, csv.str());
}

void cmd_distill(const RunOptions& opt) {
  const fs::path out = opt.out / "moe.json";
  guard_overwrite(opt, out);
  const Dataset ds = load_data(opt);
  const auto teacher =
      build_teacher(opt.cfg, default_path(opt, opt.teacher_path, "scorenet.json").string());
  const PairSet pairs = ds.pairs();
  const FeatureMap features = opt.cfg.build_features(pairs.states);
  VddTrainLog log;
  const MoEParams model = vdd_train(opt.cfg.vdd, features, *teacher, pairs, &log);
  save_moe(model, out.string());
  write_train_log(opt.out / "train_log.csv", log, model.num_experts());
}

void cmd_train_em(const RunOptions& opt) {
  const fs::path out = opt.out / "moe_em.json";
  guard_overwrite(opt, out);
  const Dataset ds = load_data(opt);
  const PairSet pairs = ds.pairs();
  const FeatureMap features = opt.cfg.build_features(pairs.states);
  EmLog log;
  const MoEParams model = em_train(pairs, features, opt.cfg.em, &log);
  save_moe(model, out.string());
  std::ostringstream csv;
  csv << "iteration,log_likelihood\n";
  for (size_t i = 0; i < log.log_likelihood.size(); ++i)
    csv << i << "," << fmt(log.log_likelihood[i]) << "\n";
  write_text(opt.out / "em_log.csv", csv.str());
  if (!log.events.empty()) {
    std::ostringstream ev;
    for (const std::string& e : log.events) ev << e << "\n";
    write_text(opt.out / "em_events.log", ev.str());
  }
}

void cmd_eval(const RunOptions& opt) {
  const fs::path out = opt.out / "metrics.csv";
  guard_overwrite(opt, out);
  const ToyTask task = opt.cfg.make_task();
  Rng base(opt.cfg.seed ^ 0xE7A1ULL);

  std::unique_ptr<Policy> policy;
  std::shared_ptr<ScoreFunction> teacher;
  MoEParams model;
  if (opt.cfg.eval_subject == "teacher") {
    teacher = build_teacher(opt.cfg, default_path(opt, opt.teacher_path, "scorenet.json").string());
    policy = std::make_unique<SdePolicy>(*teacher, opt.cfg.sde_steps);
  } else {
    model = load_moe(default_path(opt, opt.model_path, "moe.json").string());
    policy = std::make_unique<MoePolicy>(model, opt.cfg.mode_action_policy());
  }

  const SuccessEstimate succ = success_rate(*policy, task, opt.cfg.n_s0, opt.cfg.rollouts_per_s0,
                                            base, opt.cfg.threads);
  const EntropyEstimate ent = task_entropy(*policy, task, opt.cfg.n_s0, opt.cfg.rollouts_per_s0,
                                           base, opt.cfg.threads);

  std::ostringstream csv;
  csv << "metric,value,stderr\n";
  csv << "success_rate," << fmt(succ.rate) << "," << fmt(succ.se) << "\n";
  csv << "task_entropy," << fmt(ent.entropy) << ",\n";
  csv << "entropy_flagged_s0," << ent.flagged_s0 << ",\n";

  if (opt.cfg.eval_subject == "moe" && opt.cfg.teacher_kind == "analytic") {
    const auto analytic = build_teacher(opt.cfg, "");
    const fs::path data = default_path(opt, opt.data_path, "dataset.jsonl");
    std::vector<Vec> states;
    if (fs::exists(data)) {
      const Dataset ds = load_dataset_jsonl(data.string());
      Rng pick(opt.cfg.seed ^ 0x57A7E5ULL);
      for (int i = 0; i < opt.cfg.kl_states; ++i)
        states.push_back(ds.rows[pick.integer(ds.rows.size())].s);
    } else {
      for (int i = 0; i < opt.cfg.kl_states; ++i) {
        Rng r = base.split(0xD0000000ULL + static_cast<uint64_t>(i));
        states.push_back(task.initial_state(r));
      }
    }
    Rng kl_rng(opt.cfg.seed ^ 0x4B1DULL);
    const KlEstimate kl = reverse_kl_mc(model, *analytic, states, opt.cfg.kl_samples, kl_rng);
    csv << "reverse_kl_mc," << fmt(kl.kl) << "," << fmt(kl.se) << "\n";
  }
  write_text(out, csv.str());
}

void cmd_bench(const RunOptions& opt) {
  const fs::path out = opt.out / "bench.csv";
  guard_overwrite(opt, out);
  const MoEParams model = load_moe(default_path(opt, opt.model_path, "moe.json").string());
  const auto teacher =
      build_teacher(opt.cfg, default_path(opt, opt.teacher_path, "scorenet.json").string());
  const ToyTask task = opt.cfg.make_task();
  Rng rng(opt.cfg.seed ^ 0xBE7CULL);
  Rng r0 = rng.split(1);
  const Vec s0 = task.initial_state(r0);
  const auto rows =
      inference_benchmark(model, *teacher, opt.cfg.bench_nfe, opt.cfg.bench_reps, s0, rng);
  std::ostringstream csv;
  csv << "method,nfe,median_us,q25_us,q75_us\n";
  for (const BenchResult& r : rows)
    csv << r.method << "," << r.nfe << "," << fmt(r.median_us) << "," << fmt(r.q25_us) << ","
        << fmt(r.q75_us) << "\n";
  write_text(out, csv.str());
}

// Minimal SVG scatter/trajectory plot; expert means carry class="expert-mean".
void cmd_plot(const RunOptions& opt) {
  const fs::path out = opt.out / "plot.svg";
  guard_overwrite(opt, out);
  const MoEParams model = load_moe(default_path(opt, opt.model_path, "moe.json").string());
  const ToyTask task = opt.cfg.make_task();
  const bool avoid = opt.cfg.task.kind == TaskKind::Avoid2D;

  const double xmin = avoid ? -0.6 : -(opt.cfg.task.radius + 1.5);
  const double xmax = avoid ? 3.7 : (opt.cfg.task.radius + 1.5);
  const double ymin = avoid ? -1.9 : xmin;
  const double ymax = avoid ? 1.9 : xmax;
  const double W = 760, H = 560;
  auto px = [&](double x) { return (x - xmin) / (xmax - xmin) * W; };
  auto py = [&](double y) { return H - (y - ymin) / (ymax - ymin) * H; };
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";

  Rng rng(opt.cfg.seed ^ 0x9107ULL);
  if (avoid) {
    const Vec obs[] = {Vec{{1.0, 0.0}}, Vec{{2.0, 0.8}}, Vec{{2.0, -0.8}}};
    for (const Vec& o : obs)
      svg << "<circle cx=\"" << px(o[0]) << "\" cy=\"" << py(o[1]) << "\" r=\""
          << 0.3 / (xmax - xmin) * W << "\" fill=\"#cccccc\" stroke=\"#888888\"/>\n";
    svg << "<line x1=\"" << px(3.0) << "\" y1=\"0\" x2=\"" << px(3.0) << "\" y2=\"" << H
        << "\" stroke=\"#2ca02c\" stroke-dasharray=\"6,4\"/>\n";
    // A handful of closed-loop trajectories, segments colored by the expert
    // the gating picked.
    for (int traj = 0; traj < 12; ++traj) {
      Rng r = rng.split(100 + static_cast<uint64_t>(traj));
      Vec s = task.initial_state(r);
      for (int step = 0; step < task.horizon(); ++step) {
        const auto [z, a] = model.mode_action(s, opt.cfg.mode_action_policy(), r);
        const Vec s2 = task.step(s, a);
        svg << "<line x1=\"" << px(s[0]) << "\" y1=\"" << py(s[1]) << "\" x2=\"" << px(s2[0])
            << "\" y2=\"" << py(s2[1]) << "\" stroke=\"" << palette[z % 8]
            << "\" stroke-width=\"1.5\" opacity=\"0.8\"/>\n";
        s = s2;
        if (task.collision(s) || task.out_of_bounds(s) || task.reached_goal(s)) break;
      }
    }
  } else {
    // Sampled actions at a reference state, colored by expert.
    Rng r0 = rng.split(7);
    const Vec s0 = task.initial_state(r0);
    for (int i = 0; i < 600; ++i) {
      const auto [z, a] = model.sample(s0, rng);
      svg << "<circle cx=\"" << px(a[0]) << "\" cy=\"" << py(a[1]) << "\" r=\"2\" fill=\""
          << palette[z % 8] << "\" opacity=\"0.5\"/>\n";
    }
  }

  // Expert means at the reference state; one marker per expert.
  Rng rs = rng.split(9);
  const Vec sref = task.initial_state(rs);
  for (int z = 0; z < model.num_experts(); ++z) {
    const Vec mu = model.expert_forward(sref, z).mean;
    svg << "<circle class=\"expert-mean\" cx=\"" << px(mu[0]) << "\" cy=\"" << py(mu[1])
        << "\" r=\"6\" fill=\"none\" stroke=\"" << palette[z % 8] << "\" stroke-width=\"2.5\"/>\n";
  }
  svg << "</svg>\n";
  write_text(out, svg.str());
}

}  // namespace

std::shared_ptr<ScoreFunction> build_teacher(const RunConfig& cfg, const std::string& teacher_path) {
  if (cfg.teacher_kind == "scorenet") {
    if (teacher_path.empty() || !fs::exists(teacher_path))
      throw ConfigError("scorenet teacher checkpoint not found: " + teacher_path);
    return std::make_shared<ScoreNet>(load_scorenet(teacher_path));
  }
  const ToyTask task = cfg.make_task();
  return make_task_teacher(task, cfg.make_schedule(), cfg.route_action_std, cfg.route_proximity);
}

void run_command(const RunOptions& opt) {
  prepare_out(opt);
  write_manifest(opt);
  if (opt.command == "gen-data") {
    cmd_gen_data(opt);
  } else if (opt.command == "train-teacher") {
    cmd_train_teacher(opt);
  } else if (opt.command == "sample-teacher") {
    cmd_sample_teacher(opt);
  } else if (opt.command == "distill") {
    cmd_distill(opt);
  } else if (opt.command == "train-em") {
    cmd_train_em(opt);
  } else if (opt.command == "eval") {
    cmd_eval(opt);
  } else if (opt.command == "bench") {
    cmd_bench(opt);
  } else if (opt.command == "plot") {
    cmd_plot(opt);
  } else {
    throw ConfigError("unknown command: " + opt.command);
  }
}

}  // namespace vdd
