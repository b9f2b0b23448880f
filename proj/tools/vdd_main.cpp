#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vdd/runner.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
  std::string data_path, model_path, teacher_path;
  bool force = false;
  int threads = 0;  // 0 = from config
};

void apply_set(vdd::ConfigFile& cfg, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw vdd::ConfigError("--set expects section.key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  const size_t dot = path.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == path.size())
    throw vdd::ConfigError("--set expects section.key=value, got '" + assignment + "'");
  cfg.set(path.substr(0, dot), path.substr(dot + 1), value);
}

int run(const std::string& command, const CliOptions& cli) {
  vdd::RunOptions opt;
  opt.command = command;
  try {
    if (cli.config_path.empty())
      throw vdd::ConfigError("missing --config (every subcommand needs a config file)");
    if (cli.out.empty()) throw vdd::ConfigError("missing --out run directory");
    vdd::ConfigFile file = vdd::ConfigFile::parse_file(cli.config_path);
    for (const std::string& s : cli.sets) apply_set(file, s);
    if (cli.threads > 0) file.set("io", "threads", std::to_string(cli.threads));
    opt.cfg = vdd::RunConfig::from_config(std::move(file));
    opt.out = cli.out;
    opt.force = cli.force;
    opt.data_path = cli.data_path;
    opt.model_path = cli.model_path;
    opt.teacher_path = cli.teacher_path;
  } catch (const vdd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    vdd::run_command(opt);
  } catch (const vdd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::error_code ec;
    if (std::filesystem::exists(opt.out, ec)) {
      std::ofstream diag(opt.out / "diagnostics.txt");
      diag << "command: " << command << "\nerror: " << e.what() << "\n";
    }
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-distillation of diffusion teachers into Gaussian mixture-of-experts "
               "policies, with EM baselines and toy-task evaluation"};
  app.require_subcommand(1);

  static const std::vector<std::string> commands = {"gen-data", "train-teacher", "sample-teacher",
                                                    "distill",  "train-em",      "eval",
                                                    "bench",    "plot"};
  CliOptions cli;
  std::string chosen;
  for (const std::string& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", cli.config_path, "config file (sections + key=value)");
    sub->add_option("--set", cli.sets, "override: section.key=value")->take_all();
    sub->add_option("--out", cli.out, "run directory");
    sub->add_flag("--force", cli.force, "allow overwriting artifacts in the run directory");
    sub->add_option("--threads", cli.threads, "worker threads (overrides io.threads)");
    sub->add_option("--data", cli.data_path, "dataset file (default <out>/dataset.jsonl)");
    sub->add_option("--model", cli.model_path, "model checkpoint (default <out>/moe.json)");
    sub->add_option("--teacher-ckpt", cli.teacher_path,
                    "scorenet checkpoint (default <out>/scorenet.json)");
    sub->callback([&chosen, name]() { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);
  return run(chosen, cli);
}
