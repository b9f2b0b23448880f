#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "vdd/config.hpp"

namespace vdd {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunOptions {
  std::string command;  // gen-data, train-teacher, sample-teacher, distill,
                        // train-em, eval, bench, plot
  RunConfig cfg;
  std::filesystem::path out;
  bool force = false;
  // Optional input overrides; default to files inside `out`.
  std::string data_path;
  std::string model_path;
  std::string teacher_path;
};

// Executes one subcommand, writing outputs into the run directory. Throws
// ConfigError for configuration/usage problems and std::runtime_error for
// runtime failures.
void run_command(const RunOptions& opt);

// Teacher construction shared by commands: analytic (from the task) or a
// ScoreNet checkpoint.
std::shared_ptr<ScoreFunction> build_teacher(const RunConfig& cfg, const std::string& teacher_path);

}  // namespace vdd
