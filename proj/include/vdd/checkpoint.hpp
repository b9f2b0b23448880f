#pragma once

#include <string>

#include "vdd/moe.hpp"
#include "vdd/scorenet.hpp"

namespace vdd {

// Versioned JSON checkpoints. Doubles are written in shortest round-trip
// decimal form, so save/load reproduces every evaluation bit-exactly.
inline constexpr const char* kMoeCheckpointVersion = "vdd-moe-1";
inline constexpr const char* kScoreNetCheckpointVersion = "vdd-scorenet-1";

void save_moe(const MoEParams& m, const std::string& path);
MoEParams load_moe(const std::string& path);

void save_scorenet(const ScoreNet& net, const std::string& path);
ScoreNet load_scorenet(const std::string& path);

std::string moe_to_json(const MoEParams& m);
MoEParams moe_from_json(const std::string& text);
std::string scorenet_to_json(const ScoreNet& net);
ScoreNet scorenet_from_json(const std::string& text);

}  // namespace vdd
