#pragma once

#include <vector>

#include "vdd/types.hpp"

namespace vdd {

// Aligned (state, action) pairs; the minimal view trainers consume.
struct PairSet {
  std::vector<Vec> states;
  std::vector<Vec> actions;

  size_t size() const { return states.size(); }
  bool empty() const { return states.empty(); }
};

}  // namespace vdd
