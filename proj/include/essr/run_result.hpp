#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "essr/counts.hpp"

namespace essr {

/// Outcome of one agent run on one environment.
struct RunResult {
  std::uint64_t seed = 0;
  /// Undiscounted sum of environment rewards over the horizon.
  double cumulative_reward = 0.0;
  /// Environment plus scaled intrinsic reward; equals cumulative_reward for
  /// agents without a bonus.
  double cumulative_augmented_reward = 0.0;
  /// Per-step environment rewards, present when step logging is on.
  std::optional<std::vector<double>> reward_log;
  CountMatrix final_counts{1};
  /// Step index (0-based) at which each state was first occupied, -1 if never.
  std::vector<std::int64_t> first_visit;
  double wall_clock_ms = 0.0;
};

}  // namespace essr
