#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "legiteam/mdp.hpp"

namespace legiteam {

/// Grid actions shared by both environments. Load is foraging-only; pursuit
/// uses the first five. Order matters: greedy tie-breaks resolve to the
/// lowest index, so movement precedes Stay and Load.
enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4, kLoad = 5 };

constexpr int kForagingActionCount = 6;
constexpr int kForagingJointActions = kForagingActionCount * kForagingActionCount;

struct ForagingConfig {
  int width = 5;
  int height = 5;
  int n_candidates = 8;
  int n_active = 6;
  // Two level-1 agents versus level-2 foods: every pick needs both agents.
  int agent_level = 1;
  int step_limit = 600;
};

/// One sampled episode layout. Foods are identified by an index into
/// `active` (0 .. n_active-1); food f sits on candidate_cells[active[f]].
/// All candidate cells and both agent starts are mutually distinct.
struct ForagingLayout {
  int width = 0;
  int height = 0;
  std::vector<int> candidate_cells;
  std::vector<int> active;
  std::vector<int> capture_sequence;  // permutation of food indices
  std::array<int, 2> agent_starts = {0, 0};

  int food_cell(int food) const { return candidate_cells[static_cast<std::size_t>(active[static_cast<std::size_t>(food)])]; }
  int n_foods() const { return static_cast<int>(active.size()); }
};

struct ForagingState {
  std::array<int, 2> agents = {0, 0};
  std::uint32_t present_mask = 0;  // bit f set while food f is on the grid
};

struct ForagingStepResult {
  ForagingState state;
  std::vector<int> picked;  // food indices removed this step, ascending
};

/// Layout sampling: 10 distinct cells (8 candidates, 2 starts), a uniform
/// 6-of-8 active subset, and a uniform capture order, resampled until the
/// schedule is feasible (each stage's target keeps two free neighbor cells
/// and the free cells stay connected). Deterministic in seed; throws
/// std::runtime_error when attempts run out.
ForagingLayout sample_layout(std::uint64_t seed, const ForagingConfig& config);

ForagingState foraging_initial_state(const ForagingLayout& layout);

/// Simultaneous movement with cancellation (walls, present food cells, the
/// other agent's current or target cell), then pick resolution: a present
/// food is picked when the combined level of adjacent loading agents meets
/// the food level. Throws std::invalid_argument on malformed input.
ForagingStepResult foraging_step(const ForagingState& state, const ForagingLayout& layout,
                                 int action0, int action1);

/// Joint-position state indexing for one present-food configuration.
/// States are ordered pairs of distinct free cells plus one absorbing sink.
struct ForagingStateSpace {
  int width = 0;
  int height = 0;
  std::vector<int> free_cells;
  std::vector<int> cell_to_free;
  int n_states = 0;
  int sink = 0;

  int index(int cell0, int cell1) const;
  std::pair<int, int> cells(int state) const;
};

ForagingStateSpace foraging_state_space(const ForagingLayout& layout, std::uint32_t present_mask);

/// Goal-conditioned joint MDP for one target food under a fixed present-food
/// configuration. Dynamics are shared across targets: any successful pick
/// ends the planning context by absorbing; the reward is 1 only when the
/// picked set contains the target. Movement matches foraging_step exactly.
TabularMDP goal_mdp_foraging(const ForagingLayout& layout, std::uint32_t present_mask, int target_food,
                             double gamma, const ForagingStateSpace& space);

int manhattan_distance(int cell_a, int cell_b, int width);

}  // namespace legiteam
