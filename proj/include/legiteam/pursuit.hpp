#pragma once

#include <cstdint>
#include <tuple>
#include <vector>

#include "legiteam/mdp.hpp"

namespace legiteam {

constexpr int kPursuitActionCount = 5;  // Up, Down, Left, Right, Stay
constexpr int kPursuitJointActions = kPursuitActionCount * kPursuitActionCount;

struct PursuitConfig {
  int width = 10;
  int height = 10;
  int n_hunters = 2;
  int n_preys = 7;
  int capture_requirement = 2;  // hunters adjacent for a capture
  int step_limit = 800;
};

struct PursuitScenario {
  int width = 0;
  int height = 0;
  std::vector<int> hunter_starts;
  std::vector<int> prey_starts;
  std::vector<int> capture_sequence;  // permutation of prey indices
};

struct PursuitState {
  std::vector<int> hunters;
  std::vector<int> preys;         // positions stay valid only while alive
  std::uint32_t alive_mask = 0;
};

struct PursuitStepResult {
  PursuitState state;
  std::vector<int> captured;  // prey indices captured this step, ascending
};

/// All starts mutually distinct; capture order uniform. Deterministic in seed.
PursuitScenario sample_pursuit_scenario(std::uint64_t seed, const PursuitConfig& config);

PursuitState pursuit_initial_state(const PursuitScenario& scenario);

/// Greedy evasion for one prey: among the legal single-cell moves (including
/// Stay), maximize the minimum Manhattan distance to any hunter, then the
/// summed distance, then fall back to the fixed order Up, Down, Left, Right,
/// Stay. `occupied` covers every cell the prey may not enter.
int greedy_prey_move(int prey_cell, const std::vector<int>& hunters, const std::vector<bool>& occupied,
                     int width, int height);

/// Phase order: hunters move simultaneously, every live prey flanked by at
/// least capture_requirement hunters is captured, then survivors move one at
/// a time in index order. Captured preys neither move nor block.
PursuitStepResult pursuit_step(const PursuitState& state, const PursuitConfig& config,
                               int action0, int action1);

/// Target-relative state indexing: ordered (hunter1, hunter2, prey) triples
/// of distinct cells plus one absorbing sink. Index arithmetic is O(1).
struct PursuitStateSpace {
  int width = 0;
  int height = 0;
  int cells = 0;
  int n_states = 0;
  int sink = 0;

  int index(int h1, int h2, int p) const;
  std::tuple<int, int, int> cells_of(int state) const;
};

PursuitStateSpace pursuit_state_space(int width, int height);

/// Canonical per-target joint MDP: hunters move, capture is checked, the
/// target prey answers greedily. Other preys are abstracted away entirely,
/// so one MDP serves every target at a given grid size. Reward 1 on capture.
/// Grids beyond 10x10 are refused unless allow_large is set; the exact
/// triple space grows with the sixth power of the side length.
TabularMDP goal_mdp_pursuit(int width, int height, double gamma, const PursuitStateSpace& space,
                            bool allow_large = false);

}  // namespace legiteam
