#include "legiteam/pursuit.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <stdexcept>

#include "legiteam/foraging.hpp"
#include "legiteam/rng.hpp"

namespace legiteam {

namespace {

struct Delta {
  int dr;
  int dc;
};

constexpr Delta kDeltas[5] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}, {0, 0}};

int move_target(int cell, int action, int width, int height) {
  const int r = cell / width + kDeltas[action].dr;
  const int c = cell % width + kDeltas[action].dc;
  if (r < 0 || r >= height || c < 0 || c >= width) return cell;
  return r * width + c;
}

// Same simultaneous resolution as the foraging agents: wall clamps, blocked
// cells, the other hunter's current cell, and head-on target collisions all
// cancel the move.
std::array<int, 2> resolve_hunter_moves(const std::array<int, 2>& hunters, int action0, int action1,
                                        int width, int height, const std::vector<bool>& blocked) {
  std::array<int, 2> target = hunters;
  const int actions[2] = {action0, action1};
  for (int i = 0; i < 2; ++i) {
    const int t = move_target(hunters[static_cast<std::size_t>(i)], actions[i], width, height);
    if (blocked[static_cast<std::size_t>(t)]) continue;
    if (t == hunters[static_cast<std::size_t>(1 - i)]) continue;
    target[static_cast<std::size_t>(i)] = t;
  }
  if (target[0] == target[1]) return hunters;
  return target;
}

int adjacent_hunter_count(int prey_cell, const std::vector<int>& hunters, int width) {
  int count = 0;
  for (int h : hunters) {
    if (manhattan_distance(prey_cell, h, width) == 1) ++count;
  }
  return count;
}

}  // namespace

PursuitScenario sample_pursuit_scenario(std::uint64_t seed, const PursuitConfig& config) {
  const int cells = config.width * config.height;
  const int entities = config.n_hunters + config.n_preys;
  if (config.n_hunters != 2) throw std::invalid_argument("sample_pursuit_scenario: exactly two hunters supported");
  if (config.n_preys < 1 || config.n_preys > 31) throw std::invalid_argument("sample_pursuit_scenario: prey count out of range");
  if (entities > cells) throw std::invalid_argument("sample_pursuit_scenario: grid too small for all entities");

  SeededRng rng(seed);
  PursuitScenario scenario;
  scenario.width = config.width;
  scenario.height = config.height;
  const std::vector<int> sampled = rng.sample_without_replacement(cells, entities);
  scenario.hunter_starts.assign(sampled.begin(), sampled.begin() + config.n_hunters);
  scenario.prey_starts.assign(sampled.begin() + config.n_hunters, sampled.end());
  scenario.capture_sequence.resize(static_cast<std::size_t>(config.n_preys));
  for (int i = 0; i < config.n_preys; ++i) scenario.capture_sequence[static_cast<std::size_t>(i)] = i;
  rng.shuffle(scenario.capture_sequence);
  return scenario;
}

PursuitState pursuit_initial_state(const PursuitScenario& scenario) {
  PursuitState state;
  state.hunters = scenario.hunter_starts;
  state.preys = scenario.prey_starts;
  state.alive_mask = (1u << scenario.prey_starts.size()) - 1u;
  return state;
}

int greedy_prey_move(int prey_cell, const std::vector<int>& hunters, const std::vector<bool>& occupied,
                     int width, int height) {
  int best_cell = prey_cell;
  int best_min = -1;
  int best_sum = -1;
  for (int action = 0; action < kPursuitActionCount; ++action) {
    const int t = move_target(prey_cell, action, width, height);
    if (t != prey_cell && occupied[static_cast<std::size_t>(t)]) continue;
    if (t == prey_cell && action != kStay) continue;  // wall clamp duplicates Stay
    int min_dist = std::numeric_limits<int>::max();
    int sum_dist = 0;
    for (int h : hunters) {
      const int d = manhattan_distance(t, h, width);
      min_dist = std::min(min_dist, d);
      sum_dist += d;
    }
    if (min_dist > best_min || (min_dist == best_min && sum_dist > best_sum)) {
      best_min = min_dist;
      best_sum = sum_dist;
      best_cell = t;
    }
  }
  return best_cell;
}

namespace {

void check_pursuit_input(const PursuitState& state, const PursuitConfig& config, int action0, int action1) {
  const int cells = config.width * config.height;
  if (action0 < 0 || action0 >= kPursuitActionCount || action1 < 0 || action1 >= kPursuitActionCount) {
    throw std::invalid_argument("pursuit_step: action out of range");
  }
  if (static_cast<int>(state.hunters.size()) != config.n_hunters ||
      static_cast<int>(state.preys.size()) != config.n_preys) {
    throw std::invalid_argument("pursuit_step: entity counts do not match the config");
  }
  if (state.alive_mask >= (1u << state.preys.size())) throw std::invalid_argument("pursuit_step: alive mask out of range");
  std::vector<int> live_cells = state.hunters;
  for (std::size_t i = 0; i < state.preys.size(); ++i) {
    if ((state.alive_mask >> i) & 1u) live_cells.push_back(state.preys[i]);
  }
  for (int cell : live_cells) {
    if (cell < 0 || cell >= cells) throw std::invalid_argument("pursuit_step: entity cell out of range");
  }
  std::sort(live_cells.begin(), live_cells.end());
  if (std::adjacent_find(live_cells.begin(), live_cells.end()) != live_cells.end()) {
    throw std::invalid_argument("pursuit_step: live entities must occupy distinct cells");
  }
}

}  // namespace

PursuitStepResult pursuit_step(const PursuitState& state, const PursuitConfig& config,
                               int action0, int action1) {
  check_pursuit_input(state, config, action0, action1);
  const int cells = config.width * config.height;
  PursuitStepResult result;
  result.state = state;

  std::vector<bool> blocked(static_cast<std::size_t>(cells), false);
  for (std::size_t i = 0; i < state.preys.size(); ++i) {
    if ((state.alive_mask >> i) & 1u) blocked[static_cast<std::size_t>(state.preys[i])] = true;
  }
  const std::array<int, 2> hunters_before = {state.hunters[0], state.hunters[1]};
  const std::array<int, 2> hunters_after =
      resolve_hunter_moves(hunters_before, action0, action1, config.width, config.height, blocked);
  result.state.hunters = {hunters_after[0], hunters_after[1]};

  for (std::size_t i = 0; i < state.preys.size(); ++i) {
    if (!((result.state.alive_mask >> i) & 1u)) continue;
    if (adjacent_hunter_count(state.preys[i], result.state.hunters, config.width) >= config.capture_requirement) {
      result.state.alive_mask &= ~(1u << i);
      result.captured.push_back(static_cast<int>(i));
    }
  }

  std::vector<bool> occupied(static_cast<std::size_t>(cells), false);
  for (int h : result.state.hunters) occupied[static_cast<std::size_t>(h)] = true;
  for (std::size_t i = 0; i < state.preys.size(); ++i) {
    if ((result.state.alive_mask >> i) & 1u) occupied[static_cast<std::size_t>(result.state.preys[i])] = true;
  }
  for (std::size_t i = 0; i < state.preys.size(); ++i) {
    if (!((result.state.alive_mask >> i) & 1u)) continue;
    const int from = result.state.preys[i];
    const int to = greedy_prey_move(from, result.state.hunters, occupied, config.width, config.height);
    occupied[static_cast<std::size_t>(from)] = false;
    occupied[static_cast<std::size_t>(to)] = true;
    result.state.preys[i] = to;
  }
  return result;
}

int PursuitStateSpace::index(int h1, int h2, int p) const {
  if (h1 == h2 || h1 == p || h2 == p) throw std::invalid_argument("PursuitStateSpace: cells must be distinct");
  const int h2r = h2 - (h2 > h1 ? 1 : 0);
  const int pr = p - (p > h1 ? 1 : 0) - (p > h2 ? 1 : 0);
  return (h1 * (cells - 1) + h2r) * (cells - 2) + pr;
}

std::tuple<int, int, int> PursuitStateSpace::cells_of(int state) const {
  if (state < 0 || state >= sink) throw std::invalid_argument("PursuitStateSpace: state index out of range");
  const int pr = state % (cells - 2);
  const int rest = state / (cells - 2);
  const int h2r = rest % (cells - 1);
  const int h1 = rest / (cells - 1);
  const int h2 = h2r + (h2r >= h1 ? 1 : 0);
  int p = pr;
  const int lo = std::min(h1, h2);
  const int hi = std::max(h1, h2);
  if (p >= lo) ++p;
  if (p >= hi) ++p;
  return {h1, h2, p};
}

PursuitStateSpace pursuit_state_space(int width, int height) {
  if (width < 3 || height < 3) throw std::invalid_argument("pursuit_state_space: grid must be at least 3x3");
  PursuitStateSpace space;
  space.width = width;
  space.height = height;
  space.cells = width * height;
  space.sink = space.cells * (space.cells - 1) * (space.cells - 2);
  space.n_states = space.sink + 1;
  return space;
}

TabularMDP goal_mdp_pursuit(int width, int height, double gamma, const PursuitStateSpace& space,
                            bool allow_large) {
  if (width * height > 100 && !allow_large) {
    throw std::invalid_argument(
        "goal_mdp_pursuit: exact dynamic programming is gated at 10x10; pass allow_large "
        "(CLI flag --allow-large-pursuit) to override");
  }
  const std::size_t n_rows = static_cast<std::size_t>(space.n_states) * kPursuitJointActions;
  std::vector<double> rewards(n_rows, 0.0);
  std::vector<int> next(n_rows, space.sink);
  std::vector<bool> blocked(static_cast<std::size_t>(space.cells), false);
  std::vector<bool> occupied(static_cast<std::size_t>(space.cells), false);
  std::vector<int> hunters(2, 0);

  for (int h1 = 0; h1 < space.cells; ++h1) {
    for (int h2 = 0; h2 < space.cells; ++h2) {
      if (h2 == h1) continue;
      for (int p = 0; p < space.cells; ++p) {
        if (p == h1 || p == h2) continue;
        const int state = space.index(h1, h2, p);
        const std::size_t base = static_cast<std::size_t>(state) * kPursuitJointActions;
        blocked[static_cast<std::size_t>(p)] = true;
        for (int a0 = 0; a0 < kPursuitActionCount; ++a0) {
          for (int a1 = 0; a1 < kPursuitActionCount; ++a1) {
            const std::array<int, 2> moved = resolve_hunter_moves({h1, h2}, a0, a1, width, height, blocked);
            const std::size_t row = base + static_cast<std::size_t>(a0 * kPursuitActionCount + a1);
            hunters[0] = moved[0];
            hunters[1] = moved[1];
            if (adjacent_hunter_count(p, hunters, width) >= 2) {
              rewards[row] = 1.0;
              next[row] = space.sink;
            } else {
              occupied[static_cast<std::size_t>(moved[0])] = true;
              occupied[static_cast<std::size_t>(moved[1])] = true;
              occupied[static_cast<std::size_t>(p)] = true;
              const int p_next = greedy_prey_move(p, hunters, occupied, width, height);
              occupied[static_cast<std::size_t>(moved[0])] = false;
              occupied[static_cast<std::size_t>(moved[1])] = false;
              occupied[static_cast<std::size_t>(p)] = false;
              next[row] = space.index(moved[0], moved[1], p_next);
            }
          }
        }
        blocked[static_cast<std::size_t>(p)] = false;
      }
    }
  }
  for (int a = 0; a < kPursuitJointActions; ++a) {
    next[static_cast<std::size_t>(space.sink) * kPursuitJointActions + static_cast<std::size_t>(a)] = space.sink;
  }
  return TabularMDP::deterministic(space.n_states, kPursuitJointActions, gamma, std::move(rewards), std::move(next));
}

}  // namespace legiteam
