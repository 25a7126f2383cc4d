#include "legiteam/foraging.hpp"

#include <algorithm>
#include <stdexcept>

#include "legiteam/rng.hpp"

namespace legiteam {

namespace {

struct Delta {
  int dr;
  int dc;
};

// Indexed by GridAction; Stay and Load do not move.
constexpr Delta kDeltas[6] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}, {0, 0}, {0, 0}};

int move_target(int cell, int action, int width, int height) {
  const int r = cell / width + kDeltas[action].dr;
  const int c = cell % width + kDeltas[action].dc;
  if (r < 0 || r >= height || c < 0 || c >= width) return cell;
  return r * width + c;
}

bool adjacent(int cell_a, int cell_b, int width) { return manhattan_distance(cell_a, cell_b, width) == 1; }

std::vector<bool> present_food_blocked(const ForagingLayout& layout, std::uint32_t present_mask) {
  std::vector<bool> blocked(static_cast<std::size_t>(layout.width * layout.height), false);
  for (int f = 0; f < layout.n_foods(); ++f) {
    if ((present_mask >> f) & 1u) blocked[static_cast<std::size_t>(layout.food_cell(f))] = true;
  }
  return blocked;
}

// A pick needs both agents on distinct free neighbors of the food, and they
// must be able to travel there. The schedule is feasible when every stage's
// target keeps at least two free neighbor cells and the free cells form one
// connected region; picked foods free their cells for later stages.
bool schedule_feasible(const ForagingLayout& layout) {
  const int width = layout.width;
  const int height = layout.height;
  const int cells = width * height;
  std::uint32_t mask = (1u << layout.n_foods()) - 1u;
  for (int target : layout.capture_sequence) {
    const std::vector<bool> blocked = present_food_blocked(layout, mask);
    const int food = layout.food_cell(target);
    int slots = 0;
    for (int a = kUp; a <= kRight; ++a) {
      const int t = move_target(food, a, width, height);
      if (t != food && !blocked[static_cast<std::size_t>(t)]) ++slots;
    }
    if (slots < 2) return false;

    int first_free = -1;
    int n_free = 0;
    for (int c = 0; c < cells; ++c) {
      if (!blocked[static_cast<std::size_t>(c)]) {
        ++n_free;
        if (first_free < 0) first_free = c;
      }
    }
    std::vector<bool> seen(static_cast<std::size_t>(cells), false);
    std::vector<int> queue{first_free};
    seen[static_cast<std::size_t>(first_free)] = true;
    int reached = 1;
    for (std::size_t i = 0; i < queue.size(); ++i) {
      for (int a = kUp; a <= kRight; ++a) {
        const int t = move_target(queue[i], a, width, height);
        if (t == queue[i] || blocked[static_cast<std::size_t>(t)] || seen[static_cast<std::size_t>(t)]) continue;
        seen[static_cast<std::size_t>(t)] = true;
        queue.push_back(t);
        ++reached;
      }
    }
    if (reached != n_free) return false;
    mask &= ~(1u << target);
  }
  return true;
}

// Simultaneous two-mover resolution. A move is cancelled when it leaves the
// grid, enters a blocked cell, enters the other mover's current cell, or
// collides with the other mover's target.
std::array<int, 2> resolve_moves(const std::array<int, 2>& positions, int action0, int action1,
                                 int width, int height, const std::vector<bool>& blocked) {
  std::array<int, 2> target = positions;
  const int actions[2] = {action0, action1};
  for (int i = 0; i < 2; ++i) {
    const int t = move_target(positions[static_cast<std::size_t>(i)], actions[i], width, height);
    if (blocked[static_cast<std::size_t>(t)]) continue;
    if (t == positions[static_cast<std::size_t>(1 - i)]) continue;
    target[static_cast<std::size_t>(i)] = t;
  }
  if (target[0] == target[1]) return positions;
  return target;
}

}  // namespace

int manhattan_distance(int cell_a, int cell_b, int width) {
  return std::abs(cell_a / width - cell_b / width) + std::abs(cell_a % width - cell_b % width);
}

ForagingLayout sample_layout(std::uint64_t seed, const ForagingConfig& config) {
  const int cells = config.width * config.height;
  if (config.width < 3 || config.height < 3) throw std::invalid_argument("sample_layout: grid must be at least 3x3");
  if (config.n_active > config.n_candidates) throw std::invalid_argument("sample_layout: more active foods than candidates");
  if (config.n_candidates + 2 > cells) throw std::invalid_argument("sample_layout: grid too small for candidates and starts");

  SeededRng rng(seed);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    ForagingLayout layout;
    layout.width = config.width;
    layout.height = config.height;
    const std::vector<int> sampled = rng.sample_without_replacement(cells, config.n_candidates + 2);
    layout.candidate_cells.assign(sampled.begin(), sampled.begin() + config.n_candidates);
    layout.agent_starts = {sampled[static_cast<std::size_t>(config.n_candidates)],
                           sampled[static_cast<std::size_t>(config.n_candidates) + 1]};

    std::vector<int> candidate_order(static_cast<std::size_t>(config.n_candidates));
    for (int i = 0; i < config.n_candidates; ++i) candidate_order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(candidate_order);
    layout.active.assign(candidate_order.begin(), candidate_order.begin() + config.n_active);
    std::sort(layout.active.begin(), layout.active.end());

    layout.capture_sequence.resize(static_cast<std::size_t>(config.n_active));
    for (int i = 0; i < config.n_active; ++i) layout.capture_sequence[static_cast<std::size_t>(i)] = i;
    rng.shuffle(layout.capture_sequence);
    if (schedule_feasible(layout)) return layout;
  }
  throw std::runtime_error("sample_layout: no feasible layout after 10000 attempts");
}

ForagingState foraging_initial_state(const ForagingLayout& layout) {
  ForagingState state;
  state.agents = layout.agent_starts;
  state.present_mask = (1u << layout.n_foods()) - 1u;
  return state;
}

namespace {

void check_foraging_input(const ForagingState& state, const ForagingLayout& layout, int action0, int action1) {
  const int cells = layout.width * layout.height;
  if (action0 < 0 || action0 >= kForagingActionCount || action1 < 0 || action1 >= kForagingActionCount) {
    throw std::invalid_argument("foraging_step: action out of range");
  }
  if (state.agents[0] == state.agents[1]) throw std::invalid_argument("foraging_step: agents must occupy distinct cells");
  for (int agent_cell : state.agents) {
    if (agent_cell < 0 || agent_cell >= cells) throw std::invalid_argument("foraging_step: agent cell out of range");
  }
  if (state.present_mask >= (1u << layout.n_foods())) throw std::invalid_argument("foraging_step: present mask out of range");
  for (int f = 0; f < layout.n_foods(); ++f) {
    if ((state.present_mask >> f) & 1u) {
      if (state.agents[0] == layout.food_cell(f) || state.agents[1] == layout.food_cell(f)) {
        throw std::invalid_argument("foraging_step: agent standing on a present food cell");
      }
    }
  }
}

// Picks under the forced-cooperation config: every adjacent loading agent
// contributes agent_level = 1 against food level 2, so both must load.
std::vector<int> resolve_picks(const std::array<int, 2>& positions, int action0, int action1,
                               const ForagingLayout& layout, std::uint32_t present_mask) {
  std::vector<int> picked;
  const int actions[2] = {action0, action1};
  const int food_level = 2;
  for (int f = 0; f < layout.n_foods(); ++f) {
    if (!((present_mask >> f) & 1u)) continue;
    int level_sum = 0;
    for (int i = 0; i < 2; ++i) {
      if (actions[i] == kLoad && adjacent(positions[static_cast<std::size_t>(i)], layout.food_cell(f), layout.width)) {
        level_sum += 1;
      }
    }
    if (level_sum >= food_level) picked.push_back(f);
  }
  return picked;
}

}  // namespace

ForagingStepResult foraging_step(const ForagingState& state, const ForagingLayout& layout,
                                 int action0, int action1) {
  check_foraging_input(state, layout, action0, action1);
  const std::vector<bool> blocked = present_food_blocked(layout, state.present_mask);
  ForagingStepResult result;
  result.state.agents = resolve_moves(state.agents, action0, action1, layout.width, layout.height, blocked);
  result.state.present_mask = state.present_mask;
  result.picked = resolve_picks(result.state.agents, action0, action1, layout, state.present_mask);
  for (int f : result.picked) result.state.present_mask &= ~(1u << f);
  return result;
}

int ForagingStateSpace::index(int cell0, int cell1) const {
  const int f0 = cell_to_free[static_cast<std::size_t>(cell0)];
  const int f1 = cell_to_free[static_cast<std::size_t>(cell1)];
  if (f0 < 0 || f1 < 0 || f0 == f1) throw std::invalid_argument("ForagingStateSpace: cells must be distinct free cells");
  const int n_free = static_cast<int>(free_cells.size());
  return f0 * (n_free - 1) + (f1 > f0 ? f1 - 1 : f1);
}

std::pair<int, int> ForagingStateSpace::cells(int state) const {
  const int n_free = static_cast<int>(free_cells.size());
  if (state < 0 || state >= sink) throw std::invalid_argument("ForagingStateSpace: state index out of range");
  const int f0 = state / (n_free - 1);
  int f1 = state % (n_free - 1);
  if (f1 >= f0) ++f1;
  return {free_cells[static_cast<std::size_t>(f0)], free_cells[static_cast<std::size_t>(f1)]};
}

ForagingStateSpace foraging_state_space(const ForagingLayout& layout, std::uint32_t present_mask) {
  ForagingStateSpace space;
  space.width = layout.width;
  space.height = layout.height;
  const int cells = layout.width * layout.height;
  space.cell_to_free.assign(static_cast<std::size_t>(cells), -1);
  const std::vector<bool> blocked = present_food_blocked(layout, present_mask);
  for (int cell = 0; cell < cells; ++cell) {
    if (!blocked[static_cast<std::size_t>(cell)]) {
      space.cell_to_free[static_cast<std::size_t>(cell)] = static_cast<int>(space.free_cells.size());
      space.free_cells.push_back(cell);
    }
  }
  const int n_free = static_cast<int>(space.free_cells.size());
  space.sink = n_free * (n_free - 1);
  space.n_states = space.sink + 1;
  return space;
}

TabularMDP goal_mdp_foraging(const ForagingLayout& layout, std::uint32_t present_mask, int target_food,
                             double gamma, const ForagingStateSpace& space) {
  if (target_food < 0 || target_food >= layout.n_foods() || !((present_mask >> target_food) & 1u)) {
    throw std::invalid_argument("goal_mdp_foraging: target food must be present");
  }
  const std::size_t n_rows = static_cast<std::size_t>(space.n_states) * static_cast<std::size_t>(kForagingJointActions);
  std::vector<double> rewards(n_rows, 0.0);
  std::vector<int> next(n_rows, space.sink);

  for (int state = 0; state < space.sink; ++state) {
    const auto [cell0, cell1] = space.cells(state);
    ForagingState env_state;
    env_state.agents = {cell0, cell1};
    env_state.present_mask = present_mask;
    for (int a0 = 0; a0 < kForagingActionCount; ++a0) {
      for (int a1 = 0; a1 < kForagingActionCount; ++a1) {
        const std::size_t row = static_cast<std::size_t>(state) * kForagingJointActions +
                                static_cast<std::size_t>(a0 * kForagingActionCount + a1);
        const ForagingStepResult step = foraging_step(env_state, layout, a0, a1);
        if (!step.picked.empty()) {
          next[row] = space.sink;
          for (int f : step.picked) {
            if (f == target_food) rewards[row] = 1.0;
          }
        } else {
          next[row] = space.index(step.state.agents[0], step.state.agents[1]);
        }
      }
    }
  }
  // Sink rows already self-loop with zero reward via the fill values.
  for (int a = 0; a < kForagingJointActions; ++a) {
    next[static_cast<std::size_t>(space.sink) * kForagingJointActions + static_cast<std::size_t>(a)] = space.sink;
  }
  return TabularMDP::deterministic(space.n_states, kForagingJointActions, gamma, std::move(rewards), std::move(next));
}

}  // namespace legiteam
