#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "legiteam/experiment.hpp"
#include "legiteam/pursuit.hpp"
#include "legiteam/rng.hpp"

using namespace legiteam;

namespace {

int cell(int row, int col, int width) { return row * width + col; }

PursuitConfig small_config() {
  PursuitConfig config;
  config.width = 5;
  config.height = 5;
  config.n_preys = 3;
  return config;
}

int min_hunter_distance(int prey_cell, const std::vector<int>& hunters, int width) {
  int best = 1 << 20;
  for (int h : hunters) best = std::min(best, manhattan_distance(prey_cell, h, width));
  return best;
}

}  // namespace

TEST_CASE("state space counts ordered distinct triples plus a sink") {
  const PursuitStateSpace space = pursuit_state_space(5, 5);
  CHECK(space.n_states == 25 * 24 * 23 + 1);
  CHECK(space.n_states == 13801);
  CHECK(space.sink == 13800);
  SeededRng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const int s = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(space.sink)));
    const auto [h1, h2, p] = space.cells_of(s);
    CHECK(h1 != h2);
    CHECK(h1 != p);
    CHECK(h2 != p);
    CHECK(space.index(h1, h2, p) == s);
  }
}

TEST_CASE("greedy prey evasion follows the distance tie cascade") {
  const int w = 5;
  const int h = 5;
  std::vector<bool> occupied(25, false);

  // Hunter directly north: Down maximizes the minimum distance.
  std::vector<int> hunters = {cell(1, 2, w)};
  occupied[static_cast<std::size_t>(hunters[0])] = true;
  CHECK(greedy_prey_move(cell(2, 2, w), hunters, occupied, w, h) == kDown);
  occupied[static_cast<std::size_t>(hunters[0])] = false;

  // Hunters east and west, equidistant: min-distance ties between Up and
  // Down, the distance sum ties too, the fixed order picks Up.
  hunters = {cell(2, 0, w), cell(2, 4, w)};
  occupied.assign(25, false);
  occupied[static_cast<std::size_t>(hunters[0])] = true;
  occupied[static_cast<std::size_t>(hunters[1])] = true;
  CHECK(greedy_prey_move(cell(2, 2, w), hunters, occupied, w, h) == kUp);

  // Cornered prey with both hunters adjacent: every move loses, Stay holds.
  hunters = {cell(0, 1, w), cell(1, 0, w)};
  occupied.assign(25, false);
  occupied[static_cast<std::size_t>(hunters[0])] = true;
  occupied[static_cast<std::size_t>(hunters[1])] = true;
  CHECK(greedy_prey_move(cell(0, 0, w), hunters, occupied, w, h) == kStay);
}

TEST_CASE("capture needs two flanking hunters after the move phase") {
  const PursuitConfig config = small_config();
  PursuitState state;
  state.hunters = {cell(2, 1, 5), cell(2, 3, 5)};
  state.preys = {cell(2, 2, 5), cell(0, 0, 5), cell(4, 4, 5)};
  state.alive_mask = 0b111;

  // Both hunters already flank prey 0: Stay-Stay captures it.
  PursuitStepResult r = pursuit_step(state, config, kStay, kStay);
  REQUIRE(r.captured.size() == 1);
  CHECK(r.captured[0] == 0);
  CHECK((r.state.alive_mask & 1u) == 0u);

  // One adjacent hunter is not enough; the prey then flees.
  state.hunters = {cell(2, 1, 5), cell(0, 4, 5)};
  r = pursuit_step(state, config, kStay, kStay);
  CHECK(r.captured.empty());
  CHECK(r.state.alive_mask == 0b111);
  CHECK(r.state.preys[0] != cell(2, 2, 5));

  // Captured preys neither move nor block: prey 1 dead, its cell is passable.
  state.hunters = {cell(0, 1, 5), cell(4, 0, 5)};
  state.preys = {cell(2, 2, 5), cell(0, 0, 5), cell(4, 4, 5)};
  state.alive_mask = 0b101;
  r = pursuit_step(state, config, kLeft, kStay);
  CHECK(r.state.hunters[0] == cell(0, 0, 5));
  CHECK(r.state.preys[1] == cell(0, 0, 5));  // position of a dead prey is inert
}

TEST_CASE("pursuit step is deterministic and validates input") {
  const PursuitConfig config = small_config();
  PursuitState state;
  state.hunters = {cell(0, 0, 5), cell(4, 4, 5)};
  state.preys = {cell(2, 2, 5), cell(0, 4, 5), cell(4, 0, 5)};
  state.alive_mask = 0b111;
  const PursuitStepResult a = pursuit_step(state, config, kRight, kUp);
  const PursuitStepResult b = pursuit_step(state, config, kRight, kUp);
  CHECK(a.state.hunters == b.state.hunters);
  CHECK(a.state.preys == b.state.preys);
  CHECK(a.state.alive_mask == b.state.alive_mask);
  CHECK(a.captured == b.captured);
  CHECK_THROWS_AS(pursuit_step(state, config, 5, kStay), std::invalid_argument);
}

TEST_CASE("prey never ends closer than its best alternative") {
  SeededRng rng(77);
  const PursuitConfig config = small_config();
  PursuitScenario scenario = sample_pursuit_scenario(rng.next_u64(), config);
  PursuitState state = pursuit_initial_state(scenario);
  for (int t = 0; t < 3000; ++t) {
    const int a0 = static_cast<int>(rng.uniform_int(kPursuitActionCount));
    const int a1 = static_cast<int>(rng.uniform_int(kPursuitActionCount));
    const PursuitStepResult r = pursuit_step(state, config, a0, a1);
    // Moved preys sit at a min-distance no worse than staying put would give
    // against the post-move hunters, unless Stay itself was their optimum.
    for (int p = 0; p < config.n_preys; ++p) {
      if (!((r.state.alive_mask >> p) & 1u) || !((state.alive_mask >> p) & 1u)) continue;
      const int before = state.preys[static_cast<std::size_t>(p)];
      const int after = r.state.preys[static_cast<std::size_t>(p)];
      if (after != before) {
        CHECK(min_hunter_distance(after, r.state.hunters, config.width) >=
              min_hunter_distance(before, r.state.hunters, config.width));
      }
    }
    state = r.state;
    if (state.alive_mask == 0u) {
      scenario = sample_pursuit_scenario(rng.next_u64(), config);
      state = pursuit_initial_state(scenario);
    }
  }
}

TEST_CASE("random-action fuzz preserves the state invariants") {
  SeededRng rng(99);
  const PursuitConfig config = small_config();
  PursuitScenario scenario = sample_pursuit_scenario(rng.next_u64(), config);
  PursuitState state = pursuit_initial_state(scenario);
  int steps_in_episode = 0;
  for (int t = 0; t < 10000; ++t) {
    const int a0 = static_cast<int>(rng.uniform_int(kPursuitActionCount));
    const int a1 = static_cast<int>(rng.uniform_int(kPursuitActionCount));
    const PursuitStepResult r = pursuit_step(state, config, a0, a1);
    CHECK((r.state.alive_mask & ~state.alive_mask) == 0u);  // monotone
    std::vector<int> live_cells = {r.state.hunters[0], r.state.hunters[1]};
    for (int p = 0; p < config.n_preys; ++p) {
      if ((r.state.alive_mask >> p) & 1u) live_cells.push_back(r.state.preys[static_cast<std::size_t>(p)]);
    }
    for (int c : live_cells) {
      CHECK(c >= 0);
      CHECK(c < config.width * config.height);
    }
    std::sort(live_cells.begin(), live_cells.end());
    CHECK(std::adjacent_find(live_cells.begin(), live_cells.end()) == live_cells.end());
    state = r.state;
    ++steps_in_episode;
    if (state.alive_mask == 0u || steps_in_episode >= config.step_limit) {
      scenario = sample_pursuit_scenario(rng.next_u64(), config);
      state = pursuit_initial_state(scenario);
      steps_in_episode = 0;
    }
  }
}

TEST_CASE("scenario sampling is deterministic with distinct starts") {
  const PursuitConfig config = small_config();
  const PursuitScenario a = sample_pursuit_scenario(42, config);
  const PursuitScenario b = sample_pursuit_scenario(42, config);
  CHECK(a.hunter_starts == b.hunter_starts);
  CHECK(a.prey_starts == b.prey_starts);
  CHECK(a.capture_sequence == b.capture_sequence);
  std::vector<int> all = a.hunter_starts;
  all.insert(all.end(), a.prey_starts.begin(), a.prey_starts.end());
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  std::vector<int> seq = a.capture_sequence;
  std::sort(seq.begin(), seq.end());
  for (int p = 0; p < config.n_preys; ++p) CHECK(seq[static_cast<std::size_t>(p)] == p);
}

TEST_CASE("per-target MDP is deterministic with absorbing capture") {
  const PursuitStateSpace space = pursuit_state_space(5, 5);
  const TabularMDP mdp = goal_mdp_pursuit(5, 5, 0.95, space);
  CHECK(mdp.transitions().mode == TransitionTable::Mode::Deterministic);
  CHECK(mdp.is_absorbing(space.sink));
  // Hunters flanking the prey: the Stay-Stay joint action captures, pays 1,
  // and leads to the sink.
  const int x = space.index(cell(2, 1, 5), cell(2, 3, 5), cell(2, 2, 5));
  const int joint = kStay * kPursuitActionCount + kStay;
  CHECK(mdp.reward(x, joint) == doctest::Approx(1.0));
  CHECK(mdp.transitions().next[static_cast<std::size_t>(x) * kPursuitJointActions + joint] == space.sink);
  CHECK_THROWS_AS(goal_mdp_pursuit(11, 11, 0.95, pursuit_state_space(11, 11)), std::invalid_argument);
}

TEST_CASE("steps-left table is the Bellman fixed point of the induced chain") {
  const PursuitModel model = build_pursuit_model(5, 5, 0.95, 1e-8);
  const int S = model.space.n_states;
  CHECK(model.steps_left[static_cast<std::size_t>(model.space.sink)] == 0);
  for (int x = 0; x < S; ++x) {
    if (x == model.space.sink) continue;
    int best = kPursuitUnreachable;
    for (int a = 0; a < kPursuitActionCount; ++a) {
      const int y = model.induced_next[static_cast<std::size_t>(x) * kPursuitActionCount + static_cast<std::size_t>(a)];
      const int d = model.steps_left[static_cast<std::size_t>(y)];
      if (d != kPursuitUnreachable) best = std::min(best, d + 1);
    }
    CHECK(model.steps_left[static_cast<std::size_t>(x)] == best);
  }
  // The greedy leader walks the induced chain to capture in exactly the
  // tabled number of steps wherever that number is finite.
  SeededRng rng(5);
  for (int i = 0; i < 500; ++i) {
    int x = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(S)));
    const int expected = model.steps_left[static_cast<std::size_t>(x)];
    if (expected == kPursuitUnreachable) continue;
    int steps = 0;
    while (x != model.space.sink) {
      x = model.induced_next[static_cast<std::size_t>(x) * kPursuitActionCount +
                             static_cast<std::size_t>(model.leader_opt[static_cast<std::size_t>(x)])];
      ++steps;
      REQUIRE(steps <= expected);
    }
    CHECK(steps == expected);
  }
}

TEST_CASE("greedy joint policy captures a lone prey from seeded starts") {
  const PursuitModel model = build_pursuit_model(5, 5, 0.95, 1e-8);
  PursuitConfig config = small_config();
  config.n_preys = 1;
  SeededRng rng(31);
  int captures = 0;
  const int n_rollouts = 1000;
  for (int i = 0; i < n_rollouts; ++i) {
    const PursuitScenario scenario = sample_pursuit_scenario(rng.next_u64(), config);
    PursuitState state = pursuit_initial_state(scenario);
    for (int t = 0; t < config.step_limit && state.alive_mask != 0u; ++t) {
      const int x = model.space.index(state.hunters[0], state.hunters[1], state.preys[0]);
      const PursuitStepResult r =
          pursuit_step(state, config, model.leader_opt[static_cast<std::size_t>(x)], model.follower_opt[static_cast<std::size_t>(x)]);
      state = r.state;
    }
    if (state.alive_mask == 0u) ++captures;
  }
  CHECK(captures >= 990);
}
