#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "legiteam/foraging.hpp"
#include "legiteam/legibility.hpp"
#include "legiteam/mdp.hpp"
#include "legiteam/rng.hpp"

using namespace legiteam;

namespace {

// Two-action cycle dynamics with no absorbing state, shared across goals.
std::shared_ptr<const TransitionTable> cycle_dynamics(int n_states) {
  std::vector<int> next(static_cast<std::size_t>(n_states) * 2);
  for (int x = 0; x < n_states; ++x) {
    next[static_cast<std::size_t>(x) * 2 + 0] = (x + 1) % n_states;
    next[static_cast<std::size_t>(x) * 2 + 1] = (x + n_states - 1) % n_states;
  }
  const TabularMDP probe = TabularMDP::deterministic(n_states, 2, 0.9, std::vector<double>(static_cast<std::size_t>(n_states) * 2, 0.0), next);
  return probe.transitions_ptr();
}

GoalFamily random_solved_family(SeededRng& rng, int n_states, int n_goals, double gamma) {
  auto table = cycle_dynamics(n_states);
  std::vector<std::vector<double>> rewards(static_cast<std::size_t>(n_goals));
  for (auto& r : rewards) {
    r.resize(static_cast<std::size_t>(n_states) * 2);
    for (double& v : r) v = rng.uniform_double();
  }
  GoalFamily family = GoalFamily::shared_dynamics(table, gamma, std::move(rewards));
  family.solve_all();
  return family;
}

QFunction constant_q(int n_states, int n_actions, double value) {
  QFunction q;
  q.n_states = n_states;
  q.n_actions = n_actions;
  q.q.assign(static_cast<std::size_t>(n_states) * n_actions, value);
  return q;
}

}  // namespace

TEST_CASE("legible reward normalizes across goals and stays in (0,1)") {
  SeededRng rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    GoalFamily family = random_solved_family(rng, 6, 3, 0.9);
    const LegibleRewardTable table = legible_reward(family, 1.0);
    for (int x = 0; x < 6; ++x) {
      for (int a = 0; a < 2; ++a) {
        double total = 0.0;
        for (int n = 0; n < 3; ++n) {
          const double v = table.at(n, x, a);
          CHECK(v > 0.0);
          CHECK(v < 1.0);
          total += v;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("unit q gap yields e/(1+e)") {
  auto table = cycle_dynamics(2);
  GoalFamily family = GoalFamily::shared_dynamics(
      table, 0.9, {std::vector<double>(4, 0.0), std::vector<double>(4, 0.0)});
  family.set_q_star(0, constant_q(2, 2, 1.0));
  family.set_q_star(1, constant_q(2, 2, 0.0));
  const LegibleRewardTable leg = legible_reward(family, 1.0);
  const double expected = std::exp(1.0) / (1.0 + std::exp(1.0));  // 0.73106
  CHECK(leg.at(0, 0, 0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(leg.at(1, 0, 0) == doctest::Approx(1.0 - expected).epsilon(1e-12));
}

TEST_CASE("beta to zero flattens the table to 1/N") {
  SeededRng rng(12);
  GoalFamily family = random_solved_family(rng, 5, 4, 0.9);
  const LegibleRewardTable leg = legible_reward(family, 1e-12);
  for (int n = 0; n < 4; ++n) {
    for (int x = 0; x < 5; ++x) {
      for (int a = 0; a < 2; ++a) CHECK(leg.at(n, x, a) == doctest::Approx(0.25).epsilon(1e-9));
    }
  }
}

TEST_CASE("identical goals split the reward evenly and give the series value") {
  auto table = cycle_dynamics(4);
  GoalFamily family = GoalFamily::shared_dynamics(
      table, 0.9, {std::vector<double>(8, 0.0), std::vector<double>(8, 0.0)});
  family.solve_all();
  const LegibleRewardTable leg = legible_reward(family, 1.0);
  for (int n = 0; n < 2; ++n) {
    for (int x = 0; x < 4; ++x) {
      for (int a = 0; a < 2; ++a) CHECK(leg.at(n, x, a) == doctest::Approx(0.5).epsilon(1e-12));
    }
  }
  // Constant reward 0.5 on a never-absorbing family solves to 0.5 / (1 - gamma).
  const TabularMDP legible_mdp = build_legible_mdp(family, leg, 0);
  const SolveResult solved = value_iteration(legible_mdp);
  for (int x = 0; x < 4; ++x) {
    CHECK(solved.q.state_value(x) == doctest::Approx(0.5 / (1.0 - 0.9)).epsilon(1e-7));
  }
}

TEST_CASE("single-goal family reduces to the optimal policy") {
  SeededRng rng(13);
  auto table = cycle_dynamics(6);
  std::vector<double> reward(12);
  for (double& v : reward) v = rng.uniform_double();
  GoalFamily family = GoalFamily::shared_dynamics(table, 0.9, {reward});
  family.solve_all();
  const LegibleRewardTable leg = legible_reward(family, 1.0);
  for (int x = 0; x < 6; ++x) {
    for (int a = 0; a < 2; ++a) CHECK(leg.at(0, x, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
  const DeterministicPolicy legible = solve_legible_best_response(family, 1.0, 0);
  const DeterministicPolicy optimal = greedy_policy(value_iteration(family.goal_mdp(0)).q);
  for (int x = 0; x < 6; ++x) CHECK(legible.action(x) == optimal.action(x));
}

TEST_CASE("prior doubling raises the boosted goal everywhere") {
  SeededRng rng(14);
  GoalFamily base = random_solved_family(rng, 5, 3, 0.9);
  GoalFamily boosted = GoalFamily::shared_dynamics(
      base.goal_mdp(0).transitions_ptr(), 0.9,
      {base.goal_mdp(0).rewards(), base.goal_mdp(1).rewards(), base.goal_mdp(2).rewards()},
      {0.5, 0.25, 0.25});
  for (int n = 0; n < 3; ++n) boosted.set_q_star(n, base.q_star(n));
  const LegibleRewardTable flat = legible_reward(base, 1.0);
  const LegibleRewardTable skew = legible_reward(boosted, 1.0);
  for (int x = 0; x < 5; ++x) {
    for (int a = 0; a < 2; ++a) CHECK(skew.at(0, x, a) > flat.at(0, x, a));
  }
}

TEST_CASE("common q shift leaves the table unchanged") {
  SeededRng rng(15);
  GoalFamily family = random_solved_family(rng, 5, 3, 0.9);
  GoalFamily shifted = GoalFamily::shared_dynamics(
      family.goal_mdp(0).transitions_ptr(), 0.9,
      {family.goal_mdp(0).rewards(), family.goal_mdp(1).rewards(), family.goal_mdp(2).rewards()});
  for (int n = 0; n < 3; ++n) {
    QFunction q = family.q_star(n);
    for (double& v : q.q) v += 3.7;
    shifted.set_q_star(n, std::move(q));
  }
  const LegibleRewardTable a = legible_reward(family, 1.0);
  const LegibleRewardTable b = legible_reward(shifted, 1.0);
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-12);
}

TEST_CASE("team spec joint index round-trips") {
  TeamSpec spec;
  spec.action_counts = {6, 6};
  spec.n_legible = 1;
  spec.validate();
  CHECK(spec.n_joint_actions() == 36);
  for (int a0 = 0; a0 < 6; ++a0) {
    for (int a1 = 0; a1 < 6; ++a1) {
      const int joint = spec.joint_index({a0, a1});
      CHECK(spec.component(joint, 0) == a0);
      CHECK(spec.component(joint, 1) == a1);
    }
  }
  TeamSpec bad;
  bad.action_counts = {2, 2};
  bad.n_legible = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("induced rows restrict to the teammate's action") {
  // Joint MDP over 2 states, agents with 2 actions each, joint = a0 * 2 + a1.
  TeamSpec spec;
  spec.action_counts = {2, 2};
  spec.n_legible = 1;
  std::vector<double> rewards = {
      0.0, 1.0, 2.0, 3.0,  // state 0, joints 00 01 10 11
      4.0, 5.0, 6.0, 7.0,
  };
  std::vector<int> next = {0, 1, 1, 0, 1, 1, 0, 0};
  const TabularMDP joint = TabularMDP::deterministic(2, 4, 0.9, rewards, next);

  DeterministicPolicy teammate;
  teammate.actions = {1, 0};  // a1 = 1 at state 0, a1 = 0 at state 1
  const TabularMDP induced = build_induced_mdp(joint, teammate, 0, spec);
  CHECK(induced.n_actions() == 2);
  CHECK(induced.reward(0, 0) == doctest::Approx(1.0));  // joint 01
  CHECK(induced.reward(0, 1) == doctest::Approx(3.0));  // joint 11
  CHECK(induced.reward(1, 0) == doctest::Approx(4.0));  // joint 00
  CHECK(induced.reward(1, 1) == doctest::Approx(6.0));  // joint 10

  StochasticPolicy mixed;
  mixed.n_states = 2;
  mixed.n_actions = 2;
  mixed.rows = {0.5, 0.5, 0.5, 0.5};
  const TabularMDP averaged = build_induced_mdp(joint, mixed, 0, spec);
  CHECK(averaged.reward(0, 0) == doctest::Approx(0.5));  // mean of joints 00, 01
  CHECK(averaged.reward(0, 1) == doctest::Approx(2.5));  // mean of joints 10, 11
}

TEST_CASE("fixed joint-optimal teammate preserves the optimal value") {
  // Best response to the frozen teammate recovers the joint-optimal value, so
  // a zero-legible team loses nothing by the two-stage split.
  SeededRng rng(16);
  TeamSpec spec;
  spec.action_counts = {3, 3};
  spec.n_legible = 0;
  const int n_states = 5;
  std::vector<double> rewards(static_cast<std::size_t>(n_states) * 9);
  std::vector<int> next(rewards.size());
  for (double& v : rewards) v = rng.uniform_double();
  for (int& y : next) y = static_cast<int>(rng.uniform_int(n_states));
  const TabularMDP joint = TabularMDP::deterministic(n_states, 9, 0.9, rewards, next);
  const JointSolution sol = solve_optimal_joint(joint);
  DeterministicPolicy teammate;
  for (int x = 0; x < n_states; ++x) teammate.actions.push_back(spec.component(sol.policy.action(x), 1));
  const TabularMDP induced = build_induced_mdp(joint, teammate, 0, spec);
  const SolveResult induced_sol = value_iteration(induced);
  DeterministicPolicy leader_component;
  for (int x = 0; x < n_states; ++x) leader_component.actions.push_back(spec.component(sol.policy.action(x), 0));
  const std::vector<double> v_greedy = evaluate_policy(induced, greedy_policy(induced_sol.q));
  const std::vector<double> v_component = evaluate_policy(induced, leader_component);
  for (int x = 0; x < n_states; ++x) {
    CHECK(induced_sol.q.state_value(x) == doctest::Approx(sol.q.state_value(x)).epsilon(1e-6));
    CHECK(v_greedy[static_cast<std::size_t>(x)] == doctest::Approx(v_component[static_cast<std::size_t>(x)]).epsilon(1e-6));
  }
}

TEST_CASE("legible policy differs from optimal on a multi-goal gridworld") {
  // 1-D corridor, two goal cells at the ends plus one adjacent distractor
  // pair; legible and optimal best responses diverge somewhere.
  const int n = 7;
  std::vector<int> next(static_cast<std::size_t>(n) * 2);
  for (int x = 0; x < n; ++x) {
    next[static_cast<std::size_t>(x) * 2 + 0] = std::max(0, x - 1);
    next[static_cast<std::size_t>(x) * 2 + 1] = std::min(n - 1, x + 1);
  }
  auto dyn = TabularMDP::deterministic(n, 2, 0.9, std::vector<double>(static_cast<std::size_t>(n) * 2, 0.0), next).transitions_ptr();
  std::vector<std::vector<double>> rewards(3, std::vector<double>(static_cast<std::size_t>(n) * 2, 0.0));
  rewards[0][0 * 2 + 0] = 1.0;  // goal 0 pays at the left wall
  rewards[1][static_cast<std::size_t>(n - 1) * 2 + 1] = 1.0;  // goal 1 at the right wall
  rewards[2][2 * 2 + 0] = 1.0;  // goal 2 near the middle
  GoalFamily family = GoalFamily::shared_dynamics(dyn, 0.9, std::move(rewards));
  family.solve_all();
  const DeterministicPolicy legible = solve_legible_best_response(family, 1.0, 0);
  const DeterministicPolicy optimal = greedy_policy(value_iteration(family.goal_mdp(0)).q);
  bool differs = false;
  for (int x = 0; x < n; ++x) differs = differs || legible.action(x) != optimal.action(x);
  CHECK(differs);
}

TEST_CASE("legible reward rejects invalid inputs") {
  SeededRng rng(17);
  GoalFamily family = random_solved_family(rng, 4, 2, 0.9);
  CHECK_THROWS_AS(legible_reward(family, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(legible_reward(family, -1.0), std::invalid_argument);
  auto table = cycle_dynamics(4);
  GoalFamily unsolved = GoalFamily::shared_dynamics(
      table, 0.9, {std::vector<double>(8, 0.0), std::vector<double>(8, 0.0)});
  CHECK_THROWS_AS(legible_reward(unsolved, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_legible_mdp(family, legible_reward(family, 1.0), 5), std::out_of_range);
}
