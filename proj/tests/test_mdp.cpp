#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "legiteam/mdp.hpp"
#include "legiteam/rng.hpp"

using namespace legiteam;

namespace {

// Random dense MDP with row-stochastic transitions.
TabularMDP random_dense_mdp(SeededRng& rng, int n_states, int n_actions, double gamma) {
  std::vector<double> rewards(static_cast<std::size_t>(n_states) * n_actions);
  std::vector<double> probs(rewards.size() * static_cast<std::size_t>(n_states));
  for (double& r : rewards) r = rng.uniform_double() * 2.0 - 1.0;
  for (int x = 0; x < n_states; ++x) {
    for (int a = 0; a < n_actions; ++a) {
      double total = 0.0;
      const std::size_t base = (static_cast<std::size_t>(x) * n_actions + a) * n_states;
      for (int y = 0; y < n_states; ++y) {
        const double w = rng.uniform_double() + 1e-3;
        probs[base + static_cast<std::size_t>(y)] = w;
        total += w;
      }
      for (int y = 0; y < n_states; ++y) probs[base + static_cast<std::size_t>(y)] /= total;
    }
  }
  return TabularMDP::from_dense(n_states, n_actions, gamma, std::move(rewards), std::move(probs));
}

// Exact policy evaluation by Gaussian elimination on (I - gamma P_pi) v = r_pi.
std::vector<double> solve_linear_eval(const TabularMDP& mdp, const std::vector<int>& pi) {
  const int n = mdp.n_states();
  std::vector<double> m(static_cast<std::size_t>(n) * (n + 1), 0.0);
  const TransitionTable& t = mdp.transitions();
  for (int x = 0; x < n; ++x) {
    const int a = pi[static_cast<std::size_t>(x)];
    for (int y = 0; y < n; ++y) {
      double p = 0.0;
      if (t.mode == TransitionTable::Mode::Dense) {
        p = t.dense[(static_cast<std::size_t>(x) * t.n_actions + a) * n + y];
      } else if (t.mode == TransitionTable::Mode::Deterministic) {
        p = t.next[static_cast<std::size_t>(x) * t.n_actions + a] == y ? 1.0 : 0.0;
      } else {
        const std::size_t row = static_cast<std::size_t>(x) * t.n_actions + a;
        for (std::size_t k = t.row_offsets[row]; k < t.row_offsets[row + 1]; ++k) {
          if (t.entries[k].next == y) p += t.entries[k].prob;
        }
      }
      m[static_cast<std::size_t>(x) * (n + 1) + y] = (x == y ? 1.0 : 0.0) - mdp.gamma() * p;
    }
    m[static_cast<std::size_t>(x) * (n + 1) + n] = mdp.reward(x, a);
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int row = col + 1; row < n; ++row) {
      if (std::abs(m[static_cast<std::size_t>(row) * (n + 1) + col]) >
          std::abs(m[static_cast<std::size_t>(pivot) * (n + 1) + col]))
        pivot = row;
    }
    for (int k = col; k <= n; ++k)
      std::swap(m[static_cast<std::size_t>(col) * (n + 1) + k], m[static_cast<std::size_t>(pivot) * (n + 1) + k]);
    const double d = m[static_cast<std::size_t>(col) * (n + 1) + col];
    for (int row = 0; row < n; ++row) {
      if (row == col) continue;
      const double f = m[static_cast<std::size_t>(row) * (n + 1) + col] / d;
      for (int k = col; k <= n; ++k)
        m[static_cast<std::size_t>(row) * (n + 1) + k] -= f * m[static_cast<std::size_t>(col) * (n + 1) + k];
    }
  }
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x)
    v[static_cast<std::size_t>(x)] = m[static_cast<std::size_t>(x) * (n + 1) + n] / m[static_cast<std::size_t>(x) * (n + 1) + x];
  return v;
}

// Best value per state over every deterministic policy, by enumeration.
std::vector<double> enumerate_optimal_values(const TabularMDP& mdp) {
  const int n = mdp.n_states();
  const int na = mdp.n_actions();
  long total = 1;
  for (int x = 0; x < n; ++x) total *= na;
  std::vector<double> best(static_cast<std::size_t>(n), -1e300);
  std::vector<int> pi(static_cast<std::size_t>(n), 0);
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int x = 0; x < n; ++x) {
      pi[static_cast<std::size_t>(x)] = static_cast<int>(c % na);
      c /= na;
    }
    const std::vector<double> v = solve_linear_eval(mdp, pi);
    for (int x = 0; x < n; ++x) best[static_cast<std::size_t>(x)] = std::max(best[static_cast<std::size_t>(x)], v[static_cast<std::size_t>(x)]);
  }
  return best;
}

}  // namespace

TEST_CASE("value iteration matches policy enumeration on small random MDPs") {
  SeededRng rng(20240601);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform_int(4));   // 2..5 states
    const int na = 2 + static_cast<int>(rng.uniform_int(2));  // 2..3 actions
    const TabularMDP mdp = random_dense_mdp(rng, n, na, 0.9);
    const SolveResult solved = value_iteration(mdp, {1e-10, 1000000, false});
    const std::vector<double> oracle = enumerate_optimal_values(mdp);
    for (int x = 0; x < n; ++x) {
      CHECK(std::abs(solved.q.state_value(x) - oracle[static_cast<std::size_t>(x)]) < 1e-6);
    }
    // The greedy policy itself achieves the enumeration optimum.
    const DeterministicPolicy pi = greedy_policy(solved.q);
    const std::vector<double> v_pi = solve_linear_eval(mdp, pi.actions);
    for (int x = 0; x < n; ++x) {
      CHECK(std::abs(v_pi[static_cast<std::size_t>(x)] - oracle[static_cast<std::size_t>(x)]) < 1e-6);
    }
  }
}

TEST_CASE("hand two-state example has closed-form values") {
  // State 0: action 0 self-loops with reward 1, action 1 moves to the
  // absorbing state 1 with reward 0. gamma = 0.5 gives q*(0,0) = 2.
  const TabularMDP mdp = TabularMDP::deterministic(2, 2, 0.5, {1.0, 0.0, 0.0, 0.0}, {0, 1, 1, 1});
  SolveOptions opts;
  opts.tol = 1e-12;
  const SolveResult solved = value_iteration(mdp, opts);
  // Residual tol 1e-12 bounds the value error by tol / (1 - gamma) = 2e-12.
  CHECK(std::abs(solved.q.at(0, 0) - 2.0) < 1e-11);
  CHECK(std::abs(solved.q.at(0, 1)) < 1e-11);
  CHECK(std::abs(solved.q.at(1, 0)) < 1e-11);
  CHECK(greedy_policy(solved.q).action(0) == 0);
  CHECK(mdp.is_absorbing(1));
  CHECK_FALSE(mdp.is_absorbing(0));
}

TEST_CASE("sweep residuals contract at rate gamma") {
  SeededRng rng(7);
  const TabularMDP mdp = random_dense_mdp(rng, 6, 3, 0.9);
  SolveOptions opts;
  opts.record_sweep_residuals = true;
  const SolveResult solved = value_iteration(mdp, opts);
  REQUIRE(solved.sweep_residuals.size() > 5);
  for (std::size_t i = 3; i + 1 < solved.sweep_residuals.size(); ++i) {
    if (solved.sweep_residuals[i] < 1e-12) break;
    CHECK(solved.sweep_residuals[i + 1] <= 0.9 * solved.sweep_residuals[i] + 1e-12);
  }
  CHECK(solved.residual <= 1e-8);
  CHECK(bellman_residual(mdp, solved.q) == doctest::Approx(solved.residual).epsilon(1e-9));
}

TEST_CASE("policy evaluation matches the linear-system oracle") {
  SeededRng rng(99);
  const TabularMDP mdp = random_dense_mdp(rng, 7, 3, 0.9);
  DeterministicPolicy pi;
  for (int x = 0; x < 7; ++x) pi.actions.push_back(static_cast<int>(rng.uniform_int(3)));
  const std::vector<double> iterated = evaluate_policy(mdp, pi, 1e-12);
  const std::vector<double> exact = solve_linear_eval(mdp, pi.actions);
  for (int x = 0; x < 7; ++x) CHECK(iterated[static_cast<std::size_t>(x)] == doctest::Approx(exact[static_cast<std::size_t>(x)]).epsilon(1e-8));
}

TEST_CASE("stochastic policy evaluation averages the deterministic rows") {
  // Uniform over two actions in a deterministic chain: v solves the averaged
  // fixed point, checked against the hand value at the first state.
  const TabularMDP mdp = TabularMDP::deterministic(2, 2, 0.5, {1.0, 0.0, 0.0, 0.0}, {0, 1, 1, 1});
  StochasticPolicy pi;
  pi.n_states = 2;
  pi.n_actions = 2;
  pi.rows = {0.5, 0.5, 1.0, 0.0};
  // v0 = 0.5 (1 + 0.5 v0) + 0.5 (0 + 0.5 v1), v1 = 0 -> v0 = 2/3.
  const std::vector<double> v = evaluate_policy(mdp, pi, 1e-12);
  CHECK(v[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(v[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("greedy ties resolve to the lowest action index") {
  QFunction q;
  q.n_states = 2;
  q.n_actions = 3;
  q.q = {1.0, 1.0, 0.5, 0.2, 0.7, 0.7};
  const DeterministicPolicy pi = greedy_policy(q);
  CHECK(pi.action(0) == 0);
  CHECK(pi.action(1) == 1);
}

TEST_CASE("softmax policy rows normalize and sharpen with beta") {
  QFunction q;
  q.n_states = 1;
  q.n_actions = 3;
  q.q = {1.0, 2.0, 3.0};
  const StochasticPolicy flat = softmax_policy(q, 0.0);
  for (int a = 0; a < 3; ++a) CHECK(flat.prob(0, a) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  const StochasticPolicy sharp = softmax_policy(q, 50.0);
  CHECK(sharp.prob(0, 2) > 0.999999);
  double total = 0.0;
  for (int a = 0; a < 3; ++a) total += sharp.prob(0, a);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("construction rejects malformed transition rows") {
  // Row sums beyond 1e-9 of unity and negative mass both throw.
  CHECK_THROWS_AS(TabularMDP::from_dense(1, 1, 0.9, {0.0}, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(TabularMDP::from_dense(2, 1, 0.9, {0.0, 0.0}, {1.5, -0.5, 0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(TabularMDP::from_sparse(1, 1, 0.9, {0.0}, {{{0, 0.9}}}), std::invalid_argument);
  CHECK_THROWS_AS(TabularMDP::deterministic(1, 1, 0.9, {0.0}, {3}), std::invalid_argument);
}

TEST_CASE("with_rewards shares the dynamics object") {
  const TabularMDP base = TabularMDP::deterministic(2, 1, 0.9, {1.0, 0.0}, {1, 1});
  const TabularMDP variant = base.with_rewards({0.0, 1.0});
  CHECK(base.transitions_ptr().get() == variant.transitions_ptr().get());
  CHECK(variant.reward(0, 0) == 0.0);
  CHECK(variant.reward(1, 0) == 1.0);
}

TEST_CASE("sweep cap exceeded reports the residual") {
  SeededRng rng(3);
  const TabularMDP mdp = random_dense_mdp(rng, 6, 3, 0.9);
  SolveOptions opts;
  opts.tol = 1e-12;
  opts.max_sweeps = 2;
  CHECK_THROWS_AS(value_iteration(mdp, opts), std::runtime_error);
}
