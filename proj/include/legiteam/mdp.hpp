#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace legiteam {

struct TransitionEntry {
  int next;
  double prob;
};

/// Transition table for a finite MDP. Three storage modes share one
/// interface: dense rows (full distribution per state-action), sparse rows
/// (explicit support lists), and deterministic rows (single successor).
/// Every row must describe a probability distribution; constructors verify
/// row sums within 1e-9 and reject negative mass.
struct TransitionTable {
  enum class Mode { Dense, Sparse, Deterministic };

  Mode mode = Mode::Dense;
  int n_states = 0;
  int n_actions = 0;
  // Dense: probs[(x * n_actions + a) * n_states + y].
  std::vector<double> dense;
  // Sparse: entries[row_offsets[row] .. row_offsets[row + 1]).
  std::vector<std::size_t> row_offsets;
  std::vector<TransitionEntry> entries;
  // Deterministic: next[x * n_actions + a].
  std::vector<int> next;

  std::size_t rows() const { return static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions); }
};

/// Goal-conditioned tabular MDP over integer state and action indices.
/// Transition storage is shared (immutable) so reward variants of the same
/// dynamics cost one rewards vector. Rewards are dense per (state, action).
class TabularMDP {
 public:
  TabularMDP() = default;

  static TabularMDP from_dense(int n_states, int n_actions, double gamma,
                               std::vector<double> rewards, std::vector<double> probs);
  static TabularMDP from_sparse(int n_states, int n_actions, double gamma,
                                std::vector<double> rewards,
                                const std::vector<std::vector<TransitionEntry>>& rows);
  static TabularMDP deterministic(int n_states, int n_actions, double gamma,
                                  std::vector<double> rewards, std::vector<int> next);
  /// Same dynamics object, different rewards.
  TabularMDP with_rewards(std::vector<double> rewards) const;
  /// Same dynamics object, shared by pointer.
  static TabularMDP from_shared(std::shared_ptr<const TransitionTable> table, double gamma,
                                std::vector<double> rewards);

  int n_states() const { return table_ ? table_->n_states : 0; }
  int n_actions() const { return table_ ? table_->n_actions : 0; }
  double gamma() const { return gamma_; }
  double reward(int x, int a) const {
    return rewards_[static_cast<std::size_t>(x) * static_cast<std::size_t>(n_actions()) + static_cast<std::size_t>(a)];
  }
  const std::vector<double>& rewards() const { return rewards_; }
  const TransitionTable& transitions() const { return *table_; }
  std::shared_ptr<const TransitionTable> transitions_ptr() const { return table_; }

  /// True when the state is a zero-reward self-loop under every action.
  bool is_absorbing(int x) const;

 private:
  TabularMDP(std::shared_ptr<const TransitionTable> table, double gamma, std::vector<double> rewards);

  std::shared_ptr<const TransitionTable> table_;
  double gamma_ = 0.0;
  std::vector<double> rewards_;
};

/// State-action value table. Indexed q[x * n_actions + a].
struct QFunction {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> q;

  double at(int x, int a) const {
    return q[static_cast<std::size_t>(x) * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a)];
  }
  double& at(int x, int a) {
    return q[static_cast<std::size_t>(x) * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a)];
  }
  /// max_a q(x, a).
  double state_value(int x) const;
};

/// One action index per state.
struct DeterministicPolicy {
  std::vector<int> actions;
  int action(int x) const { return actions[static_cast<std::size_t>(x)]; }
};

/// Row-stochastic action distribution per state, rows[x * n_actions + a].
struct StochasticPolicy {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> rows;

  double prob(int x, int a) const {
    return rows[static_cast<std::size_t>(x) * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a)];
  }
};

struct SolveOptions {
  double tol = 1e-8;
  long max_sweeps = 100000;
  bool record_sweep_residuals = false;
};

struct SolveResult {
  QFunction q;
  long sweeps = 0;
  /// Exact sup-norm Bellman residual of the returned q.
  double residual = 0.0;
  /// Successive sup-norm value differences, one per sweep (optional).
  std::vector<double> sweep_residuals;
};

/// Value iteration to a sup-norm Bellman residual of at most opts.tol.
/// Throws std::runtime_error naming the final residual when the sweep cap
/// is exceeded before convergence.
SolveResult value_iteration(const TabularMDP& mdp, const SolveOptions& opts = {});

/// Greedy policy of q; ties broken by the lowest action index.
DeterministicPolicy greedy_policy(const QFunction& q);

/// Boltzmann policy rows: exp(beta * (q(x, a) - max_a q(x, a))) normalized
/// per state. The max shift keeps exponentials bounded for any beta >= 0.
StochasticPolicy softmax_policy(const QFunction& q, double beta);

/// v_pi solving the linear fixed point v = r_pi + gamma * P_pi v, iterated
/// until the fixed-point residual is at most tol.
std::vector<double> evaluate_policy(const TabularMDP& mdp, const DeterministicPolicy& pi, double tol = 1e-10);
std::vector<double> evaluate_policy(const TabularMDP& mdp, const StochasticPolicy& pi, double tol = 1e-10);

/// sup_{x,a} | q(x,a) - (r(x,a) + gamma * E[max_a' q(y,a')]) |.
double bellman_residual(const TabularMDP& mdp, const QFunction& q);

}  // namespace legiteam
