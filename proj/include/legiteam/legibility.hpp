#pragma once

#include <memory>
#include <vector>

#include "legiteam/mdp.hpp"

namespace legiteam {

/// Team shape: per-agent action counts plus how many agents act legibly.
/// Joint action indices compose slot 0 as the most significant digit:
/// joint = ((a0 * A1 + a1) * A2 + ...).
struct TeamSpec {
  std::vector<int> action_counts;
  int n_legible = 0;

  int n_agents() const { return static_cast<int>(action_counts.size()); }
  int n_joint_actions() const;
  int joint_index(const std::vector<int>& components) const;
  int component(int joint, int slot) const;
  void validate() const;
};

/// A set of goal-conditioned MDPs over one shared (state, action) index
/// space, with a prior over goals. Environment families share one dynamics
/// object; induced families may carry per-goal dynamics (the teammate policy
/// each goal conditions on differs), but shapes and gamma always agree.
class GoalFamily {
 public:
  static GoalFamily shared_dynamics(std::shared_ptr<const TransitionTable> table, double gamma,
                                    std::vector<std::vector<double>> per_goal_rewards,
                                    std::vector<double> prior = {});
  static GoalFamily from_mdps(std::vector<TabularMDP> mdps, std::vector<double> prior = {});

  int n_goals() const { return static_cast<int>(mdps_.size()); }
  int n_states() const { return mdps_.empty() ? 0 : mdps_[0].n_states(); }
  int n_actions() const { return mdps_.empty() ? 0 : mdps_[0].n_actions(); }
  double gamma() const { return mdps_.empty() ? 0.0 : mdps_[0].gamma(); }
  const TabularMDP& goal_mdp(int n) const { return mdps_.at(static_cast<std::size_t>(n)); }
  const std::vector<double>& prior() const { return prior_; }

  /// Value-iterates every goal MDP that does not yet hold a solution.
  void solve_all(const SolveOptions& opts = {});
  bool solved() const;
  const QFunction& q_star(int n) const;
  void set_q_star(int n, QFunction q);

 private:
  std::vector<TabularMDP> mdps_;
  std::vector<double> prior_;
  std::vector<QFunction> q_stars_;
  std::vector<bool> has_q_;
};

/// Per-goal observer posture over state-action pairs:
/// values[(n * n_states + x) * n_actions + a]. For every (x, a) the values
/// across goals sum to one.
struct LegibleRewardTable {
  int n_goals = 0;
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> values;

  double at(int n, int x, int a) const {
    return values[(static_cast<std::size_t>(n) * static_cast<std::size_t>(n_states) + static_cast<std::size_t>(x)) *
                      static_cast<std::size_t>(n_actions) +
                  static_cast<std::size_t>(a)];
  }
};

/// r_leg_n(x, a) = prior_n exp(beta q*_n(x, a)) / sum_m prior_m exp(beta q*_m(x, a)).
/// Requires a solved family and beta > 0. Exponentials are max-shifted per
/// (x, a) across goals.
LegibleRewardTable legible_reward(const GoalFamily& family, double beta);

struct JointSolution {
  QFunction q;
  DeterministicPolicy policy;
};

/// Value iteration plus greedy extraction on a joint-action MDP.
JointSolution solve_optimal_joint(const TabularMDP& joint_mdp, const SolveOptions& opts = {});

/// MDP with the goal's dynamics and gamma, rewarded by table row `goal`.
/// Rows that pay positive base reward and lead with certainty into absorbing
/// states are objective completions; their legible reward is overridden to
/// the sustained maximum 1 / (1 - gamma) so that completing the objective
/// dominates loitering in high-signal regions.
TabularMDP build_legible_mdp(const GoalFamily& family, const LegibleRewardTable& table, int goal);

/// Single-agent MDP induced on `leader_slot` of a two-agent joint MDP by
/// fixing the other slot to `teammate`. Transition rows are re-validated
/// stochastic after marginalization.
TabularMDP build_induced_mdp(const TabularMDP& joint_mdp, const DeterministicPolicy& teammate,
                             int leader_slot, const TeamSpec& spec);
TabularMDP build_induced_mdp(const TabularMDP& joint_mdp, const StochasticPolicy& teammate,
                             int leader_slot, const TeamSpec& spec);

/// Legible values within this margin of the per-state maximum count as
/// tied. The solver residual stays near 1e-7 while material value gaps in
/// unit-reward families stay above 1e-3, so the margin separates them.
constexpr double kLegibleTieTol = 1e-6;

/// Greedy policy of value iteration over build_legible_mdp on an induced
/// family. Legible-value ties (within kLegibleTieTol) are broken by the
/// induced optimal value, then by lowest action index, so maximally legible
/// behavior still prefers task progress.
DeterministicPolicy solve_legible_best_response(const GoalFamily& induced_family, double beta, int goal,
                                                const SolveOptions& opts = {});

}  // namespace legiteam
