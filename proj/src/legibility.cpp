#include "legiteam/legibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace legiteam {

int TeamSpec::n_joint_actions() const {
  int n = 1;
  for (int c : action_counts) n *= c;
  return n;
}

int TeamSpec::joint_index(const std::vector<int>& components) const {
  if (components.size() != action_counts.size()) throw std::invalid_argument("TeamSpec: component count mismatch");
  int joint = 0;
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (components[i] < 0 || components[i] >= action_counts[i]) throw std::invalid_argument("TeamSpec: component out of range");
    joint = joint * action_counts[i] + components[i];
  }
  return joint;
}

int TeamSpec::component(int joint, int slot) const {
  if (slot < 0 || slot >= n_agents()) throw std::invalid_argument("TeamSpec: slot out of range");
  int divisor = 1;
  for (int i = n_agents() - 1; i > slot; --i) divisor *= action_counts[static_cast<std::size_t>(i)];
  return (joint / divisor) % action_counts[static_cast<std::size_t>(slot)];
}

void TeamSpec::validate() const {
  if (action_counts.empty()) throw std::invalid_argument("TeamSpec: at least one agent required");
  for (int c : action_counts) {
    if (c <= 0) throw std::invalid_argument("TeamSpec: action counts must be positive");
  }
  if (n_legible < 0 || n_legible > n_agents()) throw std::invalid_argument("TeamSpec: n_legible must lie in [0, n_agents]");
}

namespace {

std::vector<double> normalize_prior(std::vector<double> prior, std::size_t n_goals) {
  if (prior.empty()) {
    prior.assign(n_goals, 1.0 / static_cast<double>(n_goals));
    return prior;
  }
  if (prior.size() != n_goals) throw std::invalid_argument("GoalFamily: prior size must match goal count");
  double sum = 0.0;
  for (double p : prior) {
    if (!(p > 0.0) || !std::isfinite(p)) throw std::invalid_argument("GoalFamily: prior entries must be positive and finite");
    sum += p;
  }
  for (double& p : prior) p /= sum;
  return prior;
}

}  // namespace

GoalFamily GoalFamily::shared_dynamics(std::shared_ptr<const TransitionTable> table, double gamma,
                                       std::vector<std::vector<double>> per_goal_rewards,
                                       std::vector<double> prior) {
  if (per_goal_rewards.empty()) throw std::invalid_argument("GoalFamily: at least one goal required");
  GoalFamily family;
  for (auto& rewards : per_goal_rewards) {
    family.mdps_.push_back(TabularMDP::from_shared(table, gamma, std::move(rewards)));
  }
  family.prior_ = normalize_prior(std::move(prior), family.mdps_.size());
  family.q_stars_.resize(family.mdps_.size());
  family.has_q_.assign(family.mdps_.size(), false);
  return family;
}

GoalFamily GoalFamily::from_mdps(std::vector<TabularMDP> mdps, std::vector<double> prior) {
  if (mdps.empty()) throw std::invalid_argument("GoalFamily: at least one goal required");
  for (const TabularMDP& m : mdps) {
    if (m.n_states() != mdps[0].n_states() || m.n_actions() != mdps[0].n_actions()) {
      throw std::invalid_argument("GoalFamily: all goals must share state and action spaces");
    }
    if (m.gamma() != mdps[0].gamma()) throw std::invalid_argument("GoalFamily: all goals must share gamma");
  }
  GoalFamily family;
  family.mdps_ = std::move(mdps);
  family.prior_ = normalize_prior(std::move(prior), family.mdps_.size());
  family.q_stars_.resize(family.mdps_.size());
  family.has_q_.assign(family.mdps_.size(), false);
  return family;
}

void GoalFamily::solve_all(const SolveOptions& opts) {
  for (std::size_t n = 0; n < mdps_.size(); ++n) {
    if (has_q_[n]) continue;
    q_stars_[n] = value_iteration(mdps_[n], opts).q;
    has_q_[n] = true;
  }
}

bool GoalFamily::solved() const {
  for (bool h : has_q_) {
    if (!h) return false;
  }
  return true;
}

const QFunction& GoalFamily::q_star(int n) const {
  if (n < 0 || n >= n_goals() || !has_q_[static_cast<std::size_t>(n)]) {
    throw std::invalid_argument("GoalFamily: q_star requested for an unsolved goal");
  }
  return q_stars_[static_cast<std::size_t>(n)];
}

void GoalFamily::set_q_star(int n, QFunction q) {
  if (n < 0 || n >= n_goals()) throw std::invalid_argument("GoalFamily: goal index out of range");
  if (q.n_states != n_states() || q.n_actions != n_actions()) {
    throw std::invalid_argument("GoalFamily: q shape must match the family");
  }
  q_stars_[static_cast<std::size_t>(n)] = std::move(q);
  has_q_[static_cast<std::size_t>(n)] = true;
}

LegibleRewardTable legible_reward(const GoalFamily& family, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("legible_reward: beta must be positive");
  if (!family.solved()) throw std::invalid_argument("legible_reward: family must be solved first");
  const int N = family.n_goals();
  const int S = family.n_states();
  const int A = family.n_actions();
  LegibleRewardTable table;
  table.n_goals = N;
  table.n_states = S;
  table.n_actions = A;
  table.values.assign(static_cast<std::size_t>(N) * static_cast<std::size_t>(S) * static_cast<std::size_t>(A), 0.0);
  const std::size_t plane = static_cast<std::size_t>(S) * static_cast<std::size_t>(A);
  std::vector<double> w(static_cast<std::size_t>(N));
  for (std::size_t xa = 0; xa < plane; ++xa) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int n = 0; n < N; ++n) mx = std::max(mx, family.q_star(n).q[xa]);
    double sum = 0.0;
    for (int n = 0; n < N; ++n) {
      w[static_cast<std::size_t>(n)] = family.prior()[static_cast<std::size_t>(n)] * std::exp(beta * (family.q_star(n).q[xa] - mx));
      sum += w[static_cast<std::size_t>(n)];
    }
    for (int n = 0; n < N; ++n) {
      table.values[static_cast<std::size_t>(n) * plane + xa] = w[static_cast<std::size_t>(n)] / sum;
    }
  }
  return table;
}

JointSolution solve_optimal_joint(const TabularMDP& joint_mdp, const SolveOptions& opts) {
  JointSolution solution;
  solution.q = value_iteration(joint_mdp, opts).q;
  solution.policy = greedy_policy(solution.q);
  return solution;
}

TabularMDP build_legible_mdp(const GoalFamily& family, const LegibleRewardTable& table, int goal) {
  if (goal < 0 || goal >= family.n_goals()) throw std::invalid_argument("build_legible_mdp: goal index out of range");
  if (table.n_goals != family.n_goals() || table.n_states != family.n_states() ||
      table.n_actions != family.n_actions()) {
    throw std::invalid_argument("build_legible_mdp: table shape must match the family");
  }
  const TabularMDP& base = family.goal_mdp(goal);
  const int S = base.n_states();
  const int A = base.n_actions();
  const std::size_t plane = static_cast<std::size_t>(S) * static_cast<std::size_t>(A);
  std::vector<double> rewards(table.values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(goal) * plane),
                              table.values.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(goal) + 1) * plane));

  // Objective completions keep their dominance over signal loitering.
  std::vector<bool> absorbing(static_cast<std::size_t>(S));
  for (int x = 0; x < S; ++x) absorbing[static_cast<std::size_t>(x)] = base.is_absorbing(x);
  const TransitionTable& t = base.transitions();
  const double sustained_max = 1.0 / (1.0 - base.gamma());
  for (int x = 0; x < S; ++x) {
    for (int a = 0; a < A; ++a) {
      const std::size_t row = static_cast<std::size_t>(x) * static_cast<std::size_t>(A) + static_cast<std::size_t>(a);
      if (!(base.rewards()[row] > 0.0)) continue;
      bool into_absorbing = true;
      switch (t.mode) {
        case TransitionTable::Mode::Dense: {
          for (int y = 0; y < S && into_absorbing; ++y) {
            if (t.dense[row * static_cast<std::size_t>(S) + static_cast<std::size_t>(y)] > 0.0 && !absorbing[static_cast<std::size_t>(y)]) {
              into_absorbing = false;
            }
          }
          break;
        }
        case TransitionTable::Mode::Sparse: {
          for (std::size_t i = t.row_offsets[row]; i < t.row_offsets[row + 1] && into_absorbing; ++i) {
            if (t.entries[i].prob > 0.0 && !absorbing[static_cast<std::size_t>(t.entries[i].next)]) into_absorbing = false;
          }
          break;
        }
        case TransitionTable::Mode::Deterministic: {
          into_absorbing = absorbing[static_cast<std::size_t>(t.next[row])];
          break;
        }
      }
      if (into_absorbing) rewards[row] = sustained_max;
    }
  }
  return base.with_rewards(std::move(rewards));
}

namespace {

TabularMDP build_induced_impl(const TabularMDP& joint_mdp, const StochasticPolicy* soft,
                              const DeterministicPolicy* hard, int leader_slot, const TeamSpec& spec) {
  spec.validate();
  if (spec.n_agents() != 2) throw std::invalid_argument("build_induced_mdp: exactly two agents supported");
  if (leader_slot != 0 && leader_slot != 1) throw std::invalid_argument("build_induced_mdp: leader_slot must be 0 or 1");
  if (spec.n_joint_actions() != joint_mdp.n_actions()) {
    throw std::invalid_argument("build_induced_mdp: joint MDP action count must match the team spec");
  }
  const int teammate_slot = 1 - leader_slot;
  const int AL = spec.action_counts[static_cast<std::size_t>(leader_slot)];
  const int AT = spec.action_counts[static_cast<std::size_t>(teammate_slot)];
  const int S = joint_mdp.n_states();
  if (hard != nullptr) {
    if (hard->actions.size() != static_cast<std::size_t>(S)) throw std::invalid_argument("build_induced_mdp: teammate policy size mismatch");
    for (int a : hard->actions) {
      if (a < 0 || a >= AT) throw std::invalid_argument("build_induced_mdp: teammate action out of range");
    }
  } else {
    if (soft->n_states != S || soft->n_actions != AT) throw std::invalid_argument("build_induced_mdp: teammate policy shape mismatch");
  }

  const TransitionTable& t = joint_mdp.transitions();
  const bool deterministic_out = (hard != nullptr) && t.mode == TransitionTable::Mode::Deterministic;
  std::vector<double> rewards(static_cast<std::size_t>(S) * static_cast<std::size_t>(AL), 0.0);
  std::vector<int> components(2, 0);

  if (deterministic_out) {
    std::vector<int> next(rewards.size(), 0);
    for (int x = 0; x < S; ++x) {
      const int at = hard->actions[static_cast<std::size_t>(x)];
      for (int al = 0; al < AL; ++al) {
        components[static_cast<std::size_t>(leader_slot)] = al;
        components[static_cast<std::size_t>(teammate_slot)] = at;
        const int joint = spec.joint_index(components);
        const std::size_t joint_row = static_cast<std::size_t>(x) * static_cast<std::size_t>(joint_mdp.n_actions()) + static_cast<std::size_t>(joint);
        const std::size_t row = static_cast<std::size_t>(x) * static_cast<std::size_t>(AL) + static_cast<std::size_t>(al);
        next[row] = t.next[joint_row];
        rewards[row] = joint_mdp.rewards()[joint_row];
      }
    }
    return TabularMDP::deterministic(S, AL, joint_mdp.gamma(), std::move(rewards), std::move(next));
  }

  std::vector<std::vector<TransitionEntry>> rows(rewards.size());
  for (int x = 0; x < S; ++x) {
    for (int al = 0; al < AL; ++al) {
      const std::size_t row = static_cast<std::size_t>(x) * static_cast<std::size_t>(AL) + static_cast<std::size_t>(al);
      std::map<int, double> mass;
      for (int at = 0; at < AT; ++at) {
        const double w = hard != nullptr ? (hard->actions[static_cast<std::size_t>(x)] == at ? 1.0 : 0.0)
                                         : soft->prob(x, at);
        if (w == 0.0) continue;
        components[static_cast<std::size_t>(leader_slot)] = al;
        components[static_cast<std::size_t>(teammate_slot)] = at;
        const int joint = spec.joint_index(components);
        const std::size_t joint_row = static_cast<std::size_t>(x) * static_cast<std::size_t>(joint_mdp.n_actions()) + static_cast<std::size_t>(joint);
        rewards[row] += w * joint_mdp.rewards()[joint_row];
        switch (t.mode) {
          case TransitionTable::Mode::Dense: {
            for (int y = 0; y < S; ++y) {
              const double p = t.dense[joint_row * static_cast<std::size_t>(S) + static_cast<std::size_t>(y)];
              if (p > 0.0) mass[y] += w * p;
            }
            break;
          }
          case TransitionTable::Mode::Sparse: {
            for (std::size_t i = t.row_offsets[joint_row]; i < t.row_offsets[joint_row + 1]; ++i) {
              if (t.entries[i].prob > 0.0) mass[t.entries[i].next] += w * t.entries[i].prob;
            }
            break;
          }
          case TransitionTable::Mode::Deterministic: {
            mass[t.next[joint_row]] += w;
            break;
          }
        }
      }
      rows[row].reserve(mass.size());
      for (const auto& [y, p] : mass) rows[row].push_back(TransitionEntry{y, p});
    }
  }
  return TabularMDP::from_sparse(S, AL, joint_mdp.gamma(), std::move(rewards), rows);
}

}  // namespace

TabularMDP build_induced_mdp(const TabularMDP& joint_mdp, const DeterministicPolicy& teammate,
                             int leader_slot, const TeamSpec& spec) {
  return build_induced_impl(joint_mdp, nullptr, &teammate, leader_slot, spec);
}

TabularMDP build_induced_mdp(const TabularMDP& joint_mdp, const StochasticPolicy& teammate,
                             int leader_slot, const TeamSpec& spec) {
  return build_induced_impl(joint_mdp, &teammate, nullptr, leader_slot, spec);
}

DeterministicPolicy solve_legible_best_response(const GoalFamily& induced_family, double beta, int goal,
                                                const SolveOptions& opts) {
  const LegibleRewardTable table = legible_reward(induced_family, beta);
  const TabularMDP legible_mdp = build_legible_mdp(induced_family, table, goal);
  const QFunction q_leg = value_iteration(legible_mdp, opts).q;
  const QFunction& q_opt = induced_family.q_star(goal);

  // Ties in legible value are broken by task value, then by action index.
  // A single-goal family has constant legible reward, so every action ties
  // and the returned policy equals the optimal best response exactly.
  const int S = q_leg.n_states;
  const int A = q_leg.n_actions;
  DeterministicPolicy policy;
  policy.actions.assign(static_cast<std::size_t>(S), 0);
  for (int x = 0; x < S; ++x) {
    double best_leg = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a) best_leg = std::max(best_leg, q_leg.at(x, a));
    int chosen = -1;
    double chosen_opt = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a) {
      if (q_leg.at(x, a) < best_leg - kLegibleTieTol) continue;
      if (chosen < 0 || q_opt.at(x, a) > chosen_opt + kLegibleTieTol) {
        chosen = a;
        chosen_opt = q_opt.at(x, a);
      }
    }
    policy.actions[static_cast<std::size_t>(x)] = chosen;
  }
  return policy;
}

}  // namespace legiteam
