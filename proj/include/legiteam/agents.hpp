#pragma once

#include <cstdint>
#include <vector>

#include "legiteam/mdp.hpp"

namespace legiteam {

/// Probability floor applied to every posterior entry before renormalizing.
constexpr double kPosteriorFloor = 1e-12;

/// Belief over active goals. Inactive goals hold probability zero and never
/// recover mass; active entries stay normalized within 1e-12.
struct Posterior {
  std::vector<double> p;
  std::vector<bool> active;

  static Posterior uniform(int n_goals);
  /// Uniform over the active set only.
  void reset_uniform();
  void deactivate(int goal);
  /// argmax over active goals, ties to the lowest index.
  int declared_goal() const;
  int n_active() const;
};

/// Observer likelihood of each leader action at one state under one goal:
/// softmax over leader actions (temperature beta) of the per-action values
/// in `leader_q_row`, which holds max over teammate actions of the joint q*.
std::vector<double> leader_action_likelihoods(const std::vector<double>& leader_q_row, double beta);

/// One Bayes step: posterior_g *= P(observed leader action | goal g), floor,
/// renormalize. `rows` holds one leader-marginal q row per goal; inactive
/// goals may pass empty rows.
void update_posterior(Posterior& posterior, const std::vector<std::vector<double>>& rows,
                      int leader_action, double beta);

struct StableInference {
  int steps = 0;
  bool never_inferred = false;
};

/// Earliest 1-indexed step t such that the declaration equals the truth at
/// every step from t through completion. A log whose final declaration is
/// wrong never stabilized; the completion step is returned with the flag set.
StableInference steps_to_stable_inference(const std::vector<int>& declarations, int truth);

/// Per-goal model access at the harness's current environment state. The
/// environment adapters implement this; agents stay environment-agnostic.
class TeamModelView {
 public:
  virtual ~TeamModelView() = default;
  virtual int n_goals() const = 0;
  virtual bool goal_active(int goal) const = 0;
  /// Leader-marginal joint q row at the current state (inference likelihoods).
  virtual std::vector<double> leader_q_row(int goal) const = 0;
  virtual int optimal_leader_action(int goal) const = 0;
  virtual int legible_leader_action(int goal) const = 0;
  virtual int optimal_follower_action(int goal) const = 0;
};

enum class LeaderMode { Optimal, Legible };

/// Tracks the objective sequence; completed objectives are skipped even when
/// they complete out of order.
class LeaderAgent {
 public:
  LeaderAgent(LeaderMode mode, std::vector<int> objective_sequence);

  LeaderMode mode() const { return mode_; }
  /// First objective in sequence order not yet completed, or -1 when done.
  int current_objective() const;
  bool done() const { return current_objective() < 0; }
  void mark_completed(int objective);
  int act(const TeamModelView& view) const;

 private:
  LeaderMode mode_;
  std::vector<int> sequence_;
  std::vector<bool> completed_;
};

/// Stay has this index in both gridworlds; it is the only action that can
/// never contest a cell.
constexpr int kYieldAction = 4;

/// Goal-inferring teammate: observes the leader's action each step, updates
/// the posterior over remaining goals, then plays its own component of the
/// joint-optimal policy for the declared goal. When the declared goal has no
/// plan from the current state (zero value), the follower serves the most
/// probable goal that has one; the declaration itself is unchanged. When the
/// previous step changed nothing and the follower would repeat the very
/// action that failed, it yields with Stay once so contested cells resolve;
/// the leader keeps right of way.
class FollowerAgent {
 public:
  FollowerAgent(int n_goals, double beta_infer);

  const Posterior& posterior() const { return posterior_; }
  int declared_goal() const { return posterior_.declared_goal(); }
  /// Observation trace length since the last reset.
  int trace_length() const { return trace_length_; }

  void observe(const TeamModelView& view, int leader_action);
  /// `stalled` marks that the previous joint step left the state unchanged.
  int act(const TeamModelView& view, bool stalled = false);
  /// Objective completion: drop the goal and restart inference over the rest.
  void on_objective_completed(int goal);

 private:
  Posterior posterior_;
  double beta_infer_;
  int trace_length_ = 0;
  int last_action_ = -1;
};

}  // namespace legiteam
