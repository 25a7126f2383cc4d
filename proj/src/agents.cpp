#include "legiteam/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace legiteam {

Posterior Posterior::uniform(int n_goals) {
  if (n_goals <= 0) throw std::invalid_argument("Posterior: goal count must be positive");
  Posterior posterior;
  posterior.p.assign(static_cast<std::size_t>(n_goals), 1.0 / static_cast<double>(n_goals));
  posterior.active.assign(static_cast<std::size_t>(n_goals), true);
  return posterior;
}

void Posterior::reset_uniform() {
  const int n = n_active();
  if (n == 0) return;
  for (std::size_t g = 0; g < p.size(); ++g) {
    p[g] = active[g] ? 1.0 / static_cast<double>(n) : 0.0;
  }
}

void Posterior::deactivate(int goal) {
  if (goal < 0 || goal >= static_cast<int>(p.size())) throw std::invalid_argument("Posterior: goal out of range");
  active[static_cast<std::size_t>(goal)] = false;
  p[static_cast<std::size_t>(goal)] = 0.0;
}

int Posterior::declared_goal() const {
  int best = -1;
  double best_p = -1.0;
  for (std::size_t g = 0; g < p.size(); ++g) {
    if (active[g] && p[g] > best_p) {
      best_p = p[g];
      best = static_cast<int>(g);
    }
  }
  return best;
}

int Posterior::n_active() const {
  int n = 0;
  for (bool a : active) n += a ? 1 : 0;
  return n;
}

std::vector<double> leader_action_likelihoods(const std::vector<double>& leader_q_row, double beta) {
  if (leader_q_row.empty()) throw std::invalid_argument("leader_action_likelihoods: empty q row");
  if (!(beta >= 0.0)) throw std::invalid_argument("leader_action_likelihoods: beta must be nonnegative");
  double mx = leader_q_row[0];
  for (double v : leader_q_row) mx = std::max(mx, v);
  std::vector<double> lik(leader_q_row.size());
  double sum = 0.0;
  for (std::size_t a = 0; a < leader_q_row.size(); ++a) {
    lik[a] = std::exp(beta * (leader_q_row[a] - mx));
    sum += lik[a];
  }
  for (double& v : lik) v /= sum;
  return lik;
}

void update_posterior(Posterior& posterior, const std::vector<std::vector<double>>& rows,
                      int leader_action, double beta) {
  if (rows.size() != posterior.p.size()) throw std::invalid_argument("update_posterior: one q row per goal required");
  double sum = 0.0;
  for (std::size_t g = 0; g < rows.size(); ++g) {
    if (!posterior.active[g]) continue;
    const std::vector<double> lik = leader_action_likelihoods(rows[g], beta);
    if (leader_action < 0 || leader_action >= static_cast<int>(lik.size())) {
      throw std::invalid_argument("update_posterior: leader action out of range");
    }
    posterior.p[g] = std::max(posterior.p[g] * lik[static_cast<std::size_t>(leader_action)], kPosteriorFloor);
    sum += posterior.p[g];
  }
  if (sum <= 0.0) throw std::invalid_argument("update_posterior: no active goals");
  for (std::size_t g = 0; g < rows.size(); ++g) {
    if (posterior.active[g]) posterior.p[g] /= sum;
  }
}

StableInference steps_to_stable_inference(const std::vector<int>& declarations, int truth) {
  if (declarations.empty()) throw std::invalid_argument("steps_to_stable_inference: empty declaration log");
  StableInference result;
  const int n = static_cast<int>(declarations.size());
  if (declarations[static_cast<std::size_t>(n - 1)] != truth) {
    result.steps = n;
    result.never_inferred = true;
    return result;
  }
  int last_mismatch = 0;  // 1-indexed; 0 when the whole log matches
  for (int t = n; t >= 1; --t) {
    if (declarations[static_cast<std::size_t>(t - 1)] != truth) {
      last_mismatch = t;
      break;
    }
  }
  result.steps = last_mismatch + 1;
  return result;
}

LeaderAgent::LeaderAgent(LeaderMode mode, std::vector<int> objective_sequence)
    : mode_(mode), sequence_(std::move(objective_sequence)) {
  if (sequence_.empty()) throw std::invalid_argument("LeaderAgent: objective sequence must be nonempty");
  int max_goal = 0;
  for (int g : sequence_) {
    if (g < 0) throw std::invalid_argument("LeaderAgent: negative objective index");
    max_goal = std::max(max_goal, g);
  }
  completed_.assign(static_cast<std::size_t>(max_goal) + 1, false);
}

int LeaderAgent::current_objective() const {
  for (int g : sequence_) {
    if (!completed_[static_cast<std::size_t>(g)]) return g;
  }
  return -1;
}

void LeaderAgent::mark_completed(int objective) {
  if (objective < 0 || objective >= static_cast<int>(completed_.size())) {
    throw std::invalid_argument("LeaderAgent: objective out of range");
  }
  completed_[static_cast<std::size_t>(objective)] = true;
}

int LeaderAgent::act(const TeamModelView& view) const {
  const int goal = current_objective();
  if (goal < 0) throw std::invalid_argument("LeaderAgent: all objectives already completed");
  return mode_ == LeaderMode::Optimal ? view.optimal_leader_action(goal) : view.legible_leader_action(goal);
}

FollowerAgent::FollowerAgent(int n_goals, double beta_infer)
    : posterior_(Posterior::uniform(n_goals)), beta_infer_(beta_infer) {
  if (!(beta_infer >= 0.0)) throw std::invalid_argument("FollowerAgent: beta_infer must be nonnegative");
}

void FollowerAgent::observe(const TeamModelView& view, int leader_action) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(view.n_goals()));
  for (int g = 0; g < view.n_goals(); ++g) {
    if (posterior_.active[static_cast<std::size_t>(g)]) rows[static_cast<std::size_t>(g)] = view.leader_q_row(g);
  }
  update_posterior(posterior_, rows, leader_action, beta_infer_);
  ++trace_length_;
}

int FollowerAgent::act(const TeamModelView& view, bool stalled) {
  const int declared = posterior_.declared_goal();
  const auto state_value = [&view](int goal) {
    double best = 0.0;
    for (double v : view.leader_q_row(goal)) best = std::max(best, v);
    return best;
  };
  int intended = -1;
  if (state_value(declared) > 0.0) {
    intended = view.optimal_follower_action(declared);
  } else {
    // A zero-value declared goal has no plan from here (its approach stays
    // blocked until another objective clears the way); acting on it would park
    // the follower forever. Serve the likeliest goal that has a plan instead.
    int target = declared;
    double target_p = -1.0;
    for (int g = 0; g < view.n_goals(); ++g) {
      if (!view.goal_active(g) || g == declared) continue;
      if (!(state_value(g) > 0.0)) continue;
      if (posterior_.p[static_cast<std::size_t>(g)] > target_p) {
        target = g;
        target_p = posterior_.p[static_cast<std::size_t>(g)];
      }
    }
    intended = view.optimal_follower_action(target);
  }
  // Deterministic agents contesting one cell cancel each other forever.
  // Repeating the exact action that just failed cannot help, so yield once
  // and let the leader's move land; any change of intent plays through.
  if (stalled && intended == last_action_) intended = kYieldAction;
  last_action_ = intended;
  return intended;
}

void FollowerAgent::on_objective_completed(int goal) {
  posterior_.deactivate(goal);
  posterior_.reset_uniform();
  trace_length_ = 0;
  last_action_ = -1;
}

}  // namespace legiteam
