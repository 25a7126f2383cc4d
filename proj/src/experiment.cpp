#include "legiteam/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "legiteam/agents.hpp"
#include "legiteam/rng.hpp"

namespace legiteam {
namespace {

std::string fmt(const char* format, ...) {
  char buffer[256];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buffer, sizeof(buffer), format, args);
  va_end(args);
  return std::string(buffer);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Re-breaks exact greedy ties toward joint actions that change the leader's
// cell. When the teammate's path is the bottleneck the leader has slack and
// every leader action ties exactly; a parked leader emits no evidence for
// goal inference, so the team can freeze under a wrong declaration. Motion
// first, then the lowest joint index. Values are untouched.
template <typename LeaderCell>
void prefer_leader_motion(const TabularMDP& mdp, const QFunction& q, LeaderCell leader_cell,
                          DeterministicPolicy& policy) {
  const TransitionTable& t = mdp.transitions();
  if (t.mode != TransitionTable::Mode::Deterministic) {
    throw std::invalid_argument("prefer_leader_motion: deterministic dynamics required");
  }
  const int A = q.n_actions;
  for (int x = 0; x < q.n_states; ++x) {
    const int here = leader_cell(x);
    if (here < 0) continue;
    const double best = q.state_value(x);
    int chosen = policy.actions[static_cast<std::size_t>(x)];
    const int chosen_next = t.next[static_cast<std::size_t>(x) * A + static_cast<std::size_t>(chosen)];
    const int chosen_cell = leader_cell(chosen_next);
    if (chosen_cell != here) continue;
    for (int a = 0; a < A; ++a) {
      if (q.at(x, a) != best) continue;
      const int next = t.next[static_cast<std::size_t>(x) * A + static_cast<std::size_t>(a)];
      if (leader_cell(next) != here) {
        chosen = a;
        break;
      }
    }
    policy.actions[static_cast<std::size_t>(x)] = chosen;
  }
}

// Multi-source BFS distance over free cells to the target food's pick slots
// (its free neighbor cells). Unreachable cells keep INT_MAX.
std::vector<int> slot_distance_map(const ForagingLayout& layout, const ForagingStateSpace& space,
                                   int food) {
  const int width = layout.width;
  const int height = layout.height;
  const int cells = width * height;
  const auto free_cell = [&space](int c) { return space.cell_to_free[static_cast<std::size_t>(c)] >= 0; };
  const auto neighbors = [width, height](int c, int out[4]) {
    int n = 0;
    const int r = c / width;
    const int col = c % width;
    if (r > 0) out[n++] = c - width;
    if (r + 1 < height) out[n++] = c + width;
    if (col > 0) out[n++] = c - 1;
    if (col + 1 < width) out[n++] = c + 1;
    return n;
  };
  std::vector<int> dist(static_cast<std::size_t>(cells), std::numeric_limits<int>::max());
  std::vector<int> queue;
  int nbr[4];
  const int n_food_nbrs = neighbors(layout.food_cell(food), nbr);
  for (int i = 0; i < n_food_nbrs; ++i) {
    if (free_cell(nbr[i])) {
      dist[static_cast<std::size_t>(nbr[i])] = 0;
      queue.push_back(nbr[i]);
    }
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int c = queue[head];
    const int n = neighbors(c, nbr);
    for (int i = 0; i < n; ++i) {
      if (!free_cell(nbr[i]) || dist[static_cast<std::size_t>(nbr[i])] != std::numeric_limits<int>::max()) continue;
      dist[static_cast<std::size_t>(nbr[i])] = dist[static_cast<std::size_t>(c)] + 1;
      queue.push_back(nbr[i]);
    }
  }
  return dist;
}

// Slack tie-break for the foraging joint greedy: among exactly tied joint
// actions, pick one that strictly lowers the summed distance of both agents
// to the target's pick slots; without a strictly improving tied action the
// plain greedy choice stands. When one agent's path is the bottleneck every
// joint action ties exactly, and a lowest-index pick parks or bounces the
// other agent; tied motion burns slack without value loss, so both agents
// advance to their slots and the leader's actions stay informative. Strict
// descent of the sum can never cycle.
void prefer_slot_progress(const TabularMDP& mdp, const QFunction& q, const ForagingStateSpace& space,
                          const std::vector<int>& dist, DeterministicPolicy& policy) {
  const TransitionTable& t = mdp.transitions();
  const int A = q.n_actions;
  const int unreachable = std::numeric_limits<int>::max();
  const auto pair_distance = [&space, &dist, unreachable](int state) {
    const auto [c0, c1] = space.cells(state);
    const int d0 = dist[static_cast<std::size_t>(c0)];
    const int d1 = dist[static_cast<std::size_t>(c1)];
    if (d0 == unreachable || d1 == unreachable) return unreachable;
    return d0 + d1;
  };
  for (int x = 0; x < space.sink; ++x) {
    const int cur = pair_distance(x);
    if (cur <= 0 || cur == unreachable) continue;
    const double best = q.state_value(x);
    int chosen = policy.actions[static_cast<std::size_t>(x)];
    int best_d = cur;
    for (int a = 0; a < A; ++a) {
      if (q.at(x, a) != best) continue;
      const int next = t.next[static_cast<std::size_t>(x) * A + static_cast<std::size_t>(a)];
      if (next == space.sink) continue;
      const int d = pair_distance(next);
      if (d < best_d) {
        best_d = d;
        chosen = a;
      }
    }
    policy.actions[static_cast<std::size_t>(x)] = chosen;
  }
}

}  // namespace

const char* condition_name(Condition c) {
  return c == Condition::Optimal ? "optimal" : "legible";
}

Condition parse_condition(const std::string& name) {
  if (name == "optimal") return Condition::Optimal;
  if (name == "legible") return Condition::Legible;
  throw std::invalid_argument("unknown condition: " + name);
}

int ExperimentConfig::resolved_episodes() const {
  if (episodes_per_cell > 0) return episodes_per_cell;
  return is_foraging() ? 250 : 200;
}

int ExperimentConfig::resolved_step_limit() const {
  if (step_limit > 0) return step_limit;
  return is_foraging() ? 600 : 800;
}

void ExperimentConfig::validate() const {
  if (environment != "foraging" && environment != "pursuit") {
    throw std::invalid_argument("config: environment must be foraging or pursuit");
  }
  if (grid_sizes.empty()) throw std::invalid_argument("config: grid_sizes must be non-empty");
  for (int g : grid_sizes) {
    if (is_foraging()) {
      if (g < 4 || g > 20) throw std::invalid_argument(fmt("config: foraging grid %d outside [4, 20]", g));
    } else {
      if (g < 3 || g > 20) throw std::invalid_argument(fmt("config: pursuit grid %d outside [3, 20]", g));
      if (g * g > 100 && !allow_large_pursuit) {
        throw std::invalid_argument(
            fmt("config: pursuit grid %d needs --allow-large-pursuit (exact solve over the full triple space)", g));
      }
    }
  }
  if (conditions.empty()) throw std::invalid_argument("config: conditions must be non-empty");
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    for (std::size_t j = i + 1; j < conditions.size(); ++j) {
      if (conditions[i] == conditions[j]) throw std::invalid_argument("config: duplicate condition");
    }
  }
  if (episodes_per_cell < 0) throw std::invalid_argument("config: episodes must be non-negative");
  if (!(beta > 0.0)) throw std::invalid_argument("config: beta must be positive");
  if (!(gamma > 0.0) || !(gamma < 1.0)) throw std::invalid_argument("config: gamma must lie in (0, 1)");
  if (step_limit < 0) throw std::invalid_argument("config: step_limit must be non-negative");
  if (!(solve_tol > 0.0)) throw std::invalid_argument("config: solve_tol must be positive");
}

std::vector<ForagingLayout> presample_foraging(const ExperimentConfig& config, int grid) {
  ForagingConfig env;
  env.width = grid;
  env.height = grid;
  env.step_limit = config.resolved_step_limit();
  std::vector<ForagingLayout> layouts;
  const int n = config.resolved_episodes();
  layouts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    layouts.push_back(sample_layout(
        scenario_seed(config.master_seed, kForagingEnvCode, static_cast<std::uint64_t>(grid),
                      static_cast<std::uint64_t>(i)),
        env));
  }
  return layouts;
}

std::vector<PursuitScenario> presample_pursuit(const ExperimentConfig& config, int grid) {
  PursuitConfig env;
  env.width = grid;
  env.height = grid;
  env.step_limit = config.resolved_step_limit();
  std::vector<PursuitScenario> scenarios;
  const int n = config.resolved_episodes();
  scenarios.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    scenarios.push_back(sample_pursuit_scenario(
        scenario_seed(config.master_seed, kPursuitEnvCode, static_cast<std::uint64_t>(grid),
                      static_cast<std::uint64_t>(i)),
        env));
  }
  return scenarios;
}

ForagingPlanner::ForagingPlanner(const ForagingLayout& layout, double gamma, double beta, double solve_tol)
    : layout_(layout), gamma_(gamma), beta_(beta), tol_(solve_tol) {}

const ForagingPlanner::MaskTables& ForagingPlanner::joint_stage(std::uint32_t present_mask) {
  return ensure_joint(present_mask);
}

ForagingPlanner::MaskTables& ForagingPlanner::ensure_joint(std::uint32_t present_mask) {
  if (present_mask == 0) throw std::invalid_argument("ForagingPlanner: empty present mask");
  auto it = cache_.find(present_mask);
  if (it != cache_.end()) return it->second;

  MaskTables tables;
  tables.space = foraging_state_space(layout_, present_mask);
  for (int f = 0; f < layout_.n_foods(); ++f) {
    if (present_mask & (1u << f)) tables.goals.push_back(f);
  }
  SolveOptions opts;
  opts.tol = tol_;
  tables.per_goal.resize(tables.goals.size());
  for (std::size_t k = 0; k < tables.goals.size(); ++k) {
    const TabularMDP mdp = goal_mdp_foraging(layout_, present_mask, tables.goals[k], gamma_, tables.space);
    JointSolution solution = solve_optimal_joint(mdp, opts);
    const std::vector<int> dist = slot_distance_map(layout_, tables.space, tables.goals[k]);
    prefer_slot_progress(mdp, solution.q, tables.space, dist, solution.policy);
    tables.per_goal[k].joint_q = std::move(solution.q);
    tables.per_goal[k].joint_greedy = std::move(solution.policy);
  }
  return cache_.emplace(present_mask, std::move(tables)).first->second;
}

const ForagingPlanner::MaskTables& ForagingPlanner::legible_stage(std::uint32_t present_mask) {
  MaskTables& tables = ensure_joint(present_mask);
  if (tables.legible_ready) return tables;

  TeamSpec spec;
  spec.action_counts = {kForagingActionCount, kForagingActionCount};
  spec.n_legible = 1;
  SolveOptions opts;
  opts.tol = tol_;

  std::vector<TabularMDP> induced;
  induced.reserve(tables.goals.size());
  for (std::size_t k = 0; k < tables.goals.size(); ++k) {
    const TabularMDP joint = goal_mdp_foraging(layout_, present_mask, tables.goals[k], gamma_, tables.space);
    DeterministicPolicy teammate;
    teammate.actions.resize(tables.per_goal[k].joint_greedy.actions.size());
    for (std::size_t x = 0; x < teammate.actions.size(); ++x) {
      teammate.actions[x] = spec.component(tables.per_goal[k].joint_greedy.actions[x], 1);
    }
    induced.push_back(build_induced_mdp(joint, teammate, 0, spec));
  }
  GoalFamily family = GoalFamily::from_mdps(induced, {});
  for (std::size_t k = 0; k < tables.goals.size(); ++k) {
    tables.per_goal[k].induced_q = value_iteration(induced[k], opts).q;
    family.set_q_star(static_cast<int>(k), tables.per_goal[k].induced_q);
  }
  for (std::size_t k = 0; k < tables.goals.size(); ++k) {
    tables.per_goal[k].legible = solve_legible_best_response(family, beta_, static_cast<int>(k), opts);
  }
  tables.legible_ready = true;
  return tables;
}

int ForagingPlanner::goal_position(const MaskTables& tables, int food) {
  for (std::size_t k = 0; k < tables.goals.size(); ++k) {
    if (tables.goals[k] == food) return static_cast<int>(k);
  }
  throw std::invalid_argument(fmt("ForagingPlanner: food %d not present under this mask", food));
}

PursuitModel build_pursuit_model(int width, int height, double gamma, double solve_tol, bool allow_large) {
  PursuitModel model;
  model.width = width;
  model.height = height;
  model.gamma = gamma;
  model.space = pursuit_state_space(width, height);

  TeamSpec spec;
  spec.action_counts = {kPursuitActionCount, kPursuitActionCount};
  spec.n_legible = 1;
  SolveOptions opts;
  opts.tol = solve_tol;
  const int S = model.space.n_states;

  const TabularMDP joint = goal_mdp_pursuit(width, height, gamma, model.space, allow_large);
  {
    QFunction jq = value_iteration(joint, opts).q;
    DeterministicPolicy greedy = greedy_policy(jq);
    const PursuitStateSpace& space = model.space;
    const auto leader_cell = [&space](int s) {
      return s == space.sink ? -1 : std::get<0>(space.cells_of(s));
    };
    prefer_leader_motion(joint, jq, leader_cell, greedy);
    model.leader_opt.resize(static_cast<std::size_t>(S));
    model.follower_opt.resize(static_cast<std::size_t>(S));
    for (int x = 0; x < S; ++x) {
      model.leader_opt[static_cast<std::size_t>(x)] = spec.component(greedy.actions[static_cast<std::size_t>(x)], 0);
      model.follower_opt[static_cast<std::size_t>(x)] = spec.component(greedy.actions[static_cast<std::size_t>(x)], 1);
    }
    model.m_table.assign(static_cast<std::size_t>(S) * kPursuitActionCount, 0.0);
    for (int x = 0; x < S; ++x) {
      for (int al = 0; al < kPursuitActionCount; ++al) {
        double best = -std::numeric_limits<double>::infinity();
        for (int af = 0; af < kPursuitActionCount; ++af) {
          best = std::max(best, jq.at(x, al * kPursuitActionCount + af));
        }
        model.m_table[static_cast<std::size_t>(x) * kPursuitActionCount + static_cast<std::size_t>(al)] = best;
      }
    }
  }
  DeterministicPolicy teammate;
  teammate.actions = model.follower_opt;
  const TabularMDP induced = build_induced_mdp(joint, teammate, 0, spec);
  model.induced_next = induced.transitions().next;

  // Steps to capture on the induced chain, by Bellman-Ford sweeps (the sweep
  // count is bounded by the longest capture path). Unreachable states keep
  // the sentinel.
  model.steps_left.assign(static_cast<std::size_t>(S), kPursuitUnreachable);
  model.steps_left[static_cast<std::size_t>(model.space.sink)] = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (int x = 0; x < S; ++x) {
      if (x == model.space.sink) continue;
      const std::size_t base = static_cast<std::size_t>(x) * kPursuitActionCount;
      int best = kPursuitUnreachable;
      for (int a = 0; a < kPursuitActionCount; ++a) {
        const int d = model.steps_left[static_cast<std::size_t>(model.induced_next[base + static_cast<std::size_t>(a)])];
        if (d != kPursuitUnreachable && d + 1 < best) best = d + 1;
      }
      if (best < model.steps_left[static_cast<std::size_t>(x)]) {
        model.steps_left[static_cast<std::size_t>(x)] = best;
        changed = true;
      }
    }
  }
  return model;
}

namespace {

// TeamModelView over one foraging step: goal ids are food slots; tables for
// the current present mask are fetched lazily from the planner.
class ForagingView : public TeamModelView {
 public:
  ForagingView(ForagingPlanner& planner, const ForagingState& state)
      : planner_(planner), state_(state), tables_(&planner.joint_stage(state.present_mask)) {
    x_ = tables_->space.index(state.agents[0], state.agents[1]);
  }

  int state_index() const { return x_; }

  int n_goals() const override { return planner_.layout().n_foods(); }

  bool goal_active(int goal) const override {
    return goal >= 0 && goal < n_goals() && (state_.present_mask & (1u << goal)) != 0;
  }

  std::vector<double> leader_q_row(int goal) const override {
    const auto& gt = goal_tables(goal);
    std::vector<double> row(kForagingActionCount, 0.0);
    for (int al = 0; al < kForagingActionCount; ++al) {
      double best = -std::numeric_limits<double>::infinity();
      for (int af = 0; af < kForagingActionCount; ++af) {
        best = std::max(best, gt.joint_q.at(x_, al * kForagingActionCount + af));
      }
      row[static_cast<std::size_t>(al)] = best;
    }
    return row;
  }

  int optimal_leader_action(int goal) const override {
    return goal_tables(goal).joint_greedy.actions[static_cast<std::size_t>(x_)] / kForagingActionCount;
  }

  int optimal_follower_action(int goal) const override {
    return goal_tables(goal).joint_greedy.actions[static_cast<std::size_t>(x_)] % kForagingActionCount;
  }

  int legible_leader_action(int goal) const override {
    const auto& tables = planner_.legible_stage(state_.present_mask);
    const int k = ForagingPlanner::goal_position(tables, goal);
    return tables.per_goal[static_cast<std::size_t>(k)].legible.actions[static_cast<std::size_t>(x_)];
  }

 private:
  const ForagingPlanner::GoalTables& goal_tables(int goal) const {
    return tables_->per_goal[static_cast<std::size_t>(ForagingPlanner::goal_position(*tables_, goal))];
  }

  ForagingPlanner& planner_;
  const ForagingState& state_;
  const ForagingPlanner::MaskTables* tables_;
  int x_ = 0;
};

// TeamModelView over one pursuit step: goal ids are prey indices, each
// looked up at its own abstract (hunter, hunter, prey) state. The legible
// action reads the segment policy solved against the other live preys at
// their segment-start cells; optimal conditions run without one.
class PursuitView : public TeamModelView {
 public:
  PursuitView(const PursuitModel& model, const PursuitState& state, double beta)
      : model_(model), state_(state), beta_(beta) {}

  int n_goals() const override { return static_cast<int>(state_.preys.size()); }

  bool goal_active(int goal) const override {
    return goal >= 0 && goal < n_goals() && (state_.alive_mask & (1u << goal)) != 0;
  }

  std::vector<double> leader_q_row(int goal) const override {
    const std::size_t base = static_cast<std::size_t>(abstract_state(goal)) * kPursuitActionCount;
    return std::vector<double>(model_.m_table.begin() + static_cast<std::ptrdiff_t>(base),
                               model_.m_table.begin() + static_cast<std::ptrdiff_t>(base + kPursuitActionCount));
  }

  int optimal_leader_action(int goal) const override {
    return model_.leader_opt[static_cast<std::size_t>(abstract_state(goal))];
  }

  int optimal_follower_action(int goal) const override {
    return model_.follower_opt[static_cast<std::size_t>(abstract_state(goal))];
  }

  // Among the actions holding capture time at its minimum, play the one the
  // observer's update rates as the strongest evidence for the target: log
  // likelihood under the target minus log mean likelihood under the other
  // live goals, likelihoods being the same row softmaxes the follower uses.
  // States the induced chain cannot capture from fall back to the optimal
  // action. Exact ties resolve to the lowest action index.
  int legible_leader_action(int goal) const override {
    const int x = abstract_state(goal);
    const std::size_t base = static_cast<std::size_t>(x) * kPursuitActionCount;
    const int cur = model_.steps_left[static_cast<std::size_t>(x)];
    if (cur == kPursuitUnreachable) return model_.leader_opt[static_cast<std::size_t>(x)];

    const std::vector<double> own = leader_action_likelihoods(leader_q_row(goal), beta_);
    std::vector<double> rival_mean(kPursuitActionCount, 0.0);
    int n_rivals = 0;
    for (int g = 0; g < n_goals(); ++g) {
      if (g == goal || !goal_active(g)) continue;
      const std::vector<double> lik = leader_action_likelihoods(leader_q_row(g), beta_);
      for (int a = 0; a < kPursuitActionCount; ++a) rival_mean[static_cast<std::size_t>(a)] += lik[static_cast<std::size_t>(a)];
      n_rivals += 1;
    }

    double best = -std::numeric_limits<double>::infinity();
    int best_a = model_.leader_opt[static_cast<std::size_t>(x)];
    for (int a = 0; a < kPursuitActionCount; ++a) {
      const int next = model_.induced_next[base + static_cast<std::size_t>(a)];
      if (model_.steps_left[static_cast<std::size_t>(next)] != cur - 1) continue;
      const double evidence =
          n_rivals == 0
              ? std::log(own[static_cast<std::size_t>(a)])
              : std::log(own[static_cast<std::size_t>(a)]) -
                    std::log(rival_mean[static_cast<std::size_t>(a)] / static_cast<double>(n_rivals));
      if (evidence > best) {
        best = evidence;
        best_a = a;
      }
    }
    return best_a;
  }

 private:
  int abstract_state(int goal) const {
    if (!goal_active(goal)) throw std::invalid_argument("PursuitView: goal not alive");
    return model_.space.index(state_.hunters[0], state_.hunters[1],
                              state_.preys[static_cast<std::size_t>(goal)]);
  }

  const PursuitModel& model_;
  const PursuitState& state_;
  double beta_;
};

// Completion bookkeeping shared by both episode runners.
void record_completions(EpisodeRecord& record, const std::vector<int>& completed, int step,
                        int& segment_start, std::vector<int>& declarations, LeaderAgent& leader,
                        FollowerAgent& follower) {
  for (int objective : completed) {
    const StableInference si = steps_to_stable_inference(declarations, objective);
    ObjectiveMetric metric;
    metric.objective = objective;
    metric.completion_step = step;
    metric.segment_start = segment_start;
    metric.steps_to_stable = si.steps;
    metric.never_inferred = si.never_inferred;
    record.objectives.push_back(metric);
    leader.mark_completed(objective);
    follower.on_objective_completed(objective);
    record.events.push_back(fmt("t=%d completed=%d stable=%d", step, objective, si.steps));
  }
  declarations.clear();
  segment_start = step + 1;
}

}  // namespace

EpisodeRecord run_foraging_episode(ForagingPlanner& planner, int scenario_id, int grid,
                                   Condition condition, const ExperimentConfig& config) {
  EpisodeRecord record;
  record.scenario_id = scenario_id;
  record.grid = grid;
  record.condition = condition;

  const ForagingLayout& layout = planner.layout();
  ForagingState state = foraging_initial_state(layout);
  LeaderAgent leader(condition == Condition::Legible ? LeaderMode::Legible : LeaderMode::Optimal,
                     layout.capture_sequence);
  FollowerAgent follower(layout.n_foods(), config.beta);

  const int step_limit = config.resolved_step_limit();
  int segment_start = 1;
  bool stalled = false;
  std::vector<int> declarations;
  for (int t = 1; t <= step_limit; ++t) {
    record.total_steps = t;
    const ForagingView view(planner, state);
    const int leader_action = leader.act(view);
    follower.observe(view, leader_action);
    const int declared = follower.declared_goal();
    declarations.push_back(declared);
    const int follower_action = follower.act(view, stalled);

    const ForagingStepResult result = foraging_step(state, layout, leader_action, follower_action);
    record.events.push_back(fmt("t=%d cells=%d,%d aL=%d aF=%d goal=%d declared=%d", t, state.agents[0],
                                state.agents[1], leader_action, follower_action,
                                leader.current_objective(), declared));
    stalled = result.state.agents == state.agents && result.state.present_mask == state.present_mask;
    state = result.state;
    if (!result.picked.empty()) {
      record_completions(record, result.picked, t, segment_start, declarations, leader, follower);
    }
    if (leader.done()) {
      record.success = true;
      break;
    }
  }
  return record;
}

EpisodeRecord run_pursuit_episode(const PursuitScenario& scenario, const PursuitModel& model,
                                  int scenario_id, int grid, Condition condition,
                                  const ExperimentConfig& config) {
  if (scenario.width != model.width || scenario.height != model.height) {
    throw std::invalid_argument("run_pursuit_episode: scenario and model grids differ");
  }
  EpisodeRecord record;
  record.scenario_id = scenario_id;
  record.grid = grid;
  record.condition = condition;

  PursuitConfig env;
  env.width = scenario.width;
  env.height = scenario.height;
  env.n_preys = static_cast<int>(scenario.prey_starts.size());
  env.step_limit = config.resolved_step_limit();

  PursuitState state = pursuit_initial_state(scenario);
  LeaderAgent leader(condition == Condition::Legible ? LeaderMode::Legible : LeaderMode::Optimal,
                     scenario.capture_sequence);
  FollowerAgent follower(env.n_preys, config.beta);

  int segment_start = 1;
  bool stalled = false;
  std::vector<int> declarations;
  for (int t = 1; t <= env.step_limit; ++t) {
    record.total_steps = t;
    const PursuitView view(model, state, config.beta);
    const int leader_action = leader.act(view);
    follower.observe(view, leader_action);
    const int declared = follower.declared_goal();
    declarations.push_back(declared);
    const int follower_action = follower.act(view, stalled);

    const PursuitStepResult result = pursuit_step(state, env, leader_action, follower_action);
    record.events.push_back(fmt("t=%d hunters=%d,%d aL=%d aF=%d goal=%d declared=%d alive=%u", t,
                                state.hunters[0], state.hunters[1], leader_action, follower_action,
                                leader.current_objective(), declared, state.alive_mask));
    stalled = result.state.hunters == state.hunters && result.state.preys == state.preys &&
              result.state.alive_mask == state.alive_mask;
    state = result.state;
    if (!result.captured.empty()) {
      record_completions(record, result.captured, t, segment_start, declarations, leader, follower);
    }
    if (leader.done()) {
      record.success = true;
      break;
    }
  }
  return record;
}

ExperimentDataset run_experiment(const ExperimentConfig& config, PursuitModelStore* models,
                                 const ExperimentHooks& hooks) {
  config.validate();
  ExperimentDataset dataset;
  dataset.config = config;

  PursuitModelStore local_store;
  if (models == nullptr) models = &local_store;
  const int episodes = config.resolved_episodes();

  for (int grid : config.grid_sizes) {
    auto stage_start = std::chrono::steady_clock::now();
    std::vector<ForagingLayout> layouts;
    std::vector<PursuitScenario> scenarios;
    if (config.is_foraging()) {
      layouts = presample_foraging(config, grid);
    } else {
      scenarios = presample_pursuit(config, grid);
    }
    dataset.timings.emplace_back(fmt("presample grid=%d", grid), seconds_since(stage_start));

    const PursuitModel* model = nullptr;
    if (!config.is_foraging()) {
      stage_start = std::chrono::steady_clock::now();
      auto it = models->by_grid.find(grid);
      if (it == models->by_grid.end()) {
        it = models->by_grid
                 .emplace(grid, build_pursuit_model(grid, grid, config.gamma, config.solve_tol,
                                                    config.allow_large_pursuit))
                 .first;
        models->built.push_back(grid);
      }
      model = &it->second;
      dataset.timings.emplace_back(fmt("solve grid=%d", grid), seconds_since(stage_start));
    }

    stage_start = std::chrono::steady_clock::now();
    for (int i = 0; i < episodes; ++i) {
      const int scenario_id = i + 1;
      std::vector<EpisodeRecord> pending;
      std::string failure;
      ForagingPlanner planner(config.is_foraging() ? layouts[static_cast<std::size_t>(i)] : ForagingLayout{},
                              config.gamma, config.beta, config.solve_tol);
      for (Condition condition : config.conditions) {
        try {
          if (hooks.before_episode) hooks.before_episode(grid, scenario_id, condition);
          pending.push_back(config.is_foraging()
                                ? run_foraging_episode(planner, scenario_id, grid, condition, config)
                                : run_pursuit_episode(scenarios[static_cast<std::size_t>(i)], *model,
                                                      scenario_id, grid, condition, config));
        } catch (const std::exception& e) {
          failure = fmt("grid=%d scenario=%d condition=%s reason=", grid, scenario_id,
                        condition_name(condition)) +
                    e.what();
          break;
        }
      }
      if (!failure.empty()) {
        dataset.exclusions.push_back(failure);
      } else {
        for (EpisodeRecord& r : pending) dataset.records.push_back(std::move(r));
      }
    }
    dataset.timings.emplace_back(fmt("episodes grid=%d", grid), seconds_since(stage_start));
  }
  return dataset;
}

const std::vector<std::string> kMetricNames = {"completion_steps", "inference_steps", "success_rate"};

std::vector<double> metric_values(const std::vector<EpisodeRecord>& records, int grid,
                                  Condition condition, const std::string& metric) {
  std::vector<double> values;
  for (const EpisodeRecord& r : records) {
    if (r.grid != grid || r.condition != condition) continue;
    if (metric == "completion_steps") {
      values.push_back(static_cast<double>(r.total_steps));
    } else if (metric == "success_rate") {
      values.push_back(r.success ? 1.0 : 0.0);
    } else if (metric == "inference_steps") {
      // Speed of successful inference. A completion whose segment never
      // reached a stable correct declaration (incidental flank captures of a
      // non-target prey, or captures that outran the posterior) carries no
      // speed information; those appear in the never-inferred count instead.
      double total = 0.0;
      int n = 0;
      for (const ObjectiveMetric& m : r.objectives) {
        if (m.never_inferred) continue;
        total += static_cast<double>(m.steps_to_stable);
        n += 1;
      }
      if (n == 0) continue;
      values.push_back(total / static_cast<double>(n));
    } else {
      throw std::invalid_argument("metric_values: unknown metric " + metric);
    }
  }
  return values;
}

StatReport summarize_records(const std::vector<EpisodeRecord>& records, std::size_t exclusion_count) {
  StatReport report;
  report.exclusion_count = exclusion_count;
  std::vector<int> grids;
  for (const EpisodeRecord& r : records) {
    if (std::find(grids.begin(), grids.end(), r.grid) == grids.end()) grids.push_back(r.grid);
  }
  std::sort(grids.begin(), grids.end());
  for (int grid : grids) {
    for (const std::string& metric : kMetricNames) {
      const std::vector<double> a = metric_values(records, grid, Condition::Optimal, metric);
      const std::vector<double> b = metric_values(records, grid, Condition::Legible, metric);
      if (a.empty() || b.empty()) {
        report.warnings.push_back(fmt("grid=%d metric=%s: empty cell, row omitted", grid, metric.c_str()));
        continue;
      }
      StatRow row;
      row.grid = grid;
      row.metric = metric;
      row.cell = summarize_cell(a, b);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

StatReport summarize_dataset(const ExperimentDataset& dataset) {
  return summarize_records(dataset.records, dataset.exclusions.size());
}

}  // namespace legiteam
