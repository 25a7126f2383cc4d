#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "legiteam/foraging.hpp"
#include "legiteam/legibility.hpp"
#include "legiteam/pursuit.hpp"
#include "legiteam/stats.hpp"

namespace legiteam {

enum class Condition { Optimal, Legible };

const char* condition_name(Condition c);
Condition parse_condition(const std::string& name);

/// Scenario-seed schedule domain separators.
constexpr std::uint64_t kForagingEnvCode = 1;
constexpr std::uint64_t kPursuitEnvCode = 2;

struct ExperimentConfig {
  std::string environment = "foraging";  // foraging | pursuit
  std::vector<int> grid_sizes;
  std::vector<Condition> conditions = {Condition::Optimal, Condition::Legible};
  int episodes_per_cell = 0;  // 0 resolves to the environment default
  std::uint64_t master_seed = 1;
  double beta = 1.0;
  double gamma = 0.95;
  int step_limit = 0;  // 0 resolves to the environment default
  double solve_tol = 1e-8;
  bool allow_large_pursuit = false;

  bool is_foraging() const { return environment == "foraging"; }
  int resolved_episodes() const;
  int resolved_step_limit() const;
  void validate() const;
};

/// Both conditions receive the identical list; scenario i uses
/// scenario_seed(master_seed, env_code, grid, i).
std::vector<ForagingLayout> presample_foraging(const ExperimentConfig& config, int grid);
std::vector<PursuitScenario> presample_pursuit(const ExperimentConfig& config, int grid);

struct ObjectiveMetric {
  int objective = 0;        // food slot or prey index
  int completion_step = 0;  // 1-indexed environment step of completion
  int segment_start = 0;    // 1-indexed first step of this inference segment
  int steps_to_stable = 0;  // within-segment stable-inference step, 1-indexed
  bool never_inferred = false;
};

struct EpisodeRecord {
  int scenario_id = 0;
  int grid = 0;
  Condition condition = Condition::Optimal;
  bool success = false;
  bool harness_error = false;
  std::string error_reason;
  int total_steps = 0;
  std::vector<ObjectiveMetric> objectives;  // completion order
  std::vector<std::string> events;
};

/// Per-layout solver cache for foraging episodes. Policies are keyed by the
/// present-food mask; the joint stage (optimal policies plus the follower's
/// observation model) solves lazily on first touch, the legible stage only
/// when a legible leader acts under that mask. One planner serves both
/// conditions of a scenario.
class ForagingPlanner {
 public:
  struct GoalTables {
    QFunction joint_q;
    DeterministicPolicy joint_greedy;
    QFunction induced_q;
    DeterministicPolicy legible;
  };
  struct MaskTables {
    ForagingStateSpace space;
    std::vector<int> goals;  // present food slots, ascending
    std::vector<GoalTables> per_goal;
    bool legible_ready = false;
  };

  ForagingPlanner(const ForagingLayout& layout, double gamma, double beta, double solve_tol);

  const ForagingLayout& layout() const { return layout_; }
  const MaskTables& joint_stage(std::uint32_t present_mask);
  const MaskTables& legible_stage(std::uint32_t present_mask);
  /// Position of a food slot within tables.goals.
  static int goal_position(const MaskTables& tables, int food);

 private:
  MaskTables& ensure_joint(std::uint32_t present_mask);

  ForagingLayout layout_;
  double gamma_;
  double beta_;
  double tol_;
  std::map<std::uint32_t, MaskTables> cache_;
};

/// Sentinel for states the induced pursuit chain cannot capture from.
constexpr int kPursuitUnreachable = std::numeric_limits<int>::max();

/// Grid-level pursuit tables from the canonical per-target MDP: induced
/// leader values, the follower's leader-marginal observation model, both
/// joint-greedy components, and steps-to-capture on the induced chain.
/// Shared by every scenario at that grid size. The legible leader re-plans
/// each step from the true state: among the actions that strictly descend
/// steps_left for the target (capture time stays exactly optimal), it plays
/// the one maximizing the observer's Bayes evidence for the target, the log
/// likelihood of the action under the target's goal minus the log of the
/// mean likelihood under the other live goals, with the same row-softmax
/// likelihoods the follower's posterior update applies.
struct PursuitModel {
  int width = 0;
  int height = 0;
  double gamma = 0.0;
  PursuitStateSpace space;
  std::vector<double> m_table;    // max over follower actions of joint q
  std::vector<int> induced_next;  // [state * 5 + leader_action], teammate fixed
  std::vector<int> steps_left;    // induced steps to capture, kPursuitUnreachable if none
  std::vector<int> leader_opt;
  std::vector<int> follower_opt;
};

PursuitModel build_pursuit_model(int width, int height, double gamma, double solve_tol,
                                 bool allow_large = false);

EpisodeRecord run_foraging_episode(ForagingPlanner& planner, int scenario_id, int grid,
                                   Condition condition, const ExperimentConfig& config);
EpisodeRecord run_pursuit_episode(const PursuitScenario& scenario, const PursuitModel& model,
                                  int scenario_id, int grid, Condition condition,
                                  const ExperimentConfig& config);

/// Reusable pursuit models keyed by grid. run_experiment fills missing
/// entries and lists the grids it had to build, so callers can persist them.
struct PursuitModelStore {
  std::map<int, PursuitModel> by_grid;
  std::vector<int> built;
};

/// Test seam: runs before each episode; an exception it throws is treated
/// as that episode's harness error.
struct ExperimentHooks {
  std::function<void(int grid, int scenario_id, Condition condition)> before_episode;
};

struct ExperimentDataset {
  ExperimentConfig config;
  std::vector<EpisodeRecord> records;  // ordered by grid, scenario, condition
  std::vector<std::string> exclusions;
  std::vector<std::pair<std::string, double>> timings;  // stage, seconds
};

/// Full cross product of grids x conditions x presampled scenarios. A
/// harness error in any condition excludes that scenario id from every
/// condition and logs the reason; episodes are deterministic given the
/// config, so reruns reproduce the dataset exactly.
ExperimentDataset run_experiment(const ExperimentConfig& config, PursuitModelStore* models = nullptr,
                                 const ExperimentHooks& hooks = {});

struct StatRow {
  int grid = 0;
  std::string metric;
  CellSummary cell;
};

struct StatReport {
  std::vector<StatRow> rows;
  std::vector<std::string> warnings;
  std::size_t exclusion_count = 0;
};

/// Metric extraction shared by the summary and report paths. Metrics:
/// completion_steps (total steps, step-limit episodes included at the
/// limit), inference_steps (per-objective stable-inference steps averaged
/// within the episode first; episodes with no completed objective skipped),
/// success_rate.
std::vector<double> metric_values(const std::vector<EpisodeRecord>& records, int grid,
                                  Condition condition, const std::string& metric);
extern const std::vector<std::string> kMetricNames;

StatReport summarize_records(const std::vector<EpisodeRecord>& records, std::size_t exclusion_count);
StatReport summarize_dataset(const ExperimentDataset& dataset);

}  // namespace legiteam
