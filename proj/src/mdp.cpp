#include "legiteam/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace legiteam {

namespace {

void check_shape(int n_states, int n_actions, double gamma, const std::vector<double>& rewards) {
  if (n_states <= 0 || n_actions <= 0) throw std::invalid_argument("TabularMDP: state and action counts must be positive");
  if (!(gamma >= 0.0) || gamma >= 1.0) throw std::invalid_argument("TabularMDP: gamma must lie in [0, 1)");
  const std::size_t rows = static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions);
  if (rewards.size() != rows) throw std::invalid_argument("TabularMDP: rewards size must be n_states * n_actions");
  for (double r : rewards) {
    if (!std::isfinite(r)) throw std::invalid_argument("TabularMDP: rewards must be finite");
  }
}

constexpr double kRowSumTol = 1e-9;

void check_row_sum(double sum, std::size_t row) {
  if (std::abs(sum - 1.0) > kRowSumTol) {
    std::ostringstream msg;
    msg << "TabularMDP: transition row " << row << " sums to " << sum << ", expected 1 within " << kRowSumTol;
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

TabularMDP::TabularMDP(std::shared_ptr<const TransitionTable> table, double gamma, std::vector<double> rewards)
    : table_(std::move(table)), gamma_(gamma), rewards_(std::move(rewards)) {}

TabularMDP TabularMDP::from_dense(int n_states, int n_actions, double gamma,
                                  std::vector<double> rewards, std::vector<double> probs) {
  check_shape(n_states, n_actions, gamma, rewards);
  const std::size_t rows = static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions);
  const std::size_t ns = static_cast<std::size_t>(n_states);
  if (probs.size() != rows * ns) throw std::invalid_argument("TabularMDP: dense table size must be n_states^2 * n_actions");
  for (std::size_t row = 0; row < rows; ++row) {
    double sum = 0.0;
    for (std::size_t y = 0; y < ns; ++y) {
      const double p = probs[row * ns + y];
      if (!(p >= 0.0)) throw std::invalid_argument("TabularMDP: transition probabilities must be nonnegative");
      sum += p;
    }
    check_row_sum(sum, row);
  }
  auto table = std::make_shared<TransitionTable>();
  table->mode = TransitionTable::Mode::Dense;
  table->n_states = n_states;
  table->n_actions = n_actions;
  table->dense = std::move(probs);
  return TabularMDP(std::move(table), gamma, std::move(rewards));
}

TabularMDP TabularMDP::from_sparse(int n_states, int n_actions, double gamma,
                                   std::vector<double> rewards,
                                   const std::vector<std::vector<TransitionEntry>>& rows) {
  check_shape(n_states, n_actions, gamma, rewards);
  const std::size_t n_rows = static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions);
  if (rows.size() != n_rows) throw std::invalid_argument("TabularMDP: sparse table must have n_states * n_actions rows");
  auto table = std::make_shared<TransitionTable>();
  table->mode = TransitionTable::Mode::Sparse;
  table->n_states = n_states;
  table->n_actions = n_actions;
  table->row_offsets.resize(n_rows + 1, 0);
  std::size_t total = 0;
  for (std::size_t row = 0; row < n_rows; ++row) total += rows[row].size();
  table->entries.reserve(total);
  for (std::size_t row = 0; row < n_rows; ++row) {
    double sum = 0.0;
    for (const TransitionEntry& e : rows[row]) {
      if (e.next < 0 || e.next >= n_states) throw std::invalid_argument("TabularMDP: sparse entry state out of range");
      if (!(e.prob >= 0.0)) throw std::invalid_argument("TabularMDP: transition probabilities must be nonnegative");
      sum += e.prob;
      table->entries.push_back(e);
    }
    check_row_sum(sum, row);
    table->row_offsets[row + 1] = table->entries.size();
  }
  return TabularMDP(std::move(table), gamma, std::move(rewards));
}

TabularMDP TabularMDP::deterministic(int n_states, int n_actions, double gamma,
                                     std::vector<double> rewards, std::vector<int> next) {
  check_shape(n_states, n_actions, gamma, rewards);
  const std::size_t n_rows = static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions);
  if (next.size() != n_rows) throw std::invalid_argument("TabularMDP: successor table must have n_states * n_actions rows");
  for (int y : next) {
    if (y < 0 || y >= n_states) throw std::invalid_argument("TabularMDP: successor state out of range");
  }
  auto table = std::make_shared<TransitionTable>();
  table->mode = TransitionTable::Mode::Deterministic;
  table->n_states = n_states;
  table->n_actions = n_actions;
  table->next = std::move(next);
  return TabularMDP(std::move(table), gamma, std::move(rewards));
}

TabularMDP TabularMDP::with_rewards(std::vector<double> rewards) const {
  if (!table_) throw std::invalid_argument("TabularMDP: with_rewards on an empty MDP");
  check_shape(n_states(), n_actions(), gamma_, rewards);
  return TabularMDP(table_, gamma_, std::move(rewards));
}

TabularMDP TabularMDP::from_shared(std::shared_ptr<const TransitionTable> table, double gamma,
                                   std::vector<double> rewards) {
  if (!table) throw std::invalid_argument("TabularMDP: null transition table");
  check_shape(table->n_states, table->n_actions, gamma, rewards);
  return TabularMDP(std::move(table), gamma, std::move(rewards));
}

bool TabularMDP::is_absorbing(int x) const {
  const TransitionTable& t = *table_;
  const std::size_t ns = static_cast<std::size_t>(t.n_states);
  for (int a = 0; a < t.n_actions; ++a) {
    if (reward(x, a) != 0.0) return false;
    const std::size_t row = static_cast<std::size_t>(x) * static_cast<std::size_t>(t.n_actions) + static_cast<std::size_t>(a);
    switch (t.mode) {
      case TransitionTable::Mode::Dense: {
        if (t.dense[row * ns + static_cast<std::size_t>(x)] < 1.0 - kRowSumTol) return false;
        break;
      }
      case TransitionTable::Mode::Sparse: {
        double self = 0.0;
        for (std::size_t i = t.row_offsets[row]; i < t.row_offsets[row + 1]; ++i) {
          if (t.entries[i].next == x) self += t.entries[i].prob;
        }
        if (self < 1.0 - kRowSumTol) return false;
        break;
      }
      case TransitionTable::Mode::Deterministic: {
        if (t.next[row] != x) return false;
        break;
      }
    }
  }
  return true;
}

double QFunction::state_value(int x) const {
  double best = q[static_cast<std::size_t>(x) * static_cast<std::size_t>(n_actions)];
  for (int a = 1; a < n_actions; ++a) best = std::max(best, at(x, a));
  return best;
}

namespace {

/// One application of the Bellman optimality operator on state values:
/// out[x] = max_a r(x,a) + gamma * E[v(y)]. Returns sup |out - v|.
double bellman_sweep(const TabularMDP& mdp, const std::vector<double>& v, std::vector<double>& out) {
  const TransitionTable& t = mdp.transitions();
  const int S = t.n_states;
  const int A = t.n_actions;
  const double g = mdp.gamma();
  const std::vector<double>& r = mdp.rewards();
  double delta = 0.0;
  switch (t.mode) {
    case TransitionTable::Mode::Dense: {
      const std::size_t ns = static_cast<std::size_t>(S);
      for (int x = 0; x < S; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
          const std::size_t row = static_cast<std::size_t>(x) * static_cast<std::size_t>(A) + static_cast<std::size_t>(a);
          const double* p = t.dense.data() + row * ns;
          double ev = 0.0;
          for (int y = 0; y < S; ++y) ev += p[y] * v[static_cast<std::size_t>(y)];
          best = std::max(best, r[row] + g * ev);
        }
        delta = std::max(delta, std::abs(best - v[static_cast<std::size_t>(x)]));
        out[static_cast<std::size_t>(x)] = best;
      }
      break;
    }
    case TransitionTable::Mode::Sparse: {
      for (int x = 0; x < S; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
          const std::size_t row = static_cast<std::size_t>(x) * static_cast<std::size_t>(A) + static_cast<std::size_t>(a);
          double ev = 0.0;
          for (std::size_t i = t.row_offsets[row]; i < t.row_offsets[row + 1]; ++i) {
            ev += t.entries[i].prob * v[static_cast<std::size_t>(t.entries[i].next)];
          }
          best = std::max(best, r[row] + g * ev);
        }
        delta = std::max(delta, std::abs(best - v[static_cast<std::size_t>(x)]));
        out[static_cast<std::size_t>(x)] = best;
      }
      break;
    }
    case TransitionTable::Mode::Deterministic: {
      for (int x = 0; x < S; ++x) {
        const std::size_t base = static_cast<std::size_t>(x) * static_cast<std::size_t>(A);
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
          best = std::max(best, r[base + static_cast<std::size_t>(a)] + g * v[static_cast<std::size_t>(t.next[base + static_cast<std::size_t>(a)])]);
        }
        delta = std::max(delta, std::abs(best - v[static_cast<std::size_t>(x)]));
        out[static_cast<std::size_t>(x)] = best;
      }
      break;
    }
  }
  return delta;
}

/// q(x,a) = r(x,a) + gamma * E[v(y)] for every row.
void assemble_q(const TabularMDP& mdp, const std::vector<double>& v, QFunction& q) {
  const TransitionTable& t = mdp.transitions();
  const int S = t.n_states;
  const int A = t.n_actions;
  const double g = mdp.gamma();
  const std::vector<double>& r = mdp.rewards();
  q.n_states = S;
  q.n_actions = A;
  q.q.assign(static_cast<std::size_t>(S) * static_cast<std::size_t>(A), 0.0);
  switch (t.mode) {
    case TransitionTable::Mode::Dense: {
      const std::size_t ns = static_cast<std::size_t>(S);
      for (std::size_t row = 0; row < q.q.size(); ++row) {
        const double* p = t.dense.data() + row * ns;
        double ev = 0.0;
        for (int y = 0; y < S; ++y) ev += p[y] * v[static_cast<std::size_t>(y)];
        q.q[row] = r[row] + g * ev;
      }
      break;
    }
    case TransitionTable::Mode::Sparse: {
      for (std::size_t row = 0; row < q.q.size(); ++row) {
        double ev = 0.0;
        for (std::size_t i = t.row_offsets[row]; i < t.row_offsets[row + 1]; ++i) {
          ev += t.entries[i].prob * v[static_cast<std::size_t>(t.entries[i].next)];
        }
        q.q[row] = r[row] + g * ev;
      }
      break;
    }
    case TransitionTable::Mode::Deterministic: {
      for (std::size_t row = 0; row < q.q.size(); ++row) {
        q.q[row] = r[row] + g * v[static_cast<std::size_t>(t.next[row])];
      }
      break;
    }
  }
}

}  // namespace

SolveResult value_iteration(const TabularMDP& mdp, const SolveOptions& opts) {
  if (mdp.n_states() == 0) throw std::invalid_argument("value_iteration: empty MDP");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  const std::size_t ns = static_cast<std::size_t>(mdp.n_states());
  std::vector<double> v(ns, 0.0);
  std::vector<double> next(ns, 0.0);
  SolveResult result;
  double delta = std::numeric_limits<double>::infinity();
  while (result.sweeps < opts.max_sweeps) {
    delta = bellman_sweep(mdp, v, next);
    std::swap(v, next);
    ++result.sweeps;
    if (opts.record_sweep_residuals) result.sweep_residuals.push_back(delta);
    if (delta <= opts.tol) break;
  }
  if (delta > opts.tol) {
    std::ostringstream msg;
    msg << "value_iteration: sweep cap " << opts.max_sweeps << " exceeded, final residual " << delta
        << " above tol " << opts.tol;
    throw std::runtime_error(msg.str());
  }
  assemble_q(mdp, v, result.q);
  result.residual = bellman_residual(mdp, result.q);
  return result;
}

DeterministicPolicy greedy_policy(const QFunction& q) {
  if (q.n_states <= 0 || q.n_actions <= 0) throw std::invalid_argument("greedy_policy: empty q");
  DeterministicPolicy pi;
  pi.actions.resize(static_cast<std::size_t>(q.n_states));
  for (int x = 0; x < q.n_states; ++x) {
    int best_a = 0;
    double best = q.at(x, 0);
    for (int a = 1; a < q.n_actions; ++a) {
      const double val = q.at(x, a);
      if (val > best) {
        best = val;
        best_a = a;
      }
    }
    pi.actions[static_cast<std::size_t>(x)] = best_a;
  }
  return pi;
}

StochasticPolicy softmax_policy(const QFunction& q, double beta) {
  if (q.n_states <= 0 || q.n_actions <= 0) throw std::invalid_argument("softmax_policy: empty q");
  if (!(beta >= 0.0)) throw std::invalid_argument("softmax_policy: beta must be nonnegative");
  StochasticPolicy pi;
  pi.n_states = q.n_states;
  pi.n_actions = q.n_actions;
  pi.rows.resize(q.q.size());
  for (int x = 0; x < q.n_states; ++x) {
    double mx = q.at(x, 0);
    for (int a = 1; a < q.n_actions; ++a) mx = std::max(mx, q.at(x, a));
    double sum = 0.0;
    const std::size_t base = static_cast<std::size_t>(x) * static_cast<std::size_t>(q.n_actions);
    for (int a = 0; a < q.n_actions; ++a) {
      const double w = std::exp(beta * (q.at(x, a) - mx));
      pi.rows[base + static_cast<std::size_t>(a)] = w;
      sum += w;
    }
    for (int a = 0; a < q.n_actions; ++a) pi.rows[base + static_cast<std::size_t>(a)] /= sum;
  }
  return pi;
}

namespace {

/// Fixed-point iteration for v = r_pi + gamma * P_pi v. prob(x, a) supplies
/// the policy weight; rows with zero weight are skipped.
template <typename PolicyProb>
std::vector<double> evaluate_policy_impl(const TabularMDP& mdp, PolicyProb prob, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("evaluate_policy: tol must be positive");
  const TransitionTable& t = mdp.transitions();
  const int S = t.n_states;
  const int A = t.n_actions;
  const double g = mdp.gamma();
  const std::vector<double>& r = mdp.rewards();
  std::vector<double> v(static_cast<std::size_t>(S), 0.0);
  std::vector<double> next(static_cast<std::size_t>(S), 0.0);
  const long cap = 10000000;
  for (long iter = 0; iter < cap; ++iter) {
    double delta = 0.0;
    for (int x = 0; x < S; ++x) {
      double acc = 0.0;
      for (int a = 0; a < A; ++a) {
        const double w = prob(x, a);
        if (w == 0.0) continue;
        const std::size_t row = static_cast<std::size_t>(x) * static_cast<std::size_t>(A) + static_cast<std::size_t>(a);
        double ev = 0.0;
        switch (t.mode) {
          case TransitionTable::Mode::Dense: {
            const double* p = t.dense.data() + row * static_cast<std::size_t>(S);
            for (int y = 0; y < S; ++y) ev += p[y] * v[static_cast<std::size_t>(y)];
            break;
          }
          case TransitionTable::Mode::Sparse: {
            for (std::size_t i = t.row_offsets[row]; i < t.row_offsets[row + 1]; ++i) {
              ev += t.entries[i].prob * v[static_cast<std::size_t>(t.entries[i].next)];
            }
            break;
          }
          case TransitionTable::Mode::Deterministic: {
            ev = v[static_cast<std::size_t>(t.next[row])];
            break;
          }
        }
        acc += w * (r[row] + g * ev);
      }
      delta = std::max(delta, std::abs(acc - v[static_cast<std::size_t>(x)]));
      next[static_cast<std::size_t>(x)] = acc;
    }
    std::swap(v, next);
    if (delta <= tol) return v;
  }
  throw std::runtime_error("evaluate_policy: fixed-point iteration did not converge");
}

}  // namespace

std::vector<double> evaluate_policy(const TabularMDP& mdp, const DeterministicPolicy& pi, double tol) {
  if (pi.actions.size() != static_cast<std::size_t>(mdp.n_states())) {
    throw std::invalid_argument("evaluate_policy: policy size must match n_states");
  }
  for (int a : pi.actions) {
    if (a < 0 || a >= mdp.n_actions()) throw std::invalid_argument("evaluate_policy: policy action out of range");
  }
  return evaluate_policy_impl(
      mdp, [&pi](int x, int a) { return pi.actions[static_cast<std::size_t>(x)] == a ? 1.0 : 0.0; }, tol);
}

std::vector<double> evaluate_policy(const TabularMDP& mdp, const StochasticPolicy& pi, double tol) {
  if (pi.n_states != mdp.n_states() || pi.n_actions != mdp.n_actions()) {
    throw std::invalid_argument("evaluate_policy: policy shape must match the MDP");
  }
  return evaluate_policy_impl(mdp, [&pi](int x, int a) { return pi.prob(x, a); }, tol);
}

double bellman_residual(const TabularMDP& mdp, const QFunction& q) {
  if (q.n_states != mdp.n_states() || q.n_actions != mdp.n_actions()) {
    throw std::invalid_argument("bellman_residual: q shape must match the MDP");
  }
  std::vector<double> v(static_cast<std::size_t>(q.n_states));
  for (int x = 0; x < q.n_states; ++x) v[static_cast<std::size_t>(x)] = q.state_value(x);
  QFunction tq;
  assemble_q(mdp, v, tq);
  double worst = 0.0;
  for (std::size_t i = 0; i < q.q.size(); ++i) worst = std::max(worst, std::abs(tq.q[i] - q.q[i]));
  return worst;
}

}  // namespace legiteam
