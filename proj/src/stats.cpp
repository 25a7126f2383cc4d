#include "legiteam/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>

#include "legiteam/rng.hpp"

namespace legiteam {
namespace {

constexpr std::size_t kExactLimit = 12;     // pooled size bound for enumeration
constexpr int kKsReplicates = 10000;
constexpr std::uint64_t kKsCalibrationSeed = 987654321ull;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Midranks over the pooled sample, 1-based.
std::vector<double> midranks(const std::vector<double>& pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

bool has_ties(std::vector<double> pooled) {
  std::sort(pooled.begin(), pooled.end());
  return std::adjacent_find(pooled.begin(), pooled.end()) != pooled.end();
}

// Sum over tied groups of t^3 - t, for the rank variance correction.
double tie_term(std::vector<double> pooled) {
  std::sort(pooled.begin(), pooled.end());
  double total = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j + 1 < pooled.size() && pooled[j + 1] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    total += t * t * t - t;
    i = j + 1;
  }
  return total;
}

// Exact p over all C(n, n_a) label assignments; tie-free so every
// assignment is equally likely and U values are integers.
double exact_p(std::size_t n_a, std::size_t n_b, double u_obs, Alternative alternative) {
  const std::size_t n = n_a + n_b;
  const double mu = 0.5 * static_cast<double>(n_a) * static_cast<double>(n_b);
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n_a), true);
  std::sort(pick.begin(), pick.end(), std::greater<bool>());
  std::uint64_t total = 0;
  std::uint64_t extreme = 0;
  const double eps = 1e-9;
  do {
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pick[i]) rank_sum += static_cast<double>(i + 1);
    }
    const double u = rank_sum - 0.5 * static_cast<double>(n_a) * static_cast<double>(n_a + 1);
    bool counted = false;
    switch (alternative) {
      case Alternative::TwoSided:
        counted = std::fabs(u - mu) >= std::fabs(u_obs - mu) - eps;
        break;
      case Alternative::Less:
        counted = u <= u_obs + eps;
        break;
      case Alternative::Greater:
        counted = u >= u_obs - eps;
        break;
    }
    ++total;
    if (counted) ++extreme;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace

MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                                 Alternative alternative) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
  for (double v : a) {
    if (!std::isfinite(v)) throw std::invalid_argument("mann_whitney_u: non-finite value");
  }
  for (double v : b) {
    if (!std::isfinite(v)) throw std::invalid_argument("mann_whitney_u: non-finite value");
  }
  const std::size_t n_a = a.size();
  const std::size_t n_b = b.size();
  const std::size_t n = n_a + n_b;
  std::vector<double> pooled;
  pooled.reserve(n);
  pooled.insert(pooled.end(), a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<double> ranks = midranks(pooled);
  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < n_a; ++i) rank_sum_a += ranks[i];

  MannWhitneyResult result;
  result.u = rank_sum_a - 0.5 * static_cast<double>(n_a) * static_cast<double>(n_a + 1);

  const bool tied = has_ties(pooled);
  if (n <= kExactLimit && !tied) {
    result.exact = true;
    result.p = exact_p(n_a, n_b, result.u, alternative);
    return result;
  }

  const double mu = 0.5 * static_cast<double>(n_a) * static_cast<double>(n_b);
  const double nn = static_cast<double>(n);
  double variance = static_cast<double>(n_a) * static_cast<double>(n_b) / 12.0 *
                    ((nn + 1.0) - tie_term(pooled) / (nn * (nn - 1.0)));
  if (variance <= 0.0) {
    result.degenerate = true;
    result.p = 1.0;
    return result;
  }
  const double sigma = std::sqrt(variance);
  double p = 1.0;
  switch (alternative) {
    case Alternative::TwoSided: {
      const double z = std::max(0.0, std::fabs(result.u - mu) - 0.5) / sigma;
      p = std::min(1.0, 2.0 * (1.0 - normal_cdf(z)));
      break;
    }
    case Alternative::Less:
      p = normal_cdf((result.u - mu + 0.5) / sigma);
      break;
    case Alternative::Greater:
      p = 1.0 - normal_cdf((result.u - mu - 0.5) / sigma);
      break;
  }
  result.p = p;
  return result;
}

namespace {

double lilliefors_d(std::vector<double> sample, double mean, double sd) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double z = (sample[i] - mean) / sd;
    const double cdf = normal_cdf(z);
    const double upper = static_cast<double>(i + 1) / n - cdf;
    const double lower = cdf - static_cast<double>(i) / n;
    d = std::max(d, std::max(upper, lower));
  }
  return d;
}

// Null distribution of the Lilliefors statistic for sample size n, from
// seeded replicates. The cache persists per process.
const std::vector<double>& ks_null_table(std::size_t n) {
  static std::map<std::size_t, std::vector<double>> cache;
  static std::mutex guard;
  std::lock_guard<std::mutex> lock(guard);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  SeededRng rng(kKsCalibrationSeed + static_cast<std::uint64_t>(n));
  std::vector<double> table;
  table.reserve(kKsReplicates);
  std::vector<double> draw(n);
  for (int rep = 0; rep < kKsReplicates; ++rep) {
    for (std::size_t i = 0; i < n; ++i) draw[i] = rng.normal();
    const double mean = sample_mean(draw);
    const double sd = sample_sd(draw);
    table.push_back(lilliefors_d(draw, mean, sd));
  }
  std::sort(table.begin(), table.end());
  return cache.emplace(n, std::move(table)).first->second;
}

}  // namespace

KsResult ks_normality(const std::vector<double>& sample) {
  if (sample.size() < 4) throw std::invalid_argument("ks_normality: need at least 4 observations");
  for (double v : sample) {
    if (!std::isfinite(v)) throw std::invalid_argument("ks_normality: non-finite value");
  }
  const double mean = sample_mean(sample);
  const double sd = sample_sd(sample);
  KsResult result;
  if (sd <= 0.0) {
    result.d = 1.0;
    result.p = 0.0;
    result.degenerate = true;
    return result;
  }
  result.d = lilliefors_d(sample, mean, sd);
  const std::vector<double>& table = ks_null_table(sample.size());
  const auto at = std::lower_bound(table.begin(), table.end(), result.d - 1e-12);
  const std::uint64_t count = static_cast<std::uint64_t>(table.end() - at);
  result.p = static_cast<double>(count + 1) / static_cast<double>(table.size() + 1);
  return result;
}

double sample_mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("sample_mean: empty sample");
  double total = 0.0;
  for (double x : v) total += x;
  return total / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("sample_sd: need at least 2 observations");
  const double mean = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double standard_error(const std::vector<double>& v) {
  return sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
}

CellSummary summarize_cell(const std::vector<double>& optimal, const std::vector<double>& legible) {
  CellSummary cell;
  cell.n_optimal = optimal.size();
  cell.n_legible = legible.size();
  cell.mean_optimal = sample_mean(optimal);
  cell.mean_legible = sample_mean(legible);
  cell.se_optimal = optimal.size() >= 2 ? standard_error(optimal) : 0.0;
  cell.se_legible = legible.size() >= 2 ? standard_error(legible) : 0.0;
  cell.mwu = mann_whitney_u(optimal, legible, Alternative::TwoSided);
  if (optimal.size() >= 4 && legible.size() >= 4) {
    cell.has_ks = true;
    cell.ks_optimal = ks_normality(optimal);
    cell.ks_legible = ks_normality(legible);
  }
  return cell;
}

}  // namespace legiteam
