#pragma once

#include <cstddef>
#include <vector>

namespace legiteam {

enum class Alternative { TwoSided, Less, Greater };

struct MannWhitneyResult {
  double u = 0.0;  // U statistic for sample a, midranks under ties
  double p = 1.0;
  bool exact = false;       // full enumeration rather than normal approximation
  bool degenerate = false;  // zero rank variance, p pinned to 1
};

/// Mann-Whitney U test. Exact two-label enumeration when the pooled size is
/// at most 12 and the data are tie-free; otherwise a normal approximation
/// with tie-corrected variance and continuity correction. `Less` tests the
/// alternative that sample a is stochastically smaller than sample b.
MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                                 Alternative alternative = Alternative::TwoSided);

struct KsResult {
  double d = 0.0;
  double p = 0.0;
  bool degenerate = false;  // zero sample variance, p pinned to 0
};

/// Kolmogorov-Smirnov distance against a normal fitted to the sample's own
/// mean and standard deviation. Estimated parameters shrink the null
/// distribution of D, so the p-value comes from a seeded Monte-Carlo
/// calibration (10^4 replicates per sample size, cached). Requires n >= 4.
KsResult ks_normality(const std::vector<double>& sample);

double sample_mean(const std::vector<double>& v);
/// Unbiased (n-1) standard deviation.
double sample_sd(const std::vector<double>& v);
double standard_error(const std::vector<double>& v);

/// One experiment cell: both condition samples of one metric.
struct CellSummary {
  std::size_t n_optimal = 0;
  std::size_t n_legible = 0;
  double mean_optimal = 0.0;
  double se_optimal = 0.0;
  double mean_legible = 0.0;
  double se_legible = 0.0;
  MannWhitneyResult mwu;  // two-sided, U for the optimal sample
  bool has_ks = false;
  KsResult ks_optimal;
  KsResult ks_legible;
};

CellSummary summarize_cell(const std::vector<double>& optimal, const std::vector<double>& legible);

}  // namespace legiteam
