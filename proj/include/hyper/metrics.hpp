#pragma once

// Evaluation metrics: AUROC, normalized rank among competitors, and the
// paired Wilcoxon signed-rank test.

#include <span>
#include <vector>

namespace hyper {

// Ranks 1..n in ascending order of `values`; tied values share the average
// of the ranks they occupy.
std::vector<double> average_ranks(std::span<const double> values);

// P(score of an outlier > score of an inlier) + 1/2 P(equal), from the rank
// sum of the outliers. Labels: 1 = outlier, 0 = inlier.
// Throws UndefinedMetricError when only one class is present.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Normalized rank of each entry among all entries, higher performance first:
// 0 for the best, 1 for the worst, ties averaged. Needs at least two entries.
std::vector<double> roc_rank(std::span<const double> performances);

// Pearson correlation of average ranks; 0 when either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

struct WilcoxonResult {
  double statistic = 0.0;  // sum of ranks of positive differences a - b
  double p_value = 1.0;    // two-sided
  int n = 0;               // non-zero differences
  bool exact = false;
};

// Exact permutation distribution for n <= 20 non-zero differences, normal
// approximation with tie correction above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

}  // namespace hyper
