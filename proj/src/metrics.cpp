#include "hyper/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "hyper/errors.hpp"

namespace hyper {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j hold ranks i+1..j+1
    const double r = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError(std::to_string(scores.size()) + " scores for " + std::to_string(labels.size()) + " labels");
  }
  for (double s : scores)
    if (!std::isfinite(s)) throw NumericError("non-finite outlier score");
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0, pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      rank_sum += ranks[i];
      pos += 1.0;
    } else if (labels[i] == 0) {
      neg += 1.0;
    } else {
      throw ContractError("labels must be 0 or 1");
    }
  }
  if (pos == 0.0 || neg == 0.0) throw UndefinedMetricError("AUROC needs both inliers and outliers");
  const double u = rank_sum - pos * (pos + 1.0) / 2.0;
  return u / (pos * neg);
}

std::vector<double> roc_rank(std::span<const double> performances) {
  const std::size_t m = performances.size();
  if (m < 2) throw ContractError("ranking needs at least two entries");
  std::vector<double> negated(performances.begin(), performances.end());
  for (double& v : negated) v = -v;
  auto ranks = average_ranks(negated);
  for (double& r : ranks) r = (r - 1.0) / static_cast<double>(m - 1);
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("correlated samples differ in length");
  if (a.size() < 2) throw ContractError("correlation needs at least two pairs");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("paired samples of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) diffs.push_back(a[i] - b[i]);
  WilcoxonResult out;
  out.n = static_cast<int>(diffs.size());
  if (diffs.empty()) return out;

  std::vector<double> mags(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) mags[i] = std::abs(diffs[i]);
  const auto ranks = average_ranks(mags);
  for (std::size_t i = 0; i < diffs.size(); ++i)
    if (diffs[i] > 0) out.statistic += ranks[i];

  const auto n = diffs.size();
  if (n <= 20) {
    // Average ranks are multiples of 1/2, so doubled ranks are integers and
    // the null distribution of the doubled statistic is a subset-sum count.
    std::vector<int> twice(n);
    int total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      twice[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      total += twice[i];
    }
    std::vector<std::uint64_t> count(static_cast<std::size_t>(total) + 1, 0);
    count[0] = 1;
    for (int r : twice)
      for (int s = total; s >= r; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];
    const int w = static_cast<int>(std::lround(2.0 * out.statistic));
    std::uint64_t lower = 0, upper = 0;
    for (int s = 0; s <= total; ++s) {
      if (s <= w) lower += count[static_cast<std::size_t>(s)];
      if (s >= w) upper += count[static_cast<std::size_t>(s)];
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    out.p_value = std::min(1.0, 2.0 * static_cast<double>(std::min(lower, upper)) / all);
    out.exact = true;
    return out;
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  std::vector<double> sorted = mags;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    var -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  if (var <= 0.0) return out;
  const double z = (out.statistic - mean) / std::sqrt(var);
  out.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
  return out;
}

}  // namespace hyper
