#pragma once

// Reference baselines and ground-truth evaluation of a selection on labeled
// data. Truth for a configuration is the AUROC of its detector trained
// directly (no hypernetwork) on the same scaled data.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyper/autoencoder.hpp"
#include "hyper/hp_config.hpp"
#include "hyper/meta_offline.hpp"
#include "hyper/online_search.hpp"

namespace hyper {

// Library defaults mapped onto the grid: nearest depth, compression, dropout
// and log weight decay to L = 4, c = 1.0, dropout 0.2, no weight decay.
const HpConfig& baseline_default(const HpGrid& grid);
const HpConfig& baseline_global_best(const MetaStore& store, const HpGrid& grid);

struct RandomBaseline {
  double expected_performance = 0.0;  // mean over the grid
  double expected_rank = 0.0;         // mean normalized rank
};
RandomBaseline baseline_random(std::span<const double> perf_row);

struct TruthTable {
  std::vector<HpConfig> configs;  // the task's deduplicated grid
  std::vector<double> auroc;
  std::vector<double> rank;       // normalized, 0 = best

  std::size_t index(const HpConfig& c) const;
};

// Trains every grid configuration from scratch; configuration j uses the
// stream derive_seed(seed, "scratch", j).
TruthTable scratch_truth(const Tensor& x, std::span<const int> labels, const HpGrid& grid,
                         const ScratchTrainOptions& options, std::uint64_t seed);

struct MethodResult {
  std::string method;  // random, default, global_best, hyper
  std::string config;  // empty for random
  double auroc = 0.0;
  double rank = 0.0;
};

struct TaskEvaluation {
  std::string task;
  std::vector<MethodResult> methods;
  const MethodResult& method(const std::string& name) const;
};

TaskEvaluation evaluate_selection(const std::string& task, const TruthTable& truth, const HpConfig& selected,
                                  const MetaStore& store, const HpGrid& grid);

struct EvaluationSummary {
  std::vector<TaskEvaluation> tasks;
  double mean_rank(const std::string& method) const;
  // Tasks on which hyper's rank is strictly below the random expectation /
  // at or below the default's rank.
  int beats_random() const;
  int ties_or_beats_default() const;
  // Paired two-sided Wilcoxon p-value of hyper's AUROC against `method`.
  double wilcoxon_vs(const std::string& method) const;
  std::string report() const;
};

}  // namespace hyper
