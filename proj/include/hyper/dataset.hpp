#pragma once

// CSV datasets and the synthetic testbed.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hyper/meta_offline.hpp"
#include "hyper/tensor.hpp"

namespace hyper {

struct Dataset {
  std::string name;
  std::vector<std::string> columns;  // feature names
  Tensor x;                          // scaled to [0, 1] per column
  std::optional<std::vector<int>> labels;
  std::vector<double> col_min, col_max;  // before scaling
  std::vector<std::string> warnings;

  bool labeled() const { return labels.has_value(); }
  HistoricalTask task() const;
};

// Header row, numeric feature columns, optional final "label" column in
// {0, 1}. Features are min-max scaled per column (constant columns -> 0).
Dataset parse_dataset(const std::string& text, std::string name = "dataset");
Dataset load_dataset(const std::filesystem::path& path);
// Writes the scaled features (and labels when present) with full precision.
std::string format_dataset(const Dataset& d);
void save_dataset(const Dataset& d, const std::filesystem::path& path);

// In-place min-max scaling; returns per-column (min, max).
std::pair<std::vector<double>, std::vector<double>> minmax_scale(Tensor& x);

struct SynthOptions {
  std::size_t n_samples = 1024;
  int dim_min = 6;
  int dim_max = 10;
  double contamination = 0.1;
  // Rank is drawn from [1, rank_fraction * F].
  double rank_fraction = 0.5;
  double noise_min = 0.05, noise_max = 0.2;
  // Distance of the shifted outlier cluster, in units of the inlier spread.
  double shift_min = 0.3, shift_max = 1.0;
  // Uniform outliers fill the inlier box shrunk by this factor around its centre.
  double box_scale = 0.8;
};

// Inliers on a random low-rank Gaussian manifold; outliers split between
// uniform points in the data box and a shifted Gaussian cluster. Tasks differ
// in dimension, rank and noise. Task t depends only on (seed, t).
std::vector<Dataset> synth_testbed(int n_tasks, const SynthOptions& options, std::uint64_t seed);

}  // namespace hyper
