#pragma once

// Test-time model selection on an unlabeled dataset: a fresh hypernetwork is
// trained around the current configuration, then the proxy validator scores
// candidate configurations from the generated weights and moves the current
// configuration and sampling radius.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hyper/hp_config.hpp"
#include "hyper/hypernet.hpp"
#include "hyper/meta_offline.hpp"
#include "hyper/tensor.hpp"

namespace hyper {

// Perturbation dimensions: depth (in steps of the depth axis), compression,
// dropout, log10(weight decay + 1e-8).
inline constexpr std::size_t kSearchDims = 4;
using Sigma = std::array<double, kSearchDims>;

struct SigmaGrid {
  std::array<std::vector<double>, kSearchDims> values;

  // Five geometric points per dimension.
  static SigmaGrid standard();
  Sigma middle() const;
  bool contains(const Sigma& s) const;
};

// Draws eps ~ N(0, diag(sigma^2)), perturbs `lambda` and maps the result to a
// grid member: depth is snapped to the nearest axis step and rejected outside
// the axis, the other dimensions are clamped to their axis range and snapped
// to the nearest axis value. Returns nullopt after 32 rejections in a row.
std::optional<std::size_t> try_sample_local(const HpGrid& grid, const HpConfig& lambda, const Sigma& sigma,
                                            std::mt19937_64& rng);
// As above but throws SamplingRangeError instead of returning nullopt.
const HpConfig& sample_local(const HpGrid& grid, const HpConfig& lambda, const Sigma& sigma, std::mt19937_64& rng);

// Differential entropy of a factorized Gaussian.
double gaussian_entropy(std::span<const double> sigma);

// f_val predictions for one test set. The data embedding is computed once;
// predictions are cached per configuration until the hypernetwork changes.
class ProxyScorer {
 public:
  ProxyScorer(const MetaStore& store, const Tensor& x);

  double predict(const HyperNet& net, const HpConfig& config);
  void invalidate() { cache_.clear(); }
  std::size_t evaluations() const { return evaluations_; }
  const std::vector<double>& data_embedding() const { return data_emb_; }

 private:
  const MetaStore* store_;
  const Tensor* x_;
  std::vector<double> data_emb_;
  std::unordered_map<std::string, double> cache_;
  std::size_t evaluations_ = 0;
};

using Predictor = std::function<double(const HpConfig&)>;

// Mean of `predict` over `v` local samples around `lambda` plus tau times the
// entropy of the sampling distribution. Rejected samples are skipped; throws
// SamplingRangeError when all of them are rejected.
double validation_objective(const HpGrid& grid, const HpConfig& lambda, const Sigma& sigma,
                            const Predictor& predict, int v, double tau, std::mt19937_64& rng);

// Index of the best value; ties go to the less complex configuration.
std::size_t final_select(std::span<const HpConfig> candidates, std::span<const double> values, int input_dim);

struct SearchOptions {
  int hn_epochs = 100;   // T
  int samples = 500;     // V
  int patience = 3;      // p
  double tau = 0.05;
  double tolerance = 1e-4;
  int max_iterations = 100;
  // 0 keeps every member of S in the argmax over S; otherwise only the most recent ones.
  std::size_t candidate_cap = 0;
  SigmaGrid sigma_grid = SigmaGrid::standard();
};

struct SearchIteration {
  int iteration = 0;
  HpConfig lambda;
  Sigma sigma{};
  double best = 0.0;
  std::size_t pool_size = 0;
};

struct SearchTiming {
  double train_seconds = 0.0;
  double select_seconds = 0.0;
};

struct SearchResult {
  HpConfig selected;
  double predicted = 0.0;
  // Outlier scores of the selected configuration from the final hypernetwork;
  // empty when the grid has a single configuration and no search ran.
  std::vector<double> scores;
  std::vector<HpConfig> pool;   // S in insertion order
  std::vector<SearchIteration> trace;
  std::vector<SearchTiming> timing;
  bool lr_halved = false;

  int iterations() const { return static_cast<int>(trace.size()); }
  // Structured text without wall-clock fields, so equal seeds give equal bytes.
  std::string report() const;
  std::string timing_report() const;
};

// The search. Starts from the store's global best; every random draw comes
// from streams derived from `seed`.
SearchResult hyper_select(const Tensor& x, const MetaStore& store, const SearchOptions& options, std::uint64_t seed);

}  // namespace hyper
