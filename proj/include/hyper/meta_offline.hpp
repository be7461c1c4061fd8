#pragma once

// Offline meta-learning on labeled historical tasks: one hypernetwork per
// task yields outlier scores for every grid configuration; data and model
// embeddings plus the configuration feed the proxy validator f_val, which
// learns to predict detection performance without labels.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hyper/gbdt.hpp"
#include "hyper/hp_config.hpp"
#include "hyper/hypernet.hpp"
#include "hyper/mlp.hpp"
#include "hyper/tensor.hpp"

namespace hyper {

struct HistoricalTask {
  std::string name;
  Tensor x;             // n x F
  std::vector<int> y;   // 1 = outlier
};

// Signed feature hashing: feature f goes to bucket hash(seed, f) mod k with
// sign +-1 taken from a second hash.
std::size_t hash_bucket(std::uint64_t seed, std::size_t feature, int k);
double hash_sign(std::uint64_t seed, std::size_t feature);
std::vector<double> feature_hash(std::span<const double> x, int k, std::uint64_t seed);
Tensor hash_rows(const Tensor& x, int k, std::uint64_t seed);

struct ExtractorOptions {
  int k = 256;
  int epochs = 20;
  std::size_t batch = 256;
  double lr = 1e-3;
  std::size_t max_rows_per_task = 1000;
};

// h: hashed sample -> outlier logit (k -> 128 -> 64 -> 1). The 64-unit layer
// is the embedding tap.
struct FeatureExtractor {
  std::uint64_t hash_seed = 0;
  int k = 256;
  Mlp net;

  Tensor logits(const Tensor& x) const;
  // Elementwise max over samples of the tap activations.
  std::vector<double> embed(const Tensor& x) const;
  static constexpr int kEmbedDim = 64;
};

// Tasks with a single class are skipped and reported in `warnings`.
FeatureExtractor train_feature_extractor(std::span<const HistoricalTask> tasks, const ExtractorOptions& options,
                                         std::uint64_t seed, std::vector<std::string>& warnings);

// Z-normalized (unit denominator for a constant set) and, above `cap`
// entries, reduced to `cap` evenly spaced order statistics.
std::vector<double> prepare_scores(std::span<const double> scores, std::size_t cap = 1024);

struct EncoderOptions {
  int epochs = 60;
  std::size_t batch_sets = 16;
  double lr = 1e-3;
};

// g: per-score encoder (1 -> 32 -> 32), mean pooling, head (32 -> 16 -> 1)
// with a sigmoid output.
struct ScoreEncoder {
  Mlp encoder;
  Mlp head;

  // Both take prepared score sets.
  std::vector<double> embed(std::span<const double> prepared) const;
  double predict(std::span<const double> prepared) const;
  static constexpr int kEmbedDim = 32;
};

struct EncoderTrace {
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

ScoreEncoder train_score_encoder(const std::vector<std::vector<double>>& prepared_sets,
                                 std::span<const double> targets, const EncoderOptions& options,
                                 std::uint64_t seed, EncoderTrace* trace = nullptr);

// Column layout of the proxy-validator input.
struct FeatureLayout {
  int version = 1;
  std::vector<std::string> names;
  std::uint64_t digest() const;
  std::size_t size() const { return names.size(); }
};
FeatureLayout default_layout();

// [L, c, dropout, log10(wd + 1e-8), mean width / F] ++ data ++ model embedding.
std::vector<double> assemble_features(const HpConfig& config, int input_dim, std::span<const double> data_emb,
                                      std::span<const double> model_emb);

class ProxyValidator {
 public:
  ProxyValidator() = default;
  ProxyValidator(FeatureLayout layout, Gbdt model) : layout_(std::move(layout)), model_(std::move(model)) {}

  const FeatureLayout& layout() const { return layout_; }
  const Gbdt& model() const { return model_; }
  // Clipped to [0, 1].
  double predict(std::span<const double> features) const;
  // Throws VersionError unless `expected` has the same digest.
  void check_layout(const FeatureLayout& expected) const;

 private:
  FeatureLayout layout_;
  Gbdt model_;
};

inline constexpr std::size_t kMinFvalRows = 100;
ProxyValidator train_fval(const Tensor& features, std::span<const double> targets, const GbdtOptions& options,
                          std::vector<std::string>& warnings);

// One entry per axis combination (before deduplication), in axis order.
struct AxisPoint {
  int n_layers = 0;
  double compression = 1.0;
  double dropout = 0.0;
  double weight_decay = 0.0;
  bool operator==(const AxisPoint&) const = default;
};
std::vector<AxisPoint> axis_points(const HpAxes& axes);
const HpConfig& resolve(const HpGrid& grid, const AxisPoint& p);
AxisPoint axis_point(const HpConfig& c);

// Performance of every axis combination on every task: combinations sharing a
// detector (same widths after deduplication) share a value.
struct PerfMatrix {
  std::vector<std::string> tasks;
  std::vector<AxisPoint> columns;
  std::vector<std::vector<double>> values;  // tasks x columns
};

// Everything learned about one task.
struct TaskScores {
  std::string name;
  int input_dim = 0;
  std::vector<HpConfig> configs;             // deduplicated grid for this task
  std::vector<std::vector<double>> scores;   // one score set per config
  std::vector<double> perf;                  // AUROC per config
};

struct HnSettings {
  int hidden = 200;
  int d_pe = 16;
  double dropout = 0.2;
  HnTrainOptions train;
  int epochs = 400;
};

HyperNetConfig make_hn_config(const HnSettings& s, const HpGrid& grid);

// Trains one scheduled hypernetwork on the task and scores every grid
// configuration with its generated weights.
TaskScores collect_task(const HistoricalTask& task, const HpAxes& axes, const HnSettings& hn, std::uint64_t seed);
PerfMatrix perf_matrix(std::span<const TaskScores> tasks, const HpAxes& axes);

// Column with the highest mean; ties go to the configuration with fewer
// effective parameters at `reference_dim` features.
std::size_t global_best(const PerfMatrix& p, int reference_dim);

struct MetaOptions {
  HpAxes axes;
  HnSettings hn;
  ExtractorOptions extractor;
  EncoderOptions encoder;
  GbdtOptions gbdt;
};

struct MetaStore {
  static constexpr int kVersion = 1;
  int version = kVersion;
  std::uint64_t seed = 0;
  HpAxes axes;
  HnSettings hn;
  FeatureExtractor h;
  ScoreEncoder g;
  ProxyValidator f_val;
  PerfMatrix perf;
  AxisPoint best;
  int reference_dim = 0;
  std::vector<std::string> warnings;

  // Writes manifest.json and one record per component into `dir`.
  void save(const std::filesystem::path& dir) const;
  // Verifies version, per-file digests and the grid digest.
  static MetaStore load(const std::filesystem::path& dir);
};

// Predicted performance of one configuration from its scores.
double predict_performance(const MetaStore& store, const HpConfig& config, int input_dim,
                           std::span<const double> data_emb, std::span<const double> scores);

struct MetaTrainResult {
  MetaStore store;
  std::vector<TaskScores> tasks;
};

MetaTrainResult meta_train(std::span<const HistoricalTask> tasks, const MetaOptions& options, std::uint64_t seed);

}  // namespace hyper
