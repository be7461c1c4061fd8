#pragma once

// Hypernetwork mapping a hyperparameter configuration to the weights of the
// maximal detector (D layers of W x W plus biases). One network serves every
// sub-architecture: the caller masks its output with the configuration's
// ArchMask before use.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hyper/arch_mask.hpp"
#include "hyper/autoencoder.hpp"
#include "hyper/grad_check.hpp"
#include "hyper/hp_config.hpp"
#include "hyper/optim.hpp"
#include "hyper/tape.hpp"

namespace hyper {

// Sinusoidal encoding of every entry v of `lambda_arch`: for i in
// [0, d_pe / 2) the pair sin(v / 10000^(2i/d_pe)), cos(v / 10000^(2i/d_pe)).
// Returns a D x d_pe tensor.
Tensor positional_encode(std::span<const int> lambda_arch, int d_pe);

struct HyperNetConfig {
  int max_depth = 8;
  int max_width = 0;
  int hidden = 200;
  int d_pe = 16;
  // log10(weight_decay + 1e-8) is rescaled from [log_wd_min, log_wd_max] to [0, 1].
  double log_wd_min = -8.0;
  double log_wd_max = -5.0;
  // Dropout on the hypernetwork's own hidden layers during training.
  double dropout = 0.2;
  std::uint64_t grid_digest = 0;

  int input_dim() const { return 2 + max_depth * d_pe; }
  std::size_t output_dim() const { return packed_size(max_depth, max_width); }
  void validate() const;
};

class HyperNet {
 public:
  HyperNet() = default;
  HyperNet(HyperNetConfig config, std::mt19937_64& rng);

  const HyperNetConfig& config() const { return config_; }
  const ParamMap& params() const { return params_; }
  ParamMap& params() { return params_; }

  // 1 x input_dim encoding of a configuration.
  Tensor encode(const HpConfig& hp) const;

  // Differentiable forward over a batch: one packed output row per config.
  // `hn_rng` is only read in train mode with dropout enabled.
  Var forward(Tape& tape, std::span<const HpConfig> batch, Mode mode, std::mt19937_64* hn_rng) const;

  // Full-size weights D x W x W and biases D x W for one configuration (eval mode).
  std::pair<Tensor, Tensor> generate(const HpConfig& hp) const;
  // generate() followed by the configuration's mask.
  MaskedWeights masked(const HpConfig& hp) const;
  ArchMask mask_for(const HpConfig& hp) const;

  // Self-describing record {version, D, W, d_pe, grid digest, parameters}.
  std::string checkpoint() const;
  static HyperNet from_checkpoint(const std::string& text);

  static constexpr int kCheckpointVersion = 1;

 private:
  HyperNetConfig config_;
  ParamMap params_;
};

// Mean over the batch of each configuration's training loss on `x`, each with
// its own dropout and weight decay. Detector dropout for config j uses a
// stream seeded by the j-th draw from `rng` (after the hypernetwork's own
// dropout masks, when those are active).
Var hn_loss_batch(Tape& tape, const HyperNet& net, std::span<const HpConfig> batch,
                  const Tensor& x, Mode mode, std::mt19937_64& rng);

// Eval-mode loss averaged over `configs`.
double hn_eval_loss(const HyperNet& net, std::span<const HpConfig> configs, const Tensor& x);

enum class HnOptimizer { sgd_momentum, adam };

struct HnTrainOptions {
  HnOptimizer optimizer = HnOptimizer::adam;
  double lr = 1e-4;
  double momentum = 0.9;
  std::size_t batch_samples = 512;
  std::size_t configs_per_step = 8;
};

class HnTrainer {
 public:
  HnTrainer(HyperNet& net, const HnTrainOptions& options)
      : net_(&net), adam_(options.optimizer == HnOptimizer::adam), sgd_(options.lr, options.momentum), adam_opt_(options.lr) {}

  // One update on a sample batch; returns the loss before the update.
  double step(std::span<const HpConfig> configs, const Tensor& x_batch, std::mt19937_64& rng);
  void set_lr(double lr) {
    sgd_.set_lr(lr);
    adam_opt_.set_lr(lr);
  }
  double lr() const { return sgd_.lr(); }

 private:
  HyperNet* net_;
  bool adam_;
  MomentumSgd sgd_;
  Adam adam_opt_;
};

// Depths admitted from a given epoch on. Phases are ordered by start epoch,
// the first starts at 0, and each phase keeps every depth of its predecessor.
struct SchedulePhase {
  int epoch_start = 0;
  std::vector<int> depths;
};

class Schedule {
 public:
  Schedule() = default;
  explicit Schedule(std::vector<SchedulePhase> phases);

  // Deepest first: with k depths over E epochs, phase i starts at i * E / k
  // and admits the i + 1 deepest depths.
  static Schedule deep_first(std::vector<int> depths, int epochs);

  const std::vector<SchedulePhase>& phases() const { return phases_; }
  const std::vector<int>& admitted(int epoch) const;
  // Epoch at which `depth` is first admitted, or -1.
  int admission_epoch(int depth) const;

 private:
  std::vector<SchedulePhase> phases_;
};

struct HnEpochRecord {
  int epoch = 0;
  std::vector<int> admitted;
  double mean_loss = 0.0;
};

using HnEpochCallback = std::function<void(int epoch, const HyperNet& net)>;

// Scheduled training: each epoch walks the shuffled samples in batches of
// options.batch_samples; every step draws options.configs_per_step grid
// configurations uniformly among the admitted depths. The callback, when set,
// runs before each epoch and once after the last.
std::vector<HnEpochRecord> hn_train_scheduled(const HpGrid& grid, const Tensor& x, int epochs,
                                              const Schedule& schedule, HyperNet& net,
                                              const HnTrainOptions& options, std::mt19937_64& rng,
                                              const HnEpochCallback& on_epoch = {});

}  // namespace hyper
