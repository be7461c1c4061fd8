#pragma once

// Fully-connected hourglass autoencoder used as the outlier detector. Its
// weights are supplied from outside (by the hypernetwork, or by a from-scratch
// trainer) as a maximal D x W x W tensor plus an architecture mask.

#include <random>
#include <span>
#include <string>
#include <vector>

#include "hyper/arch_mask.hpp"
#include "hyper/hp_config.hpp"
#include "hyper/tape.hpp"
#include "hyper/tensor.hpp"

namespace hyper {

enum class Mode { train, eval };

struct ArchSpec {
  int input_dim = 0;
  int n_layers = 0;
  std::vector<int> widths;
  int max_depth = 0;
  int max_width = 0;

  static ArchSpec from_config(const HpConfig& config, int input_dim, int max_depth);
  void validate() const;
  ArchMask mask() const;
};

// Weights and biases with every entry outside the mask forced to zero.
class MaskedWeights {
 public:
  MaskedWeights() = default;
  MaskedWeights(Tensor weights, Tensor biases, ArchMask mask);

  const Tensor& weights() const { return weights_; }
  const Tensor& biases() const { return biases_; }
  const ArchMask& mask() const { return mask_; }
  Tensor layer_weights(int l) const;
  Tensor layer_biases(int l) const;

 private:
  Tensor weights_;
  Tensor biases_;
  ArchMask mask_;
};

struct ScoreSet {
  std::vector<double> scores;
  std::string dataset_id;
  std::string config_id;
};

// Masked weight and bias of one layer, as they appear on a tape.
struct LayerVars {
  Var weight;  // W x W
  Var bias;    // 1 x W
};

// Packed parameter row: the D weight blocks (W*W each, row-major) followed by
// the D bias vectors (W each). This is the hypernetwork output layout.
std::size_t packed_size(int max_depth, int max_width);
MaskedWeights unpack_weights(std::span<const double> packed, const ArchMask& mask);

// Masked per-layer Vars read from row `row` of a packed parameter matrix.
// Inactive layers are left as invalid Vars.
std::vector<LayerVars> masked_layers(Var packed, std::size_t row, const ArchMask& mask);

// Layers with an all-zero mask are skipped. Every remaining layer is affine;
// hidden layers use tanh and, in train mode, inverted dropout; the last layer
// is linear.
Var forward_masked(Var x, std::span<const LayerVars> layers, const ArchMask& mask,
                   double dropout_rate, Mode mode, std::mt19937_64* rng);

// Mean squared reconstruction error over samples and features, plus
// weight_decay times the squared norm of the masked weights.
Var train_loss(Var x, Var x_hat, std::span<const LayerVars> layers, const ArchMask& mask,
               double weight_decay);

Tensor forward_masked(const Tensor& x, const MaskedWeights& w, double dropout_rate, Mode mode,
                      std::mt19937_64* rng);
double train_loss(const Tensor& x, const Tensor& x_hat, const MaskedWeights& w, double weight_decay);

// Per-sample squared L2 reconstruction error in eval mode.
ScoreSet outlier_scores(const Tensor& x, const MaskedWeights& w, std::string dataset_id = {},
                        std::string config_id = {});

struct ScratchTrainOptions {
  int epochs = 60;
  std::size_t batch = 64;
  double lr = 3e-3;
};

// Trains the detector of `config` directly (no hypernetwork) with Adam.
MaskedWeights train_from_scratch(const Tensor& x, const HpConfig& config, int max_depth,
                                 const ScratchTrainOptions& options, std::mt19937_64& rng);

// Glorot-uniform weights on the retained blocks of `mask`, zero biases.
MaskedWeights glorot_weights(const ArchMask& mask, std::mt19937_64& rng);

}  // namespace hyper
