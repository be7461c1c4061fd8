#include "hyper/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyper/errors.hpp"
#include "hyper/optim.hpp"

namespace hyper {

namespace {

constexpr ParamId kPackedId = 0;

Tensor layer_block(const Tensor& t, int l, std::size_t block) {
  const auto begin = t.values().begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(l) * block);
  return Tensor({block}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(block)));
}

}  // namespace

ArchSpec ArchSpec::from_config(const HpConfig& config, int input_dim, int max_depth) {
  ArchSpec spec{input_dim, static_cast<int>(config.widths.size()), config.widths, max_depth, input_dim};
  spec.validate();
  return spec;
}

void ArchSpec::validate() const {
  if (input_dim < 1) throw ConfigError("input dimension must be positive");
  if (n_layers != static_cast<int>(widths.size())) throw ConfigError("layer count and widths disagree");
  if (n_layers < 1 || n_layers > max_depth) throw ConfigError("depth must lie in [1, max_depth]");
  if (widths.back() != input_dim) throw ConfigError("last layer must reconstruct the input dimension");
  for (int w : widths)
    if (w < 1 || w > max_width) throw ConfigError("layer width outside [1, max_width]");
}

ArchMask ArchSpec::mask() const {
  return build_arch_mask(pad_lambda_arch(widths, max_depth), max_depth, max_width);
}

MaskedWeights::MaskedWeights(Tensor weights, Tensor biases, ArchMask mask)
    : weights_(std::move(weights)), biases_(std::move(biases)), mask_(std::move(mask)) {
  if (weights_.size() != mask_.weights().size() || biases_.size() != mask_.biases().size()) {
    throw DimensionError("weights " + shape_string(weights_.shape()) + " / biases " +
                         shape_string(biases_.shape()) + " do not match mask " +
                         shape_string(mask_.weights().shape()));
  }
  weights_ = weights_.reshaped(mask_.weights().shape());
  biases_ = biases_.reshaped(mask_.biases().shape());
  for (std::size_t i = 0; i < weights_.size(); ++i) weights_[i] *= mask_.weights()[i];
  for (std::size_t i = 0; i < biases_.size(); ++i) biases_[i] *= mask_.biases()[i];
}

Tensor MaskedWeights::layer_weights(int l) const {
  const auto W = static_cast<std::size_t>(mask_.width());
  return layer_block(weights_, l, W * W).reshaped({W, W});
}

Tensor MaskedWeights::layer_biases(int l) const {
  const auto W = static_cast<std::size_t>(mask_.width());
  return layer_block(biases_, l, W).reshaped({1, W});
}

Var forward_masked(Var x, std::span<const LayerVars> layers, const ArchMask& mask,
                   double dropout_rate, Mode mode, std::mt19937_64* rng) {
  if (mask.active_layers() == 0) throw DegenerateArchitectureError("every layer is masked out");
  if (static_cast<int>(layers.size()) != mask.depth()) {
    throw ContractError("expected one layer entry per mask layer");
  }
  if (static_cast<int>(x.value().cols()) != mask.width()) {
    throw DimensionError("input has " + std::to_string(x.value().cols()) +
                         " columns, detector expects " + std::to_string(mask.width()));
  }
  const bool drop = mode == Mode::train && dropout_rate > 0.0;
  if (drop && rng == nullptr) throw ContractError("train-mode dropout needs a random stream");

  const int last = mask.last_active_layer();
  Var h = x;
  for (int l = 0; l < mask.depth(); ++l) {
    if (!mask.layer_active(l)) continue;
    const LayerVars& layer = layers[static_cast<std::size_t>(l)];
    Var z = add_bias(matmul_nt(h, layer.weight), layer.bias);
    if (l == last) {
      h = z;
    } else {
      h = tanh(z);
      if (drop) h = dropout(h, dropout_rate, *rng);
    }
  }
  return h;
}

Var train_loss(Var x, Var x_hat, std::span<const LayerVars> layers, const ArchMask& mask,
               double weight_decay) {
  const Tensor& xv = x.value();
  if (xv.shape() != x_hat.value().shape()) {
    throw DimensionError("reconstruction shape " + shape_string(x_hat.value().shape()) +
                         " differs from input " + shape_string(xv.shape()));
  }
  Var loss = scale(sum_sq(sub(x_hat, x)), 1.0 / static_cast<double>(xv.size()));
  if (weight_decay > 0.0) {
    for (int l = 0; l < mask.depth(); ++l) {
      if (!mask.layer_active(l)) continue;
      loss = add(loss, scale(sum_sq(layers[static_cast<std::size_t>(l)].weight), weight_decay));
    }
  }
  return loss;
}

std::size_t packed_size(int max_depth, int max_width) {
  const auto D = static_cast<std::size_t>(max_depth);
  const auto W = static_cast<std::size_t>(max_width);
  return D * W * W + D * W;
}

MaskedWeights unpack_weights(std::span<const double> packed, const ArchMask& mask) {
  const auto D = static_cast<std::size_t>(mask.depth());
  const auto W = static_cast<std::size_t>(mask.width());
  if (packed.size() != packed_size(mask.depth(), mask.width())) {
    throw DimensionError("packed weights hold " + std::to_string(packed.size()) +
                         " values, mask needs " + std::to_string(packed_size(mask.depth(), mask.width())));
  }
  const std::size_t nw = D * W * W;
  return MaskedWeights(Tensor({D, W, W}, std::vector<double>(packed.begin(), packed.begin() + static_cast<std::ptrdiff_t>(nw))),
                       Tensor({D, W}, std::vector<double>(packed.begin() + static_cast<std::ptrdiff_t>(nw), packed.end())),
                       mask);
}

std::vector<LayerVars> masked_layers(Var packed, std::size_t row, const ArchMask& mask) {
  Tape& tape = packed.tape();
  const auto D = static_cast<std::size_t>(mask.depth());
  const auto W = static_cast<std::size_t>(mask.width());
  if (packed.value().cols() != packed_size(mask.depth(), mask.width())) {
    throw DimensionError("packed row of " + std::to_string(packed.value().cols()) +
                         " values does not match mask " + shape_string(mask.weights().shape()));
  }
  std::vector<LayerVars> layers(D);
  for (int l = 0; l < mask.depth(); ++l) {
    if (!mask.layer_active(l)) continue;
    const auto li = static_cast<std::size_t>(l);
    layers[li].weight =
        hadamard(slice(packed, row, li * W * W, W, W), tape.constant(mask.layer_weights(l)));
    layers[li].bias =
        hadamard(slice(packed, row, D * W * W + li * W, 1, W), tape.constant(mask.layer_biases(l)));
  }
  return layers;
}

namespace {

std::vector<LayerVars> constant_layers(Tape& tape, const MaskedWeights& w) {
  std::vector<LayerVars> layers(static_cast<std::size_t>(w.mask().depth()));
  for (int l = 0; l < w.mask().depth(); ++l) {
    if (!w.mask().layer_active(l)) continue;
    layers[static_cast<std::size_t>(l)] = {tape.constant(w.layer_weights(l)),
                                           tape.constant(w.layer_biases(l))};
  }
  return layers;
}

}  // namespace

Tensor forward_masked(const Tensor& x, const MaskedWeights& w, double dropout_rate, Mode mode,
                      std::mt19937_64* rng) {
  Tape tape;
  const auto layers = constant_layers(tape, w);
  return forward_masked(tape.constant(x), layers, w.mask(), dropout_rate, mode, rng).value();
}

double train_loss(const Tensor& x, const Tensor& x_hat, const MaskedWeights& w, double weight_decay) {
  Tape tape;
  const auto layers = constant_layers(tape, w);
  return train_loss(tape.constant(x), tape.constant(x_hat), layers, w.mask(), weight_decay).value()[0];
}

ScoreSet outlier_scores(const Tensor& x, const MaskedWeights& w, std::string dataset_id,
                        std::string config_id) {
  const Tensor recon = forward_masked(x, w, 0.0, Mode::eval, nullptr);
  const std::size_t n = x.rows(), f = x.cols();
  ScoreSet out{std::vector<double>(n, 0.0), std::move(dataset_id), std::move(config_id)};
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      const double d = recon[i * f + j] - x[i * f + j];
      s += d * d;
    }
    out.scores[i] = s;
  }
  return out;
}

MaskedWeights glorot_weights(const ArchMask& mask, std::mt19937_64& rng) {
  const auto D = static_cast<std::size_t>(mask.depth());
  const auto W = static_cast<std::size_t>(mask.width());
  Tensor weights({D, W, W});
  for (int l = 0; l < mask.depth(); ++l) {
    if (!mask.layer_active(l)) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(mask.rows(l) + mask.cols(l)));
    std::uniform_real_distribution<double> u(-limit, limit);
    const std::size_t base = static_cast<std::size_t>(l) * W * W;
    for (std::size_t i = 0; i < static_cast<std::size_t>(mask.rows(l)); ++i)
      for (std::size_t j = 0; j < static_cast<std::size_t>(mask.cols(l)); ++j)
        weights[base + i * W + j] = u(rng);
  }
  return MaskedWeights(std::move(weights), Tensor({D, W}), mask);
}

MaskedWeights train_from_scratch(const Tensor& x, const HpConfig& config, int max_depth,
                                 const ScratchTrainOptions& options, std::mt19937_64& rng) {
  const int f = static_cast<int>(x.cols());
  const ArchMask mask = ArchSpec::from_config(config, f, max_depth).mask();
  const MaskedWeights init = glorot_weights(mask, rng);
  const auto W = static_cast<std::size_t>(f);

  Tensor packed({1, packed_size(max_depth, f)});
  std::copy(init.weights().values().begin(), init.weights().values().end(), packed.data());
  ParamMap params;
  params[kPackedId] = std::move(packed);
  Adam opt(options.lr);

  const std::size_t n = x.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, std::min(options.batch, n));
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      Tensor xb({end - start, W});
      for (std::size_t i = start; i < end; ++i)
        std::copy_n(x.data() + order[i] * W, W, xb.data() + (i - start) * W);
      Tape tape;
      Var xv = tape.constant(std::move(xb));
      const auto layers = masked_layers(tape.parameter(kPackedId, params[kPackedId]), 0, mask);
      Var recon = forward_masked(xv, layers, mask, config.dropout, Mode::train, &rng);
      Var loss = train_loss(xv, recon, layers, mask, config.weight_decay);
      opt.step(params, tape.backward(loss));
    }
  }
  return unpack_weights(params[kPackedId].values(), mask);
}

}  // namespace hyper
