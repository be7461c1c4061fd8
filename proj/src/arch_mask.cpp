#include "hyper/arch_mask.hpp"

#include <string>

#include "hyper/errors.hpp"

namespace hyper {

ArchMask::ArchMask(std::vector<int> lambda_arch, int max_depth, int max_width)
    : lambda_arch_(std::move(lambda_arch)), depth_(max_depth), width_(max_width) {
  if (max_depth < 1 || max_width < 1) throw ConfigError("mask extents must be positive");
  if (static_cast<int>(lambda_arch_.size()) != max_depth) {
    throw ConfigError("architecture vector has " + std::to_string(lambda_arch_.size()) +
                      " entries, expected " + std::to_string(max_depth));
  }
  for (int v : lambda_arch_) {
    if (v < 0 || v > max_width) {
      throw ConfigError("architecture entry " + std::to_string(v) + " outside [0, " +
                        std::to_string(max_width) + "]");
    }
  }
  if (lambda_arch_[0] == 0) throw ConfigError("first layer of an architecture cannot be empty");

  const auto D = static_cast<std::size_t>(max_depth);
  const auto W = static_cast<std::size_t>(max_width);
  weights_ = Tensor({D, W, W});
  biases_ = Tensor({D, W});
  for (int l = 0; l < max_depth; ++l) {
    if (!layer_active(l)) continue;
    const auto r = static_cast<std::size_t>(rows(l));
    const auto c = static_cast<std::size_t>(cols(l));
    const std::size_t base = static_cast<std::size_t>(l) * W * W;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) weights_[base + i * W + j] = 1.0;
      biases_[static_cast<std::size_t>(l) * W + i] = 1.0;
    }
  }
}

int ArchMask::cols(int l) const {
  if (l == 0) return width_;
  for (int k = l - 1; k >= 0; --k)
    if (lambda_arch_[static_cast<std::size_t>(k)] > 0) return lambda_arch_[static_cast<std::size_t>(k)];
  return width_;
}

int ArchMask::last_active_layer() const {
  for (int l = depth_ - 1; l >= 0; --l)
    if (layer_active(l)) return l;
  return -1;
}

int ArchMask::active_layers() const {
  int n = 0;
  for (int v : lambda_arch_) n += v > 0 ? 1 : 0;
  return n;
}

Tensor ArchMask::layer_weights(int l) const {
  const auto W = static_cast<std::size_t>(width_);
  const auto begin = weights_.values().begin() + static_cast<std::ptrdiff_t>(l) * static_cast<std::ptrdiff_t>(W * W);
  return Tensor({W, W}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(W * W)));
}

Tensor ArchMask::layer_biases(int l) const {
  const auto W = static_cast<std::size_t>(width_);
  const auto begin = biases_.values().begin() + static_cast<std::ptrdiff_t>(l) * static_cast<std::ptrdiff_t>(W);
  return Tensor({1, W}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(W)));
}

ArchMask build_arch_mask(std::span<const int> lambda_arch, int max_depth, int max_width) {
  return ArchMask(std::vector<int>(lambda_arch.begin(), lambda_arch.end()), max_depth, max_width);
}

}  // namespace hyper
