#pragma once

#include <span>
#include <vector>

#include "hyper/tensor.hpp"

namespace hyper {

// Binary mask carving one sub-architecture out of the maximal D x W x W
// weight tensor (and D x W bias tensor).
//
// Layer 0 keeps rows [0, arch[0]) over every input column. A later layer l
// with arch[l] > 0 keeps rows [0, arch[l]) and columns [0, arch[l - z]) where
// arch[l - z] is the last non-zero entry before l. A zero entry masks the
// whole layer, which the detector then skips.
class ArchMask {
 public:
  ArchMask() = default;
  ArchMask(std::vector<int> lambda_arch, int max_depth, int max_width);

  const Tensor& weights() const { return weights_; }
  const Tensor& biases() const { return biases_; }
  const std::vector<int>& lambda_arch() const { return lambda_arch_; }
  int depth() const { return depth_; }
  int width() const { return width_; }

  bool layer_active(int l) const { return lambda_arch_[static_cast<std::size_t>(l)] > 0; }
  int rows(int l) const { return lambda_arch_[static_cast<std::size_t>(l)]; }
  // Columns of the retained block: W for layer 0, the previous non-zero width otherwise.
  int cols(int l) const;
  int last_active_layer() const;
  int active_layers() const;

  // Layer l of the weight mask as a W x W tensor, and of the bias mask as 1 x W.
  Tensor layer_weights(int l) const;
  Tensor layer_biases(int l) const;

 private:
  std::vector<int> lambda_arch_;
  int depth_ = 0;
  int width_ = 0;
  Tensor weights_;
  Tensor biases_;
};

ArchMask build_arch_mask(std::span<const int> lambda_arch, int max_depth, int max_width);

}  // namespace hyper
