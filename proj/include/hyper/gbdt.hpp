#pragma once

// Gradient-boosted regression trees on squared error.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyper/tensor.hpp"

namespace hyper {

struct GbdtOptions {
  int trees = 200;
  int depth = 4;
  double shrinkage = 0.05;
  // Share of rows held out to pick the number of trees; 0 disables early stopping.
  double valid_fraction = 0.2;
  int min_leaf = 3;
  std::uint64_t seed = 0;
};

class Gbdt {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  Gbdt() = default;

  // x: n x d features, y: n targets.
  static Gbdt fit(const Tensor& x, std::span<const double> y, const GbdtOptions& options);

  double predict(std::span<const double> row) const;
  std::vector<double> predict(const Tensor& x) const;

  double base() const { return base_; }
  const std::vector<Tree>& trees() const { return trees_; }
  std::size_t feature_count() const { return features_; }
  bool constant() const { return constant_; }

  std::string serialize() const;
  static Gbdt deserialize(const std::string& text);

 private:
  double base_ = 0.0;
  double shrinkage_ = 0.0;
  std::size_t features_ = 0;
  bool constant_ = false;
  std::vector<Tree> trees_;
};

}  // namespace hyper
