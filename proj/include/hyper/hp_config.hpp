#pragma once

// Hyperparameter configurations of the fully-connected autoencoder detector
// and the finite grid they are drawn from.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace hyper {

// Depths accepted by default.
inline constexpr int kDefaultDepths[] = {2, 4, 6, 8};

// Layer widths of an hourglass autoencoder on F inputs with L layers. Each
// encoder layer shrinks its predecessor by `compression` (rounded half away
// from zero, floored at 1); the decoder mirrors the encoder and ends at F.
// Throws ConfigError when L is not in `depth_grid` or compression < 1.
std::vector<int> widths_from_hp(int input_dim, int n_layers, double compression,
                                std::span<const int> depth_grid = kDefaultDepths);

// First floor(L/2) widths, then max_depth - L zeros, then the remaining widths.
std::vector<int> pad_lambda_arch(std::span<const int> widths, int max_depth);

struct HpConfig {
  int n_layers = 2;
  double compression = 1.0;
  double dropout = 0.0;
  double weight_decay = 0.0;
  std::vector<int> widths;  // derived for one input dimension

  double log_weight_decay() const;  // log10(weight_decay + 1e-8)
  std::vector<int> lambda_arch(int max_depth) const { return pad_lambda_arch(widths, max_depth); }
  // Retained weights plus biases of the compact network.
  long effective_params(int input_dim) const;
  // Identity used for deduplication: widths, dropout and weight decay.
  std::string key() const;
  std::string describe() const;
};

// Lower complexity first; ties broken by key so the order is total.
bool less_complex(const HpConfig& a, const HpConfig& b, int input_dim);

// Axis values of the search grid.
struct HpAxes {
  std::vector<int> n_layers{2, 4, 6, 8};
  std::vector<double> compression{1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6, 2.8, 3.0};
  std::vector<double> dropout{0.0, 0.2, 0.4};
  std::vector<double> weight_decay{0.0, 1e-6, 1e-5};

  int max_depth() const;
  void validate() const;
  std::string canonical_text() const;
  std::uint64_t digest() const;
};

// Cartesian product of the axes for one input dimension, deduplicated by
// HpConfig::key (the first configuration enumerated with a given key wins, so
// the lowest compression is kept).
class HpGrid {
 public:
  HpGrid(HpAxes axes, int input_dim);

  const HpAxes& axes() const { return axes_; }
  int input_dim() const { return input_dim_; }
  int max_depth() const { return axes_.max_depth(); }
  int max_width() const { return input_dim_; }
  std::size_t size() const { return configs_.size(); }
  const std::vector<HpConfig>& configs() const { return configs_; }
  const HpConfig& operator[](std::size_t i) const { return configs_[i]; }

  // Builds the configuration for axis values, derives widths and returns the
  // canonical grid member with the same key.
  const HpConfig& canonical(int n_layers, double compression, double dropout,
                            double weight_decay) const;
  std::optional<std::size_t> index_of(const HpConfig& config) const;
  std::uint64_t digest() const;

 private:
  HpAxes axes_;
  int input_dim_;
  std::vector<HpConfig> configs_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace hyper
