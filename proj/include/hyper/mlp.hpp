#pragma once

// Small fully-connected network with relu hidden layers, used by the data
// and score encoders of the meta-learner.

#include <random>
#include <string>
#include <vector>

#include "hyper/grad_check.hpp"
#include "hyper/tape.hpp"

namespace hyper {

class Mlp {
 public:
  Mlp() = default;
  // sizes = {in, h1, ..., out}. Parameters are registered under ids
  // first_id, first_id + 1, ... (weight, bias per layer).
  Mlp(std::vector<int> sizes, ParamId first_id, std::mt19937_64& rng);

  const std::vector<int>& sizes() const { return sizes_; }
  int layers() const { return static_cast<int>(sizes_.size()) - 1; }
  ParamMap& params() { return params_; }
  const ParamMap& params() const { return params_; }

  // Output of layer `upto` (1-based, default: last). Every layer but the
  // last network layer applies relu; `relu_last` also rectifies the last.
  Var forward(Tape& tape, Var x, int upto = -1, bool relu_last = false) const;
  Tensor forward(const Tensor& x, int upto = -1, bool relu_last = false) const;

  std::string serialize() const;
  static Mlp deserialize(const std::string& text);

 private:
  std::vector<int> sizes_;
  ParamId first_id_ = 0;
  ParamMap params_;
};

}  // namespace hyper
