#pragma once

// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape records every operation applied to the Vars it owns, in topological
// order. backward() walks the tape once in reverse and returns the gradient of
// a scalar loss with respect to every registered parameter. One tape serves
// one training step; drop it afterwards.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hyper/tensor.hpp"

namespace hyper {

using ParamId = std::size_t;

class Tape;

// Handle to one node of a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradient of a scalar loss with respect to each parameter id.
class Gradients {
 public:
  bool contains(ParamId id) const { return grads_.count(id) != 0; }
  const Tensor& at(ParamId id) const;
  Tensor& at(ParamId id);
  void accumulate(ParamId id, const Tensor& g);
  const std::map<ParamId, Tensor>& all() const { return grads_; }
  std::size_t size() const { return grads_.size(); }

 private:
  std::map<ParamId, Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Untracked input; never receives a gradient.
  Var constant(Tensor value);
  // Tracked input; its gradient is reported under `id`.
  Var parameter(ParamId id, Tensor value);

  // Exact reverse-mode gradients of `loss` (which must hold one value).
  Gradients backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Used by operation implementations.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);
  Tensor& grad(std::size_t id);
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::optional<ParamId> param;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

enum class OpKind {
  matmul,
  add,
  add_bias_broadcast,
  relu,
  sigmoid,
  tanh,
  hadamard,
  mean,
  sum_sq,
  concat,
};

// Generic entry point over the core kinds. Binary kinds take two inputs,
// concat any number >= 1, the rest exactly one.
Var forward_op(OpKind kind, std::span<const Var> inputs);

// a (n x k) * b (k x m)
Var matmul(Var a, Var b);
// a (n x k) * b^T where b is (m x k)
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// a (n x m) plus a length-m bias on every row
Var add_bias(Var a, Var bias);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var hadamard(Var a, Var b);
Var scale(Var a, double factor);
// Scalar results.
Var mean(Var a);
Var sum_sq(Var a);
// Column-wise concatenation of matrices with equal row counts.
Var concat(std::span<const Var> parts);
// rows x cols block read from row `row` of a, starting at column `offset`.
Var slice(Var a, std::size_t row, std::size_t offset, std::size_t rows, std::size_t cols);
// Mean over rows: (n x m) -> (1 x m).
Var mean_rows(Var a);
// Inverted dropout: keep with probability 1 - rate, scale kept values by
// 1 / (1 - rate). rate == 0 returns `a` unchanged.
Var dropout(Var a, double rate, std::mt19937_64& rng);
// Weighted mean of binary cross-entropy on logits.
Var bce_with_logits(Var logits, const Tensor& targets, const Tensor& weights);

}  // namespace hyper
