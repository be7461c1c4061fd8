#include "hyper/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "hyper/errors.hpp"

namespace hyper {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                       " and " + shape_string(b.shape()));
}

void require_same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands live on different tapes");
}

void require_same_size(const char* op, const Tensor& a, const Tensor& b) {
  if (a.size() != b.size() || a.cols() != b.cols()) shape_mismatch(op, a, b);
}

template <typename F>
Var unary_elementwise(const char* op, Var a, F fn, std::function<double(double x, double y)> dfn) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fn(av[i]);
  const std::size_t ia = a.id();
  return a.tape().record(op, std::move(out), {ia}, [ia, dfn](Tape& t, std::size_t self) {
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * dfn(x[i], y[i]);
  });
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(id_); }

const Tensor& Gradients::at(ParamId id) const {
  auto it = grads_.find(id);
  if (it == grads_.end()) throw ContractError("no gradient for parameter " + std::to_string(id));
  return it->second;
}

Tensor& Gradients::at(ParamId id) {
  auto it = grads_.find(id);
  if (it == grads_.end()) throw ContractError("no gradient for parameter " + std::to_string(id));
  return it->second;
}

void Gradients::accumulate(ParamId id, const Tensor& g) {
  auto it = grads_.find(id);
  if (it == grads_.end()) {
    grads_.emplace(id, g);
    return;
  }
  if (it->second.size() != g.size()) shape_mismatch("gradient accumulate", it->second, g);
  for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant holds non-finite values");
  nodes_.push_back(Node{std::move(value), {}, {}, {}, std::nullopt, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(ParamId id, Tensor value) {
  if (!value.all_finite()) {
    throw NumericError("parameter " + std::to_string(id) + " holds non-finite values");
  }
  nodes_.push_back(Node{std::move(value), {}, {}, {}, id, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
  if (!value.all_finite()) throw NumericError(std::string(op) + " produced non-finite values");
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [this](std::size_t i) { return nodes_[i].requires_grad; });
  Node node{std::move(value), {}, std::move(inputs), {}, std::nullopt, needs};
  if (needs) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Gradients Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        shape_string(loss.value().shape()));
  }
  grad(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
  Gradients out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!n.param) continue;
    if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
    out.accumulate(*n.param, n.grad);
  }
  return out;
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) shape_mismatch("matmul", av, bv);
  Tensor out({av.rows(), bv.cols()});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const auto g = as_matrix(t.upstream(self));
    if (t.requires_grad(ia)) as_matrix(t.grad(ia)).noalias() += g * as_matrix(t.value(ib)).transpose();
    if (t.requires_grad(ib)) as_matrix(t.grad(ib)).noalias() += as_matrix(t.value(ia)).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) shape_mismatch("matmul_nt", av, bv);
  Tensor out({av.rows(), bv.rows()});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv).transpose();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul_nt", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const auto g = as_matrix(t.upstream(self));
    if (t.requires_grad(ia)) as_matrix(t.grad(ia)).noalias() += g * as_matrix(t.value(ib));
    if (t.requires_grad(ib)) as_matrix(t.grad(ib)).noalias() += g.transpose() * as_matrix(t.value(ia));
  });
}

namespace {

Var add_scaled(const char* op, Var a, Var b, double sign) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_size(op, av, bv);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + sign * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(op, std::move(out), {ia, ib}, [ia, ib, sign](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return add_scaled("add", a, b, 1.0); }
Var sub(Var a, Var b) { return add_scaled("sub", a, b, -1.0); }

Var add_bias(Var a, Var bias) {
  require_same_tape(a, bias);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.size() != av.cols()) shape_mismatch("add_bias", av, bv);
  Tensor out(av.shape());
  const std::size_t r = av.rows(), c = av.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[i * c + j] + bv[j];
  const std::size_t ia = a.id(), ib = bias.id();
  return a.tape().record("add_bias", std::move(out), {ia, ib}, [ia, ib, r, c](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
    }
  });
}

Var relu(Var a) {
  return unary_elementwise(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary_elementwise(
      "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary_elementwise(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var hadamard(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_size("hadamard", av, bv);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("hadamard", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    if (t.requires_grad(ia)) {
      const Tensor& bv = t.value(ib);
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      const Tensor& av = t.value(ia);
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  const std::size_t ia = a.id();
  return a.tape().record("scale", std::move(out), {ia}, [ia, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var mean(Var a) {
  const Tensor& av = a.value();
  if (av.empty()) throw ContractError("mean of an empty tensor");
  double s = 0.0;
  for (double v : av.values()) s += v;
  const double n = static_cast<double>(av.size());
  const std::size_t ia = a.id();
  return a.tape().record("mean", Tensor::scalar(s / n), {ia}, [ia, n](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0] / n;
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var sum_sq(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.values()) s += v * v;
  const std::size_t ia = a.id();
  return a.tape().record("sum_sq", Tensor::scalar(s), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = 2.0 * t.upstream(self)[0];
    const Tensor& x = t.value(ia);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * x[i];
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const std::size_t r = parts[0].value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids, widths;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p);
    if (p.value().rows() != r) shape_mismatch("concat", parts[0].value(), p.value());
    ids.push_back(p.id());
    widths.push_back(p.value().cols());
    total += p.value().cols();
  }
  Tensor out(parts[0].value().rank() == 1 ? std::vector<std::size_t>{total}
                                          : std::vector<std::size_t>{r, total});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const std::size_t c = v.cols();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(v.data() + i * c, c, out.data() + i * total + off);
    off += c;
  }
  return parts[0].tape().record("concat", std::move(out), ids,
                                [ids, widths, r, total](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t c = widths[k];
      if (t.requires_grad(ids[k])) {
        Tensor& gk = t.grad(ids[k]);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gk[i * c + j] += g[i * total + off + j];
      }
      off += c;
    }
  });
}

Var slice(Var a, std::size_t row, std::size_t offset, std::size_t rows, std::size_t cols) {
  const Tensor& av = a.value();
  const std::size_t n = rows * cols;
  if (row >= av.rows() || offset + n > av.cols()) {
    throw DimensionError("slice of " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " at row " + std::to_string(row) + " offset " + std::to_string(offset) +
                         " exceeds " + shape_string(av.shape()));
  }
  const std::size_t base = row * av.cols() + offset;
  std::vector<double> data(av.data() + base, av.data() + base + n);
  const std::size_t ia = a.id();
  return a.tape().record("slice", Tensor({rows, cols}, std::move(data)), {ia},
                         [ia, base, n](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < n; ++i) ga[base + i] += g[i];
  });
}

Var mean_rows(Var a) {
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  if (r == 0) throw ContractError("mean_rows of an empty tensor");
  Tensor out({1, c});
  as_matrix(out) = as_matrix(av).colwise().sum() / static_cast<double>(r);
  const std::size_t ia = a.id();
  return a.tape().record("mean_rows", std::move(out), {ia}, [ia, r, c](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad(ia);
    const double inv = 1.0 / static_cast<double>(r);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j] * inv;
  });
}

Var dropout(Var a, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must lie in [0, 1)");
  if (rate == 0.0) return a;
  const Tensor& av = a.value();
  Tensor mask(av.shape());
  std::bernoulli_distribution keep(1.0 - rate);
  const double kept = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? kept : 0.0;
  return hadamard(a, a.tape().constant(std::move(mask)));
}

Var bce_with_logits(Var logits, const Tensor& targets, const Tensor& weights) {
  const Tensor& z = logits.value();
  if (z.size() != targets.size() || z.size() != weights.size()) {
    shape_mismatch("bce_with_logits", z, targets);
  }
  double wsum = 0.0, loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    // log(1 + exp(-|z|)) + max(z, 0) - z*y, stable for large |z|
    const double l = std::log1p(std::exp(-std::abs(z[i]))) + std::max(z[i], 0.0) - z[i] * targets[i];
    loss += weights[i] * l;
    wsum += weights[i];
  }
  if (wsum <= 0.0) throw ContractError("bce_with_logits needs positive total weight");
  const std::size_t iz = logits.id();
  return logits.tape().record("bce_with_logits", Tensor::scalar(loss / wsum), {iz},
                              [iz, targets, weights, wsum](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0] / wsum;
    const Tensor& zv = t.value(iz);
    Tensor& gz = t.grad(iz);
    for (std::size_t i = 0; i < zv.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-zv[i]));
      gz[i] += g * weights[i] * (p - targets[i]);
    }
  });
}

Var forward_op(OpKind kind, std::span<const Var> inputs) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw ContractError("operation expects " + std::to_string(n) + " inputs, got " +
                          std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::matmul: need(2); return matmul(inputs[0], inputs[1]);
    case OpKind::add: need(2); return add(inputs[0], inputs[1]);
    case OpKind::add_bias_broadcast: need(2); return add_bias(inputs[0], inputs[1]);
    case OpKind::relu: need(1); return relu(inputs[0]);
    case OpKind::sigmoid: need(1); return sigmoid(inputs[0]);
    case OpKind::tanh: need(1); return tanh(inputs[0]);
    case OpKind::hadamard: need(2); return hadamard(inputs[0], inputs[1]);
    case OpKind::mean: need(1); return mean(inputs[0]);
    case OpKind::sum_sq: need(1); return sum_sq(inputs[0]);
    case OpKind::concat: return concat(inputs);
  }
  throw ContractError("unknown operation kind");
}

}  // namespace hyper
