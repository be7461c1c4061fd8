#include "hyper/optim.hpp"

#include <cmath>

namespace hyper {

void MomentumSgd::step(ParamMap& params, const Gradients& grads) {
  for (auto& [id, p] : params) {
    if (!grads.contains(id)) continue;
    const Tensor& g = grads.at(id);
    auto [it, fresh] = velocity_.try_emplace(id, Tensor(p.shape()));
    Tensor& v = it->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum_ * v[i] - lr_ * g[i];
      p[i] += v[i];
    }
  }
}

void Adam::step(ParamMap& params, const Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [id, p] : params) {
    if (!grads.contains(id)) continue;
    const Tensor& g = grads.at(id);
    Tensor& m = m_.try_emplace(id, Tensor(p.shape())).first->second;
    Tensor& v = v_.try_emplace(id, Tensor(p.shape())).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

}  // namespace hyper
