#pragma once

#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "hyper/tape.hpp"

namespace hyper {

using ParamMap = std::map<ParamId, Tensor>;

// Builds a scalar loss on `tape`, registering each entry of `params` through
// tape.parameter(). Must be pure: same params, same loss.
using LossGraphFn = std::function<Var(Tape& tape, const ParamMap& params)>;

// A single coordinate of one parameter tensor.
struct Probe {
  ParamId param;
  std::size_t index;
};

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  Probe worst{};
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t probes = 0;
};

// Compares reverse-mode gradients against central differences
// (f(p + eps) - f(p - eps)) / (2 eps). The error of a coordinate is
// |analytic - numeric| / max(|numeric|, 1e-8). With no probe list every
// coordinate of every parameter is checked.
FiniteDiffReport finite_diff_check(const LossGraphFn& loss_fn, const ParamMap& params, double eps,
                                   const std::vector<Probe>& probes = {});

// Convenience wrapper returning only the maximum relative error.
double finite_diff_max_error(const LossGraphFn& loss_fn, const ParamMap& params, double eps);

}  // namespace hyper
