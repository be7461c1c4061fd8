#pragma once

// A small meta-trained store for tests that need one: a few synthetic tasks,
// a coarse grid and short training budgets.

#include <cstdint>
#include <vector>

#include "hyper/dataset.hpp"
#include "hyper/meta_offline.hpp"

namespace hyper::testing {

HpAxes tiny_axes();
MetaOptions tiny_options();
std::vector<Dataset> tiny_tasks(int n, std::uint64_t seed);
// Meta-trained once per process on six tasks.
const MetaTrainResult& tiny_meta();

}  // namespace hyper::testing
