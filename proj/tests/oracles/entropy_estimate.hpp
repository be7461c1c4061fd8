#pragma once

// Kozachenko-Leonenko nearest-neighbour estimate of the differential entropy
// of a one-dimensional sample.

#include <vector>

namespace hyper::oracle {

double knn_entropy_1d(std::vector<double> samples);

}  // namespace hyper::oracle
