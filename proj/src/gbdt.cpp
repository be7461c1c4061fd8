#include "hyper/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "hyper/errors.hpp"

namespace hyper {

namespace {

double tree_value(const Gbdt::Tree& tree, std::span<const double> row) {
  int k = 0;
  while (tree[static_cast<std::size_t>(k)].feature >= 0) {
    const auto& n = tree[static_cast<std::size_t>(k)];
    k = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return tree[static_cast<std::size_t>(k)].value;
}

struct Split {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// Grows one tree on `rows` against residuals `r`. `sorted[f]` lists the rows
// in ascending order of feature f.
Gbdt::Tree grow(const Tensor& x, const std::vector<double>& r, const std::vector<std::size_t>& rows,
                const std::vector<std::vector<std::size_t>>& sorted, const GbdtOptions& opt) {
  const std::size_t d = x.cols();
  Gbdt::Tree tree(1);
  std::vector<int> node_of(x.rows(), 0);
  std::vector<char> open{1};
  std::vector<double> count(1, static_cast<double>(rows.size())), sum(1, 0.0);
  for (std::size_t i : rows) sum[0] += r[i];

  for (int level = 0; level < opt.depth; ++level) {
    const std::size_t nodes = tree.size();
    std::vector<Split> best(nodes);
    std::vector<double> run_n(nodes), run_s(nodes), last(nodes);
    for (std::size_t f = 0; f < d; ++f) {
      std::fill(run_n.begin(), run_n.end(), 0.0);
      std::fill(run_s.begin(), run_s.end(), 0.0);
      for (std::size_t i : sorted[f]) {
        const auto k = static_cast<std::size_t>(node_of[i]);
        if (!open[k]) continue;
        const double v = x[i * d + f];
        if (run_n[k] >= opt.min_leaf && v > last[k] && count[k] - run_n[k] >= opt.min_leaf) {
          const double nl = run_n[k], sl = run_s[k];
          const double nr = count[k] - nl, sr = sum[k] - sl;
          const double gain = sl * sl / nl + sr * sr / nr - sum[k] * sum[k] / count[k];
          if (gain > best[k].gain + 1e-12) best[k] = {gain, static_cast<int>(f), 0.5 * (last[k] + v)};
        }
        run_n[k] += 1.0;
        run_s[k] += r[i];
        last[k] = v;
      }
    }
    bool grew = false;
    for (std::size_t k = 0; k < nodes; ++k) {
      if (!open[k]) continue;
      open[k] = 0;
      if (best[k].feature < 0) continue;
      const int left = static_cast<int>(tree.size());
      tree.push_back({});
      tree.push_back({});
      open.push_back(1);
      open.push_back(1);
      tree[k].feature = best[k].feature;
      tree[k].threshold = best[k].threshold;
      tree[k].left = left;
      tree[k].right = left + 1;
      grew = true;
    }
    count.assign(tree.size(), 0.0);
    sum.assign(tree.size(), 0.0);
    for (std::size_t i : rows) {
      auto& k = node_of[i];
      const auto& n = tree[static_cast<std::size_t>(k)];
      if (n.feature >= 0) k = x[i * d + static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
      count[static_cast<std::size_t>(k)] += 1.0;
      sum[static_cast<std::size_t>(k)] += r[i];
    }
    if (!grew) break;
  }
  for (std::size_t k = 0; k < tree.size(); ++k)
    if (tree[k].feature < 0) tree[k].value = count[k] > 0 ? sum[k] / count[k] : 0.0;
  return tree;
}

}  // namespace

Gbdt Gbdt::fit(const Tensor& x, std::span<const double> y, const GbdtOptions& opt) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n == 0 || n != y.size()) throw DimensionError("boosting needs one target per feature row");
  if (opt.depth < 0 || opt.trees < 0 || opt.min_leaf < 1) throw ConfigError("invalid boosting options");
  Gbdt model;
  model.features_ = d;
  model.shrinkage_ = opt.shrinkage;
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
    model.base_ = y[0];
    model.constant_ = true;
    return model;
  }

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> train = all, valid;
  const auto n_valid = static_cast<std::size_t>(std::floor(opt.valid_fraction * static_cast<double>(n)));
  if (n_valid >= 1 && n - n_valid >= static_cast<std::size_t>(2 * opt.min_leaf)) {
    std::mt19937_64 rng(opt.seed);
    std::shuffle(all.begin(), all.end(), rng);
    valid.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_valid));
    train.assign(all.begin() + static_cast<std::ptrdiff_t>(n_valid), all.end());
    std::sort(train.begin(), train.end());
  }

  double mean = 0.0;
  for (std::size_t i : train) mean += y[i];
  model.base_ = mean / static_cast<double>(train.size());

  std::vector<std::vector<std::size_t>> sorted(d, train);
  for (std::size_t f = 0; f < d; ++f) {
    std::stable_sort(sorted[f].begin(), sorted[f].end(),
                     [&](std::size_t a, std::size_t b) { return x[a * d + f] < x[b * d + f]; });
  }

  std::vector<double> pred(n, model.base_), resid(n, 0.0);
  auto valid_mse = [&] {
    double s = 0.0;
    for (std::size_t i : valid) s += (pred[i] - y[i]) * (pred[i] - y[i]);
    return s / static_cast<double>(valid.size());
  };
  double best = valid.empty() ? 0.0 : valid_mse();
  std::size_t best_count = 0;
  for (int t = 0; t < opt.trees; ++t) {
    for (std::size_t i : train) resid[i] = y[i] - pred[i];
    Tree tree = grow(x, resid, train, sorted, opt);
    for (std::size_t i = 0; i < n; ++i)
      pred[i] += opt.shrinkage * tree_value(tree, std::span<const double>(x.data() + i * d, d));
    model.trees_.push_back(std::move(tree));
    if (!valid.empty()) {
      const double mse = valid_mse();
      if (mse < best) {
        best = mse;
        best_count = model.trees_.size();
      }
    }
  }
  if (!valid.empty()) model.trees_.resize(best_count);
  return model;
}

double Gbdt::predict(std::span<const double> row) const {
  if (row.size() != features_) {
    throw DimensionError("feature row of " + std::to_string(row.size()) + " values, model expects " +
                         std::to_string(features_));
  }
  double v = base_;
  for (const auto& t : trees_) v += shrinkage_ * tree_value(t, row);
  return v;
}

std::vector<double> Gbdt::predict(const Tensor& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(std::span<const double>(x.data() + i * x.cols(), x.cols()));
  return out;
}

std::string Gbdt::serialize() const {
  nlohmann::json j;
  j["base"] = base_;
  j["shrinkage"] = shrinkage_;
  j["features"] = features_;
  j["constant"] = constant_;
  auto& trees = j["trees"] = nlohmann::json::array();
  for (const auto& t : trees_) {
    auto jt = nlohmann::json::array();
    for (const auto& n : t) jt.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(jt));
  }
  return j.dump();
}

Gbdt Gbdt::deserialize(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Gbdt m;
    m.base_ = j.at("base").get<double>();
    m.shrinkage_ = j.at("shrinkage").get<double>();
    m.features_ = j.at("features").get<std::size_t>();
    m.constant_ = j.at("constant").get<bool>();
    for (const auto& jt : j.at("trees")) {
      Tree t;
      for (const auto& n : jt) t.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(), n[4].get<double>()});
      m.trees_.push_back(std::move(t));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("boosted trees: ") + e.what());
  }
}

}  // namespace hyper
