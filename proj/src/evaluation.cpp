#include "hyper/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "hyper/errors.hpp"
#include "hyper/metrics.hpp"
#include "hyper/seeding.hpp"

namespace hyper {

using nlohmann::json;

namespace {

template <class T, class Map>
T nearest(const std::vector<T>& axis, double target, Map map) {
  T best = axis.front();
  for (const T& v : axis)
    if (std::abs(map(v) - target) < std::abs(map(best) - target)) best = v;
  return best;
}

}  // namespace

const HpConfig& baseline_default(const HpGrid& grid) {
  const auto& ax = grid.axes();
  const auto id = [](double v) { return v; };
  const auto log_wd = [](double w) { return std::log10(w + 1e-8); };
  return grid.canonical(nearest(ax.n_layers, 4.0, [](int l) { return static_cast<double>(l); }),
                        nearest(ax.compression, 1.0, id), nearest(ax.dropout, 0.2, id),
                        nearest(ax.weight_decay, log_wd(0.0), log_wd));
}

const HpConfig& baseline_global_best(const MetaStore& store, const HpGrid& grid) { return resolve(grid, store.best); }

RandomBaseline baseline_random(std::span<const double> perf) {
  if (perf.empty()) throw ContractError("empty performance row");
  RandomBaseline r;
  for (double p : perf) r.expected_performance += p;
  r.expected_performance /= static_cast<double>(perf.size());
  if (perf.size() == 1) return r;
  const auto rk = roc_rank(perf);
  for (double v : rk) r.expected_rank += v;
  r.expected_rank /= static_cast<double>(rk.size());
  return r;
}

std::size_t TruthTable::index(const HpConfig& c) const {
  const std::string k = c.key();
  for (std::size_t i = 0; i < configs.size(); ++i)
    if (configs[i].key() == k) return i;
  throw ContractError("configuration " + c.describe() + " is not in the truth table");
}

TruthTable scratch_truth(const Tensor& x, std::span<const int> labels, const HpGrid& grid,
                         const ScratchTrainOptions& options, std::uint64_t seed) {
  TruthTable t;
  t.configs = grid.configs();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    auto rng = make_stream(seed, "scratch", j);
    const auto w = train_from_scratch(x, grid[j], grid.max_depth(), options, rng);
    t.auroc.push_back(auroc(outlier_scores(x, w).scores, labels));
  }
  t.rank = t.auroc.size() > 1 ? roc_rank(t.auroc) : std::vector<double>(t.auroc.size(), 0.0);
  return t;
}

const MethodResult& TaskEvaluation::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.method == name) return m;
  throw ContractError("no result for method " + name);
}

TaskEvaluation evaluate_selection(const std::string& task, const TruthTable& truth, const HpConfig& selected,
                                  const MetaStore& store, const HpGrid& grid) {
  TaskEvaluation e;
  e.task = task;
  const auto rb = baseline_random(truth.auroc);
  e.methods.push_back({"random", "", rb.expected_performance, rb.expected_rank});
  const auto add = [&](const std::string& name, const HpConfig& c) {
    const std::size_t i = truth.index(c);
    e.methods.push_back({name, c.describe(), truth.auroc[i], truth.rank[i]});
  };
  add("default", baseline_default(grid));
  add("global_best", baseline_global_best(store, grid));
  add("hyper", selected);
  return e;
}

double EvaluationSummary::mean_rank(const std::string& method) const {
  if (tasks.empty()) throw ContractError("no evaluated tasks");
  double s = 0.0;
  for (const auto& t : tasks) s += t.method(method).rank;
  return s / static_cast<double>(tasks.size());
}

int EvaluationSummary::beats_random() const {
  int n = 0;
  for (const auto& t : tasks) n += t.method("hyper").rank < t.method("random").rank;
  return n;
}

int EvaluationSummary::ties_or_beats_default() const {
  int n = 0;
  for (const auto& t : tasks) n += t.method("hyper").rank <= t.method("default").rank;
  return n;
}

double EvaluationSummary::wilcoxon_vs(const std::string& method) const {
  std::vector<double> a, b;
  for (const auto& t : tasks) {
    a.push_back(t.method("hyper").auroc);
    b.push_back(t.method(method).auroc);
  }
  return wilcoxon_signed_rank(a, b).p_value;
}

std::string EvaluationSummary::report() const {
  json j;
  auto& ts = j["tasks"] = json::array();
  for (const auto& t : tasks) {
    json m = json::array();
    for (const auto& r : t.methods) m.push_back({{"method", r.method}, {"config", r.config}, {"auroc", r.auroc}, {"rank", r.rank}});
    ts.push_back({{"task", t.task}, {"methods", m}});
  }
  if (!tasks.empty()) {
    for (const char* name : {"random", "default", "global_best", "hyper"}) j["mean_rank"][name] = mean_rank(name);
    for (const char* name : {"random", "default", "global_best"}) j["wilcoxon_p"][name] = wilcoxon_vs(name);
    j["beats_random"] = beats_random();
    j["ties_or_beats_default"] = ties_or_beats_default();
  }
  return j.dump(2) + "\n";
}

}  // namespace hyper
