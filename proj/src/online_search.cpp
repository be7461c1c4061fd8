#include "hyper/online_search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "hyper/autoencoder.hpp"
#include "hyper/errors.hpp"
#include "hyper/seeding.hpp"

namespace hyper {

using nlohmann::json;

namespace {

constexpr int kMaxRejections = 32;

std::vector<double> geometric(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  v.front() = lo;
  v.back() = hi;
  return v;
}

double log_wd(double wd) { return std::log10(wd + 1e-8); }

// Nearest axis value to v in the coordinate `map`; ties go to the lower index.
template <class Map>
std::size_t nearest(const std::vector<double>& axis, double v, Map map) {
  std::size_t best = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < axis.size(); ++i) {
    const double g = std::abs(map(axis[i]) - v);
    if (g < gap) {
      gap = g;
      best = i;
    }
  }
  return best;
}

template <class Map>
double clamp_to_axis(const std::vector<double>& axis, double v, Map map) {
  double lo = map(axis.front()), hi = lo;
  for (double a : axis) {
    lo = std::min(lo, map(a));
    hi = std::max(hi, map(a));
  }
  return std::clamp(v, lo, hi);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json config_json(const HpConfig& c) {
  return {{"n_layers", c.n_layers},       {"compression", c.compression}, {"dropout", c.dropout},
          {"weight_decay", c.weight_decay}, {"widths", c.widths},         {"key", c.key()}};
}

}  // namespace

SigmaGrid SigmaGrid::standard() {
  SigmaGrid g;
  g.values = {geometric(0.25, 2.0, 5), geometric(0.05, 0.8, 5), geometric(0.02, 0.2, 5), geometric(0.1, 1.0, 5)};
  return g;
}

Sigma SigmaGrid::middle() const {
  Sigma s{};
  for (std::size_t d = 0; d < kSearchDims; ++d) {
    if (values[d].empty()) throw ConfigError("sigma grid has an empty dimension");
    s[d] = values[d][values[d].size() / 2];
  }
  return s;
}

bool SigmaGrid::contains(const Sigma& s) const {
  for (std::size_t d = 0; d < kSearchDims; ++d) {
    const auto [lo, hi] = std::minmax_element(values[d].begin(), values[d].end());
    if (s[d] < *lo || s[d] > *hi) return false;
  }
  return true;
}

std::optional<std::size_t> try_sample_local(const HpGrid& grid, const HpConfig& lambda, const Sigma& sigma,
                                            std::mt19937_64& rng) {
  const HpAxes& ax = grid.axes();
  const auto depth_at = std::find(ax.n_layers.begin(), ax.n_layers.end(), lambda.n_layers);
  if (depth_at == ax.n_layers.end()) throw ConfigError("configuration depth is not on the grid");
  const double depth_idx = static_cast<double>(depth_at - ax.n_layers.begin());
  const auto id = [](double v) { return v; };

  std::normal_distribution<double> z(0.0, 1.0);
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    Sigma e{};
    for (std::size_t d = 0; d < kSearchDims; ++d) e[d] = sigma[d] * z(rng);

    const double li = std::round(depth_idx + e[0]);
    if (li < 0 || li >= static_cast<double>(ax.n_layers.size())) continue;
    const double c = clamp_to_axis(ax.compression, lambda.compression + e[1], id);
    const double p = clamp_to_axis(ax.dropout, lambda.dropout + e[2], id);
    const double w = clamp_to_axis(ax.weight_decay, log_wd(lambda.weight_decay) + e[3], log_wd);
    const HpConfig& out = grid.canonical(ax.n_layers[static_cast<std::size_t>(li)],
                                         ax.compression[nearest(ax.compression, c, id)],
                                         ax.dropout[nearest(ax.dropout, p, id)],
                                         ax.weight_decay[nearest(ax.weight_decay, w, log_wd)]);
    return *grid.index_of(out);
  }
  return std::nullopt;
}

const HpConfig& sample_local(const HpGrid& grid, const HpConfig& lambda, const Sigma& sigma, std::mt19937_64& rng) {
  const auto i = try_sample_local(grid, lambda, sigma, rng);
  if (!i) {
    throw SamplingRangeError(std::to_string(kMaxRejections) + " local samples around " + lambda.describe() +
                             " fell outside the grid; sigma is too large");
  }
  return grid[*i];
}

double gaussian_entropy(std::span<const double> sigma) {
  const double unit = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  double h = 0.0;
  for (double s : sigma) {
    if (!(s > 0.0)) throw ContractError("entropy needs positive standard deviations");
    h += unit + std::log(s);
  }
  return h;
}

ProxyScorer::ProxyScorer(const MetaStore& store, const Tensor& x)
    : store_(&store), x_(&x), data_emb_(store.h.embed(x)) {}

double ProxyScorer::predict(const HyperNet& net, const HpConfig& config) {
  const std::string key = config.key();
  if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
  const auto scores = outlier_scores(*x_, net.masked(config)).scores;
  const double v = predict_performance(*store_, config, static_cast<int>(x_->cols()), data_emb_, scores);
  ++evaluations_;
  cache_.emplace(key, v);
  return v;
}

double validation_objective(const HpGrid& grid, const HpConfig& lambda, const Sigma& sigma,
                            const Predictor& predict, int v, double tau, std::mt19937_64& rng) {
  if (v < 1) throw ContractError("validation objective needs at least one sample");
  double sum = 0.0;
  int kept = 0;
  for (int i = 0; i < v; ++i) {
    const auto j = try_sample_local(grid, lambda, sigma, rng);
    if (!j) continue;
    sum += predict(grid[*j]);
    ++kept;
  }
  if (kept == 0) throw SamplingRangeError("every local sample around " + lambda.describe() + " was rejected");
  return sum / kept + tau * gaussian_entropy(sigma);
}

std::size_t final_select(std::span<const HpConfig> candidates, std::span<const double> values, int input_dim) {
  if (candidates.empty()) throw ContractError("no candidates to select from");
  if (candidates.size() != values.size()) throw DimensionError("one value per candidate expected");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (values[i] > values[best] ||
        (values[i] == values[best] && less_complex(candidates[i], candidates[best], input_dim)))
      best = i;
  }
  return best;
}

std::string SearchResult::report() const {
  json trace_j = json::array();
  for (const auto& it : trace) {
    trace_j.push_back({{"iteration", it.iteration},
                       {"lambda", it.lambda.key()},
                       {"sigma", it.sigma},
                       {"best", it.best},
                       {"pool_size", it.pool_size}});
  }
  json pool_j = json::array();
  for (const auto& c : pool) pool_j.push_back(c.key());
  const json j = {{"selected", config_json(selected)},
                  {"predicted", predicted},
                  {"iterations", iterations()},
                  {"lr_halved", lr_halved},
                  {"pool", pool_j},
                  {"trace", trace_j}};
  return j.dump(2) + "\n";
}

std::string SearchResult::timing_report() const {
  json j = json::array();
  for (std::size_t i = 0; i < timing.size(); ++i)
    j.push_back({{"iteration", i}, {"train_seconds", timing[i].train_seconds}, {"select_seconds", timing[i].select_seconds}});
  return j.dump(2) + "\n";
}

SearchResult hyper_select(const Tensor& x, const MetaStore& store, const SearchOptions& opt, std::uint64_t seed) {
  if (opt.hn_epochs < 1 || opt.samples < 1 || opt.patience < 1 || opt.max_iterations < 1)
    throw ConfigError("search needs positive T, V, patience and iteration limit");
  for (const auto& v : opt.sigma_grid.values)
    for (double s : v)
      if (!(s > 0.0)) throw ConfigError("sigma grid values must be positive");
  if (x.rank() != 2 || x.rows() == 0) throw ContractError("test data must be a nonempty matrix");

  const int f = static_cast<int>(x.cols());
  const HpGrid grid(store.axes, f);
  SearchResult out;
  const HpConfig start = resolve(grid, store.best);
  if (grid.size() == 1) {
    out.selected = start;
    out.pool = {start};
    return out;
  }

  std::mt19937_64 init_rng = make_stream(seed, "online_hn");
  std::mt19937_64 train_rng = make_stream(seed, "online_train");
  std::mt19937_64 sample_rng = make_stream(seed, "online_sample");
  HyperNet net(make_hn_config(store.hn, grid), init_rng);
  HnTrainer trainer(net, store.hn.train);
  ProxyScorer scorer(store, x);
  const Predictor predict = [&](const HpConfig& c) { return scorer.predict(net, c); };

  const std::size_t n = x.rows();
  const std::size_t batch = std::max<std::size_t>(1, std::min(store.hn.train.batch_samples, n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  HpConfig curr = start;
  Sigma sigma = opt.sigma_grid.middle();
  std::unordered_set<std::string> in_pool;
  double best = -std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int iter = 0; iter < opt.max_iterations && stall < opt.patience; ++iter) {
    auto t0 = std::chrono::steady_clock::now();
    // S1: local hypernetwork training; every sampled configuration joins S.
    for (int t = 0; t < opt.hn_epochs; ++t) {
      const auto j = try_sample_local(grid, curr, sigma, sample_rng);
      if (!j) continue;
      const HpConfig& lam = grid[*j];
      if (in_pool.insert(lam.key()).second) out.pool.push_back(lam);
      std::shuffle(order.begin(), order.end(), train_rng);
      const std::vector<HpConfig> configs{lam};
      for (std::size_t s = 0; s < n; s += batch) {
        const std::size_t e = std::min(n, s + batch);
        Tensor xb({e - s, x.cols()});
        for (std::size_t i = s; i < e; ++i) std::copy_n(x.data() + order[i] * x.cols(), x.cols(), xb.data() + (i - s) * x.cols());
        try {
          trainer.step(configs, xb, train_rng);
        } catch (const NumericError& err) {
          if (out.lr_halved) throw NumericError(std::string("hypernetwork loss stayed non-finite after halving lr: ") + err.what());
          out.lr_halved = true;
          trainer.set_lr(trainer.lr() * 0.5);
        }
      }
    }
    if (out.pool.empty()) throw SamplingRangeError("no local sample was accepted around " + curr.describe());
    scorer.invalidate();
    const double train_s = seconds_since(t0);

    // S2: move the current configuration, then the sampling radius.
    t0 = std::chrono::steady_clock::now();
    const std::size_t first = opt.candidate_cap && out.pool.size() > opt.candidate_cap ? out.pool.size() - opt.candidate_cap : 0;
    const std::uint64_t stage_seed = derive_seed(seed, "online_objective", static_cast<std::uint64_t>(iter));
    // Every objective evaluation in a stage replays the same draws.
    const auto objective = [&](const HpConfig& lam, const Sigma& s) {
      std::mt19937_64 r(stage_seed);
      return validation_objective(grid, lam, s, predict, opt.samples, opt.tau, r);
    };
    std::vector<HpConfig> cands(out.pool.begin() + static_cast<std::ptrdiff_t>(first), out.pool.end());
    std::vector<double> g;
    for (const auto& c : cands) g.push_back(objective(c, sigma));
    curr = cands[final_select(cands, g, f)];

    for (std::size_t d = 0; d < kSearchDims; ++d) {
      double best_g = -std::numeric_limits<double>::infinity();
      double best_s = sigma[d];
      for (double v : opt.sigma_grid.values[d]) {
        Sigma s = sigma;
        s[d] = v;
        const double val = objective(curr, s);
        if (val > best_g) {
          best_g = val;
          best_s = v;
        }
      }
      sigma[d] = best_s;
    }

    double iter_best = -std::numeric_limits<double>::infinity();
    for (const auto& c : out.pool) iter_best = std::max(iter_best, predict(c));
    if (iter_best > best + opt.tolerance) {
      stall = 0;
    } else {
      ++stall;
    }
    best = std::max(best, iter_best);
    out.trace.push_back({iter, curr, sigma, best, out.pool.size()});
    out.timing.push_back({train_s, seconds_since(t0)});
  }

  std::vector<double> values;
  for (const auto& c : out.pool) values.push_back(predict(c));
  const std::size_t k = final_select(out.pool, values, f);
  out.selected = out.pool[k];
  out.predicted = values[k];
  out.scores = outlier_scores(x, net.masked(out.selected)).scores;
  return out;
}

}  // namespace hyper
