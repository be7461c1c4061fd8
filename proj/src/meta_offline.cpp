#include "hyper/meta_offline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hyper/autoencoder.hpp"
#include "hyper/errors.hpp"
#include "hyper/metrics.hpp"
#include "hyper/optim.hpp"
#include "hyper/seeding.hpp"

namespace hyper {

using nlohmann::json;

std::size_t hash_bucket(std::uint64_t seed, std::size_t feature, int k) {
  return static_cast<std::size_t>(splitmix64(seed ^ splitmix64(feature)) % static_cast<std::uint64_t>(k));
}

double hash_sign(std::uint64_t seed, std::size_t feature) {
  return (splitmix64(splitmix64(seed ^ splitmix64(feature))) & 1U) ? -1.0 : 1.0;
}

std::vector<double> feature_hash(std::span<const double> x, int k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("hash size must be positive");
  std::vector<double> out(static_cast<std::size_t>(k), 0.0);
  for (std::size_t f = 0; f < x.size(); ++f) {
    if (!std::isfinite(x[f])) throw NumericError("non-finite feature value");
    out[hash_bucket(seed, f, k)] += hash_sign(seed, f) * x[f];
  }
  return out;
}

Tensor hash_rows(const Tensor& x, int k, std::uint64_t seed) {
  const std::size_t n = x.rows(), f = x.cols();
  const auto K = static_cast<std::size_t>(k);
  Tensor out({n, K});
  for (std::size_t i = 0; i < n; ++i) {
    const auto h = feature_hash(std::span<const double>(x.data() + i * f, f), k, seed);
    std::copy(h.begin(), h.end(), out.data() + i * K);
  }
  return out;
}

Tensor FeatureExtractor::logits(const Tensor& x) const { return net.forward(hash_rows(x, k, hash_seed)); }

std::vector<double> FeatureExtractor::embed(const Tensor& x) const {
  if (x.rows() == 0) throw ContractError("cannot embed an empty dataset");
  const Tensor tap = net.forward(hash_rows(x, k, hash_seed), 2);
  const std::size_t d = tap.cols();
  std::vector<double> out(tap.values().begin(), tap.values().begin() + static_cast<std::ptrdiff_t>(d));
  for (std::size_t i = 1; i < tap.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] = std::max(out[j], tap[i * d + j]);
  return out;
}

namespace {

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> idx) {
  const std::size_t f = x.cols();
  Tensor out({idx.size(), f});
  for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(x.data() + idx[i] * f, f, out.data() + i * f);
  return out;
}

bool both_classes(const std::vector<int>& y) {
  const bool pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool neg = std::find(y.begin(), y.end(), 0) != y.end();
  return pos && neg;
}

}  // namespace

FeatureExtractor train_feature_extractor(std::span<const HistoricalTask> tasks, const ExtractorOptions& opt,
                                         std::uint64_t seed, std::vector<std::string>& warnings) {
  if (tasks.size() < 2) throw ContractError("the feature extractor needs at least two tasks");
  std::mt19937_64 rng(seed);
  FeatureExtractor h;
  h.k = opt.k;
  h.hash_seed = rng();
  h.net = Mlp({opt.k, 128, FeatureExtractor::kEmbedDim, 1}, 0, rng);

  std::vector<double> rows, labels;
  const auto K = static_cast<std::size_t>(opt.k);
  for (const auto& t : tasks) {
    if (t.y.size() != t.x.rows()) throw DimensionError("task " + t.name + " has mismatched labels");
    if (!both_classes(t.y)) {
      warnings.push_back("task " + t.name + " has a single class and is excluded from feature extractor training");
      continue;
    }
    std::vector<std::size_t> idx(t.x.rows());
    std::iota(idx.begin(), idx.end(), 0);
    if (idx.size() > opt.max_rows_per_task) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opt.max_rows_per_task);
      std::sort(idx.begin(), idx.end());
    }
    const Tensor hashed = hash_rows(gather_rows(t.x, idx), opt.k, h.hash_seed);
    rows.insert(rows.end(), hashed.values().begin(), hashed.values().end());
    for (std::size_t i : idx) labels.push_back(static_cast<double>(t.y[i]));
  }
  const std::size_t n = labels.size();
  if (n == 0) throw ContractError("no task with both classes");
  const double pos = std::accumulate(labels.begin(), labels.end(), 0.0);
  const double w_pos = static_cast<double>(n) / (2.0 * pos);
  const double w_neg = static_cast<double>(n) / (2.0 * (static_cast<double>(n) - pos));

  const Tensor all({n, K}, std::move(rows));
  Adam adam(opt.lr);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += opt.batch) {
      const std::size_t end = std::min(n, start + opt.batch);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      Tensor targets({idx.size(), 1}), weights({idx.size(), 1});
      for (std::size_t i = 0; i < idx.size(); ++i) {
        targets[i] = labels[idx[i]];
        weights[i] = labels[idx[i]] > 0.5 ? w_pos : w_neg;
      }
      Tape tape;
      Var out = h.net.forward(tape, tape.constant(gather_rows(all, idx)));
      adam.step(h.net.params(), tape.backward(bce_with_logits(out, targets, weights)));
    }
  }
  return h;
}

std::vector<double> prepare_scores(std::span<const double> scores, std::size_t cap) {
  if (scores.empty()) throw ContractError("empty score set");
  if (cap < 2) throw ConfigError("score cap must be at least 2");
  const double n = static_cast<double>(scores.size());
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= n;
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  const double sd = std::sqrt(var / n);
  const double denom = sd > 0.0 ? sd : 1.0;
  std::vector<double> z(scores.begin(), scores.end());
  for (double& v : z) v = (v - mean) / denom;
  std::sort(z.begin(), z.end());
  if (z.size() <= cap) return z;
  std::vector<double> out(cap);
  for (std::size_t i = 0; i < cap; ++i) {
    const auto pos = static_cast<std::size_t>(std::llround(static_cast<double>(i) * (n - 1.0) / static_cast<double>(cap - 1)));
    out[i] = z[pos];
  }
  return out;
}

namespace {

Tensor column(std::span<const double> v) { return Tensor({v.size(), 1}, std::vector<double>(v.begin(), v.end())); }

constexpr ParamId kHeadFirstId = 100;

// Mean-pooled encoder output of several sets at once: rows of the result
// follow `sets`.
Var pooled(Tape& tape, const Mlp& encoder, const std::vector<const std::vector<double>*>& sets) {
  std::size_t total = 0;
  for (const auto* s : sets) total += s->size();
  std::vector<double> stacked;
  stacked.reserve(total);
  Tensor pool({sets.size(), total});
  std::size_t offset = 0;
  for (std::size_t b = 0; b < sets.size(); ++b) {
    stacked.insert(stacked.end(), sets[b]->begin(), sets[b]->end());
    const double w = 1.0 / static_cast<double>(sets[b]->size());
    for (std::size_t i = 0; i < sets[b]->size(); ++i) pool[b * total + offset + i] = w;
    offset += sets[b]->size();
  }
  Var h = encoder.forward(tape, tape.constant(column(stacked)), -1, true);
  return matmul(tape.constant(std::move(pool)), h);
}

double encoder_loss(const ScoreEncoder& g, const std::vector<std::vector<double>>& sets, std::span<const double> targets) {
  double s = 0.0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const double d = g.predict(sets[i]) - targets[i];
    s += d * d;
  }
  return s / static_cast<double>(sets.size());
}

}  // namespace

std::vector<double> ScoreEncoder::embed(std::span<const double> prepared) const {
  if (prepared.empty()) throw ContractError("empty score set");
  const Tensor h = encoder.forward(column(prepared), -1, true);
  const std::size_t d = h.cols();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += h[i * d + j];
  for (double& v : out) v /= static_cast<double>(h.rows());
  return out;
}

double ScoreEncoder::predict(std::span<const double> prepared) const {
  const auto e = embed(prepared);
  const Tensor logit = head.forward(Tensor({1, e.size()}, e));
  return 1.0 / (1.0 + std::exp(-logit[0]));
}

ScoreEncoder train_score_encoder(const std::vector<std::vector<double>>& sets, std::span<const double> targets,
                                 const EncoderOptions& opt, std::uint64_t seed, EncoderTrace* trace) {
  if (sets.empty() || sets.size() != targets.size()) throw DimensionError("one target per score set required");
  std::mt19937_64 rng(seed);
  ScoreEncoder g;
  g.encoder = Mlp({1, 32, ScoreEncoder::kEmbedDim}, 0, rng);
  g.head = Mlp({ScoreEncoder::kEmbedDim, 16, 1}, kHeadFirstId, rng);
  if (trace) trace->initial_loss = encoder_loss(g, sets, targets);

  ParamMap params = g.encoder.params();
  for (const auto& [id, t] : g.head.params()) params[id] = t;
  Adam adam(opt.lr);
  std::vector<std::size_t> order(sets.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, opt.batch_sets);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < sets.size(); start += batch) {
      const std::size_t end = std::min(sets.size(), start + batch);
      std::vector<const std::vector<double>*> chosen;
      Tensor y({end - start, 1});
      for (std::size_t i = start; i < end; ++i) {
        chosen.push_back(&sets[order[i]]);
        y[i - start] = targets[order[i]];
      }
      Tape tape;
      Var pred = sigmoid(g.head.forward(tape, pooled(tape, g.encoder, chosen)));
      Var loss = scale(sum_sq(sub(pred, tape.constant(std::move(y)))), 1.0 / static_cast<double>(end - start));
      adam.step(params, tape.backward(loss));
      for (auto& [id, t] : g.encoder.params()) t = params.at(id);
      for (auto& [id, t] : g.head.params()) t = params.at(id);
    }
  }
  if (trace) trace->final_loss = encoder_loss(g, sets, targets);
  return g;
}

std::uint64_t FeatureLayout::digest() const {
  std::string text = "v" + std::to_string(version);
  for (const auto& n : names) text += "|" + n;
  return fnv1a64(text);
}

FeatureLayout default_layout() {
  FeatureLayout l;
  l.names = {"n_layers", "compression", "dropout", "log_weight_decay", "width_ratio"};
  for (int i = 0; i < FeatureExtractor::kEmbedDim; ++i) l.names.push_back("data_" + std::to_string(i));
  for (int i = 0; i < ScoreEncoder::kEmbedDim; ++i) l.names.push_back("model_" + std::to_string(i));
  return l;
}

std::vector<double> assemble_features(const HpConfig& config, int input_dim, std::span<const double> data_emb,
                                      std::span<const double> model_emb) {
  if (data_emb.size() != FeatureExtractor::kEmbedDim || model_emb.size() != ScoreEncoder::kEmbedDim) {
    throw DimensionError("embeddings of size " + std::to_string(data_emb.size()) + " and " +
                         std::to_string(model_emb.size()) + " do not fit the feature layout");
  }
  if (config.widths.empty() || input_dim < 1) throw ContractError("configuration without widths");
  const double mean_width =
      std::accumulate(config.widths.begin(), config.widths.end(), 0.0) / static_cast<double>(config.widths.size());
  std::vector<double> out{static_cast<double>(config.n_layers), config.compression, config.dropout,
                          config.log_weight_decay(), mean_width / input_dim};
  out.insert(out.end(), data_emb.begin(), data_emb.end());
  out.insert(out.end(), model_emb.begin(), model_emb.end());
  return out;
}

double ProxyValidator::predict(std::span<const double> features) const {
  if (features.size() != layout_.size()) {
    throw DimensionError("feature vector of " + std::to_string(features.size()) + " values, layout has " +
                         std::to_string(layout_.size()));
  }
  return std::clamp(model_.predict(features), 0.0, 1.0);
}

void ProxyValidator::check_layout(const FeatureLayout& expected) const {
  if (layout_.digest() != expected.digest()) {
    throw VersionError("proxy validator feature layout " + hex64(layout_.digest()) + " does not match " +
                       hex64(expected.digest()));
  }
}

ProxyValidator train_fval(const Tensor& features, std::span<const double> targets, const GbdtOptions& options,
                          std::vector<std::string>& warnings) {
  FeatureLayout layout = default_layout();
  if (features.rows() < kMinFvalRows) {
    throw ContractError("the proxy validator needs at least " + std::to_string(kMinFvalRows) + " (task, config) pairs, got " +
                        std::to_string(features.rows()));
  }
  if (features.cols() != layout.size()) {
    throw DimensionError("feature matrix has " + std::to_string(features.cols()) + " columns, layout has " +
                         std::to_string(layout.size()));
  }
  Gbdt model = Gbdt::fit(features, targets, options);
  if (model.constant()) warnings.push_back("all proxy-validator targets are equal; f_val is constant");
  return ProxyValidator(std::move(layout), std::move(model));
}

std::vector<AxisPoint> axis_points(const HpAxes& axes) {
  std::vector<AxisPoint> out;
  for (int l : axes.n_layers)
    for (double c : axes.compression)
      for (double d : axes.dropout)
        for (double wd : axes.weight_decay) out.push_back({l, c, d, wd});
  return out;
}

const HpConfig& resolve(const HpGrid& grid, const AxisPoint& p) {
  return grid.canonical(p.n_layers, p.compression, p.dropout, p.weight_decay);
}

AxisPoint axis_point(const HpConfig& c) { return {c.n_layers, c.compression, c.dropout, c.weight_decay}; }

HyperNetConfig make_hn_config(const HnSettings& s, const HpGrid& grid) {
  HyperNetConfig c;
  c.max_depth = grid.max_depth();
  c.max_width = grid.max_width();
  c.hidden = s.hidden;
  c.d_pe = s.d_pe;
  c.dropout = s.dropout;
  const auto [lo, hi] = std::minmax_element(grid.axes().weight_decay.begin(), grid.axes().weight_decay.end());
  c.log_wd_min = std::log10(*lo + 1e-8);
  c.log_wd_max = std::log10(*hi + 1e-8);
  if (!(c.log_wd_max > c.log_wd_min)) c.log_wd_max = c.log_wd_min + 1.0;
  c.grid_digest = grid.digest();
  return c;
}

TaskScores collect_task(const HistoricalTask& task, const HpAxes& axes, const HnSettings& hn, std::uint64_t seed) {
  if (task.y.size() != task.x.rows()) throw DimensionError("task " + task.name + " has mismatched labels");
  std::mt19937_64 rng(seed);
  const HpGrid grid(axes, static_cast<int>(task.x.cols()));
  HyperNet net(make_hn_config(hn, grid), rng);
  hn_train_scheduled(grid, task.x, hn.epochs, Schedule::deep_first(axes.n_layers, hn.epochs), net, hn.train, rng);

  TaskScores out;
  out.name = task.name;
  out.input_dim = grid.input_dim();
  out.configs = grid.configs();
  for (const auto& c : grid.configs()) {
    auto s = outlier_scores(task.x, net.masked(c), task.name, c.key()).scores;
    out.perf.push_back(auroc(s, task.y));
    out.scores.push_back(std::move(s));
  }
  return out;
}

PerfMatrix perf_matrix(std::span<const TaskScores> tasks, const HpAxes& axes) {
  PerfMatrix p;
  p.columns = axis_points(axes);
  for (const auto& t : tasks) {
    const HpGrid grid(axes, t.input_dim);
    std::map<std::string, std::size_t> at;
    for (std::size_t j = 0; j < t.configs.size(); ++j) at[t.configs[j].key()] = j;
    std::vector<double> row;
    for (const auto& pt : p.columns) {
      const auto it = at.find(resolve(grid, pt).key());
      if (it == at.end()) throw ContractError("task " + t.name + " lacks a grid configuration");
      row.push_back(t.perf[it->second]);
    }
    p.tasks.push_back(t.name);
    p.values.push_back(std::move(row));
  }
  return p;
}

std::size_t global_best(const PerfMatrix& p, int reference_dim) {
  if (p.values.empty() || p.columns.empty()) throw ContractError("empty performance matrix");
  std::vector<int> depths;
  for (const auto& c : p.columns) depths.push_back(c.n_layers);
  std::sort(depths.begin(), depths.end());
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
  auto config_of = [&](const AxisPoint& a) {
    return HpConfig{a.n_layers, a.compression, a.dropout, a.weight_decay,
                    widths_from_hp(reference_dim, a.n_layers, a.compression, depths)};
  };
  std::size_t best = 0;
  double best_mean = -1.0;
  for (std::size_t j = 0; j < p.columns.size(); ++j) {
    double m = 0.0;
    for (const auto& row : p.values) m += row[j];
    m /= static_cast<double>(p.values.size());
    if (m > best_mean || (m == best_mean && less_complex(config_of(p.columns[j]), config_of(p.columns[best]), reference_dim))) {
      best = j;
      best_mean = m;
    }
  }
  return best;
}

double predict_performance(const MetaStore& store, const HpConfig& config, int input_dim,
                           std::span<const double> data_emb, std::span<const double> scores) {
  const auto emb = store.g.embed(prepare_scores(scores));
  return store.f_val.predict(assemble_features(config, input_dim, data_emb, emb));
}

MetaTrainResult meta_train(std::span<const HistoricalTask> tasks, const MetaOptions& options, std::uint64_t seed) {
  if (tasks.size() < 2) throw ContractError("meta-training needs at least two tasks");
  options.axes.validate();
  MetaTrainResult out;
  MetaStore& store = out.store;
  store.seed = seed;
  store.axes = options.axes;
  store.hn = options.hn;
  store.reference_dim = static_cast<int>(tasks[0].x.cols());

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!both_classes(tasks[i].y)) throw ContractError("task " + tasks[i].name + " needs both classes");
    out.tasks.push_back(collect_task(tasks[i], options.axes, options.hn, derive_seed(seed, "hn", i)));
  }

  store.h = train_feature_extractor(tasks, options.extractor, derive_seed(seed, "extractor"), store.warnings);

  std::vector<std::vector<double>> sets;
  std::vector<double> targets;
  for (const auto& t : out.tasks) {
    for (std::size_t j = 0; j < t.configs.size(); ++j) {
      sets.push_back(prepare_scores(t.scores[j]));
      targets.push_back(t.perf[j]);
    }
  }
  store.g = train_score_encoder(sets, targets, options.encoder, derive_seed(seed, "encoder"));

  const std::size_t dim = default_layout().size();
  Tensor features({sets.size(), dim});
  std::size_t row = 0;
  for (std::size_t i = 0; i < out.tasks.size(); ++i) {
    const auto data_emb = store.h.embed(tasks[i].x);
    for (const auto& c : out.tasks[i].configs) {
      const auto f = assemble_features(c, out.tasks[i].input_dim, data_emb, store.g.embed(sets[row]));
      std::copy(f.begin(), f.end(), features.data() + row * dim);
      ++row;
    }
  }
  GbdtOptions gbdt = options.gbdt;
  gbdt.seed = derive_seed(seed, "gbdt");
  store.f_val = train_fval(features, targets, gbdt, store.warnings);

  store.perf = perf_matrix(out.tasks, options.axes);
  store.best = store.perf.columns[global_best(store.perf, store.reference_dim)];
  return out;
}

// Persistence ---------------------------------------------------------------

namespace {

json axes_json(const HpAxes& a) {
  return {{"n_layers", a.n_layers}, {"compression", a.compression}, {"dropout", a.dropout}, {"weight_decay", a.weight_decay}};
}

HpAxes axes_from(const json& j) {
  HpAxes a;
  a.n_layers = j.at("n_layers").get<std::vector<int>>();
  a.compression = j.at("compression").get<std::vector<double>>();
  a.dropout = j.at("dropout").get<std::vector<double>>();
  a.weight_decay = j.at("weight_decay").get<std::vector<double>>();
  return a;
}

json point_json(const AxisPoint& p) { return {p.n_layers, p.compression, p.dropout, p.weight_decay}; }
AxisPoint point_from(const json& j) {
  return {j[0].get<int>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json hn_json(const HnSettings& s) {
  return {{"hidden", s.hidden}, {"d_pe", s.d_pe}, {"dropout", s.dropout}, {"epochs", s.epochs},
          {"lr", s.train.lr}, {"momentum", s.train.momentum}, {"batch_samples", s.train.batch_samples},
          {"configs_per_step", s.train.configs_per_step}};
}

HnSettings hn_from(const json& j) {
  HnSettings s;
  s.hidden = j.at("hidden").get<int>();
  s.d_pe = j.at("d_pe").get<int>();
  s.dropout = j.at("dropout").get<double>();
  s.epochs = j.at("epochs").get<int>();
  s.train.lr = j.at("lr").get<double>();
  s.train.momentum = j.at("momentum").get<double>();
  s.train.batch_samples = j.at("batch_samples").get<std::size_t>();
  s.train.configs_per_step = j.at("configs_per_step").get<std::size_t>();
  return s;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

constexpr const char* kSeedDerivation =
    "stream(tag, index) = splitmix64(splitmix64(master ^ fnv1a64(tag)) + index); "
    "tags: hn/<task index>, extractor, encoder, gbdt";

}  // namespace

void MetaStore::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::map<std::string, std::string> files;
  files["h.json"] = json{{"hash_seed", h.hash_seed}, {"k", h.k}, {"net", json::parse(h.net.serialize())}}.dump();
  files["g.json"] = json{{"encoder", json::parse(g.encoder.serialize())}, {"head", json::parse(g.head.serialize())}}.dump();
  files["fval.json"] = json{{"layout_version", f_val.layout().version},
                            {"layout", f_val.layout().names},
                            {"model", json::parse(f_val.model().serialize())}}.dump();
  json perf_j{{"tasks", perf.tasks}, {"values", perf.values}};
  auto& cols = perf_j["columns"] = json::array();
  for (const auto& c : perf.columns) cols.push_back(point_json(c));
  files["perf.json"] = perf_j.dump();

  json manifest{{"version", version},
                {"seed", seed},
                {"seed_derivation", kSeedDerivation},
                {"axes", axes_json(axes)},
                {"grid_digest", hex64(axes.digest())},
                {"hn", hn_json(hn)},
                {"global_best", point_json(best)},
                {"reference_dim", reference_dim},
                {"warnings", warnings}};
  for (const auto& [name, text] : files) {
    write_file(dir / name, text);
    manifest["files"][name] = hex64(fnv1a64(text));
  }
  write_file(dir / "manifest.json", manifest.dump(2));
}

MetaStore MetaStore::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("meta store directory " + dir.string() + " not found");
  try {
    const json manifest = json::parse(read_file(dir / "manifest.json"));
    MetaStore s;
    s.version = manifest.at("version").get<int>();
    if (s.version != kVersion) {
      throw VersionError("meta store version " + std::to_string(s.version) + ", expected " + std::to_string(kVersion));
    }
    std::map<std::string, json> parts;
    for (const auto& [name, digest] : manifest.at("files").items()) {
      const std::string text = read_file(dir / name);
      if (hex64(fnv1a64(text)) != digest.get<std::string>()) throw VersionError("meta store file " + name + " fails its digest");
      parts[name] = json::parse(text);
    }
    for (const char* need : {"h.json", "g.json", "fval.json", "perf.json"})
      if (!parts.count(need)) throw ParseError(std::string("meta store lacks ") + need);

    s.seed = manifest.at("seed").get<std::uint64_t>();
    s.axes = axes_from(manifest.at("axes"));
    s.axes.validate();
    if (hex64(s.axes.digest()) != manifest.at("grid_digest").get<std::string>()) {
      throw VersionError("meta store grid digest does not match its axes");
    }
    s.hn = hn_from(manifest.at("hn"));
    s.best = point_from(manifest.at("global_best"));
    s.reference_dim = manifest.at("reference_dim").get<int>();
    s.warnings = manifest.at("warnings").get<std::vector<std::string>>();

    const json& hj = parts["h.json"];
    s.h.hash_seed = hj.at("hash_seed").get<std::uint64_t>();
    s.h.k = hj.at("k").get<int>();
    s.h.net = Mlp::deserialize(hj.at("net").dump());
    const json& gj = parts["g.json"];
    s.g.encoder = Mlp::deserialize(gj.at("encoder").dump());
    s.g.head = Mlp::deserialize(gj.at("head").dump());
    const json& fj = parts["fval.json"];
    FeatureLayout layout;
    layout.version = fj.at("layout_version").get<int>();
    layout.names = fj.at("layout").get<std::vector<std::string>>();
    s.f_val = ProxyValidator(std::move(layout), Gbdt::deserialize(fj.at("model").dump()));
    s.f_val.check_layout(default_layout());
    const json& pj = parts["perf.json"];
    s.perf.tasks = pj.at("tasks").get<std::vector<std::string>>();
    s.perf.values = pj.at("values").get<std::vector<std::vector<double>>>();
    for (const auto& c : pj.at("columns")) s.perf.columns.push_back(point_from(c));
    if (s.perf.columns != axis_points(s.axes)) throw VersionError("performance matrix columns do not match the grid");
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("meta store: ") + e.what());
  }
}

}  // namespace hyper
