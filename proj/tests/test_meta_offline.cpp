#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "doctest.h"
#include "hyper/errors.hpp"
#include "hyper/meta_offline.hpp"
#include "hyper/metrics.hpp"
#include "hyper/seeding.hpp"
#include "support/tiny_meta.hpp"

using namespace hyper;

namespace {

// Written out from the hashing rule rather than calling the library helpers.
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> reference_hash(const std::vector<double>& x, int k, std::uint64_t seed) {
  std::vector<double> out(static_cast<std::size_t>(k), 0.0);
  for (std::size_t f = 0; f < x.size(); ++f) {
    const std::uint64_t base = seed ^ mix(f);
    const std::size_t bucket = mix(base) % static_cast<std::uint64_t>(k);
    const double sign = (mix(mix(base)) & 1U) ? -1.0 : 1.0;
    out[bucket] += sign * x[f];
  }
  return out;
}

HistoricalTask separable_task(const std::string& name, int f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> low(0.0, 0.3), high(0.7, 1.0);
  const std::size_t n = 300;
  HistoricalTask t{name, Tensor({n, static_cast<std::size_t>(f)}), std::vector<int>(n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    const bool out = i % 5 == 0;
    t.y[i] = out ? 1 : 0;
    for (int j = 0; j < f; ++j) t.x.at(i, static_cast<std::size_t>(j)) = out ? high(rng) : low(rng);
  }
  return t;
}

Tensor rows_of(const Tensor& x, const std::vector<std::size_t>& idx) {
  Tensor out({idx.size(), x.cols()});
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(idx[i], j);
  return out;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hyper_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("feature hashing") {
  const std::vector<double> x{0.3, -1.2, 2.5};
  CHECK(feature_hash(x, 4, 77) == reference_hash(x, 4, 77));
  CHECK(feature_hash(x, 4, 78) == reference_hash(x, 4, 78));

  const std::vector<double> zero(12, 0.0);
  for (double v : feature_hash(zero, 16, 3)) CHECK(v == 0.0);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a(40), b(40), sum(40);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = z(rng);
      b[i] = z(rng);
      sum[i] = a[i] + b[i];
    }
    const auto ha = feature_hash(a, 8, 9), hb = feature_hash(b, 8, 9), hs = feature_hash(sum, 8, 9);
    for (std::size_t j = 0; j < 8; ++j) CHECK(hs[j] == doctest::Approx(ha[j] + hb[j]).epsilon(1e-12));
  }

  // Buckets and signs are close to uniform over many features.
  std::vector<int> count(16, 0);
  int negative = 0;
  for (std::size_t f = 0; f < 16000; ++f) {
    ++count[hash_bucket(11, f, 16)];
    negative += hash_sign(11, f) < 0;
  }
  for (int c : count) CHECK(std::abs(c - 1000) < 150);
  CHECK(std::abs(negative - 8000) < 300);

  Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  const Tensor h = hash_rows(m, 4, 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto row = feature_hash(std::vector<double>{m.at(i, 0), m.at(i, 1), m.at(i, 2)}, 4, 2);
    for (std::size_t j = 0; j < 4; ++j) CHECK(h.at(i, j) == row[j]);
  }
  CHECK_THROWS_AS(feature_hash(x, 0, 1), ConfigError);
  const std::vector<double> bad{1.0, NAN};
  CHECK_THROWS_AS(feature_hash(bad, 4, 1), NumericError);
}

TEST_CASE("feature extractor") {
  std::vector<HistoricalTask> tasks{separable_task("a", 5, 1), separable_task("b", 9, 2), separable_task("c", 3, 3)};
  ExtractorOptions opt;
  opt.epochs = 30;
  std::vector<std::string> warnings;
  const auto h = train_feature_extractor(tasks, opt, 4, warnings);
  CHECK(warnings.empty());

  int correct = 0, total = 0;
  for (const auto& t : tasks) {
    const Tensor logits = h.logits(t.x);
    for (std::size_t i = 0; i < t.y.size(); ++i, ++total) correct += (logits[i] > 0.0) == (t.y[i] == 1);
  }
  CHECK(correct > 0.9 * total);

  const auto again = train_feature_extractor(tasks, opt, 4, warnings);
  CHECK(again.embed(tasks[0].x) == h.embed(tasks[0].x));
  for (const auto& t : tasks) CHECK(h.embed(t.x).size() == FeatureExtractor::kEmbedDim);

  auto single = separable_task("flat", 4, 6);
  std::fill(single.y.begin(), single.y.end(), 0);
  tasks.push_back(single);
  warnings.clear();
  train_feature_extractor(tasks, opt, 4, warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("flat") != std::string::npos);

  CHECK_THROWS_AS(train_feature_extractor(std::span(tasks).first(1), opt, 4, warnings), ContractError);
  CHECK_THROWS_AS(h.embed(Tensor({0, 4})), ContractError);
}

TEST_CASE("property: data embedding invariances") {
  const auto& store = testing::tiny_meta().store;
  const auto data = testing::tiny_tasks(2, 8)[1].x;
  const auto base = store.h.embed(data);
  const std::size_t n = data.rows();

  std::vector<std::size_t> dup;
  for (std::size_t i = 0; i < n; ++i) {
    dup.push_back(i);
    dup.push_back(i);
  }
  CHECK(store.h.embed(rows_of(data, dup)) == base);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  CHECK(store.h.embed(rows_of(data, perm)) == base);

  std::vector<std::size_t> head(perm.begin(), perm.begin() + 50);
  auto prev = store.h.embed(rows_of(data, head));
  for (std::size_t k = 50; k < 80; ++k) {
    head.push_back(perm[k]);
    const auto cur = store.h.embed(rows_of(data, head));
    for (std::size_t j = 0; j < cur.size(); ++j) CHECK(cur[j] >= prev[j]);
    prev = cur;
  }
}

TEST_CASE("prepare_scores") {
  std::mt19937_64 rng(2);
  std::gamma_distribution<double> gam(2.0, 3.0);
  std::vector<double> s(5000);
  for (auto& v : s) v = gam(rng);
  const auto full = prepare_scores(s, 10000);
  double mean = std::accumulate(full.begin(), full.end(), 0.0) / full.size();
  double var = 0.0;
  for (double v : full) var += (v - mean) * (v - mean);
  CHECK(std::abs(mean) < 1e-12);
  CHECK(var / full.size() == doctest::Approx(1.0));
  CHECK(std::is_sorted(full.begin(), full.end()));

  const auto cut = prepare_scores(s);
  CHECK(cut.size() == 1024);
  CHECK(cut.front() == full.front());
  CHECK(cut.back() == full.back());

  std::vector<double> scaled(s);
  for (auto& v : scaled) v = 40.0 * v + 7.0;
  const auto again = prepare_scores(scaled);
  for (std::size_t i = 0; i < cut.size(); ++i) CHECK(again[i] == doctest::Approx(cut[i]).epsilon(1e-9));

  const std::vector<double> flat(10, 3.0);
  for (double v : prepare_scores(flat)) CHECK(v == 0.0);
  CHECK_THROWS_AS(prepare_scores(std::vector<double>{}), ContractError);
}

TEST_CASE("score encoder") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 0.1);
  std::vector<std::vector<double>> sets;
  std::vector<double> targets;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> s(200);
    const bool bimodal = i % 2 == 1;
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = bimodal ? (j % 2 ? 1.0 : -1.0) + z(rng) : u(rng);
    sets.push_back(prepare_scores(s));
    targets.push_back(bimodal ? 0.8 : 0.3);
  }
  EncoderOptions opt;
  opt.epochs = 40;
  EncoderTrace trace;
  const auto g = train_score_encoder(sets, targets, opt, 6, &trace);
  CHECK(trace.final_loss < trace.initial_loss);

  const auto e = g.embed(sets[0]);
  CHECK(e.size() == ScoreEncoder::kEmbedDim);
  std::vector<double> shuffled = sets[0];
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto es = g.embed(shuffled);
  for (std::size_t j = 0; j < e.size(); ++j) CHECK(es[j] == doctest::Approx(e[j]).epsilon(1e-12));
  CHECK(g.predict(shuffled) == doctest::Approx(g.predict(sets[0])).epsilon(1e-12));

  std::vector<double> doubled = sets[0];
  doubled.insert(doubled.end(), sets[0].begin(), sets[0].end());
  const auto ed = g.embed(doubled);
  for (std::size_t j = 0; j < e.size(); ++j) CHECK(ed[j] == doctest::Approx(e[j]).epsilon(1e-12));

  const auto eb = g.embed(sets[1]);
  double gap = 0.0;
  for (std::size_t j = 0; j < e.size(); ++j) gap += std::abs(eb[j] - e[j]);
  CHECK(gap > 1e-3);
  CHECK(g.predict(sets[1]) > g.predict(sets[0]));

  CHECK(g.embed(std::vector<double>(3000, 0.5)).size() == ScoreEncoder::kEmbedDim);
  CHECK_THROWS_AS(g.embed(std::vector<double>{}), ContractError);
}

TEST_CASE("feature assembly and layout") {
  const HpGrid grid(HpAxes{}, 10);
  const HpConfig& c = grid.canonical(4, 2.0, 0.2, 1e-6);
  const std::vector<double> d(64, 0.5), m(32, -0.5);
  const auto f = assemble_features(c, 10, d, m);
  CHECK(f.size() == 101);
  CHECK(default_layout().size() == 101);
  CHECK(f[0] == 4.0);
  CHECK(f[1] == 2.0);
  CHECK(f[2] == 0.2);
  CHECK(f[3] == doctest::Approx(std::log10(1e-6 + 1e-8)));
  // widths [5, 3, 5, 10]
  CHECK(f[4] == doctest::Approx(23.0 / 4.0 / 10.0));
  CHECK(f[5] == 0.5);
  CHECK(f[100] == -0.5);
  CHECK(assemble_features(c, 10, d, m) == f);
  CHECK_THROWS_AS(assemble_features(c, 10, m, d), DimensionError);

  FeatureLayout swapped = default_layout();
  std::rotate(swapped.names.begin() + 5, swapped.names.begin() + 69, swapped.names.end());
  CHECK(swapped.size() == 101);
  CHECK(swapped.digest() != default_layout().digest());
  const ProxyValidator v(swapped, Gbdt{});
  CHECK_THROWS_AS(v.check_layout(default_layout()), VersionError);
}

TEST_CASE("boosted trees") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = 60, d = 3;
  Tensor x({n, d});
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x.at(i, j) = u(rng);
    y[i] = (x.at(i, 1) > 0.4 ? 2.0 : 0.0) + 0.1 * u(rng);
  }
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;

  GbdtOptions stump;
  stump.trees = 1;
  stump.depth = 0;
  stump.shrinkage = 1.0;
  stump.valid_fraction = 0.0;
  const auto flat = Gbdt::fit(x, y, stump);
  for (std::size_t i = 0; i < n; ++i) CHECK(flat.predict(std::span(x.data() + i * d, d)) == doctest::Approx(mean));

  // One split at full shrinkage reproduces the best split found by scanning
  // every feature and threshold.
  stump.depth = 1;
  stump.min_leaf = 1;
  const auto one = Gbdt::fit(x, y, stump);
  double best_sse = INFINITY, best_l = 0, best_r = 0;
  std::size_t best_f = 0;
  double best_t = 0;
  for (std::size_t f = 0; f < d; ++f) {
    for (std::size_t a = 0; a < n; ++a) {
      const double t = x.at(a, f);
      double sl = 0, sr = 0;
      int nl = 0, nr = 0;
      for (std::size_t i = 0; i < n; ++i) (x.at(i, f) <= t ? (sl += y[i], ++nl) : (sr += y[i], ++nr));
      if (nl == 0 || nr == 0) continue;
      double sse = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double m = x.at(i, f) <= t ? sl / nl : sr / nr;
        sse += (y[i] - m) * (y[i] - m);
      }
      if (sse < best_sse) {
        best_sse = sse;
        best_f = f;
        best_t = t;
        best_l = sl / nl;
        best_r = sr / nr;
      }
    }
  }
  CHECK(best_f == 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double want = x.at(i, best_f) <= best_t ? best_l : best_r;
    CHECK(one.predict(std::span(x.data() + i * d, d)) == doctest::Approx(want).epsilon(1e-12));
  }

  const auto full = Gbdt::fit(x, y, GbdtOptions{});
  const auto back = Gbdt::deserialize(full.serialize());
  CHECK(back.predict(x) == full.predict(x));
  CHECK(Gbdt::fit(x, y, GbdtOptions{}).predict(x) == full.predict(x));
  CHECK(full.trees().size() <= 200);

  const std::vector<double> same(n, 0.25);
  const auto c = Gbdt::fit(x, same, GbdtOptions{});
  CHECK(c.constant());
  CHECK(c.predict(std::span(x.data(), d)) == 0.25);
}

TEST_CASE("proxy validator clips and warns") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t n = 150;
  Tensor x({n, default_layout().size()});
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) x.at(i, j) = u(rng);
    y[i] = 3.0 * x.at(i, 0);
  }
  std::vector<std::string> warnings;
  const auto v = train_fval(x, y, GbdtOptions{}, warnings);
  CHECK(warnings.empty());
  for (std::size_t i = 0; i < n; ++i) {
    const double p = v.predict(std::span(x.data() + i * x.cols(), x.cols()));
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  const auto flat = train_fval(x, std::vector<double>(n, 0.6), GbdtOptions{}, warnings);
  CHECK(warnings.size() == 1);
  CHECK(flat.predict(std::span(x.data(), x.cols())) == 0.6);

  CHECK_THROWS_AS(train_fval(Tensor({50, x.cols()}), std::vector<double>(50, 0.5), GbdtOptions{}, warnings),
                  ContractError);
  CHECK_THROWS_AS(train_fval(Tensor({n, 7}), y, GbdtOptions{}, warnings), DimensionError);
  CHECK_THROWS_AS(v.predict(std::vector<double>(7, 0.0)), DimensionError);
}

TEST_CASE("random scores give chance performance") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u;
  for (const auto& d : testing::tiny_tasks(4, 30)) {
    std::vector<double> s(d.x.rows());
    for (auto& v : s) v = u(rng);
    CHECK(std::abs(auroc(s, *d.labels) - 0.5) < 0.1);
  }
}

TEST_CASE("global best") {
  const HpAxes axes{{2, 4}, {1.0, 2.0}, {0.0}, {0.0}};
  PerfMatrix p;
  p.columns = axis_points(axes);
  p.tasks = {"a", "b", "c"};
  p.values = {{0.5, 0.6, 0.9, 0.4}, {0.5, 0.6, 0.8, 0.4}, {0.5, 0.6, 0.7, 0.4}};
  CHECK(global_best(p, 8) == 2);

  // Columns 0 (L=2) and 2 (L=4) tie.
  p.values = {{0.7, 0.6, 0.7, 0.4}, {0.6, 0.6, 0.6, 0.4}};
  CHECK(p.columns[global_best(p, 8)].n_layers == 2);
  // L=2 at c=1 and c=2 tie: the compressed one has fewer parameters.
  p.values = {{0.7, 0.7, 0.2, 0.4}};
  CHECK(global_best(p, 8) == 1);

  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> level(0, 20);
  const HpAxes big{};
  PerfMatrix q;
  q.columns = axis_points(big);
  for (int rep = 0; rep < 20; ++rep) {
    q.values.assign(4, std::vector<double>(q.columns.size()));
    for (auto& row : q.values)
      for (auto& v : row) v = level(rng) / 20.0;
    std::vector<double> means(q.columns.size(), 0.0);
    for (const auto& row : q.values)
      for (std::size_t j = 0; j < row.size(); ++j) means[j] += row[j] / 4.0;
    const std::size_t k = global_best(q, 9);
    for (std::size_t j = 0; j < means.size(); ++j) CHECK(means[k] >= means[j]);
  }
  CHECK_THROWS_AS(global_best(PerfMatrix{}, 8), ContractError);
}

TEST_CASE("meta training on a small testbed") {
  const auto& meta = testing::tiny_meta();
  const auto& store = meta.store;
  const HpAxes axes = testing::tiny_axes();
  CHECK(store.perf.tasks.size() == 6);
  CHECK(store.perf.columns.size() == axis_points(axes).size());
  for (std::size_t i = 0; i < meta.tasks.size(); ++i) {
    const auto& t = meta.tasks[i];
    const HpGrid grid(axes, t.input_dim);
    CHECK(t.scores.size() == grid.size());
    CHECK(t.perf.size() == grid.size());
    for (double v : store.perf.values[i]) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    for (std::size_t a = 0; a < store.perf.columns.size(); ++a)
      for (std::size_t b = 0; b < store.perf.columns.size(); ++b)
        if (resolve(grid, store.perf.columns[a]).key() == resolve(grid, store.perf.columns[b]).key())
          CHECK(store.perf.values[i][a] == store.perf.values[i][b]);
  }
  CHECK(store.best == store.perf.columns[global_best(store.perf, store.reference_dim)]);

  std::vector<HistoricalTask> tasks;
  for (const auto& d : testing::tiny_tasks(6, 21)) tasks.push_back(d.task());
  const auto again = meta_train(tasks, testing::tiny_options(), 5);
  const auto d1 = scratch_dir("det1"), d2 = scratch_dir("det2");
  store.save(d1);
  again.store.save(d2);
  for (const char* f : {"manifest.json", "h.json", "g.json", "fval.json", "perf.json"}) {
    std::ifstream a(d1 / f), b(d2 / f);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK_MESSAGE(sa == sb, f);
  }
  CHECK_THROWS_AS(meta_train(std::span(tasks).first(1), testing::tiny_options(), 5), ContractError);
}

TEST_CASE("meta store persistence") {
  const auto& meta = testing::tiny_meta();
  const auto dir = scratch_dir("store");
  meta.store.save(dir);
  const auto loaded = MetaStore::load(dir);
  CHECK(loaded.best == meta.store.best);
  CHECK(loaded.reference_dim == meta.store.reference_dim);
  CHECK(loaded.axes.digest() == meta.store.axes.digest());
  CHECK(loaded.perf.values == meta.store.perf.values);

  const auto& t = meta.tasks[0];
  const auto test = testing::tiny_tasks(6, 21)[0].x;
  const auto e0 = meta.store.h.embed(test), e1 = loaded.h.embed(test);
  CHECK(e0 == e1);
  for (std::size_t j = 0; j < t.configs.size(); ++j) {
    CHECK(predict_performance(meta.store, t.configs[j], t.input_dim, e0, t.scores[j]) ==
          predict_performance(loaded, t.configs[j], t.input_dim, e1, t.scores[j]));
  }

  {
    std::ofstream f(dir / "g.json", std::ios::app);
    f << " ";
  }
  CHECK_THROWS_AS(MetaStore::load(dir), VersionError);

  meta.store.save(dir);
  MetaStore old = meta.store;
  old.version = 0;
  old.save(dir);
  CHECK_THROWS_AS(MetaStore::load(dir), VersionError);
  CHECK_THROWS_AS(MetaStore::load(dir / "missing"), ConfigError);
}
