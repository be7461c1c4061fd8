#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hyper/errors.hpp"
#include "hyper/online_search.hpp"
#include "hyper/seeding.hpp"
#include "oracles/entropy_estimate.hpp"
#include "support/tiny_meta.hpp"

using namespace hyper;

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

bool on_axis(const std::vector<double>& axis, double v) {
  return std::find(axis.begin(), axis.end(), v) != axis.end();
}

}  // namespace

TEST_CASE("gaussian entropy") {
  const double one[] = {1.0};
  const double two[] = {1.0, 1.0};
  const double half[] = {0.5};
  CHECK(gaussian_entropy(one) == doctest::Approx(1.41894).epsilon(1e-5));
  CHECK(gaussian_entropy(two) == doctest::Approx(2.83788).epsilon(1e-5));
  CHECK(gaussian_entropy(half) == doctest::Approx(0.72579).epsilon(1e-5));

  const auto grid = SigmaGrid::standard();
  for (const auto& dim : grid.values) {
    for (double s : dim) {
      const double v[] = {s};
      CHECK(std::abs(gaussian_entropy(v) - (0.5 * std::log(2 * std::numbers::pi * std::numbers::e) + std::log(s))) < 1e-9);
    }
  }
  const double zero[] = {1.0, 0.0};
  const double neg[] = {-0.1};
  CHECK_THROWS_AS(gaussian_entropy(zero), ContractError);
  CHECK_THROWS_AS(gaussian_entropy(neg), ContractError);
}

TEST_CASE("property: entropy agrees with a nearest-neighbour estimate") {
  // Compared through exp(H), which is scale-free; H itself crosses zero
  // inside the sigma range.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (const auto& dim : SigmaGrid::standard().values) {
    for (double s : dim) {
      std::vector<double> x(100000);
      for (auto& v : x) v = s * z(rng);
      const double sig[] = {s};
      const double est = oracle::knn_entropy_1d(std::move(x));
      CHECK(std::abs(std::exp(est - gaussian_entropy(sig)) - 1.0) < 0.02);
    }
  }
}

TEST_CASE("sigma grid") {
  const auto g = SigmaGrid::standard();
  for (const auto& dim : g.values) CHECK(dim.size() == 5);
  CHECK(g.values[0].front() == 0.25);
  CHECK(g.values[0].back() == 2.0);
  CHECK(g.values[1].front() == 0.05);
  CHECK(g.values[1].back() == 0.8);
  CHECK(g.values[2].front() == 0.02);
  CHECK(g.values[3].back() == 1.0);
  const Sigma mid = g.middle();
  CHECK(mid[0] == doctest::Approx(std::sqrt(0.25 * 2.0)));
  CHECK(g.contains(mid));
  Sigma out = mid;
  out[2] = 0.3;
  CHECK_FALSE(g.contains(out));
}

TEST_CASE("sample_local stays on the grid") {
  const HpGrid grid(HpAxes{}, 9);
  std::mt19937_64 rng(4);
  const Sigma tiny{1e-12, 1e-12, 1e-12, 1e-12};
  for (const auto& c : grid.configs()) CHECK(sample_local(grid, c, tiny, rng).key() == c.key());

  const Sigma wide{1.0, 5.0, 5.0, 5.0};
  const auto& axes = grid.axes();
  for (int k = 0; k < 2000; ++k) {
    const auto& c = sample_local(grid, grid[static_cast<std::size_t>(k) % grid.size()], wide, rng);
    CHECK(grid.index_of(c).has_value());
    CHECK(on_axis(axes.compression, c.compression));
    CHECK(on_axis(axes.dropout, c.dropout));
    CHECK(on_axis(axes.weight_decay, c.weight_decay));
  }
}

TEST_CASE("property: depth distribution matches the snapped Gaussian") {
  const HpGrid grid(HpAxes{}, 8);
  const auto& depths = grid.axes().n_layers;
  std::mt19937_64 rng(12);
  for (double s : {0.5, 1.0, 2.0}) {
    for (std::size_t from = 0; from < depths.size(); ++from) {
      const HpConfig& lam = grid.canonical(depths[from], 1.0, 0.0, 0.0);
      const Sigma sigma{s, 0.1, 0.05, 0.3};
      std::map<int, int> counts;
      const int n = 10000;
      for (int k = 0; k < n; ++k) ++counts[sample_local(grid, lam, sigma, rng).n_layers];

      std::vector<double> mass;
      double total = 0.0;
      for (std::size_t j = 0; j < depths.size(); ++j) {
        const double off = static_cast<double>(j) - static_cast<double>(from);
        mass.push_back(normal_cdf((off + 0.5) / s) - normal_cdf((off - 0.5) / s));
        total += mass.back();
      }
      for (std::size_t j = 0; j < depths.size(); ++j) {
        CHECK(std::abs(counts[depths[j]] / static_cast<double>(n) - mass[j] / total) < 0.02);
      }
    }
  }
}

TEST_CASE("sample_local rejection") {
  const HpGrid grid(HpAxes{{2}, {1.0}, {0.0}, {0.0}}, 5);
  std::mt19937_64 rng(1);
  const Sigma huge{1e6, 0.1, 0.1, 0.1};
  CHECK_FALSE(try_sample_local(grid, grid[0], huge, rng).has_value());
  CHECK_THROWS_AS(sample_local(grid, grid[0], huge, rng), SamplingRangeError);
}

TEST_CASE("validation objective") {
  const HpGrid grid(HpAxes{}, 7);
  const HpConfig& lam = grid.canonical(4, 1.4, 0.2, 1e-6);
  const Sigma sigma = SigmaGrid::standard().middle();
  const Predictor constant = [](const HpConfig&) { return 0.7; };
  std::mt19937_64 rng(8);
  CHECK(validation_objective(grid, lam, sigma, constant, 50, 0.0, rng) == doctest::Approx(0.7));

  const Predictor by_key = [](const HpConfig& c) { return static_cast<double>(c.key().size()) / 100.0; };
  const Sigma tiny{1e-12, 1e-12, 1e-12, 1e-12};
  CHECK(validation_objective(grid, lam, tiny, by_key, 1, 0.0, rng) == by_key(lam));

  const auto& sg = SigmaGrid::standard();
  double prev = -1e9;
  for (double s : sg.values[1]) {
    Sigma cur = sigma;
    cur[1] = s;
    const double g = validation_objective(grid, lam, cur, constant, 20, 0.05, rng);
    CHECK(g > prev);
    prev = g;
  }
  CHECK_THROWS_AS(validation_objective(grid, lam, sigma, constant, 0, 0.0, rng), ContractError);

  const HpGrid single(HpAxes{{2}, {1.0}, {0.0}, {0.0}}, 5);
  CHECK_THROWS_AS(validation_objective(single, single[0], Sigma{1e6, 1, 1, 1}, constant, 5, 0.0, rng),
                  SamplingRangeError);
}

TEST_CASE("final_select") {
  const HpGrid grid(HpAxes{}, 8);
  std::vector<HpConfig> s(grid.configs().begin(), grid.configs().begin() + 40);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> level(0, 5);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> v;
    for (std::size_t i = 0; i < s.size(); ++i) v.push_back(level(rng) / 5.0);
    const std::size_t k = final_select(s, v, 8);

    // Brute force: maximum value, then least complex among the maxima.
    const double top = *std::max_element(v.begin(), v.end());
    std::vector<HpConfig> best;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (v[i] == top) best.push_back(s[i]);
    const auto want = *std::min_element(best.begin(), best.end(),
                                        [](const HpConfig& a, const HpConfig& b) { return less_complex(a, b, 8); });
    CHECK(s[k].key() == want.key());

    std::vector<std::size_t> perm(s.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<HpConfig> ps;
    std::vector<double> pv;
    for (auto i : perm) {
      ps.push_back(s[i]);
      pv.push_back(v[i]);
    }
    CHECK(ps[final_select(ps, pv, 8)].key() == want.key());
  }
  const double one[] = {0.2};
  CHECK(final_select(std::span(s).first(1), one, 8) == 0);
  CHECK_THROWS_AS(final_select(std::span<const HpConfig>(), std::span<const double>(), 8), ContractError);
}

TEST_CASE("hyper_select on a small store") {
  const auto& meta = testing::tiny_meta();
  const auto test = testing::tiny_tasks(4, 99)[3];
  SearchOptions opt;
  opt.hn_epochs = 10;
  opt.samples = 40;

  const auto a = hyper_select(test.x, meta.store, opt, 17);
  const auto b = hyper_select(test.x, meta.store, opt, 17);
  CHECK(a.report() == b.report());
  CHECK(a.selected.key() == b.selected.key());
  CHECK(a.iterations() >= opt.patience);

  const HpGrid grid(meta.store.axes, static_cast<int>(test.x.cols()));
  CHECK(grid.index_of(a.selected).has_value());
  bool selected_in_pool = false;
  for (const auto& c : a.pool) selected_in_pool |= c.key() == a.selected.key();
  CHECK(selected_in_pool);

  double prev = -1.0;
  std::size_t prev_pool = 0;
  for (const auto& it : a.trace) {
    CHECK(opt.sigma_grid.contains(it.sigma));
    bool in_pool = false;
    for (std::size_t i = 0; i < it.pool_size; ++i) in_pool |= a.pool[i].key() == it.lambda.key();
    CHECK(in_pool);
    CHECK(it.best >= prev);
    CHECK(it.pool_size >= prev_pool);
    prev = it.best;
    prev_pool = it.pool_size;
  }
  CHECK(a.predicted >= 0.0);
  CHECK(a.predicted <= 1.0);
}

TEST_CASE("property: more patience never stops earlier") {
  const auto& meta = testing::tiny_meta();
  const auto test = testing::tiny_tasks(4, 99)[3];
  SearchOptions opt;
  opt.hn_epochs = 5;
  opt.samples = 30;
  int prev_iters = 0;
  std::size_t prev_pool = 0;
  for (int p = 1; p <= 4; ++p) {
    opt.patience = p;
    const auto r = hyper_select(test.x, meta.store, opt, 23);
    CHECK(r.iterations() >= prev_iters);
    CHECK(r.pool.size() >= prev_pool);
    prev_iters = r.iterations();
    prev_pool = r.pool.size();
  }
}

TEST_CASE("hyper_select edge cases") {
  const auto& meta = testing::tiny_meta();
  const auto test = testing::tiny_tasks(4, 99)[3];

  MetaStore single = meta.store;
  single.axes = HpAxes{{2}, {1.0}, {0.0}, {0.0}};
  single.best = {2, 1.0, 0.0, 0.0};
  const auto r = hyper_select(test.x, single, SearchOptions{}, 1);
  CHECK(r.iterations() == 0);
  CHECK(r.selected.n_layers == 2);
  CHECK(r.pool.size() == 1);

  SearchOptions bad;
  bad.patience = 0;
  CHECK_THROWS_AS(hyper_select(test.x, meta.store, bad, 1), ConfigError);
  bad = SearchOptions{};
  bad.sigma_grid.values[1] = {0.0, 0.1};
  CHECK_THROWS_AS(hyper_select(test.x, meta.store, bad, 1), ConfigError);
  CHECK_THROWS_AS(hyper_select(Tensor({0, 4}), meta.store, SearchOptions{}, 1), ContractError);
}
