#include <cmath>
#include <random>

#include "doctest.h"
#include "hyper/errors.hpp"
#include "hyper/metrics.hpp"
#include "oracles/brute_metrics.hpp"

using namespace hyper;

namespace {

// Scores on a coarse lattice so ties are frequent; both classes present.
void random_instance(std::mt19937_64& rng, std::vector<double>& scores, std::vector<int>& labels) {
  std::uniform_int_distribution<int> size(2, 50), level(0, 9), coin(0, 1);
  const int n = size(rng);
  scores.assign(static_cast<std::size_t>(n), 0.0);
  labels.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    scores[static_cast<std::size_t>(i)] = 0.1 * level(rng);
    labels[static_cast<std::size_t>(i)] = coin(rng);
  }
  labels[0] = 1;
  labels[1] = 0;
}

}  // namespace

TEST_CASE("auroc examples") {
  const double s[] = {0.9, 0.8, 0.1, 0.2};
  const int y[] = {1, 1, 0, 0};
  const int flipped[] = {0, 0, 1, 1};
  CHECK(auroc(s, y) == 1.0);
  CHECK(auroc(s, flipped) == 0.0);

  const double tied[] = {0.5, 0.5, 0.5};
  const int y3[] = {1, 0, 0};
  CHECK(auroc(tied, y3) == 0.5);

  const int one_class[] = {1, 1, 1, 1};
  CHECK_THROWS_AS(auroc(s, one_class), UndefinedMetricError);
  const int bad[] = {1, 2, 0, 0};
  CHECK_THROWS_AS(auroc(s, bad), ContractError);
}

TEST_CASE("property: auroc equals pair counting") {
  std::mt19937_64 rng(99);
  std::vector<double> s;
  std::vector<int> y;
  for (int k = 0; k < 1000; ++k) {
    random_instance(rng, s, y);
    CHECK(auroc(s, y) == oracle::pairwise_auroc(s, y));
  }
}

TEST_CASE("property: auroc invariances") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  for (int k = 0; k < 50; ++k) {
    std::vector<double> s(30), neg(30), mono(30);
    std::vector<int> y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      s[i] = z(rng);
      y[i] = i % 3 == 0 ? 1 : 0;
      neg[i] = -s[i];
      mono[i] = std::exp(2.0 * s[i]) + 5.0;
    }
    CHECK(auroc(s, y) + auroc(neg, y) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(auroc(mono, y) == auroc(s, y));
  }
}

TEST_CASE("normalized ranks") {
  const double p[] = {0.9, 0.5, 0.7};
  CHECK(roc_rank(p) == std::vector<double>{0.0, 1.0, 0.5});
  const double same[] = {0.3, 0.3, 0.3, 0.3};
  for (double r : roc_rank(same)) CHECK(r == 0.5);

  // Hand ranking, best first: 0.8 (1), 0.6 and 0.6 (2.5 each), 0.4 (4), 0.2 (5), 0.1 (6).
  const double six[] = {0.2, 0.6, 0.8, 0.1, 0.6, 0.4};
  const std::vector<double> expected{4.0 / 5, 1.5 / 5, 0.0, 1.0, 1.5 / 5, 3.0 / 5};
  const auto got = roc_rank(six);
  for (std::size_t i = 0; i < 6; ++i) CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-15));

  double shifted[6];
  for (int i = 0; i < 6; ++i) shifted[i] = six[i] + 3.0;
  CHECK(roc_rank(shifted) == got);

  const double single[] = {0.5};
  CHECK_THROWS_AS(roc_rank(single), ContractError);
}

TEST_CASE("wilcoxon examples") {
  const double a[] = {1, 2, 3, 4, 5};
  const double b[] = {0, 0, 0, 0, 0};
  CHECK(wilcoxon_signed_rank(a, b).p_value == 0.0625);
  CHECK(wilcoxon_signed_rank(b, a).p_value == 0.0625);
  CHECK(wilcoxon_signed_rank(a, a).p_value == 1.0);
  const double c[] = {1, 2};
  CHECK_THROWS_AS(wilcoxon_signed_rank(a, c), DimensionError);
}

TEST_CASE("property: exact wilcoxon matches sign enumeration") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> size(1, 12), level(-4, 4);
  for (int k = 0; k < 400; ++k) {
    const auto n = static_cast<std::size_t>(size(rng));
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = 0.25 * level(rng);
      b[i] = 0.25 * level(rng);
    }
    const auto r = wilcoxon_signed_rank(a, b);
    CHECK(r.p_value == oracle::enumerated_wilcoxon_p(a, b));
    CHECK(wilcoxon_signed_rank(b, a).p_value == r.p_value);
  }
}

TEST_CASE("wilcoxon normal approximation for large samples") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  std::vector<double> a(60), b(60);
  for (std::size_t i = 0; i < 60; ++i) {
    a[i] = z(rng) + 0.8;
    b[i] = z(rng);
  }
  const auto r = wilcoxon_signed_rank(a, b);
  CHECK_FALSE(r.exact);
  CHECK(r.p_value < 0.01);
  CHECK(wilcoxon_signed_rank(b, a).p_value == doctest::Approx(r.p_value).epsilon(1e-12));
  // The approximation takes over above 20 non-zero differences.
  std::vector<double> a20(a.begin(), a.begin() + 20), b20(b.begin(), b.begin() + 20);
  std::vector<double> a21(a.begin(), a.begin() + 21), b21(b.begin(), b.begin() + 21);
  CHECK(wilcoxon_signed_rank(a20, b20).exact);
  CHECK_FALSE(wilcoxon_signed_rank(a21, b21).exact);
}
