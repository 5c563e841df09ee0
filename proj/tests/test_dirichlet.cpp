#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pepper/dirichlet.hpp"

using namespace pepper;
using Catch::Matchers::WithinAbs;

TEST_CASE("expected categorical is the normalised count vector") {
  REQUIRE(expected_categorical(Vec{1, 1, 1, 1}) == Vec{0.25, 0.25, 0.25, 0.25});
  REQUIRE(expected_categorical(Vec{2, 1, 1}) == Vec{0.5, 0.25, 0.25});
  const Vec p = expected_categorical(Vec{3.5, 0.5});
  REQUIRE_THAT(p[0], WithinAbs(0.875, 1e-15));
  REQUIRE_THAT(p[1], WithinAbs(0.125, 1e-15));
}

TEST_CASE("expected log follows the digamma identities") {
  // digamma(2) = digamma(1) + 1, so both entries of (1,1) are exactly -1
  const Vec e = expected_log(Vec{1, 1});
  REQUIRE_THAT(e[0], WithinAbs(-1.0, 1e-12));
  REQUIRE_THAT(e[1], WithinAbs(-1.0, 1e-12));

  // large counts: E[log p] approaches log E[p]
  const Vec big = expected_log(Vec{1e6, 1e6});
  REQUIRE_THAT(big[0], WithinAbs(std::log(0.5), 1e-5));

  // Jensen: E[log p_i] <= log E[p_i]
  const Vec counts{0.7, 2.0, 5.3, 1.1};
  const Vec lg = expected_log(counts);
  const Vec mean = expected_categorical(counts);
  for (std::size_t i = 0; i < counts.size(); ++i) REQUIRE(lg[i] <= std::log(mean[i]));
}

TEST_CASE("digamma recurrence holds across magnitudes") {
  for (double x : {0.3, 1.0, 2.7, 8.0, 123.0}) {
    REQUIRE_THAT(digamma(x + 1.0) - digamma(x), WithinAbs(1.0 / x, 1e-12));
  }
}

TEST_CASE("thompson samples are distributions and concentrate with counts") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Vec draw = thompson_sample(Vec{0.5, 1.5, 3.0}, rng);
    REQUIRE(is_distribution(draw, 1e-9));
  }
  const Vec sharp = thompson_sample(Vec{1e9, 1.0}, rng);
  REQUIRE(sharp[0] > 0.999);
}

TEST_CASE("thompson mean converges to the expected categorical") {
  Rng rng(99);
  const Vec counts{2, 1, 1};
  Vec mean(3, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vec d = thompson_sample(counts, rng);
    for (int k = 0; k < 3; ++k) mean[k] += d[k];
  }
  for (double& v : mean) v /= n;
  REQUIRE_THAT(mean[0], WithinAbs(0.5, 0.01));
  REQUIRE_THAT(mean[1], WithinAbs(0.25, 0.01));
  REQUIRE_THAT(mean[2], WithinAbs(0.25, 0.01));
}

TEST_CASE("accumulate adds alpha-scaled events") {
  REQUIRE(pepper::accumulate(Vec{1, 1, 1, 1}, Vec{0, 0, 1, 0}, 1.0) == Vec{1, 1, 2, 1});
  const Vec d = pepper::accumulate(Vec{1, 1}, Vec{0.2, 0.8}, 0.5);
  REQUIRE_THAT(d[0], WithinAbs(1.1, 1e-12));
  REQUIRE_THAT(d[1], WithinAbs(1.4, 1e-12));
  REQUIRE(pepper::accumulate(Vec{2, 3}, Vec{1, 0}, 0.0) == Vec{2, 3});
  REQUIRE_THROWS(pepper::accumulate(Vec{1, 1}, Vec{-0.1, 0.1}, 1.0));
}

TEST_CASE("conjugacy: integer one-hot accumulation equals the exact posterior") {
  // Brute-force Dirichlet-multinomial update oracle: posterior counts are
  // prior counts plus observation counts.
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + rng.next_int(3);
    Vec prior(k);
    for (double& v : prior) v = 1.0 + rng.next_int(5);
    Vec observed(k, 0.0);
    Vec counts = prior;
    const int n_events = rng.next_int(30);
    for (int e = 0; e < n_events; ++e) {
      const int cat = rng.next_int(k);
      Vec onehot(k, 0.0);
      onehot[cat] = 1.0;
      counts = pepper::accumulate(counts, onehot, 1.0);
      observed[cat] += 1.0;
    }
    for (int i = 0; i < k; ++i) REQUIRE_THAT(counts[i], WithinAbs(prior[i] + observed[i], 1e-12));
  }
}

TEST_CASE("accumulation is order-independent for equal totals") {
  const Vec a = pepper::accumulate(pepper::accumulate(Vec{1, 1, 1}, Vec{1, 0, 0}, 1.0), Vec{0, 0, 1}, 1.0);
  const Vec b = pepper::accumulate(pepper::accumulate(Vec{1, 1, 1}, Vec{0, 0, 1}, 1.0), Vec{1, 0, 0}, 1.0);
  REQUIRE(a == b);
  REQUIRE(expected_categorical(a) == expected_categorical(b));
}

TEST_CASE("entropy of expected counts") {
  REQUIRE_THAT(entropy_of_expected(Vec{1, 1, 1, 1}), WithinAbs(std::log(4.0), 1e-12));
  REQUIRE(entropy_of_expected(Vec{1e6, 1, 1, 1}) < 1e-4);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const int k = 2 + rng.next_int(6);
    Vec counts(k);
    for (double& v : counts) v = 0.1 + 10.0 * rng.next_double();
    REQUIRE(entropy_of_expected(counts) <= std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST_CASE("repeated single-category accumulation never raises entropy") {
  Vec counts{1, 1, 1, 1};
  double last = entropy_of_expected(counts);
  for (int i = 0; i < 30; ++i) {
    counts = pepper::accumulate(counts, Vec{0, 1, 0, 0}, 1.0);
    const double h = entropy_of_expected(counts);
    REQUIRE(h <= last + 1e-12);
    last = h;
  }
}

TEST_CASE("predictive likelihood of a category stream") {
  const std::vector<int> stream{0, 0, 0, 0, 0};
  REQUIRE_THAT(predictive_likelihood(Vec{8, 1, 1}, stream), WithinAbs(std::log(0.8), 1e-12));
  REQUIRE_THAT(predictive_likelihood(Vec{1, 1, 1, 1}, std::vector<int>{2, 3}),
               WithinAbs(std::log(0.25), 1e-12));
  // adding mass to the observed category strictly increases the value
  const double before = predictive_likelihood(Vec{2, 2}, std::vector<int>{0});
  const double after = predictive_likelihood(Vec{3, 2}, std::vector<int>{0});
  REQUIRE(after > before);
  REQUIRE_THROWS(predictive_likelihood(Vec{1, 1}, std::vector<int>{}));
}

TEST_CASE("window keeps only the trailing capacity episodes") {
  PreferenceWindow w(5, uniform_counts(3));
  const Vec unit{1, 0, 0};
  Vec counts;
  for (int e = 0; e < 6; ++e) counts = w.apply(unit);
  // six identical unit deltas, capacity 5: base + 5 deltas
  REQUIRE(counts == Vec{6, 1, 1});

  PreferenceWindow w1(1, uniform_counts(3));
  w1.apply(Vec{5, 0, 0});
  counts = w1.apply(Vec{0, 2, 0});
  REQUIRE(counts == Vec{1, 3, 1});
}

TEST_CASE("windowed counts equal recompute-from-scratch replay") {
  Rng rng(8);
  PreferenceWindow w(3, uniform_counts(4));
  std::vector<Vec> deltas;
  Vec current;
  for (int e = 0; e < 12; ++e) {
    Vec d(4);
    for (double& v : d) v = rng.next_double();
    deltas.push_back(d);
    current = w.apply(d);
    // replay oracle: base + the trailing <=3 deltas
    Vec replay = uniform_counts(4);
    const std::size_t first = deltas.size() > 3 ? deltas.size() - 3 : 0;
    for (std::size_t i = first; i < deltas.size(); ++i)
      for (int k = 0; k < 4; ++k) replay[k] += deltas[i][k];
    for (int k = 0; k < 4; ++k) {
      REQUIRE_THAT(current[k], WithinAbs(replay[k], 1e-9));
      REQUIRE(current[k] >= 1.0);
    }
  }
}
