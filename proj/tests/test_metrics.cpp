#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pepper/metrics.hpp"

using namespace pepper;
using Catch::Matchers::WithinAbs;

namespace {

// Naive O(|A||B|) reference written independently of the library routine.
double hausdorff_oracle(const PositionTrajectory& a, const PositionTrajectory& b) {
  double h = 0.0;
  for (int pass = 0; pass < 2; ++pass) {
    const auto& x = pass == 0 ? a : b;
    const auto& y = pass == 0 ? b : a;
    for (const GridPoint& p : x) {
      double best = 1e300;
      for (const GridPoint& q : y) {
        const double d = std::hypot(p.row - q.row, p.col - q.col);
        best = std::min(best, d);
      }
      h = std::max(h, best);
    }
  }
  return h;
}

PositionTrajectory random_traj(Rng& rng, int n, int extent) {
  PositionTrajectory t;
  for (int i = 0; i < n; ++i) t.push_back({rng.next_int(extent), rng.next_int(extent)});
  return t;
}

}  // namespace

TEST_CASE("hausdorff basics") {
  const PositionTrajectory a{{0, 0}, {1, 1}, {2, 2}};
  REQUIRE(hausdorff(a, a) == 0.0);
  REQUIRE_THAT(hausdorff({{0, 0}}, {{3, 4}}), WithinAbs(5.0, 1e-12));
  REQUIRE_THAT(hausdorff({{0, 0}, {10, 0}}, {{0, 0}}), WithinAbs(10.0, 1e-12));
  REQUIRE_THROWS(hausdorff({}, a));
}

TEST_CASE("hausdorff is symmetric, non-negative, zero iff equal point sets") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const PositionTrajectory a = random_traj(rng, 1 + rng.next_int(30), 12);
    const PositionTrajectory b = random_traj(rng, 1 + rng.next_int(30), 12);
    const double ab = hausdorff(a, b);
    REQUIRE(ab >= 0.0);
    REQUIRE_THAT(hausdorff(b, a), WithinAbs(ab, 1e-12));
    REQUIRE_THAT(ab, WithinAbs(hausdorff_oracle(a, b), 1e-12));
  }
  // permuted duplicates are the same point set
  const PositionTrajectory a{{1, 2}, {3, 4}, {1, 2}};
  const PositionTrajectory b{{3, 4}, {1, 2}};
  REQUIRE(hausdorff(a, b) == 0.0);
}

TEST_CASE("divergence distribution over episode pairs") {
  RunLog run;
  auto episode_at = [](int row) {
    EpisodeLog e;
    StepRecord s;
    s.row = row;
    s.col = 0;
    e.steps.push_back(s);
    return e;
  };
  run.episodes = {episode_at(0), episode_at(3), episode_at(7)};
  const DivergenceDistribution d = divergence_distribution(run);
  REQUIRE(d.values.size() == 3);  // C(3,2)
  REQUIRE_THAT(d.values[0], WithinAbs(3.0, 1e-12));
  REQUIRE_THAT(d.values[1], WithinAbs(7.0, 1e-12));
  REQUIRE_THAT(d.values[2], WithinAbs(4.0, 1e-12));
  REQUIRE_THAT(d.mean, WithinAbs((3.0 + 7.0 + 4.0) / 3.0, 1e-12));
  REQUIRE_THAT(d.median, WithinAbs(4.0, 1e-12));

  run.episodes = {episode_at(2), episode_at(2)};
  const DivergenceDistribution zero = divergence_distribution(run);
  REQUIRE(zero.values == std::vector<double>{0.0});

  run.episodes = {episode_at(1)};
  REQUIRE_THROWS(divergence_distribution(run));
}

TEST_CASE("pca2 on axis-aligned data") {
  std::vector<Vec> pts;
  Rng rng(5);
  for (int i = 0; i < 50; ++i) pts.push_back({rng.next_normal(), 0.0, 0.0});
  const Pca2Result r = pca2(pts);
  REQUIRE_THAT(std::abs(r.component1[0]), WithinAbs(1.0, 1e-8));
  REQUIRE_THAT(r.explained1, WithinAbs(1.0, 1e-8));
  // sign convention: dominant coordinate positive
  REQUIRE(r.component1[0] > 0.0);
}

TEST_CASE("pca2 components are orthonormal") {
  Rng rng(6);
  std::vector<Vec> pts;
  for (int i = 0; i < 200; ++i) {
    Vec p(5);
    for (double& v : p) v = rng.next_normal();
    p[1] += 2.0 * p[0];  // correlated structure
    pts.push_back(p);
  }
  const Pca2Result r = pca2(pts);
  REQUIRE_THAT(dot(r.component1, r.component1), WithinAbs(1.0, 1e-8));
  REQUIRE_THAT(dot(r.component2, r.component2), WithinAbs(1.0, 1e-8));
  REQUIRE_THAT(dot(r.component1, r.component2), WithinAbs(0.0, 1e-8));
}

TEST_CASE("pca2 explained fractions on an isotropic 2-d sample") {
  Rng rng(7);
  std::vector<Vec> pts;
  for (int i = 0; i < 10000; ++i) pts.push_back({rng.next_normal(), rng.next_normal()});
  const Pca2Result r = pca2(pts);
  REQUIRE_THAT(r.explained1, WithinAbs(0.5, 0.05));
  REQUIRE_THAT(r.explained2, WithinAbs(0.5, 0.05));
}

TEST_CASE("pca2 projection is an isometry on planar data") {
  // points spanning exactly two dimensions inside a 4-d space
  Rng rng(8);
  Vec u{0.5, 0.5, 0.5, 0.5};
  Vec v{0.5, -0.5, 0.5, -0.5};
  std::vector<Vec> pts;
  std::vector<std::array<double, 2>> coords;
  for (int i = 0; i < 40; ++i) {
    const double a = rng.next_normal(), b = rng.next_normal();
    coords.push_back({a, b});
    Vec p(4);
    for (int k = 0; k < 4; ++k) p[k] = a * u[k] + b * v[k];
    pts.push_back(p);
  }
  const Pca2Result r = pca2(pts);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double orig = std::hypot(coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]);
      const double proj = std::hypot(r.projected[i][0] - r.projected[j][0],
                                     r.projected[i][1] - r.projected[j][1]);
      REQUIRE_THAT(proj, WithinAbs(orig, 1e-8));
    }
}

TEST_CASE("pca2 rejects degenerate inputs") {
  REQUIRE_THROWS(pca2({{1.0, 2.0}, {1.0, 2.0}}));
  REQUIRE_THROWS(pca2({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}}));  // zero variance
  REQUIRE_THROWS(pca2({{1.0}, {2.0}, {3.0}}));                 // dimension < 2
}

TEST_CASE("kmeans recovers well-separated clusters") {
  Rng rng(9);
  std::vector<Vec> pts;
  for (int i = 0; i < 60; ++i)
    pts.push_back({rng.next_normal() * 0.5, rng.next_normal() * 0.5});
  for (int i = 0; i < 60; ++i)
    pts.push_back({100.0 + rng.next_normal() * 0.5, 100.0 + rng.next_normal() * 0.5});
  Rng km_rng(10);
  const KmeansResult r = kmeans(pts, 2, km_rng);
  const bool first_low = r.centroids[0][0] < 50.0;
  const Vec& low = first_low ? r.centroids[0] : r.centroids[1];
  const Vec& high = first_low ? r.centroids[1] : r.centroids[0];
  REQUIRE(std::hypot(low[0], low[1]) < 1.0);
  REQUIRE(std::hypot(high[0] - 100.0, high[1] - 100.0) < 1.0);
}

TEST_CASE("kmeans inertia is monotone and zero when k covers all points") {
  Rng rng(11);
  std::vector<Vec> pts;
  for (int i = 0; i < 40; ++i) pts.push_back({rng.next_double() * 10, rng.next_double() * 10});
  Rng km_rng(12);
  const KmeansResult r = kmeans(pts, 5, km_rng);
  for (std::size_t i = 1; i < r.inertia_per_iter.size(); ++i)
    REQUIRE(r.inertia_per_iter[i] <= r.inertia_per_iter[i - 1] + 1e-9);

  std::vector<Vec> small{{0, 0}, {1, 0}, {0, 1}, {5, 5}};
  Rng km2(13);
  const KmeansResult exact = kmeans(small, 4, km2);
  REQUIRE_THAT(exact.inertia, WithinAbs(0.0, 1e-15));
  REQUIRE_THROWS(kmeans(small, 5, km2));
}

TEST_CASE("belief variance profile") {
  RunLog run;
  EpisodeLog constant;
  for (int t = 0; t < 6; ++t) {
    StepRecord s;
    s.posterior = {0.5, 0.5};
    s.prior = {0.25, 0.75};
    constant.steps.push_back(s);
  }
  EpisodeLog alternating;
  for (int t = 0; t < 6; ++t) {
    StepRecord s;
    s.posterior = t % 2 ? Vec{1.0, 0.0} : Vec{0.0, 1.0};
    s.prior = {0.5, 0.5};
    alternating.steps.push_back(s);
  }
  run.episodes = {constant, alternating};
  const auto profile = belief_variance_profile(run);
  REQUIRE(profile.size() == 2);
  REQUIRE_THAT(profile[0].posterior_variance, WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(profile[0].prior_variance, WithinAbs(0.0, 1e-15));
  // alternating deltas: each coordinate has variance 0.25
  REQUIRE_THAT(profile[1].posterior_variance, WithinAbs(0.25, 1e-12));
  REQUIRE_THAT(profile[1].prior_variance, WithinAbs(0.0, 1e-15));

  // permutation over steps leaves the profile unchanged
  std::reverse(run.episodes[1].steps.begin(), run.episodes[1].steps.end());
  const auto again = belief_variance_profile(run);
  REQUIRE_THAT(again[1].posterior_variance, WithinAbs(0.25, 1e-12));
}
