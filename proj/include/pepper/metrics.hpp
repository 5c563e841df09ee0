#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "pepper/pepper_loop.hpp"
#include "pepper/rng.hpp"
#include "pepper/util.hpp"

namespace pepper {

struct GridPoint {
  int row = 0;
  int col = 0;
  bool operator==(const GridPoint&) const = default;
};

using PositionTrajectory = std::vector<GridPoint>;

inline PositionTrajectory episode_trajectory(const EpisodeLog& log) {
  PositionTrajectory t;
  t.reserve(log.steps.size());
  for (const StepRecord& s : log.steps) t.push_back({s.row, s.col});
  return t;
}

inline double euclidean(const GridPoint& a, const GridPoint& b) {
  const double dr = a.row - b.row;
  const double dc = a.col - b.col;
  return std::sqrt(dr * dr + dc * dc);
}

// Symmetric Hausdorff distance on Euclidean point distances.
inline double hausdorff(const PositionTrajectory& a, const PositionTrajectory& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("hausdorff: empty trajectory");
  auto directed = [](const PositionTrajectory& x, const PositionTrajectory& y) {
    double worst = 0.0;
    for (const GridPoint& p : x) {
      double nearest = euclidean(p, y.front());
      for (const GridPoint& q : y) nearest = std::min(nearest, euclidean(p, q));
      worst = std::max(worst, nearest);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

struct DivergenceDistribution {
  std::vector<double> values;  // all unordered episode pairs, (i<j) order
  double mean = 0.0;
  double median = 0.0;
};

inline DivergenceDistribution divergence_distribution(const RunLog& run) {
  const std::size_t n = run.episodes.size();
  if (n < 2) throw std::invalid_argument("divergence_distribution: need at least 2 episodes");
  std::vector<PositionTrajectory> trajs;
  trajs.reserve(n);
  for (const EpisodeLog& e : run.episodes) trajs.push_back(episode_trajectory(e));
  DivergenceDistribution out;
  out.values.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.values.push_back(hausdorff(trajs[i], trajs[j]));
  out.mean = sum(out.values) / static_cast<double>(out.values.size());
  std::vector<double> sorted = out.values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  out.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return out;
}

struct Pca2Result {
  Vec component1;
  Vec component2;
  std::vector<std::array<double, 2>> projected;
  double explained1 = 0.0;
  double explained2 = 0.0;
};

namespace detail {

// Power iteration on a symmetric PSD matrix with deterministic start and
// optional orthogonalisation against a fixed direction.
inline Vec top_eigenvector(const Matrix& cov, const Vec* orthogonal_to, int max_iters,
                           double tol) {
  const int d = cov.rows;
  Rng rng(0x9ec4u);
  Vec v(static_cast<std::size_t>(d));
  for (double& x : v) x = rng.next_normal();
  auto orthogonalize = [&](Vec& u) {
    if (!orthogonal_to) return;
    const double proj = dot(u, *orthogonal_to);
    for (int i = 0; i < d; ++i) u[i] -= proj * (*orthogonal_to)[i];
  };
  auto norm = [](const Vec& u) { return std::sqrt(dot(u, u)); };
  orthogonalize(v);
  double n = norm(v);
  if (n == 0.0) throw std::runtime_error("pca2: degenerate start");
  for (double& x : v) x /= n;
  Vec next(static_cast<std::size_t>(d));
  for (int it = 0; it < max_iters; ++it) {
    for (int i = 0; i < d; ++i) next[i] = dot(cov.row(i), v);
    orthogonalize(next);
    n = norm(next);
    if (n < 1e-300) break;  // eigenvalue numerically zero; keep previous direction
    for (double& x : next) x /= n;
    double diff = 0.0;
    for (int i = 0; i < d; ++i) diff = std::max(diff, std::abs(std::abs(next[i]) - std::abs(v[i])));
    v = next;
    if (diff < tol) break;
  }
  // deterministic sign: largest-magnitude coordinate positive
  int arg = 0;
  for (int i = 1; i < d; ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (v[arg] < 0.0)
    for (double& x : v) x = -x;
  return v;
}

}  // namespace detail

// Top-2 principal components of centred data, power iteration with deflation.
inline Pca2Result pca2(const std::vector<Vec>& points) {
  if (points.size() < 3) throw std::invalid_argument("pca2: need at least 3 points");
  const int d = static_cast<int>(points.front().size());
  if (d < 2) throw std::invalid_argument("pca2: need dimension >= 2");
  for (const Vec& p : points)
    if (static_cast<int>(p.size()) != d) throw std::invalid_argument("pca2: ragged points");

  const std::size_t n = points.size();
  Vec mean(static_cast<std::size_t>(d), 0.0);
  for (const Vec& p : points)
    for (int i = 0; i < d; ++i) mean[i] += p[i];
  for (double& x : mean) x /= static_cast<double>(n);

  Matrix cov(d, d);
  for (const Vec& p : points)
    for (int i = 0; i < d; ++i) {
      const double di = p[i] - mean[i];
      for (int j = i; j < d; ++j) cov.at(i, j) += di * (p[j] - mean[j]);
    }
  const double scale = 1.0 / static_cast<double>(n - 1);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      cov.at(i, j) *= scale;
      cov.at(j, i) = cov.at(i, j);
    }
  double trace = 0.0;
  for (int i = 0; i < d; ++i) trace += cov.at(i, i);
  if (trace <= 0.0) throw std::invalid_argument("pca2: zero-variance data");

  Pca2Result out;
  out.component1 = detail::top_eigenvector(cov, nullptr, 5000, 1e-13);
  Vec tmp(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) tmp[i] = dot(cov.row(i), out.component1);
  const double lambda1 = dot(tmp, out.component1);

  Matrix deflated = cov;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      deflated.at(i, j) -= lambda1 * out.component1[i] * out.component1[j];
  out.component2 = detail::top_eigenvector(deflated, &out.component1, 5000, 1e-13);
  for (int i = 0; i < d; ++i) tmp[i] = dot(cov.row(i), out.component2);
  const double lambda2 = dot(tmp, out.component2);

  out.explained1 = lambda1 / trace;
  out.explained2 = std::max(lambda2, 0.0) / trace;
  out.projected.reserve(n);
  for (const Vec& p : points) {
    double x = 0.0, y = 0.0;
    for (int i = 0; i < d; ++i) {
      const double c = p[i] - mean[i];
      x += c * out.component1[i];
      y += c * out.component2[i];
    }
    out.projected.push_back({x, y});
  }
  return out;
}

struct KmeansResult {
  std::vector<Vec> centroids;
  std::vector<int> assignments;
  double inertia = 0.0;
  std::vector<double> inertia_per_iter;
};

// Lloyd's iterations from k distinct seeded initial points. Empty clusters
// keep their previous centroid, preserving the non-increasing inertia
// guarantee.
inline KmeansResult kmeans(const std::vector<Vec>& points, int k, Rng& rng, int max_iters = 100) {
  if (points.empty()) throw std::invalid_argument("kmeans: no points");
  std::vector<Vec> distinct;
  for (const Vec& p : points)
    if (std::find(distinct.begin(), distinct.end(), p) == distinct.end()) distinct.push_back(p);
  if (k < 1 || k > static_cast<int>(distinct.size()))
    throw std::invalid_argument("kmeans: k exceeds distinct point count");

  for (int i = static_cast<int>(distinct.size()) - 1; i > 0; --i)
    std::swap(distinct[i], distinct[rng.next_int(i + 1)]);

  KmeansResult out;
  out.centroids.assign(distinct.begin(), distinct.begin() + k);
  out.assignments.assign(points.size(), 0);

  auto sq_dist = [](const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return s;
  };

  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t p = 0; p < points.size(); ++p) {
      int best = 0;
      double best_d = sq_dist(points[p], out.centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(points[p], out.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (out.assignments[p] != best) {
        out.assignments[p] = best;
        changed = true;
      }
      inertia += best_d;
    }
    out.inertia_per_iter.push_back(inertia);
    out.inertia = inertia;
    if (!changed && it > 0) break;
    std::vector<Vec> sums(static_cast<std::size_t>(k),
                          Vec(points.front().size(), 0.0));
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t p = 0; p < points.size(); ++p) {
      const int c = out.assignments[p];
      ++counts[c];
      for (std::size_t i = 0; i < points[p].size(); ++i) sums[c][i] += points[p][i];
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) {
        for (double& v : sums[c]) v /= counts[c];
        out.centroids[c] = std::move(sums[c]);
      }
  }
  return out;
}

struct BeliefVariancePoint {
  double posterior_variance = 0.0;
  double prior_variance = 0.0;
};

// Per episode: across-step variance of each belief coordinate, averaged over
// coordinates, for the posterior and prior streams.
inline std::vector<BeliefVariancePoint> belief_variance_profile(const RunLog& run) {
  std::vector<BeliefVariancePoint> out;
  out.reserve(run.episodes.size());
  auto stream_variance = [](const EpisodeLog& e, bool posterior) {
    if (e.steps.empty()) return 0.0;
    const std::size_t dim = posterior ? e.steps.front().posterior.size() : e.steps.front().prior.size();
    if (dim == 0) return 0.0;
    const double n = static_cast<double>(e.steps.size());
    double total = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      double mean = 0.0, sq = 0.0;
      for (const StepRecord& s : e.steps) {
        const double v = posterior ? s.posterior[i] : s.prior[i];
        mean += v;
        sq += v * v;
      }
      mean /= n;
      sq /= n;
      total += std::max(sq - mean * mean, 0.0);
    }
    return total / static_cast<double>(dim);
  };
  for (const EpisodeLog& e : run.episodes)
    out.push_back({stream_variance(e, true), stream_variance(e, false)});
  return out;
}

}  // namespace pepper
