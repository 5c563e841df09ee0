#pragma once

#include <cmath>
#include <deque>
#include <span>
#include <stdexcept>
#include <vector>

#include "pepper/rng.hpp"
#include "pepper/util.hpp"

namespace pepper {

// Preference stores are plain positive pseudo-count vectors (Dirichlet
// parameters). Reward preferences have length n_rewards, state preferences
// length n_states; both start at all-ones (uniform).

inline void check_counts(std::span<const double> counts) {
  if (counts.empty()) throw std::invalid_argument("dirichlet: empty counts");
  for (double c : counts)
    if (!(c > 0.0)) throw std::invalid_argument("dirichlet: counts must be strictly positive");
}

inline Vec uniform_counts(int n) { return Vec(static_cast<std::size_t>(n), 1.0); }

// Posterior mean of the category probabilities: counts / sum(counts).
inline Vec expected_categorical(std::span<const double> counts) {
  check_counts(counts);
  Vec p(counts.begin(), counts.end());
  normalize(p);
  return p;
}

// E[log p_i] under the Dirichlet: digamma(c_i) - digamma(sum).
inline Vec expected_log(std::span<const double> counts) {
  check_counts(counts);
  const double total = digamma(sum(counts));
  Vec out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = digamma(counts[i]) - total;
  return out;
}

// One draw from Dirichlet(counts), via normalised Gamma draws.
inline Vec thompson_sample(std::span<const double> counts, Rng& rng) {
  check_counts(counts);
  Vec draw(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) draw[i] = rng.next_gamma(counts[i]);
  normalize(draw);
  return draw;
}

// counts + alpha * event_weights. event_weights is a one-hot reward indicator
// or a prior state-probability vector.
inline Vec accumulate(std::span<const double> counts, std::span<const double> event_weights,
                      double alpha) {
  check_counts(counts);
  if (event_weights.size() != counts.size())
    throw std::invalid_argument("accumulate: weight length mismatch");
  if (!(alpha >= 0.0)) throw std::invalid_argument("accumulate: alpha must be non-negative");
  Vec out(counts.begin(), counts.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (event_weights[i] < 0.0) throw std::invalid_argument("accumulate: negative event weight");
    out[i] += alpha * event_weights[i];
  }
  return out;
}

inline double entropy_of_expected(std::span<const double> counts) {
  return entropy(expected_categorical(counts));
}

// Mean log-probability of a realised category stream under the expected
// categorical; counts held fixed (start-of-episode convention).
inline double predictive_likelihood(std::span<const double> counts, std::span<const int> cats) {
  if (cats.empty()) throw std::invalid_argument("predictive_likelihood: empty sequence");
  const Vec p = expected_categorical(counts);
  double total = 0.0;
  for (int c : cats) {
    if (c < 0 || c >= static_cast<int>(p.size()))
      throw std::out_of_range("predictive_likelihood: category out of range");
    total += std::log(p[static_cast<std::size_t>(c)]);
  }
  return total / static_cast<double>(cats.size());
}

// Soft variant for state streams: mean over steps of the expected log
// probability under per-step weight vectors.
inline double soft_predictive_likelihood(std::span<const double> counts,
                                         const std::vector<Vec>& weights) {
  if (weights.empty()) throw std::invalid_argument("soft_predictive_likelihood: empty sequence");
  const Vec p = expected_categorical(counts);
  double total = 0.0;
  for (const Vec& w : weights) {
    if (w.size() != p.size())
      throw std::invalid_argument("soft_predictive_likelihood: weight length mismatch");
    for (std::size_t i = 0; i < p.size(); ++i)
      if (w[i] > 0.0) total += w[i] * std::log(p[i]);
  }
  return total / static_cast<double>(weights.size());
}

// Sliding window over per-episode count increments. Current counts are always
// recomputed as base + retained deltas, so eviction and replay agree exactly.
class PreferenceWindow {
 public:
  PreferenceWindow(int capacity, Vec base) : capacity_(capacity), base_(std::move(base)) {
    if (capacity_ < 1) throw std::invalid_argument("PreferenceWindow: capacity must be >= 1");
    check_counts(base_);
  }

  // Pushes the newest episode delta, evicting the oldest past capacity;
  // returns the resulting counts.
  Vec apply(const Vec& delta) {
    if (delta.size() != base_.size())
      throw std::invalid_argument("PreferenceWindow: delta length mismatch");
    for (double d : delta)
      if (d < 0.0) throw std::invalid_argument("PreferenceWindow: negative delta");
    deltas_.push_back(delta);
    if (static_cast<int>(deltas_.size()) > capacity_) deltas_.pop_front();
    return current();
  }

  Vec current() const {
    Vec out = base_;
    for (const Vec& d : deltas_)
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
    return out;
  }

  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(deltas_.size()); }

 private:
  int capacity_;
  Vec base_;
  std::deque<Vec> deltas_;
};

// Free-function form of PreferenceWindow::apply.
inline Vec apply_window(PreferenceWindow& window, const Vec& new_episode_delta) {
  return window.apply(new_episode_delta);
}

}  // namespace pepper
