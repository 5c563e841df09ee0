#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "pepper/rng.hpp"
#include "pepper/util.hpp"
#include "pepper/world_model.hpp"

namespace pepper {

struct EmOptions {
  int n_states = 64;
  int n_actions = 4;
  int n_obs = 256;
  int n_rewards = 4;
  int n_iters = 40;
  double smoothing = 1e-3;
};

struct EmReport {
  // log evidence of the whole dataset evaluated at the start of each
  // iteration (length n_iters), plus the final model's value.
  std::vector<double> log_evidence_per_iter;
  double final_log_evidence = 0.0;
};

namespace detail {

inline Vec random_row(int n, Rng& rng) {
  // symmetric Dirichlet(1) row
  Vec row(static_cast<std::size_t>(n));
  for (double& v : row) v = rng.next_gamma(1.0);
  normalize(row);
  return row;
}

inline WorldModel random_model(const EmOptions& opt, Rng& rng) {
  WorldModel m;
  m.n_states = opt.n_states;
  m.n_actions = opt.n_actions;
  m.n_obs = opt.n_obs;
  m.n_rewards = opt.n_rewards;
  m.init = random_row(opt.n_states, rng);
  m.trans.assign(static_cast<std::size_t>(opt.n_actions), Matrix(opt.n_states, opt.n_states));
  for (Matrix& t : m.trans)
    for (int s = 0; s < opt.n_states; ++s) {
      const Vec row = random_row(opt.n_states, rng);
      std::copy(row.begin(), row.end(), t.row(s).begin());
    }
  m.obs = Matrix(opt.n_states, opt.n_obs);
  m.rew = Matrix(opt.n_states, opt.n_rewards);
  for (int s = 0; s < opt.n_states; ++s) {
    Vec row = random_row(opt.n_obs, rng);
    std::copy(row.begin(), row.end(), m.obs.row(s).begin());
    row = random_row(opt.n_rewards, rng);
    std::copy(row.begin(), row.end(), m.rew.row(s).begin());
  }
  return m;
}

inline void smooth_and_normalize(std::span<double> row, double smoothing) {
  for (double& v : row) v += smoothing;
  normalize(row);
}

}  // namespace detail

// Baum-Welch for the action-conditioned model. Emissions are the product of
// observation and reward likelihoods. M-steps add `smoothing` to every count,
// keeping all rows strictly positive. Initialisation draws every row from a
// symmetric Dirichlet(1) under the caller's rng, so fits are reproducible.
inline WorldModel fit_em(const std::vector<Trajectory>& dataset, const EmOptions& opt, Rng& rng,
                         EmReport* report = nullptr) {
  if (opt.n_states < 1) throw std::invalid_argument("fit_em: n_states must be positive");
  if (!(opt.smoothing > 0.0)) throw std::invalid_argument("fit_em: smoothing must be positive");
  WorldModel m = detail::random_model(opt, rng);
  if (report) {
    report->log_evidence_per_iter.clear();
    report->final_log_evidence = 0.0;
  }
  if (dataset.empty() || opt.n_iters == 0) {
    if (report) {
      double ll = 0.0;
      for (const Trajectory& tr : dataset) ll += log_evidence(m, tr);
      report->final_log_evidence = ll;
    }
    return m;
  }

  const int S = opt.n_states;
  for (int iter = 0; iter < opt.n_iters; ++iter) {
    Vec init_counts(static_cast<std::size_t>(S), 0.0);
    std::vector<Matrix> trans_counts(static_cast<std::size_t>(opt.n_actions), Matrix(S, S));
    Matrix obs_counts(S, opt.n_obs);
    Matrix rew_counts(S, opt.n_rewards);
    double dataset_ll = 0.0;

    for (const Trajectory& traj : dataset) {
      traj.check(m);
      const int T = static_cast<int>(traj.size());
      if (T == 0) continue;

      // scaled forward
      std::vector<Vec> fwd(static_cast<std::size_t>(T), Vec(static_cast<std::size_t>(S)));
      Vec scale(static_cast<std::size_t>(T));
      for (int s = 0; s < S; ++s)
        fwd[0][s] = m.init[s] * m.obs.at(s, traj.obs[0]) * m.rew.at(s, traj.rew[0]);
      scale[0] = normalize(fwd[0]);
      for (int t = 1; t < T; ++t) {
        const Matrix& tr = m.trans[traj.act[t - 1]];
        Vec& cur = fwd[t];
        std::fill(cur.begin(), cur.end(), 0.0);
        for (int sp = 0; sp < S; ++sp) {
          const double f = fwd[t - 1][sp];
          if (f == 0.0) continue;
          const std::span<const double> row = tr.row(sp);
          for (int s = 0; s < S; ++s) cur[s] += f * row[s];
        }
        for (int s = 0; s < S; ++s) cur[s] *= m.obs.at(s, traj.obs[t]) * m.rew.at(s, traj.rew[t]);
        scale[t] = normalize(cur);
      }
      for (int t = 0; t < T; ++t) dataset_ll += std::log(scale[t]);

      // scaled backward
      std::vector<Vec> bwd(static_cast<std::size_t>(T), Vec(static_cast<std::size_t>(S), 1.0));
      for (int t = T - 2; t >= 0; --t) {
        const Matrix& tr = m.trans[traj.act[t]];
        Vec& cur = bwd[t];
        std::fill(cur.begin(), cur.end(), 0.0);
        for (int sp = 0; sp < S; ++sp) {
          const std::span<const double> row = tr.row(sp);
          double acc = 0.0;
          for (int s = 0; s < S; ++s)
            acc += row[s] * m.obs.at(s, traj.obs[t + 1]) * m.rew.at(s, traj.rew[t + 1]) * bwd[t + 1][s];
          cur[sp] = acc / scale[t + 1];
        }
      }

      // state occupancies and transition counts
      Vec gamma(static_cast<std::size_t>(S));
      for (int t = 0; t < T; ++t) {
        for (int s = 0; s < S; ++s) gamma[s] = fwd[t][s] * bwd[t][s];
        normalize(gamma);
        if (t == 0)
          for (int s = 0; s < S; ++s) init_counts[s] += gamma[s];
        for (int s = 0; s < S; ++s) {
          obs_counts.at(s, traj.obs[t]) += gamma[s];
          rew_counts.at(s, traj.rew[t]) += gamma[s];
        }
        if (t + 1 < T) {
          Matrix& tc = trans_counts[traj.act[t]];
          const Matrix& tr = m.trans[traj.act[t]];
          // xi(sp, s) ∝ fwd[t][sp] * tr(sp,s) * emis(s, t+1) * bwd[t+1][s];
          // the scaled forward/backward make the normaliser exactly scale[t+1].
          for (int sp = 0; sp < S; ++sp) {
            const double f = fwd[t][sp];
            if (f == 0.0) continue;
            const std::span<const double> row = tr.row(sp);
            for (int s = 0; s < S; ++s) {
              const double e = m.obs.at(s, traj.obs[t + 1]) * m.rew.at(s, traj.rew[t + 1]);
              tc.at(sp, s) += f * row[s] * e * bwd[t + 1][s] / scale[t + 1];
            }
          }
        }
      }
    }

    if (report) report->log_evidence_per_iter.push_back(dataset_ll);

    // M-step with additive smoothing
    for (double& v : init_counts) v += opt.smoothing;
    m.init = init_counts;
    normalize(m.init);
    for (int a = 0; a < opt.n_actions; ++a)
      for (int s = 0; s < S; ++s)
        detail::smooth_and_normalize(trans_counts[a].row(s), opt.smoothing);
    for (int s = 0; s < S; ++s) {
      detail::smooth_and_normalize(obs_counts.row(s), opt.smoothing);
      detail::smooth_and_normalize(rew_counts.row(s), opt.smoothing);
    }
    m.trans = std::move(trans_counts);
    m.obs = std::move(obs_counts);
    m.rew = std::move(rew_counts);
  }

  if (report) {
    double ll = 0.0;
    for (const Trajectory& tr : dataset) ll += log_evidence(m, tr);
    report->final_log_evidence = ll;
  }
  return m;
}

struct Ensemble {
  std::vector<WorldModel> members;
};

// Fits one member per (resample seed, init seed) pair: bootstrap over whole
// trajectories, then fit_em. Identical seed pairs give identical members.
inline Ensemble fit_ensemble_seeded(const std::vector<Trajectory>& dataset,
                                    const std::vector<std::pair<std::uint64_t, std::uint64_t>>& seeds,
                                    const EmOptions& opt) {
  if (seeds.size() < 2) throw std::invalid_argument("fit_ensemble: need at least 2 members");
  Ensemble e;
  e.members.reserve(seeds.size());
  for (const auto& [resample_seed, init_seed] : seeds) {
    Rng resample_rng(resample_seed);
    std::vector<Trajectory> boot;
    boot.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
      boot.push_back(dataset[resample_rng.next_int(static_cast<int>(dataset.size()))]);
    Rng init_rng(init_seed);
    e.members.push_back(fit_em(boot, opt, init_rng));
  }
  return e;
}

inline Ensemble fit_ensemble(const std::vector<Trajectory>& dataset, int m, const EmOptions& opt,
                             Rng& rng) {
  if (m < 2) throw std::invalid_argument("fit_ensemble: need at least 2 members");
  const std::uint64_t base = rng.next_u64();
  std::vector<std::pair<std::uint64_t, std::uint64_t>> seeds;
  seeds.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    seeds.emplace_back(mix_seed(base, 1, static_cast<std::uint64_t>(i)),
                       mix_seed(base, 2, static_cast<std::uint64_t>(i)));
  return fit_ensemble_seeded(dataset, seeds, opt);
}

// Mean over observation dimensions of the across-member (population) variance
// of the predicted next-observation distribution.
inline double ensemble_disagreement(const Ensemble& e, std::span<const double> belief, int action) {
  const std::size_t M = e.members.size();
  if (M < 2) throw std::invalid_argument("ensemble_disagreement: need at least 2 members");
  const int n_obs = e.members.front().n_obs;
  std::vector<Vec> preds;
  preds.reserve(M);
  for (const WorldModel& m : e.members) {
    const Vec next = predict_prior(m, belief, action);
    Vec p(static_cast<std::size_t>(n_obs), 0.0);
    for (int s = 0; s < m.n_states; ++s) {
      const double w = next[s];
      if (w == 0.0) continue;
      const std::span<const double> row = m.obs.row(s);
      for (int o = 0; o < n_obs; ++o) p[o] += w * row[o];
    }
    preds.push_back(std::move(p));
  }
  double total_var = 0.0;
  for (int o = 0; o < n_obs; ++o) {
    double mean = 0.0, sq = 0.0;
    for (const Vec& p : preds) {
      mean += p[o];
      sq += p[o] * p[o];
    }
    mean /= static_cast<double>(M);
    sq /= static_cast<double>(M);
    total_var += sq - mean * mean;
  }
  return std::max(total_var / static_cast<double>(n_obs), 0.0);
}

// Precomputed quadratic form equal to ensemble_disagreement: with K_m =
// trans_m[a] * obs_m, the per-dimension variance of p_m = b^T K_m is
// b^T [ (1/M) Σ (K_m - K̄)(K_m - K̄)^T ] b, so one n_states² dot per
// evaluation replaces M full observation marginals.
struct DisagreementOp {
  std::vector<Matrix> quad;  // per action, n_states x n_states, includes 1/(M·n_obs)

  double eval(std::span<const double> belief, int action) const {
    const Matrix& q = quad[action];
    const int n = q.rows;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double b = belief[i];
      if (b == 0.0) continue;
      acc += b * dot(belief, q.row(i));
    }
    return std::max(acc, 0.0);
  }
};

inline DisagreementOp make_disagreement_op(const Ensemble& e) {
  const std::size_t M = e.members.size();
  if (M < 2) throw std::invalid_argument("make_disagreement_op: need at least 2 members");
  const WorldModel& first = e.members.front();
  const int S = first.n_states, A = first.n_actions, O = first.n_obs;
  DisagreementOp op;
  op.quad.assign(static_cast<std::size_t>(A), Matrix(S, S));
  std::vector<Matrix> k(M, Matrix(S, O));
  for (int a = 0; a < A; ++a) {
    Matrix mean(S, O);
    for (std::size_t mi = 0; mi < M; ++mi) {
      const WorldModel& w = e.members[mi];
      Matrix& km = k[mi];
      std::fill(km.a.begin(), km.a.end(), 0.0);
      for (int s = 0; s < S; ++s) {
        const std::span<const double> trow = w.trans[a].row(s);
        for (int s2 = 0; s2 < S; ++s2) {
          const double t = trow[s2];
          if (t == 0.0) continue;
          const std::span<const double> orow = w.obs.row(s2);
          const std::span<double> krow = km.row(s);
          for (int o = 0; o < O; ++o) krow[o] += t * orow[o];
        }
      }
      for (std::size_t i = 0; i < mean.a.size(); ++i) mean.a[i] += km.a[i];
    }
    for (double& v : mean.a) v /= static_cast<double>(M);
    Matrix& q = op.quad[a];
    const double scale = 1.0 / (static_cast<double>(M) * static_cast<double>(O));
    for (std::size_t mi = 0; mi < M; ++mi) {
      Matrix& km = k[mi];
      for (std::size_t i = 0; i < km.a.size(); ++i) km.a[i] -= mean.a[i];
      for (int i = 0; i < S; ++i) {
        const std::span<const double> ri = km.row(i);
        for (int j = i; j < S; ++j) {
          const double v = scale * dot(ri, km.row(j));
          q.at(i, j) += v;
          if (j != i) q.at(j, i) += v;
        }
      }
    }
  }
  return op;
}

}  // namespace pepper
