#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pepper/grid_env.hpp"
#include "pepper/rng.hpp"
#include "pepper/util.hpp"

namespace pepper {

// Discrete categorical generative model: a single categorical latent with
// action-conditioned transitions and state-conditioned observation / reward
// categories. All tables are row-stochastic and strictly positive after
// smoothing, so every likelihood below is finite.
struct WorldModel {
  int n_states = 0;
  int n_actions = 0;
  int n_obs = 0;
  int n_rewards = 0;
  Vec init;                   // n_states
  std::vector<Matrix> trans;  // one n_states x n_states matrix per action
  Matrix obs;                 // n_states x n_obs
  Matrix rew;                 // n_states x n_rewards

  void validate(double tol = 1e-9) const {
    if (!is_distribution(init, tol)) throw std::runtime_error("WorldModel: init not a distribution");
    if (static_cast<int>(trans.size()) != n_actions) throw std::runtime_error("WorldModel: action count mismatch");
    for (const Matrix& t : trans)
      for (int s = 0; s < n_states; ++s)
        if (!is_distribution(t.row(s), tol)) throw std::runtime_error("WorldModel: transition row not a distribution");
    for (int s = 0; s < n_states; ++s) {
      if (!is_distribution(obs.row(s), tol)) throw std::runtime_error("WorldModel: obs row not a distribution");
      if (!is_distribution(rew.row(s), tol)) throw std::runtime_error("WorldModel: reward row not a distribution");
    }
  }
};

// One-step prediction: belief^T * trans[action], renormalised.
inline Vec predict_prior(const WorldModel& m, std::span<const double> belief, int action) {
  assert(static_cast<int>(belief.size()) == m.n_states);
  assert(action >= 0 && action < m.n_actions);
  const Matrix& t = m.trans[action];
  Vec out(static_cast<std::size_t>(m.n_states), 0.0);
  for (int s = 0; s < m.n_states; ++s) {
    const double b = belief[s];
    if (b == 0.0) continue;
    const std::span<const double> row = t.row(s);
    for (int s2 = 0; s2 < m.n_states; ++s2) out[s2] += b * row[s2];
  }
  normalize(out);
  return out;
}

// Posterior over the initial latent state given the first observation.
inline Vec filter_init(const WorldModel& m, int obs_index) {
  assert(obs_index >= 0 && obs_index < m.n_obs);
  Vec post(static_cast<std::size_t>(m.n_states));
  for (int s = 0; s < m.n_states; ++s) post[s] = m.init[s] * m.obs.at(s, obs_index);
  normalize(post);
  return post;
}

// Bayes step: predict under the action, then condition on the observation.
inline Vec filter_posterior(const WorldModel& m, std::span<const double> belief, int action,
                            int obs_index) {
  assert(obs_index >= 0 && obs_index < m.n_obs);
  Vec post = predict_prior(m, belief, action);
  for (int s = 0; s < m.n_states; ++s) post[s] *= m.obs.at(s, obs_index);
  normalize(post);
  return post;
}

// Aligned per-step arrays. Step k carries the observation and reward category
// emitted at time k and the action taken after them; the final action has no
// successor inside the trajectory and does not enter the likelihood.
struct Trajectory {
  std::vector<int> obs;
  std::vector<int> rew;
  std::vector<int> act;

  std::size_t size() const { return obs.size(); }
  void check(const WorldModel& m) const {
    if (obs.size() != rew.size() || obs.size() != act.size())
      throw std::invalid_argument("Trajectory: misaligned arrays");
    for (std::size_t k = 0; k < obs.size(); ++k) {
      if (obs[k] < 0 || obs[k] >= m.n_obs) throw std::out_of_range("Trajectory: obs index");
      if (rew[k] < 0 || rew[k] >= m.n_rewards) throw std::out_of_range("Trajectory: reward index");
      if (act[k] < 0 || act[k] >= m.n_actions) throw std::out_of_range("Trajectory: action index");
    }
  }
};

// Exact log p(o_{1:T}, r_{1:T} | actions): scaled forward algorithm with both
// observation and reward categories conditioned on the latent state.
inline double log_evidence(const WorldModel& m, const Trajectory& traj) {
  traj.check(m);
  const std::size_t T = traj.size();
  if (T == 0) return 0.0;
  Vec fwd(static_cast<std::size_t>(m.n_states));
  double log_z = 0.0;
  for (int s = 0; s < m.n_states; ++s)
    fwd[s] = m.init[s] * m.obs.at(s, traj.obs[0]) * m.rew.at(s, traj.rew[0]);
  log_z += std::log(normalize(fwd));
  Vec next(static_cast<std::size_t>(m.n_states));
  for (std::size_t k = 1; k < T; ++k) {
    const Matrix& t = m.trans[traj.act[k - 1]];
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < m.n_states; ++s) {
      const double f = fwd[s];
      if (f == 0.0) continue;
      const std::span<const double> row = t.row(s);
      for (int s2 = 0; s2 < m.n_states; ++s2) next[s2] += f * row[s2];
    }
    for (int s = 0; s < m.n_states; ++s)
      next[s] *= m.obs.at(s, traj.obs[k]) * m.rew.at(s, traj.rew[k]);
    log_z += std::log(normalize(next));
    std::swap(fwd, next);
  }
  return log_z;
}

// Variational lower bound on log_evidence. The variational posterior is the
// Markov chain of conditional filter posteriors q(s_k | s_{k-1}) ∝
// trans(s_{k-1}, s_k) * obs(s_k, o_k): per step, expected log obs- and
// reward-likelihood minus the KL from that conditional to the one-step prior
// row, averaged over the previous marginal. The chain conditions on the
// current observation only (not rewards, not future observations), so the
// bound is tight exactly when those carry no extra state information.
inline double elbo(const WorldModel& m, const Trajectory& traj) {
  traj.check(m);
  const std::size_t T = traj.size();
  if (T == 0) return 0.0;

  Vec marginal = filter_init(m, traj.obs[0]);
  double bound = 0.0;
  for (int s = 0; s < m.n_states; ++s) {
    if (marginal[s] == 0.0) continue;
    bound += marginal[s] * (std::log(m.obs.at(s, traj.obs[0])) + std::log(m.rew.at(s, traj.rew[0])));
  }
  {
    // KL(q1 ‖ init) with q1 ∝ init ⊙ obs column
    double kl = 0.0;
    for (int s = 0; s < m.n_states; ++s)
      if (marginal[s] > 0.0) kl += marginal[s] * std::log(marginal[s] / m.init[s]);
    bound -= kl;
  }

  Vec cond(static_cast<std::size_t>(m.n_states));
  Vec next(static_cast<std::size_t>(m.n_states), 0.0);
  for (std::size_t k = 1; k < T; ++k) {
    const Matrix& t = m.trans[traj.act[k - 1]];
    const int o = traj.obs[k];
    const int r = traj.rew[k];
    std::fill(next.begin(), next.end(), 0.0);
    for (int sp = 0; sp < m.n_states; ++sp) {
      const double w = marginal[sp];
      if (w == 0.0) continue;
      const std::span<const double> row = t.row(sp);
      for (int s = 0; s < m.n_states; ++s) cond[s] = row[s] * m.obs.at(s, o);
      normalize(cond);
      double contrib = 0.0;
      for (int s = 0; s < m.n_states; ++s) {
        const double q = cond[s];
        if (q == 0.0) continue;
        contrib += q * (std::log(m.obs.at(s, o)) + std::log(m.rew.at(s, r)));
        contrib -= q * std::log(q / row[s]);
        next[s] += w * q;
      }
      bound += w * contrib;
    }
    marginal = next;
  }
  return bound;
}

enum class RolloutMode { Sample, Expectation };

struct RolloutStep {
  Vec prior;       // rollout belief after the step's transition
  int state = -1;  // sampled latent state (Sample mode only)
  int obs = -1;    // sampled observation (Sample mode only)
  int reward = -1; // sampled reward category (Sample mode only)
};

// Open-loop imagination: iterates predict_prior along the action sequence.
// In Sample mode one (state, obs, reward) triple is drawn per step for the
// term estimators; the belief recursion itself stays deterministic.
inline std::vector<RolloutStep> imagine_rollout(const WorldModel& m, std::span<const double> belief,
                                                std::span<const int> actions, Rng& rng,
                                                RolloutMode mode) {
  if (actions.empty()) throw std::invalid_argument("imagine_rollout: empty action sequence");
  std::vector<RolloutStep> out;
  out.reserve(actions.size());
  Vec current(belief.begin(), belief.end());
  for (int a : actions) {
    RolloutStep step;
    step.prior = predict_prior(m, current, a);
    if (mode == RolloutMode::Sample) {
      step.state = sample_categorical(step.prior, rng);
      step.obs = sample_categorical(m.obs.row(step.state), rng);
      step.reward = sample_categorical(m.rew.row(step.state), rng);
    }
    current = step.prior;
    out.push_back(std::move(step));
  }
  return out;
}

// --- observation symbol encoding -------------------------------------------

// Maps environment observations onto the model's finite observation alphabet.
// Position: the flat position index (alphabet = width*height).
// PatchHash: FNV-1a of (position, 3x3 patch) folded into n_symbols, so map
// switches perturb the symbol stream.
struct ObsEncoder {
  enum class Kind { Position, PatchHash };
  Kind kind = Kind::Position;
  int n_symbols = 256;

  int encode(const Observation& o) const {
    if (kind == Kind::Position) return o.position_index % n_symbols;
    std::uint64_t h = fnv1a64(&o.position_index, sizeof(o.position_index));
    h = fnv1a64(o.local_patch.data(), o.local_patch.size(), h);
    return static_cast<int>(h % static_cast<std::uint64_t>(n_symbols));
  }
};

// --- serialization ----------------------------------------------------------

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline double parse_double(std::string_view tok) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc()) throw std::runtime_error("parse_double: bad token");
  return v;
}

inline void append_vec(std::string& out, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    append_double(out, v[i]);
  }
  out += '\n';
}

}  // namespace detail

// Text dump with shortest round-trip doubles; reload is bit-exact.
inline std::string serialize_model(const WorldModel& m) {
  std::string out = "pepper-worldmodel 1\n";
  out += std::to_string(m.n_states) + " " + std::to_string(m.n_actions) + " " +
         std::to_string(m.n_obs) + " " + std::to_string(m.n_rewards) + "\n";
  detail::append_vec(out, m.init);
  for (const Matrix& t : m.trans)
    for (int s = 0; s < m.n_states; ++s) detail::append_vec(out, t.row(s));
  for (int s = 0; s < m.n_states; ++s) detail::append_vec(out, m.obs.row(s));
  for (int s = 0; s < m.n_states; ++s) detail::append_vec(out, m.rew.row(s));
  return out;
}

inline WorldModel parse_model(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "pepper-worldmodel" || version != 1)
    throw std::runtime_error("parse_model: unrecognised header");
  WorldModel m;
  if (!(in >> m.n_states >> m.n_actions >> m.n_obs >> m.n_rewards))
    throw std::runtime_error("parse_model: bad dimensions");
  std::string line;
  std::getline(in, line);
  auto read_row = [&](std::span<double> dst) {
    if (!std::getline(in, line)) throw std::runtime_error("parse_model: truncated");
    std::size_t pos = 0;
    for (std::size_t i = 0; i < dst.size(); ++i) {
      while (pos < line.size() && line[pos] == ' ') ++pos;
      std::size_t end = pos;
      while (end < line.size() && line[end] != ' ') ++end;
      dst[i] = detail::parse_double(std::string_view(line).substr(pos, end - pos));
      pos = end;
    }
  };
  m.init.resize(static_cast<std::size_t>(m.n_states));
  read_row(m.init);
  m.trans.assign(static_cast<std::size_t>(m.n_actions), Matrix(m.n_states, m.n_states));
  for (Matrix& t : m.trans)
    for (int s = 0; s < m.n_states; ++s) read_row(t.row(s));
  m.obs = Matrix(m.n_states, m.n_obs);
  for (int s = 0; s < m.n_states; ++s) read_row(m.obs.row(s));
  m.rew = Matrix(m.n_states, m.n_rewards);
  for (int s = 0; s < m.n_states; ++s) read_row(m.rew.row(s));
  return m;
}

}  // namespace pepper
