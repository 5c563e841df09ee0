#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pepper/dirichlet.hpp"
#include "pepper/em.hpp"
#include "pepper/rng.hpp"
#include "pepper/util.hpp"
#include "pepper/world_model.hpp"

namespace pepper {

enum class PreferenceMode { Plain, RewardPref, StatePref };

inline const char* mode_name(PreferenceMode m) {
  switch (m) {
    case PreferenceMode::Plain: return "plain";
    case PreferenceMode::RewardPref: return "reward-pref";
    case PreferenceMode::StatePref: return "state-pref";
  }
  return "?";
}

inline PreferenceMode mode_from_name(std::string_view s) {
  if (s == "plain") return PreferenceMode::Plain;
  if (s == "reward-pref") return PreferenceMode::RewardPref;
  if (s == "state-pref") return PreferenceMode::StatePref;
  throw std::invalid_argument("unknown preference mode: " + std::string(s));
}

struct EfeTerms {
  double extrinsic = 0.0;
  double state_ig = 0.0;
  double param_ig = 0.0;
  double total() const { return extrinsic + state_ig + param_ig; }
};

// Per-policy decomposition. Slot contents depend on the objective:
//   RewardPref: (reward cross-entropy, prior->posterior KL, -λ·disagreement)
//   StatePref:  (state divergence vs preferences, expected obs entropy, -λ·disagreement)
//   Plain:      (expected obs entropy, prior->posterior KL, -λ·disagreement)
struct EfeBreakdown {
  double extrinsic = 0.0;
  double state_info_gain = 0.0;
  double param_info_gain = 0.0;
  double total = 0.0;
  std::vector<EfeTerms> per_step;
};

struct EfeConfig {
  double lambda = 1.0;              // scale on the ensemble-variance term
  bool state_pref_thompson = true;  // Thompson draw of D (else digamma expected log)
  RolloutMode estimator = RolloutMode::Sample;
};

// --- individual terms --------------------------------------------------------

// -Σ_r Q(r | rollout belief) log C̃[r], with C̃ a Thompson draw shared across
// the planning call.
inline double term_extrinsic_reward(const WorldModel& m, std::span<const double> rollout_belief,
                                    std::span<const double> sampled_c) {
  if (static_cast<int>(sampled_c.size()) != m.n_rewards)
    throw std::invalid_argument("term_extrinsic_reward: preference length mismatch");
  double acc = 0.0;
  for (int r = 0; r < m.n_rewards; ++r) {
    double q = 0.0;
    for (int s = 0; s < m.n_states; ++s) q += rollout_belief[s] * m.rew.at(s, r);
    if (q > 0.0) acc -= q * std::log(sampled_c[r]);
  }
  return acc;
}

// KL(prior ‖ posterior) where the posterior conditions the rollout prior on
// one imagined observation. Non-negative.
inline double term_state_info_gain(const WorldModel& m, std::span<const double> prior_belief,
                                   int imagined_obs) {
  double z = 0.0;
  double cross = 0.0;
  for (int s = 0; s < m.n_states; ++s) {
    const double lik = m.obs.at(s, imagined_obs);
    z += prior_belief[s] * lik;
    if (prior_belief[s] > 0.0) cross += prior_belief[s] * std::log(lik);
  }
  // KL(prior ‖ prior⊙lik/z) = log z - E_prior[log lik]
  return std::max(std::log(z) - cross, 0.0);
}

// Expected observation-row entropy under the rollout belief.
inline double term_obs_entropy(const WorldModel& m, std::span<const double> rollout_belief) {
  double acc = 0.0;
  for (int s = 0; s < m.n_states; ++s)
    if (rollout_belief[s] > 0.0) acc += rollout_belief[s] * entropy(m.obs.row(s));
  return acc;
}

// log Q(s_τ|π)[ŝ] - log P(s|D)[ŝ] at one state sampled from the rollout prior.
inline double term_state_divergence(double sampled_state_logprob,
                                    std::span<const double> prefs_d_log, int sampled_state) {
  return sampled_state_logprob - prefs_d_log[sampled_state];
}

// -λ · ensemble disagreement; non-positive, so sought under argmin G.
inline double term_param_info_gain(const Ensemble& e, std::span<const double> belief, int action,
                                   double lambda = 1.0) {
  return -lambda * ensemble_disagreement(e, belief, action);
}

// --- compiled evaluation path ------------------------------------------------

// Model- and ensemble-derived tables reused across every planning call of a
// run: transposed transitions for cache-friendly prediction, log observation
// columns, per-state observation-row entropies, and the disagreement
// quadratic form.
struct CompiledModel {
  const WorldModel* model = nullptr;
  std::vector<Matrix> trans_t;  // per action: (next_state, prev_state)
  Matrix obs_t;                 // (obs, state)
  Matrix log_obs_t;             // (obs, state)
  Vec obs_row_entropy;          // per state
  DisagreementOp disagreement;

  int n_states() const { return model->n_states; }

  void predict(std::span<const double> belief, int action, std::span<double> out) const {
    const Matrix& t = trans_t[action];
    double total = 0.0;
    for (int s = 0; s < t.rows; ++s) {
      const double v = dot(belief, t.row(s));
      out[s] = v;
      total += v;
    }
    const double inv = 1.0 / total;
    for (int s = 0; s < t.rows; ++s) out[s] *= inv;
  }
};

inline CompiledModel compile_model(const WorldModel& m, const Ensemble& e) {
  CompiledModel c;
  c.model = &m;
  c.trans_t.reserve(m.trans.size());
  for (const Matrix& t : m.trans) c.trans_t.push_back(t.transposed());
  c.obs_t = m.obs.transposed();
  c.log_obs_t = c.obs_t;
  for (double& v : c.log_obs_t.a) v = std::log(v);
  c.obs_row_entropy.resize(static_cast<std::size_t>(m.n_states));
  for (int s = 0; s < m.n_states; ++s) c.obs_row_entropy[s] = entropy(m.obs.row(s));
  c.disagreement = make_disagreement_op(e);
  return c;
}

// Preference sample fixed for one planning invocation.
struct PrefSample {
  PreferenceMode mode = PreferenceMode::Plain;
  Vec log_pref;  // log C̃ (RewardPref) or log P(s|D) (StatePref); empty for Plain
};

inline PrefSample draw_pref_sample(PreferenceMode mode, std::span<const double> pref_counts,
                                   const EfeConfig& cfg, Rng& rng) {
  PrefSample out;
  out.mode = mode;
  if (mode == PreferenceMode::Plain) return out;
  if (mode == PreferenceMode::StatePref && !cfg.state_pref_thompson) {
    out.log_pref = expected_log(pref_counts);
    return out;
  }
  out.log_pref = thompson_sample(pref_counts, rng);
  for (double& v : out.log_pref) v = std::log(v);
  return out;
}

namespace detail {

struct EfeScratch {
  Vec belief;
  Vec next;
  Vec reward_marginal;
};

// prior->posterior KL on one imagined observation (Sample), or its exact
// expectation over the predicted observation marginal (Expectation).
inline double state_ig_term(const CompiledModel& c, std::span<const double> q, bool sample_mode,
                            Rng& rng) {
  const int S = c.model->n_states;
  if (sample_mode) {
    const int s_hat = sample_categorical(q, rng);
    const int o_hat = sample_categorical(c.model->obs.row(s_hat), rng);
    const std::span<const double> lik = c.obs_t.row(o_hat);
    const std::span<const double> log_lik = c.log_obs_t.row(o_hat);
    double z = 0.0, cross = 0.0;
    for (int s = 0; s < S; ++s) {
      z += q[s] * lik[s];
      if (q[s] > 0.0) cross += q[s] * log_lik[s];
    }
    return std::max(std::log(z) - cross, 0.0);
  }
  // E_ô[KL] = Σ_ô z_ô · (log z_ô - Σ_s q(s) log lik_ô(s)); z_ô is the
  // predicted observation marginal.
  double acc = 0.0;
  for (int o = 0; o < c.model->n_obs; ++o) {
    const std::span<const double> lik = c.obs_t.row(o);
    const std::span<const double> log_lik = c.log_obs_t.row(o);
    double z = 0.0, cross = 0.0;
    for (int s = 0; s < S; ++s) {
      z += q[s] * lik[s];
      if (q[s] > 0.0) cross += q[s] * log_lik[s];
    }
    if (z > 0.0) acc += z * (std::log(z) - cross);
  }
  return std::max(acc, 0.0);
}

// One candidate evaluation. `belief` is the belief at the current time; the
// first action's transition produces the rollout belief at τ = t+1.
inline EfeBreakdown efe_policy_impl(const CompiledModel& c, std::span<const double> belief,
                                    std::span<const int> actions, const PrefSample& pref,
                                    const EfeConfig& cfg, Rng& rng, EfeScratch& scratch) {
  const WorldModel& m = *c.model;
  if (pref.mode == PreferenceMode::RewardPref &&
      static_cast<int>(pref.log_pref.size()) != m.n_rewards)
    throw std::invalid_argument("efe_policy: reward preference length mismatch");
  if (pref.mode == PreferenceMode::StatePref &&
      static_cast<int>(pref.log_pref.size()) != m.n_states)
    throw std::invalid_argument("efe_policy: state preference length mismatch");

  const int S = m.n_states;
  scratch.belief.assign(belief.begin(), belief.end());
  scratch.next.resize(static_cast<std::size_t>(S));
  scratch.reward_marginal.resize(static_cast<std::size_t>(m.n_rewards));

  EfeBreakdown out;
  out.per_step.reserve(actions.size());
  const bool sample_mode = cfg.estimator == RolloutMode::Sample;

  for (int a : actions) {
    EfeTerms step;
    // parameter information gain uses the pre-transition belief and the action
    step.param_ig = -cfg.lambda * c.disagreement.eval(scratch.belief, a);
    c.predict(scratch.belief, a, scratch.next);
    const std::span<const double> q{scratch.next};

    switch (pref.mode) {
      case PreferenceMode::RewardPref: {
        for (int r = 0; r < m.n_rewards; ++r) scratch.reward_marginal[r] = 0.0;
        for (int s = 0; s < S; ++s) {
          const double w = q[s];
          if (w == 0.0) continue;
          const std::span<const double> row = m.rew.row(s);
          for (int r = 0; r < m.n_rewards; ++r) scratch.reward_marginal[r] += w * row[r];
        }
        for (int r = 0; r < m.n_rewards; ++r)
          if (scratch.reward_marginal[r] > 0.0)
            step.extrinsic -= scratch.reward_marginal[r] * pref.log_pref[r];
        step.state_ig = state_ig_term(c, q, sample_mode, rng);
        break;
      }
      case PreferenceMode::Plain: {
        step.extrinsic = dot(q, c.obs_row_entropy);
        step.state_ig = state_ig_term(c, q, sample_mode, rng);
        break;
      }
      case PreferenceMode::StatePref: {
        step.state_ig = dot(q, c.obs_row_entropy);
        if (sample_mode) {
          const int sampled = sample_categorical(q, rng);
          step.extrinsic = std::log(q[sampled]) - pref.log_pref[sampled];
        } else {
          double acc = 0.0;
          for (int s = 0; s < S; ++s)
            if (q[s] > 0.0) acc += q[s] * (std::log(q[s]) - pref.log_pref[s]);
          step.extrinsic = acc;
        }
        break;
      }
    }

    out.extrinsic += step.extrinsic;
    out.state_info_gain += step.state_ig;
    out.param_info_gain += step.param_ig;
    out.per_step.push_back(step);
    std::swap(scratch.belief, scratch.next);
  }
  out.total = out.extrinsic + out.state_info_gain + out.param_info_gain;
  return out;
}


}  // namespace detail

// Builds a PrefSample from an explicit preference distribution instead of a
// Thompson draw.
inline PrefSample pref_sample_from_dist(PreferenceMode mode, std::span<const double> dist) {
  PrefSample out;
  out.mode = mode;
  out.log_pref.assign(dist.begin(), dist.end());
  for (double& v : out.log_pref) v = std::log(v);
  return out;
}

// Evaluation against a caller-supplied preference sample; rng only drives the
// per-step term estimators.
inline EfeBreakdown efe_policy_with_sample(const CompiledModel& c, std::span<const double> belief,
                                           std::span<const int> actions, const PrefSample& pref,
                                           Rng& rng, const EfeConfig& cfg = {}) {
  detail::EfeScratch scratch;
  return detail::efe_policy_impl(c, belief, actions, pref, cfg, rng, scratch);
}

// Full EFE of one candidate policy. Draws the preference sample itself; the
// planner uses the shared-sample overload so all candidates see one draw.
inline EfeBreakdown efe_policy(const CompiledModel& c, std::span<const double> belief,
                               std::span<const int> actions, std::span<const double> pref_counts,
                               PreferenceMode mode, Rng& rng, const EfeConfig& cfg = {}) {
  const PrefSample pref = draw_pref_sample(mode, pref_counts, cfg, rng);
  detail::EfeScratch scratch;
  return detail::efe_policy_impl(c, belief, actions, pref, cfg, rng, scratch);
}

inline EfeBreakdown efe_policy(const WorldModel& m, const Ensemble& e,
                               std::span<const double> belief, std::span<const int> actions,
                               std::span<const double> pref_counts, PreferenceMode mode, Rng& rng,
                               const EfeConfig& cfg = {}) {
  const CompiledModel c = compile_model(m, e);
  return efe_policy(c, belief, actions, pref_counts, mode, rng, cfg);
}

}  // namespace pepper
