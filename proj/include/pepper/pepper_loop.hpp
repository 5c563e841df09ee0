#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pepper/dirichlet.hpp"
#include "pepper/efe.hpp"
#include "pepper/grid_env.hpp"
#include "pepper/planner.hpp"
#include "pepper/rng.hpp"
#include "pepper/world_model.hpp"

namespace pepper {

struct StepRecord {
  int step_index = 0;
  int row = 0;
  int col = 0;
  int action = 0;
  int obs = 0;        // symbol fed to the model
  int reward_cat = 0;
  std::uint64_t map_id = 0;
  Vec prior;          // predicted belief before filtering this step's observation
  Vec posterior;      // belief after filtering
  EfeTerms efe;       // winning candidate's decomposition totals
  double efe_total = 0.0;
  std::vector<EfeTerms> efe_trace;  // winning candidate's per-tau terms
};

struct EpisodeLog {
  int episode_index = 0;
  std::vector<StepRecord> steps;
};

struct RunParams {
  PreferenceMode mode = PreferenceMode::StatePref;
  int episodes = 50;
  int episode_length = 50;
  double alpha = 1.0;
  int window = 0;  // 0 = unwindowed
  int horizon = 15;
  int candidates = 128;
  double lambda = 1.0;
  bool include_reset_event = true;
  bool state_pref_thompson = true;
  MapGenParams map;
  VolatilitySchedule schedule;
  ObsEncoder encoder;
  std::uint64_t seed = 0;
};

struct RunLog {
  PreferenceMode mode = PreferenceMode::StatePref;
  std::vector<EpisodeLog> episodes;
  // one snapshot before any learning plus one after each episode
  std::vector<Vec> preference_snapshots;
  // raw per-episode count increments (before windowing)
  std::vector<Vec> episode_deltas;
  std::string config_fingerprint;
};

// Per-episode event accumulation: one-hot reward categories (RewardPref) or
// prior state beliefs (StatePref), alpha-weighted, reset step included by
// default.
inline Vec episode_preference_delta(const EpisodeLog& log, PreferenceMode mode, double alpha,
                                    int n_categories, bool include_reset_event) {
  Vec delta(static_cast<std::size_t>(n_categories), 0.0);
  for (const StepRecord& s : log.steps) {
    if (!include_reset_event && s.step_index == 0) continue;
    if (mode == PreferenceMode::RewardPref) {
      delta[static_cast<std::size_t>(s.reward_cat)] += alpha;
    } else if (mode == PreferenceMode::StatePref) {
      for (int i = 0; i < n_categories; ++i) delta[i] += alpha * s.prior[i];
    }
  }
  return delta;
}

// Inner loop of the procedure: reset, then plan/act/record for
// episode_length steps. Preferences are read-only here; accumulation happens
// between episodes. Step 0 carries the reset observation with the model's
// initial state distribution as its prior belief.
inline EpisodeLog run_episode(GridEnv& env, const CompiledModel& c, std::span<const double> prefs,
                              const RunParams& params, int episode_index) {
  const WorldModel& m = *c.model;
  EpisodeLog log;
  log.episode_index = episode_index;
  log.steps.reserve(static_cast<std::size_t>(params.episode_length));

  EfeConfig efe_cfg{params.lambda, params.state_pref_thompson, RolloutMode::Sample};

  Observation obs = env.reset();
  Vec prior = m.init;
  int symbol = params.encoder.encode(obs);
  Vec posterior = filter_init(m, symbol);

  for (int t = 0; t < params.episode_length; ++t) {
    Rng step_rng(mix_seed(params.seed, 0x51e9, static_cast<std::uint64_t>(episode_index),
                          static_cast<std::uint64_t>(t)));
    PlanResult pr =
        plan(c, posterior, prefs, params.mode, params.candidates, params.horizon, step_rng, efe_cfg);
    const int action = pr.best.actions.front();

    StepRecord rec;
    rec.step_index = t;
    rec.row = env.agent_row();
    rec.col = env.agent_col();
    rec.action = action;
    rec.obs = symbol;
    rec.reward_cat = obs.reward_cat;
    rec.map_id = env.map().map_id;
    rec.prior = prior;
    rec.posterior = posterior;
    rec.efe.extrinsic = pr.best_breakdown.extrinsic;
    rec.efe.state_ig = pr.best_breakdown.state_info_gain;
    rec.efe.param_ig = pr.best_breakdown.param_info_gain;
    rec.efe_total = pr.best_breakdown.total;
    rec.efe_trace = pr.best_breakdown.per_step;
    log.steps.push_back(std::move(rec));

    obs = env.step(static_cast<Action>(action));
    symbol = params.encoder.encode(obs);
    prior = predict_prior(m, posterior, action);
    posterior = filter_posterior(m, posterior, action, symbol);
  }
  return log;
}

// Outer loop: uniform Dirichlet initialisation, alternate interaction and
// preference accumulation. Plain mode runs episodes without any preference
// store.
inline RunLog learn_preferences(const RunParams& params, const WorldModel& model,
                                const Ensemble& ensemble) {
  if (params.window > 0 && params.mode == PreferenceMode::Plain)
    throw std::invalid_argument("learn_preferences: a preference window requires a preference mode");
  if (params.episodes < 1) throw std::invalid_argument("learn_preferences: episodes must be >= 1");

  const CompiledModel compiled = compile_model(model, ensemble);
  const int n_categories =
      params.mode == PreferenceMode::RewardPref ? model.n_rewards : model.n_states;

  RunLog run;
  run.mode = params.mode;
  Vec counts = uniform_counts(n_categories);
  run.preference_snapshots.push_back(counts);

  PreferenceWindow window(params.window > 0 ? params.window : 1, uniform_counts(n_categories));

  GridEnv env(params.map, params.schedule, mix_seed(params.seed, 0xe417));

  for (int e = 0; e < params.episodes; ++e) {
    EpisodeLog log = run_episode(env, compiled, counts, params, e);
    Vec delta = episode_preference_delta(log, params.mode, params.alpha, n_categories,
                                         params.include_reset_event);
    if (params.mode != PreferenceMode::Plain) {
      if (params.window > 0)
        counts = window.apply(delta);
      else
        counts = pepper::accumulate(counts, delta, 1.0);
    }
    run.episodes.push_back(std::move(log));
    run.episode_deltas.push_back(std::move(delta));
    run.preference_snapshots.push_back(counts);
  }
  return run;
}

}  // namespace pepper
