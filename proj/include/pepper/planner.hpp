#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "pepper/efe.hpp"
#include "pepper/rng.hpp"

namespace pepper {

struct PolicyCandidate {
  std::vector<int> actions;
  double score = 0.0;  // accumulated -G
};

struct PlanResult {
  PolicyCandidate best;
  EfeBreakdown best_breakdown;
  std::vector<double> scores;
};

// Random-shooting MPC scoring step: draw N uniform action sequences of length
// H, score each by -G, return the argmax (ties to the lowest candidate
// index). One preference draw is shared by all candidates; per-candidate rng
// streams are derived from (step seed, candidate index) so evaluation order
// cannot change the result.
inline PlanResult plan(const CompiledModel& c, std::span<const double> belief,
                       std::span<const double> pref_counts, PreferenceMode mode, int n_candidates,
                       int horizon, Rng& rng, const EfeConfig& cfg = {}) {
  if (n_candidates < 1) throw std::invalid_argument("plan: need at least one candidate");
  if (horizon < 1) throw std::invalid_argument("plan: horizon must be positive");

  const PrefSample pref = draw_pref_sample(mode, pref_counts, cfg, rng);
  const int n_actions = c.model->n_actions;

  std::vector<std::vector<int>> candidates(static_cast<std::size_t>(n_candidates));
  for (auto& seq : candidates) {
    seq.resize(static_cast<std::size_t>(horizon));
    for (int& a : seq) a = rng.next_int(n_actions);
  }
  const std::uint64_t step_seed = rng.next_u64();

  PlanResult result;
  result.scores.resize(static_cast<std::size_t>(n_candidates));
  detail::EfeScratch scratch;
  int best_index = 0;
  EfeBreakdown best_breakdown;
  for (int i = 0; i < n_candidates; ++i) {
    Rng candidate_rng(mix_seed(step_seed, static_cast<std::uint64_t>(i)));
    EfeBreakdown b =
        detail::efe_policy_impl(c, belief, candidates[i], pref, cfg, candidate_rng, scratch);
    result.scores[i] = -b.total;
    if (i == 0 || result.scores[i] > result.scores[best_index]) {
      best_index = i;
      best_breakdown = std::move(b);
    }
  }
  result.best.actions = std::move(candidates[best_index]);
  result.best.score = result.scores[best_index];
  result.best_breakdown = std::move(best_breakdown);
  return result;
}

inline PlanResult plan(const WorldModel& m, const Ensemble& e, std::span<const double> belief,
                       std::span<const double> pref_counts, PreferenceMode mode, int n_candidates,
                       int horizon, Rng& rng, const EfeConfig& cfg = {}) {
  const CompiledModel c = compile_model(m, e);
  return plan(c, belief, pref_counts, mode, n_candidates, horizon, rng, cfg);
}

// Receding horizon: a fresh plan every step, execute only the first action.
inline int act(const CompiledModel& c, std::span<const double> belief,
               std::span<const double> pref_counts, PreferenceMode mode, int n_candidates,
               int horizon, Rng& rng, const EfeConfig& cfg = {}) {
  return plan(c, belief, pref_counts, mode, n_candidates, horizon, rng, cfg).best.actions.front();
}

inline int act(const WorldModel& m, const Ensemble& e, std::span<const double> belief,
               std::span<const double> pref_counts, PreferenceMode mode, int n_candidates,
               int horizon, Rng& rng, const EfeConfig& cfg = {}) {
  const CompiledModel c = compile_model(m, e);
  return act(c, belief, pref_counts, mode, n_candidates, horizon, rng, cfg);
}

}  // namespace pepper
