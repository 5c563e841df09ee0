#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "pepper/em.hpp"

using namespace pepper;
using Catch::Matchers::WithinAbs;

namespace {

// Samples trajectories from a known model (ancestral sampling).
std::vector<Trajectory> sample_dataset(const WorldModel& m, int n_traj, int length,
                                       std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Trajectory> out;
  for (int i = 0; i < n_traj; ++i) {
    Trajectory t;
    int state = sample_categorical(m.init, rng);
    for (int k = 0; k < length; ++k) {
      t.obs.push_back(sample_categorical(m.obs.row(state), rng));
      t.rew.push_back(sample_categorical(m.rew.row(state), rng));
      const int a = rng.next_int(m.n_actions);
      t.act.push_back(a);
      state = sample_categorical(m.trans[a].row(state), rng);
    }
    out.push_back(std::move(t));
  }
  return out;
}

WorldModel two_state_truth() {
  WorldModel m;
  m.n_states = 2;
  m.n_actions = 2;
  m.n_obs = 2;
  m.n_rewards = 2;
  m.init = Vec{0.9, 0.1};
  m.trans.assign(2, Matrix(2, 2));
  // action 0 keeps the state, action 1 mostly flips it
  m.trans[0].at(0, 0) = 0.95;
  m.trans[0].at(0, 1) = 0.05;
  m.trans[0].at(1, 0) = 0.05;
  m.trans[0].at(1, 1) = 0.95;
  m.trans[1].at(0, 0) = 0.1;
  m.trans[1].at(0, 1) = 0.9;
  m.trans[1].at(1, 0) = 0.9;
  m.trans[1].at(1, 1) = 0.1;
  m.obs = Matrix(2, 2);
  m.obs.at(0, 0) = 0.9;
  m.obs.at(0, 1) = 0.1;
  m.obs.at(1, 0) = 0.2;
  m.obs.at(1, 1) = 0.8;
  m.rew = Matrix(2, 2);
  m.rew.at(0, 0) = 0.85;
  m.rew.at(0, 1) = 0.15;
  m.rew.at(1, 0) = 0.3;
  m.rew.at(1, 1) = 0.7;
  return m;
}

double dataset_log_evidence(const WorldModel& m, const std::vector<Trajectory>& data) {
  double ll = 0.0;
  for (const Trajectory& t : data) ll += log_evidence(m, t);
  return ll;
}

}  // namespace

TEST_CASE("n_iters = 0 returns the smoothed random initialisation") {
  EmOptions opt;
  opt.n_states = 3;
  opt.n_actions = 2;
  opt.n_obs = 4;
  opt.n_rewards = 2;
  opt.n_iters = 0;
  Rng rng(5);
  const WorldModel m = fit_em({}, opt, rng);
  REQUIRE_NOTHROW(m.validate(1e-9));
  for (int a = 0; a < 2; ++a)
    for (int s = 0; s < 3; ++s)
      for (int s2 = 0; s2 < 3; ++s2) REQUIRE(m.trans[a].at(s, s2) > 0.0);
}

TEST_CASE("EM log evidence is monotone non-decreasing") {
  const WorldModel truth = two_state_truth();
  const std::vector<Trajectory> data = sample_dataset(truth, 10, 40, 3);
  EmOptions opt;
  opt.n_states = 2;
  opt.n_actions = 2;
  opt.n_obs = 2;
  opt.n_rewards = 2;
  opt.n_iters = 30;
  Rng rng(17);
  EmReport report;
  fit_em(data, opt, rng, &report);
  REQUIRE(report.log_evidence_per_iter.size() == 30);
  for (std::size_t i = 1; i < report.log_evidence_per_iter.size(); ++i)
    REQUIRE(report.log_evidence_per_iter[i] >= report.log_evidence_per_iter[i - 1] - 1e-8);
  REQUIRE(report.final_log_evidence >=
          report.log_evidence_per_iter.front() - 1e-8);
}

TEST_CASE("EM recovers a known 2-state model up to state relabeling") {
  const WorldModel truth = two_state_truth();
  const std::vector<Trajectory> data = sample_dataset(truth, 25, 40, 15);  // 1000 steps
  EmOptions opt;
  opt.n_states = 2;
  opt.n_actions = 2;
  opt.n_obs = 2;
  opt.n_rewards = 2;
  opt.n_iters = 120;
  Rng rng(2);
  const WorldModel fit = fit_em(data, opt, rng);

  // try both relabelings; the better one must match within 0.05
  auto row_error = [&](int perm) {
    double worst = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int s = 0; s < 2; ++s)
        for (int s2 = 0; s2 < 2; ++s2) {
          const int ps = perm ? 1 - s : s, ps2 = perm ? 1 - s2 : s2;
          worst = std::max(worst, std::abs(fit.trans[a].at(ps, ps2) - truth.trans[a].at(s, s2)));
        }
    return worst;
  };
  const double err = std::min(row_error(0), row_error(1));
  REQUIRE(err < 0.05);
}

TEST_CASE("fitted model approaches the truth's held-out evidence") {
  const WorldModel truth = two_state_truth();
  const std::vector<Trajectory> train = sample_dataset(truth, 30, 40, 21);
  const std::vector<Trajectory> heldout = sample_dataset(truth, 10, 40, 22);
  EmOptions opt;
  opt.n_states = 2;
  opt.n_actions = 2;
  opt.n_obs = 2;
  opt.n_rewards = 2;
  opt.n_iters = 120;
  Rng rng(4);
  const WorldModel fit = fit_em(train, opt, rng);
  const double ll_truth = dataset_log_evidence(truth, heldout);
  const double ll_fit = dataset_log_evidence(fit, heldout);
  // both negative; within 5% of the truth's value
  REQUIRE(ll_fit >= ll_truth / 0.95);
}

TEST_CASE("fit is deterministic per seed") {
  const WorldModel truth = two_state_truth();
  const std::vector<Trajectory> data = sample_dataset(truth, 5, 30, 31);
  EmOptions opt;
  opt.n_states = 2;
  opt.n_actions = 2;
  opt.n_obs = 2;
  opt.n_rewards = 2;
  opt.n_iters = 10;
  Rng r1(9), r2(9);
  const WorldModel a = fit_em(data, opt, r1);
  const WorldModel b = fit_em(data, opt, r2);
  REQUIRE(a.init == b.init);
  for (int ac = 0; ac < 2; ++ac) REQUIRE(a.trans[ac].a == b.trans[ac].a);
  REQUIRE(a.obs.a == b.obs.a);
  REQUIRE(a.rew.a == b.rew.a);
}

TEST_CASE("ensemble members share dimensions and seeds pin them") {
  const WorldModel truth = two_state_truth();
  const std::vector<Trajectory> data = sample_dataset(truth, 8, 30, 41);
  EmOptions opt;
  opt.n_states = 2;
  opt.n_actions = 2;
  opt.n_obs = 2;
  opt.n_rewards = 2;
  opt.n_iters = 15;
  Rng rng(6);
  const Ensemble e = fit_ensemble(data, 5, opt, rng);
  REQUIRE(e.members.size() == 5);
  for (const WorldModel& m : e.members) {
    REQUIRE(m.n_states == 2);
    REQUIRE_NOTHROW(m.validate(1e-9));
  }

  // identical (resample, init) seed pairs -> identical members
  const Ensemble twin = fit_ensemble_seeded(data, {{10, 20}, {10, 20}}, opt);
  REQUIRE(twin.members[0].init == twin.members[1].init);
  REQUIRE(twin.members[0].obs.a == twin.members[1].obs.a);
  for (int a = 0; a < 2; ++a) REQUIRE(twin.members[0].trans[a].a == twin.members[1].trans[a].a);
}

TEST_CASE("members fitted on disjoint heterogeneous halves differ") {
  const WorldModel truth_a = two_state_truth();
  WorldModel truth_b = two_state_truth();
  // different dynamics for the second half
  truth_b.trans[0].at(0, 0) = 0.2;
  truth_b.trans[0].at(0, 1) = 0.8;
  truth_b.trans[0].at(1, 0) = 0.8;
  truth_b.trans[0].at(1, 1) = 0.2;
  const std::vector<Trajectory> half_a = sample_dataset(truth_a, 15, 40, 51);
  const std::vector<Trajectory> half_b = sample_dataset(truth_b, 15, 40, 52);
  EmOptions opt;
  opt.n_states = 2;
  opt.n_actions = 2;
  opt.n_obs = 2;
  opt.n_rewards = 2;
  opt.n_iters = 60;
  Rng r1(7), r2(7);
  const WorldModel fa = fit_em(half_a, opt, r1);
  const WorldModel fb = fit_em(half_b, opt, r2);
  double max_diff = 0.0;
  for (int a = 0; a < 2; ++a)
    for (std::size_t i = 0; i < fa.trans[a].a.size(); ++i)
      max_diff = std::max(max_diff, std::abs(fa.trans[a].a[i] - fb.trans[a].a[i]));
  REQUIRE(max_diff > opt.smoothing);
}

TEST_CASE("identical ensemble members have zero disagreement") {
  const WorldModel truth = two_state_truth();
  Ensemble e;
  e.members = {truth, truth, truth};
  const Vec belief{0.4, 0.6};
  REQUIRE_THAT(ensemble_disagreement(e, belief, 0), WithinAbs(0.0, 1e-15));
}

TEST_CASE("delta-disagreeing members give variance 0.25 per active dimension") {
  // two members that deterministically predict different observations
  auto make = [](int obs_index) {
    WorldModel m;
    m.n_states = 1;
    m.n_actions = 1;
    m.n_obs = 2;
    m.n_rewards = 2;
    m.init = Vec{1.0};
    m.trans.assign(1, Matrix(1, 1));
    m.trans[0].at(0, 0) = 1.0;
    m.obs = Matrix(1, 2);
    m.obs.at(0, obs_index) = 1.0;
    m.rew = Matrix(1, 2, 0.5);
    return m;
  };
  Ensemble e;
  e.members = {make(0), make(1)};
  const Vec belief{1.0};
  // per-dimension variance of {0,1} is 0.25; two active dims over n_obs = 2
  REQUIRE_THAT(ensemble_disagreement(e, belief, 0), WithinAbs(0.5 / 2.0, 1e-12));
}

TEST_CASE("disagreement is invariant to member order") {
  const WorldModel truth = two_state_truth();
  const std::vector<Trajectory> data = sample_dataset(truth, 8, 30, 61);
  EmOptions opt;
  opt.n_states = 2;
  opt.n_actions = 2;
  opt.n_obs = 2;
  opt.n_rewards = 2;
  opt.n_iters = 10;
  Rng rng(8);
  Ensemble e = fit_ensemble(data, 3, opt, rng);
  const Vec belief{0.3, 0.7};
  const double d1 = ensemble_disagreement(e, belief, 1);
  std::reverse(e.members.begin(), e.members.end());
  const double d2 = ensemble_disagreement(e, belief, 1);
  REQUIRE_THAT(d1, WithinAbs(d2, 1e-15));
}

TEST_CASE("disagreement operator equals the direct computation") {
  const WorldModel truth = two_state_truth();
  const std::vector<Trajectory> data = sample_dataset(truth, 10, 30, 71);
  EmOptions opt;
  opt.n_states = 2;
  opt.n_actions = 2;
  opt.n_obs = 2;
  opt.n_rewards = 2;
  opt.n_iters = 10;
  Rng rng(12);
  const Ensemble e = fit_ensemble(data, 4, opt, rng);
  const DisagreementOp op = make_disagreement_op(e);
  Rng belief_rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    Vec belief(2);
    belief[0] = belief_rng.next_open();
    belief[1] = 1.0 - belief[0];
    const int a = belief_rng.next_int(2);
    const double direct = ensemble_disagreement(e, belief, a);
    const double fast = op.eval(belief, a);
    REQUIRE_THAT(fast, WithinAbs(direct, 1e-12));
  }
}
