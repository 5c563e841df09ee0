#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pepper/config.hpp"
#include "pepper/dirichlet.hpp"
#include "pepper/em.hpp"
#include "pepper/io.hpp"
#include "pepper/metrics.hpp"
#include "pepper/pepper_loop.hpp"
#include "pepper/svg.hpp"

namespace pepper {

namespace fs = std::filesystem;

// --- pretraining ---------------------------------------------------------------

// Random-policy rollouts in a volatile environment (map reset every
// train_reset_every steps, respawn each episode).
inline std::vector<Trajectory> collect_random_trajectories(const ExperimentConfig& cfg,
                                                           std::uint64_t seed) {
  const ObsEncoder enc = obs_encoder_from_config(cfg);
  GridEnv env(map_params_from_config(cfg), VolatilitySchedule{cfg.model_train_reset_every, true},
              mix_seed(seed, 0x7a11));
  Rng policy_rng(mix_seed(seed, 0xac70));
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(cfg.model_train_episodes));
  for (int e = 0; e < cfg.model_train_episodes; ++e) {
    Trajectory t;
    Observation obs = env.reset();
    for (int k = 0; k < cfg.model_train_episode_length; ++k) {
      const int a = policy_rng.next_int(kNumActions);
      t.obs.push_back(enc.encode(obs));
      t.rew.push_back(obs.reward_cat);
      t.act.push_back(a);
      obs = env.step(static_cast<Action>(a));
    }
    out.push_back(std::move(t));
  }
  return out;
}

struct PretrainResult {
  WorldModel model;
  Ensemble ensemble;
  double dataset_log_evidence = 0.0;
  double dataset_elbo = 0.0;
  int n_trajectories = 0;
};

inline EmOptions em_options_from_config(const ExperimentConfig& cfg) {
  EmOptions opt;
  opt.n_states = cfg.model_n_states;
  opt.n_actions = kNumActions;
  opt.n_obs = obs_encoder_from_config(cfg).n_symbols;
  opt.n_rewards = kNumRewardCategories;
  opt.n_iters = cfg.model_em_iters;
  opt.smoothing = cfg.model_smoothing;
  return opt;
}

// Fits the frozen generative model and its bootstrap ensemble from
// random-policy data; behaviour at test time depends only on these artifacts
// and the preference updates.
inline PretrainResult pretrain(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::vector<Trajectory> data = collect_random_trajectories(cfg, seed);
  const EmOptions opt = em_options_from_config(cfg);
  PretrainResult out;
  Rng model_rng(mix_seed(seed, 0xf17));
  out.model = fit_em(data, opt, model_rng);
  Rng ens_rng(mix_seed(seed, 0xe5b));
  out.ensemble = fit_ensemble(data, cfg.model_ensemble_members, opt, ens_rng);
  for (const Trajectory& t : data) {
    out.dataset_log_evidence += log_evidence(out.model, t);
    out.dataset_elbo += elbo(out.model, t);
  }
  out.n_trajectories = static_cast<int>(data.size());
  return out;
}

inline void save_artifacts(const fs::path& out_dir, const PretrainResult& r) {
  fs::create_directories(out_dir / "model");
  write_file(out_dir / "model" / "model.txt", serialize_model(r.model));
  for (std::size_t i = 0; i < r.ensemble.members.size(); ++i)
    write_file(out_dir / "model" / ("member" + std::to_string(i) + ".txt"),
               serialize_model(r.ensemble.members[i]));
  std::string report = "trajectories " + std::to_string(r.n_trajectories) + "\n";
  report += "log_evidence ";
  csv::append_field(report, r.dataset_log_evidence);
  report += "\nelbo ";
  csv::append_field(report, r.dataset_elbo);
  report += "\nmembers " + std::to_string(r.ensemble.members.size()) + "\n";
  write_file(out_dir / "model" / "report.txt", report);
}

inline bool artifacts_present(const fs::path& out_dir) {
  return fs::exists(out_dir / "model" / "model.txt");
}

inline PretrainResult load_artifacts(const fs::path& out_dir) {
  PretrainResult r;
  r.model = parse_model(read_file(out_dir / "model" / "model.txt"));
  for (std::size_t i = 0;; ++i) {
    const fs::path p = out_dir / "model" / ("member" + std::to_string(i) + ".txt");
    if (!fs::exists(p)) break;
    r.ensemble.members.push_back(parse_model(read_file(p)));
  }
  if (r.ensemble.members.size() < 2)
    throw std::runtime_error("load_artifacts: ensemble incomplete in " + out_dir.string());
  return r;
}

// --- experiment matrix ----------------------------------------------------------

struct MatrixCell {
  std::string mode;
  int volatility = 0;
  int seed_index = 0;

  std::string name() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "vol%03d", volatility);
    return mode + "/" + buf + "/seed" + std::to_string(seed_index);
  }
};

struct MatrixReport {
  int cells_run = 0;
  int cells_skipped = 0;
  std::vector<std::string> failures;  // "cell: message"
  bool ok() const { return failures.empty(); }
};

struct MatrixFilter {
  std::optional<std::string> mode;
  std::optional<int> volatility;
};

inline std::vector<MatrixCell> matrix_cells(const ExperimentConfig& cfg,
                                            const MatrixFilter& filter = {}) {
  std::vector<MatrixCell> cells;
  for (const std::string& mode : cfg.matrix_modes) {
    if (filter.mode && *filter.mode != mode) continue;
    for (int vol : cfg.matrix_volatility) {
      if (filter.volatility && *filter.volatility != vol) continue;
      for (int s = 0; s < cfg.matrix_seeds; ++s) cells.push_back({mode, vol, s});
    }
  }
  return cells;
}

// Counter-based cell seeds: independent of execution order and of which other
// cells run.
inline std::uint64_t cell_seed(std::uint64_t master_seed, const MatrixCell& cell) {
  return mix_seed(master_seed, fnv1a64(cell.mode), static_cast<std::uint64_t>(cell.volatility),
                  static_cast<std::uint64_t>(cell.seed_index));
}

namespace detail {

class Manifest {
 public:
  Manifest(const fs::path& path, const std::string& fingerprint) : path_(path) {
    if (fs::exists(path_)) {
      std::istringstream in(read_file(path_));
      std::string word, value;
      in >> word >> value;  // header
      if (word != "pepper-matrix") throw std::runtime_error("manifest: unrecognised header");
      in >> word >> value;
      if (word != "fingerprint") throw std::runtime_error("manifest: missing fingerprint");
      if (value != fingerprint)
        throw std::runtime_error(
            "manifest: output directory was produced with a different config (fingerprint " +
            value + " vs " + fingerprint + "); use a fresh --out directory");
      while (in >> word >> value)
        if (word == "done") done_.insert(value);
    } else {
      fs::create_directories(path_.parent_path());
      write_file(path_, "pepper-matrix 1\nfingerprint " + fingerprint + "\n");
    }
  }

  bool is_done(const std::string& cell) const { return done_.count(cell) > 0; }

  void mark_done(const std::string& cell) {
    const std::lock_guard<std::mutex> lock(mu_);
    std::ofstream out(path_, std::ios::app);
    out << "done " << cell << "\n";
  }

 private:
  fs::path path_;
  std::set<std::string> done_;
  std::mutex mu_;
};

}  // namespace detail

// Executes every (mode, volatility, seed) cell, skipping cells already listed
// in the manifest. Cells are independent; a pool of `jobs` workers consumes
// them. Partial failures are recorded per cell and reported at the end.
inline MatrixReport run_matrix(const ExperimentConfig& cfg, std::uint64_t master_seed,
                               const fs::path& out_dir, const WorldModel& model,
                               const Ensemble& ensemble, const MatrixFilter& filter = {},
                               int jobs = 0) {
  const std::vector<MatrixCell> cells = matrix_cells(cfg, filter);
  const std::string fingerprint = config_fingerprint(cfg);
  const std::string snapshot = dump_config(cfg);
  detail::Manifest manifest(out_dir / "manifest.txt", fingerprint);

  MatrixReport report;
  std::vector<MatrixCell> pending;
  for (const MatrixCell& cell : cells) {
    if (manifest.is_done(cell.name()))
      ++report.cells_skipped;
    else
      pending.push_back(cell);
  }

  std::atomic<std::size_t> next{0};
  std::mutex report_mu;
  const int n_workers = std::max(1, jobs > 0 ? jobs : cfg.io_jobs);
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const MatrixCell& cell = pending[i];
      try {
        const RunParams params =
            run_params_from_config(cfg, cell.mode, cell.volatility, cell_seed(master_seed, cell));
        RunLog run = learn_preferences(params, model, ensemble);
        run.config_fingerprint = fingerprint;
        save_run(out_dir / "runs" / cell.name(), run, snapshot, cfg.io_log_beliefs,
                 cfg.io_log_efe_trace);
        manifest.mark_done(cell.name());
        const std::lock_guard<std::mutex> lock(report_mu);
        ++report.cells_run;
      } catch (const std::exception& ex) {
        const std::lock_guard<std::mutex> lock(report_mu);
        report.failures.push_back(cell.name() + ": " + ex.what());
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  return report;
}

// --- analysis ---------------------------------------------------------------------

// Reads run directories (in deterministic cell order) and emits the metric
// CSV suite under out/analysis/.
inline void analyze_runs(const ExperimentConfig& cfg, const fs::path& out_dir,
                         int kmeans_k = 4) {
  const std::vector<MatrixCell> cells = matrix_cells(cfg);
  std::string entropy = "mode,volatility,seed,episode,entropy\n";
  std::string marglik = "mode,volatility,seed,episode,mean_log_pred\n";
  std::string pairwise = "mode,volatility,seed,ep_i,ep_j,distance\n";
  std::string vs_first = "mode,volatility,seed,episode,distance\n";
  std::string variance = "mode,volatility,seed,episode,posterior_var,prior_var\n";
  std::string pca_rows = "mode,volatility,seed,episode,step,x,y\n";
  std::string clusters = "mode,volatility,seed,cluster,centroid_x,centroid_y,size\n";

  for (const MatrixCell& cell : cells) {
    const fs::path dir = out_dir / "runs" / cell.name();
    if (!fs::exists(dir / "preferences.csv")) continue;
    const RunLog run = load_run(dir);
    const PreferenceMode mode = mode_from_name(cell.mode);

    if (mode != PreferenceMode::Plain) {
      for (std::size_t e = 0; e < run.preference_snapshots.size(); ++e)
        csv::append_row(entropy, cell.mode, cell.volatility, cell.seed_index, static_cast<int>(e),
                        entropy_of_expected(run.preference_snapshots[e]));
      for (std::size_t e = 0; e < run.episodes.size(); ++e) {
        const Vec& counts = run.preference_snapshots[e];  // start-of-episode counts
        double value = 0.0;
        if (mode == PreferenceMode::RewardPref) {
          std::vector<int> cats;
          for (const StepRecord& s : run.episodes[e].steps) cats.push_back(s.reward_cat);
          value = predictive_likelihood(counts, cats);
        } else {
          std::vector<Vec> weights;
          for (const StepRecord& s : run.episodes[e].steps) weights.push_back(s.prior);
          if (weights.empty() || weights.front().empty()) continue;
          value = soft_predictive_likelihood(counts, weights);
        }
        csv::append_row(marglik, cell.mode, cell.volatility, cell.seed_index, static_cast<int>(e),
                        value);
      }
    }

    if (run.episodes.size() >= 2) {
      std::vector<PositionTrajectory> trajs;
      for (const EpisodeLog& e : run.episodes) trajs.push_back(episode_trajectory(e));
      for (std::size_t i = 0; i < trajs.size(); ++i)
        for (std::size_t j = i + 1; j < trajs.size(); ++j)
          csv::append_row(pairwise, cell.mode, cell.volatility, cell.seed_index,
                          static_cast<int>(i), static_cast<int>(j), hausdorff(trajs[i], trajs[j]));
      for (std::size_t e = 1; e < trajs.size(); ++e)
        csv::append_row(vs_first, cell.mode, cell.volatility, cell.seed_index,
                        static_cast<int>(e), hausdorff(trajs[0], trajs[e]));
    }

    const bool has_beliefs =
        !run.episodes.empty() && !run.episodes.front().steps.empty() &&
        !run.episodes.front().steps.front().posterior.empty();
    if (has_beliefs) {
      const std::vector<BeliefVariancePoint> profile = belief_variance_profile(run);
      for (std::size_t e = 0; e < profile.size(); ++e)
        csv::append_row(variance, cell.mode, cell.volatility, cell.seed_index,
                        static_cast<int>(e), profile[e].posterior_variance,
                        profile[e].prior_variance);

      std::vector<Vec> points;
      std::vector<std::pair<int, int>> origin;  // (episode, step)
      for (const EpisodeLog& e : run.episodes)
        for (const StepRecord& s : e.steps) {
          points.push_back(s.posterior);
          origin.emplace_back(e.episode_index, s.step_index);
        }
      try {
        const Pca2Result pca = pca2(points);
        for (std::size_t i = 0; i < points.size(); ++i)
          csv::append_row(pca_rows, cell.mode, cell.volatility, cell.seed_index, origin[i].first,
                          origin[i].second, pca.projected[i][0], pca.projected[i][1]);
        std::vector<Vec> plane;
        plane.reserve(pca.projected.size());
        for (const auto& xy : pca.projected) plane.push_back({xy[0], xy[1]});
        Rng km_rng(0x6d3a);
        const KmeansResult km = kmeans(plane, kmeans_k, km_rng);
        std::vector<int> sizes(static_cast<std::size_t>(kmeans_k), 0);
        for (int a : km.assignments) ++sizes[a];
        for (int c = 0; c < kmeans_k; ++c)
          csv::append_row(clusters, cell.mode, cell.volatility, cell.seed_index, c,
                          km.centroids[c][0], km.centroids[c][1], sizes[c]);
      } catch (const std::invalid_argument&) {
        // degenerate belief clouds (constant beliefs) have no projection
      }
    }
  }

  fs::create_directories(out_dir / "analysis");
  write_file(out_dir / "analysis" / "entropy_curve.csv", entropy);
  write_file(out_dir / "analysis" / "marglik_curve.csv", marglik);
  write_file(out_dir / "analysis" / "pairwise_hausdorff.csv", pairwise);
  write_file(out_dir / "analysis" / "hausdorff_vs_first.csv", vs_first);
  write_file(out_dir / "analysis" / "belief_variance.csv", variance);
  write_file(out_dir / "analysis" / "pca_projection.csv", pca_rows);
  write_file(out_dir / "analysis" / "clusters.csv", clusters);
}

// --- plotting ----------------------------------------------------------------------

namespace detail {

inline std::string volatility_color(int pct) {
  switch (pct) {
    case 0: return "#e377c2";    // pink
    case 25: return "#1f77b4";   // blue
    case 50: return "#2ca02c";   // green
    case 75: return "#000000";   // black
    case 100: return "#d62728";  // red
  }
  return "#7f7f7f";
}

inline std::string mode_color(const std::string& mode) {
  if (mode == "plain") return "#d62728";
  if (mode == "reward-pref") return "#1f77b4";
  return "#2ca02c";
}

struct CurveTable {
  // (mode, volatility) -> episode -> values across seeds
  std::map<std::pair<std::string, int>, std::map<int, std::vector<double>>> curves;
};

inline CurveTable read_curve_csv(const fs::path& path) {
  CurveTable t;
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = csv::split_row(line);
    t.curves[{f[0], std::stoi(f[1])}][std::stoi(f[3])].push_back(csv::parse_double(f[4]));
  }
  return t;
}

inline std::vector<svg::Series> curve_series(const CurveTable& t, const std::string& mode) {
  std::vector<svg::Series> series;
  for (const auto& [key, by_episode] : t.curves) {
    if (key.first != mode) continue;
    svg::Series s;
    s.label = std::to_string(key.second) + "%";
    s.color = volatility_color(key.second);
    for (const auto& [episode, values] : by_episode) {
      s.x.push_back(episode);
      double lo = values.front(), hi = values.front(), mean = 0.0;
      for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        mean += v;
      }
      s.mean.push_back(mean / static_cast<double>(values.size()));
      s.lo.push_back(lo);
      s.hi.push_back(hi);
    }
    series.push_back(std::move(s));
  }
  return series;
}

}  // namespace detail

// Renders the summary SVGs from the analysis CSVs alone.
inline void emit_plots(const fs::path& out_dir) {
  const fs::path analysis = out_dir / "analysis";
  if (!fs::exists(analysis / "entropy_curve.csv"))
    throw std::runtime_error("emit_plots: missing " + (analysis / "entropy_curve.csv").string() +
                             " (run analyze first)");
  fs::create_directories(out_dir / "plots");

  {
    const detail::CurveTable t = detail::read_curve_csv(analysis / "entropy_curve.csv");
    write_file(out_dir / "plots" / "entropy_curve.svg",
               svg::line_plot(detail::curve_series(t, "state-pref"), "State preference entropy",
                              "episode", "entropy (nats)"));
  }
  {
    const detail::CurveTable t = detail::read_curve_csv(analysis / "marglik_curve.csv");
    write_file(out_dir / "plots" / "marglik_curve.svg",
               svg::line_plot(detail::curve_series(t, "reward-pref"),
                              "Reward preference marginal likelihood", "episode",
                              "mean log predictive"));
  }
  {
    // violin groups keyed by (mode, volatility), pairwise distances pooled
    // across seeds
    std::map<std::pair<std::string, int>, std::vector<double>> pools;
    std::istringstream in(read_file(analysis / "pairwise_hausdorff.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const std::vector<std::string> f = csv::split_row(line);
      pools[{f[0], std::stoi(f[1])}].push_back(csv::parse_double(f[5]));
    }
    std::vector<svg::ViolinGroup> groups;
    const std::vector<std::string> mode_order = {"plain", "reward-pref", "state-pref"};
    double x = 0.0;
    for (int pct : {0, 25, 50, 75, 100})
      for (std::size_t mi = 0; mi < mode_order.size(); ++mi) {
        const auto it = pools.find({mode_order[mi], pct});
        if (it == pools.end()) continue;
        svg::ViolinGroup g;
        g.label = std::to_string(pct) + "%";
        g.color = detail::mode_color(mode_order[mi]);
        g.x = x;
        x += 1.0;
        g.values = it->second;
        groups.push_back(std::move(g));
      }
    write_file(out_dir / "plots" / "hausdorff_violin.svg",
               svg::violin_plot(groups, "Trajectory divergence across volatility", "volatility",
                                "Hausdorff distance"));
  }
}

}  // namespace pepper
