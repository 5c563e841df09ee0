// Command-line front end: pretrain the world model, run the experiment
// matrix, and regenerate analysis CSVs / SVG plots from existing results.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pepper/config.hpp"
#include "pepper/harness.hpp"

namespace fs = std::filesystem;

namespace {

pepper::ExperimentConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) {
    pepper::ExperimentConfig cfg;
    pepper::apply_env_overrides(cfg);
    pepper::validate_config(cfg);
    return cfg;
  }
  return pepper::load_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pepper: reward-free preference learning over an EFE planner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  std::string mode;
  int volatility = -1;

  app.add_option("--config", config_path, "configuration file (key = value lines)");
  app.add_option("--out", out_dir, "output directory (overrides io.out_dir)");
  app.add_option("--seed", seed, "master seed (overrides run.seed)")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--jobs", jobs, "worker pool size for the matrix (overrides io.jobs)");
  app.add_option("--mode", mode, "restrict the matrix to one mode")
      ->check(CLI::IsMember({"plain", "reward-pref", "state-pref"}));
  app.add_option("--volatility", volatility, "restrict the matrix to one volatility percent")
      ->check(CLI::IsMember({0, 25, 50, 75, 100}));

  CLI::App* cmd_pretrain = app.add_subcommand("pretrain", "fit the world model from random-policy data");
  CLI::App* cmd_run = app.add_subcommand("run", "execute the experiment matrix");
  CLI::App* cmd_analyze = app.add_subcommand("analyze", "recompute metric CSVs from run directories");
  CLI::App* cmd_plot = app.add_subcommand("plot", "emit SVG plots from metric CSVs");
  for (CLI::App* cmd : {cmd_pretrain, cmd_run, cmd_analyze, cmd_plot}) cmd->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    pepper::ExperimentConfig cfg = load_or_default(config_path);
    if (!out_dir.empty()) cfg.io_out_dir = out_dir;
    if (jobs > 0) cfg.io_jobs = jobs;
    const std::uint64_t master_seed = seed_set ? seed : cfg.run_seed;
    const fs::path out{cfg.io_out_dir};

    if (cmd_pretrain->parsed()) {
      std::cout << "pretraining (" << cfg.model_train_episodes << " episodes of "
                << cfg.model_train_episode_length << " steps)...\n";
      const pepper::PretrainResult r = pepper::pretrain(cfg, master_seed);
      pepper::save_artifacts(out, r);
      std::cout << "dataset log evidence " << r.dataset_log_evidence << ", elbo "
                << r.dataset_elbo << "\n";
      std::cout << "model written to " << (out / "model").string() << "\n";
      return 0;
    }

    if (cmd_run->parsed()) {
      pepper::PretrainResult artifacts;
      if (pepper::artifacts_present(out)) {
        artifacts = pepper::load_artifacts(out);
      } else {
        std::cout << "no model artifacts under " << out.string() << "; pretraining first\n";
        artifacts = pepper::pretrain(cfg, master_seed);
        pepper::save_artifacts(out, artifacts);
      }
      pepper::MatrixFilter filter;
      if (!mode.empty()) filter.mode = mode;
      if (volatility >= 0) filter.volatility = volatility;
      const pepper::MatrixReport report = pepper::run_matrix(
          cfg, master_seed, out, artifacts.model, artifacts.ensemble, filter, cfg.io_jobs);
      std::cout << report.cells_run << " cells run, " << report.cells_skipped
                << " skipped (already complete)\n";
      for (const std::string& f : report.failures) std::cerr << "FAILED " << f << "\n";
      if (!report.ok()) return 1;
      pepper::analyze_runs(cfg, out);
      pepper::emit_plots(out);
      std::cout << "analysis in " << (out / "analysis").string() << ", plots in "
                << (out / "plots").string() << "\n";
      return 0;
    }

    if (cmd_analyze->parsed()) {
      pepper::analyze_runs(cfg, out);
      std::cout << "analysis in " << (out / "analysis").string() << "\n";
      return 0;
    }

    if (cmd_plot->parsed()) {
      pepper::emit_plots(out);
      std::cout << "plots in " << (out / "plots").string() << "\n";
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
