#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pepper/efe.hpp"
#include "pepper/grid_env.hpp"
#include "pepper/pepper_loop.hpp"
#include "pepper/util.hpp"
#include "pepper/world_model.hpp"

namespace pepper {

// Flat key-value configuration with dotted section prefixes. Unknown keys are
// rejected; every field has a documented default.
struct ExperimentConfig {
  // env
  int env_size = 16;
  double env_hole_fraction = 0.15;
  int env_subgoals = 1;

  // model
  int model_n_states = 64;
  std::string model_obs_encoding = "position";  // position | patch-hash
  int model_n_obs = 0;                          // 0 = env_size * env_size
  int model_em_iters = 40;
  double model_smoothing = 1e-3;
  int model_ensemble_members = 5;
  int model_train_episodes = 150;
  int model_train_episode_length = 50;
  int model_train_reset_every = 5;

  // pepper
  std::string pepper_mode = "state-pref";  // plain | reward-pref | state-pref
  int pepper_episodes = 50;
  int pepper_episode_length = 50;
  double pepper_alpha = 1.0;
  int pepper_window = 0;  // 0 = unwindowed
  int pepper_horizon = 15;
  int pepper_candidates = 128;
  double pepper_lambda = 1.0;
  bool pepper_include_reset_event = true;
  std::string pepper_state_pref_sampling = "thompson";  // thompson | expected-log

  // matrix
  std::vector<int> matrix_volatility = {0, 25, 50, 75, 100};
  std::vector<std::string> matrix_modes = {"plain", "reward-pref", "state-pref"};
  int matrix_seeds = 10;

  // io
  std::string io_out_dir = "out";
  int io_jobs = 1;
  bool io_log_beliefs = true;
  bool io_log_efe_trace = false;

  // run
  std::uint64_t run_seed = 0;
};

namespace detail {

struct ConfigField {
  std::string key;
  std::string (*get)(const ExperimentConfig&);
  void (*set)(ExperimentConfig&, const std::string&, int line);
};

inline void parse_fail(const std::string& key, int line, const std::string& what) {
  throw std::runtime_error("config line " + std::to_string(line) + ": " + key + ": " + what);
}

inline int to_int(const std::string& key, const std::string& v, int line) {
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    parse_fail(key, line, "expected an integer, got '" + v + "'");
  return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v, int line) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    parse_fail(key, line, "expected an unsigned integer, got '" + v + "'");
  return out;
}

inline double to_double(const std::string& key, const std::string& v, int line) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    parse_fail(key, line, "expected a number, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  parse_fail(key, line, "expected true or false, got '" + v + "'");
  return false;
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& v, int line) {
  std::vector<int> out;
  std::string cur;
  std::istringstream in(v);
  while (std::getline(in, cur, ',')) out.push_back(to_int(key, cur, line));
  if (out.empty()) parse_fail(key, line, "expected a comma-separated list");
  return out;
}

inline std::vector<std::string> to_str_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(v);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  return out;
}

inline std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string join_int(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

inline std::string join_str(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += v[i];
  }
  return out;
}

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      {"env.size", [](const ExperimentConfig& c) { return std::to_string(c.env_size); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.env_size = to_int("env.size", v, l); }},
      {"env.hole_fraction", [](const ExperimentConfig& c) { return fmt_double(c.env_hole_fraction); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.env_hole_fraction = to_double("env.hole_fraction", v, l); }},
      {"env.subgoals", [](const ExperimentConfig& c) { return std::to_string(c.env_subgoals); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.env_subgoals = to_int("env.subgoals", v, l); }},
      {"model.n_states", [](const ExperimentConfig& c) { return std::to_string(c.model_n_states); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.model_n_states = to_int("model.n_states", v, l); }},
      {"model.obs_encoding", [](const ExperimentConfig& c) { return c.model_obs_encoding; },
       [](ExperimentConfig& c, const std::string& v, int) { c.model_obs_encoding = v; }},
      {"model.n_obs", [](const ExperimentConfig& c) { return std::to_string(c.model_n_obs); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.model_n_obs = to_int("model.n_obs", v, l); }},
      {"model.em_iters", [](const ExperimentConfig& c) { return std::to_string(c.model_em_iters); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.model_em_iters = to_int("model.em_iters", v, l); }},
      {"model.smoothing", [](const ExperimentConfig& c) { return fmt_double(c.model_smoothing); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.model_smoothing = to_double("model.smoothing", v, l); }},
      {"model.ensemble_members", [](const ExperimentConfig& c) { return std::to_string(c.model_ensemble_members); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.model_ensemble_members = to_int("model.ensemble_members", v, l); }},
      {"model.train_episodes", [](const ExperimentConfig& c) { return std::to_string(c.model_train_episodes); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.model_train_episodes = to_int("model.train_episodes", v, l); }},
      {"model.train_episode_length", [](const ExperimentConfig& c) { return std::to_string(c.model_train_episode_length); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.model_train_episode_length = to_int("model.train_episode_length", v, l); }},
      {"model.train_reset_every", [](const ExperimentConfig& c) { return std::to_string(c.model_train_reset_every); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.model_train_reset_every = to_int("model.train_reset_every", v, l); }},
      {"pepper.mode", [](const ExperimentConfig& c) { return c.pepper_mode; },
       [](ExperimentConfig& c, const std::string& v, int) { c.pepper_mode = v; }},
      {"pepper.episodes", [](const ExperimentConfig& c) { return std::to_string(c.pepper_episodes); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.pepper_episodes = to_int("pepper.episodes", v, l); }},
      {"pepper.episode_length", [](const ExperimentConfig& c) { return std::to_string(c.pepper_episode_length); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.pepper_episode_length = to_int("pepper.episode_length", v, l); }},
      {"pepper.alpha", [](const ExperimentConfig& c) { return fmt_double(c.pepper_alpha); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.pepper_alpha = to_double("pepper.alpha", v, l); }},
      {"pepper.window", [](const ExperimentConfig& c) { return std::to_string(c.pepper_window); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.pepper_window = to_int("pepper.window", v, l); }},
      {"pepper.horizon", [](const ExperimentConfig& c) { return std::to_string(c.pepper_horizon); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.pepper_horizon = to_int("pepper.horizon", v, l); }},
      {"pepper.candidates", [](const ExperimentConfig& c) { return std::to_string(c.pepper_candidates); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.pepper_candidates = to_int("pepper.candidates", v, l); }},
      {"pepper.lambda", [](const ExperimentConfig& c) { return fmt_double(c.pepper_lambda); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.pepper_lambda = to_double("pepper.lambda", v, l); }},
      {"pepper.include_reset_event", [](const ExperimentConfig& c) { return std::string(c.pepper_include_reset_event ? "true" : "false"); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.pepper_include_reset_event = to_bool("pepper.include_reset_event", v, l); }},
      {"pepper.state_pref_sampling", [](const ExperimentConfig& c) { return c.pepper_state_pref_sampling; },
       [](ExperimentConfig& c, const std::string& v, int) { c.pepper_state_pref_sampling = v; }},
      {"matrix.volatility", [](const ExperimentConfig& c) { return join_int(c.matrix_volatility); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.matrix_volatility = to_int_list("matrix.volatility", v, l); }},
      {"matrix.modes", [](const ExperimentConfig& c) { return join_str(c.matrix_modes); },
       [](ExperimentConfig& c, const std::string& v, int) { c.matrix_modes = to_str_list(v); }},
      {"matrix.seeds", [](const ExperimentConfig& c) { return std::to_string(c.matrix_seeds); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.matrix_seeds = to_int("matrix.seeds", v, l); }},
      {"io.out_dir", [](const ExperimentConfig& c) { return c.io_out_dir; },
       [](ExperimentConfig& c, const std::string& v, int) { c.io_out_dir = v; }},
      {"io.jobs", [](const ExperimentConfig& c) { return std::to_string(c.io_jobs); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.io_jobs = to_int("io.jobs", v, l); }},
      {"io.log_beliefs", [](const ExperimentConfig& c) { return std::string(c.io_log_beliefs ? "true" : "false"); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.io_log_beliefs = to_bool("io.log_beliefs", v, l); }},
      {"io.log_efe_trace", [](const ExperimentConfig& c) { return std::string(c.io_log_efe_trace ? "true" : "false"); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.io_log_efe_trace = to_bool("io.log_efe_trace", v, l); }},
      {"run.seed", [](const ExperimentConfig& c) { return std::to_string(c.run_seed); },
       [](ExperimentConfig& c, const std::string& v, int l) { c.run_seed = to_u64("run.seed", v, l); }},
  };
  return fields;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

// Validates cross-field constraints; throws with the offending field name.
inline void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& field, const std::string& what) {
    throw std::runtime_error("config: " + field + ": " + what);
  };
  if (c.env_size < 2) fail("env.size", "must be >= 2");
  if (!(c.env_hole_fraction >= 0.0 && c.env_hole_fraction < 0.5))
    fail("env.hole_fraction", "must be in [0, 0.5)");
  if (c.env_subgoals < 1) fail("env.subgoals", "must be >= 1");
  if (c.model_n_states < 2) fail("model.n_states", "must be >= 2");
  if (c.model_obs_encoding != "position" && c.model_obs_encoding != "patch-hash")
    fail("model.obs_encoding", "must be position or patch-hash");
  if (c.model_n_obs < 0) fail("model.n_obs", "must be >= 0 (0 = env.size^2)");
  if (c.model_em_iters < 0) fail("model.em_iters", "must be >= 0");
  if (!(c.model_smoothing > 0.0)) fail("model.smoothing", "must be > 0");
  if (c.model_ensemble_members < 2) fail("model.ensemble_members", "must be >= 2");
  if (c.model_train_episodes < 1) fail("model.train_episodes", "must be >= 1");
  if (c.model_train_episode_length < 2) fail("model.train_episode_length", "must be >= 2");
  if (c.model_train_reset_every < 1) fail("model.train_reset_every", "must be >= 1");
  mode_from_name(c.pepper_mode);
  if (c.pepper_episodes < 1) fail("pepper.episodes", "must be >= 1");
  if (c.pepper_episode_length < 1) fail("pepper.episode_length", "must be >= 1");
  if (!(c.pepper_alpha > 0.0)) fail("pepper.alpha", "must be > 0");
  if (c.pepper_window < 0) fail("pepper.window", "must be >= 0");
  if (c.pepper_window > 0 && c.pepper_mode == "plain")
    fail("pepper.window", "a preference window requires a preference mode");
  if (c.pepper_horizon < 1) fail("pepper.horizon", "must be >= 1");
  if (c.pepper_candidates < 1) fail("pepper.candidates", "must be >= 1");
  if (!(c.pepper_lambda >= 0.0)) fail("pepper.lambda", "must be >= 0");
  if (c.pepper_state_pref_sampling != "thompson" && c.pepper_state_pref_sampling != "expected-log")
    fail("pepper.state_pref_sampling", "must be thompson or expected-log");
  if (c.matrix_volatility.empty()) fail("matrix.volatility", "must not be empty");
  for (int v : c.matrix_volatility) volatility_from_percent(v);
  if (c.matrix_modes.empty()) fail("matrix.modes", "must not be empty");
  for (const std::string& m : c.matrix_modes) mode_from_name(m);
  if (c.matrix_seeds < 1) fail("matrix.seeds", "must be >= 1");
  if (c.io_jobs < 1) fail("io.jobs", "must be >= 1");
}

// Parses `key = value` lines ('#' comments, blank lines allowed). Unknown keys
// are a hard error with the line number.
inline ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(trimmed).substr(0, eq));
    const std::string value = detail::trim(std::string_view(trimmed).substr(eq + 1));
    bool found = false;
    for (const auto& f : detail::config_fields())
      if (f.key == key) {
        f.set(cfg, value, line_no);
        found = true;
        break;
      }
    if (!found)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return cfg;
}

// Environment overrides: PEPPER_ + key upper-cased with separators as '_'
// (pepper.alpha -> PEPPER_PEPPER_ALPHA). Applied after file parsing.
inline void apply_env_overrides(ExperimentConfig& cfg) {
  for (const auto& f : detail::config_fields()) {
    std::string name = "PEPPER_" + f.key;
    for (char& c : name) {
      if (c == '.') c = '_';
      c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    if (const char* v = std::getenv(name.c_str())) f.set(cfg, v, 0);
  }
}

// Load + env overrides + validation; the one call sites should use.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg = parse_config_text(buf.str());
  apply_env_overrides(cfg);
  validate_config(cfg);
  return cfg;
}

// Canonical form: every key in declaration order, one per line.
inline std::string dump_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : detail::config_fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

inline std::string config_fingerprint(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(dump_config(cfg))));
  return std::string(buf);
}

// --- derived structures -------------------------------------------------------

inline ObsEncoder obs_encoder_from_config(const ExperimentConfig& c) {
  ObsEncoder enc;
  enc.kind = c.model_obs_encoding == "position" ? ObsEncoder::Kind::Position
                                                : ObsEncoder::Kind::PatchHash;
  enc.n_symbols = c.model_n_obs > 0 ? c.model_n_obs : c.env_size * c.env_size;
  return enc;
}

inline MapGenParams map_params_from_config(const ExperimentConfig& c) {
  return {c.env_size, c.env_size, c.env_hole_fraction, c.env_subgoals};
}

// Run parameters for one experiment cell.
inline RunParams run_params_from_config(const ExperimentConfig& c, const std::string& mode,
                                        int volatility_percent, std::uint64_t cell_seed) {
  RunParams p;
  p.mode = mode_from_name(mode);
  p.episodes = c.pepper_episodes;
  p.episode_length = c.pepper_episode_length;
  p.alpha = c.pepper_alpha;
  p.window = c.pepper_window;
  p.horizon = c.pepper_horizon;
  p.candidates = c.pepper_candidates;
  p.lambda = c.pepper_lambda;
  p.include_reset_event = c.pepper_include_reset_event;
  p.state_pref_thompson = c.pepper_state_pref_sampling == "thompson";
  p.map = map_params_from_config(c);
  p.schedule = volatility_from_percent(volatility_percent);
  p.encoder = obs_encoder_from_config(c);
  p.seed = cell_seed;
  return p;
}

}  // namespace pepper
