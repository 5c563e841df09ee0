#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pepper/pepper_loop.hpp"
#include "pepper/util.hpp"

namespace pepper {

namespace csv {

// Shortest round-trip formatting; reloaded doubles are bit-exact and the
// byte stream is locale-independent.
inline void append_field(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline void append_field(std::string& out, int v) { out += std::to_string(v); }
inline void append_field(std::string& out, std::uint64_t v) { out += std::to_string(v); }
inline void append_field(std::string& out, const std::string& v) { out += v; }

template <typename... Ts>
inline void append_row(std::string& out, const Ts&... fields) {
  bool first = true;
  auto one = [&](const auto& f) {
    if (!first) out += ',';
    first = false;
    append_field(out, f);
  };
  (one(fields), ...);
  out += '\n';
}

inline std::vector<std::string> split_row(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(pos));
      break;
    }
    out.emplace_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

inline double parse_double(const std::string& tok) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc()) throw std::runtime_error("csv: bad double '" + tok + "'");
  return v;
}

}  // namespace csv

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// --- RunLog persistence -------------------------------------------------------
//
// A run directory holds:
//   episodes/ep000.csv ...  per-step records (beliefs optional)
//   preferences.csv         per-episode count snapshots, first row uniform
//   config.snapshot         canonical config dump for the producing matrix

inline std::string episode_csv(const EpisodeLog& log, bool with_beliefs) {
  std::string out = "step,row,col,action,obs,reward_cat,map_id,efe_extrinsic,efe_state_ig,"
                    "efe_param_ig,efe_total";
  if (with_beliefs && !log.steps.empty()) {
    const std::size_t n = log.steps.front().prior.size();
    for (std::size_t i = 0; i < n; ++i) out += ",prior_" + std::to_string(i);
    for (std::size_t i = 0; i < n; ++i) out += ",post_" + std::to_string(i);
  }
  out += '\n';
  for (const StepRecord& s : log.steps) {
    csv::append_row(out, s.step_index, s.row, s.col, s.action, s.obs, s.reward_cat, s.map_id,
                    s.efe.extrinsic, s.efe.state_ig, s.efe.param_ig, s.efe_total);
    if (with_beliefs) {
      out.pop_back();  // continue the same row
      for (double v : s.prior) {
        out += ',';
        csv::append_field(out, v);
      }
      for (double v : s.posterior) {
        out += ',';
        csv::append_field(out, v);
      }
      out += '\n';
    }
  }
  return out;
}

// Winner's per-tau decomposition for every step of an episode.
inline std::string efe_trace_csv(const EpisodeLog& log) {
  std::string out = "step,tau,extrinsic,state_ig,param_ig,total\n";
  for (const StepRecord& s : log.steps)
    for (std::size_t tau = 0; tau < s.efe_trace.size(); ++tau) {
      const EfeTerms& t = s.efe_trace[tau];
      csv::append_row(out, s.step_index, static_cast<int>(tau), t.extrinsic, t.state_ig,
                      t.param_ig, t.total());
    }
  return out;
}

inline std::string preferences_csv(const RunLog& run) {
  std::string out = "episode";
  const std::size_t n = run.preference_snapshots.front().size();
  for (std::size_t i = 0; i < n; ++i) out += ",count_" + std::to_string(i);
  out += '\n';
  for (std::size_t e = 0; e < run.preference_snapshots.size(); ++e) {
    out += std::to_string(e);
    for (double v : run.preference_snapshots[e]) {
      out += ',';
      csv::append_field(out, v);
    }
    out += '\n';
  }
  return out;
}

inline void save_run(const std::filesystem::path& dir, const RunLog& run,
                     const std::string& config_snapshot, bool with_beliefs,
                     bool with_efe_trace = false) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "episodes");
  for (const EpisodeLog& e : run.episodes) {
    char name[24];
    std::snprintf(name, sizeof(name), "ep%03d.csv", e.episode_index);
    write_file(dir / "episodes" / name, episode_csv(e, with_beliefs));
    if (with_efe_trace) {
      std::snprintf(name, sizeof(name), "ep%03d_efe.csv", e.episode_index);
      write_file(dir / "episodes" / name, efe_trace_csv(e));
    }
  }
  write_file(dir / "preferences.csv", preferences_csv(run));
  write_file(dir / "config.snapshot", config_snapshot);
}

// Reloads what analysis needs (positions, categories, EFE traces, beliefs if
// present, preference snapshots).
inline RunLog load_run(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  RunLog run;
  std::vector<fs::path> episode_files;
  for (const auto& entry : fs::directory_iterator(dir / "episodes"))
    if (entry.path().filename().string().find("_efe") == std::string::npos)
      episode_files.push_back(entry.path());
  std::sort(episode_files.begin(), episode_files.end());
  int index = 0;
  for (const fs::path& p : episode_files) {
    std::istringstream in(read_file(p));
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty episode csv: " + p.string());
    const std::vector<std::string> header = csv::split_row(line);
    std::size_t n_belief = 0;
    for (const std::string& h : header)
      if (h.rfind("prior_", 0) == 0) ++n_belief;
    EpisodeLog log;
    log.episode_index = index++;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const std::vector<std::string> f = csv::split_row(line);
      StepRecord s;
      s.step_index = std::stoi(f[0]);
      s.row = std::stoi(f[1]);
      s.col = std::stoi(f[2]);
      s.action = std::stoi(f[3]);
      s.obs = std::stoi(f[4]);
      s.reward_cat = std::stoi(f[5]);
      s.map_id = std::stoull(f[6]);
      s.efe.extrinsic = csv::parse_double(f[7]);
      s.efe.state_ig = csv::parse_double(f[8]);
      s.efe.param_ig = csv::parse_double(f[9]);
      s.efe_total = csv::parse_double(f[10]);
      for (std::size_t i = 0; i < n_belief; ++i) {
        s.prior.push_back(csv::parse_double(f[11 + i]));
        s.posterior.push_back(csv::parse_double(f[11 + n_belief + i]));
      }
      log.steps.push_back(std::move(s));
    }
    run.episodes.push_back(std::move(log));
  }
  {
    std::istringstream in(read_file(dir / "preferences.csv"));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const std::vector<std::string> f = csv::split_row(line);
      Vec counts;
      counts.reserve(f.size() - 1);
      for (std::size_t i = 1; i < f.size(); ++i) counts.push_back(csv::parse_double(f[i]));
      run.preference_snapshots.push_back(std::move(counts));
    }
  }
  for (std::size_t e = 1; e < run.preference_snapshots.size(); ++e) {
    Vec delta = run.preference_snapshots[e];
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= run.preference_snapshots[e - 1][i];
    run.episode_deltas.push_back(std::move(delta));
  }
  return run;
}

}  // namespace pepper
