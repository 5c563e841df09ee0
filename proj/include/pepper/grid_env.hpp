#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pepper/rng.hpp"
#include "pepper/util.hpp"

namespace pepper {

enum class TileKind : std::uint8_t { Frozen = 0, Hole = 1, Goal = 2, SubGoal = 3 };

constexpr int kNumRewardCategories = 4;

inline int reward_category(TileKind t) { return static_cast<int>(t); }

// Report-only reward scale; the agent never sees these values.
inline double reward_value(int reward_cat) {
  switch (reward_cat) {
    case static_cast<int>(TileKind::Frozen): return 0.0;
    case static_cast<int>(TileKind::Hole): return -0.25;
    case static_cast<int>(TileKind::Goal): return 10.0;
    case static_cast<int>(TileKind::SubGoal): return 1.0;
    default: throw std::out_of_range("reward_value: category out of range");
  }
}

inline char tile_char(TileKind t) {
  switch (t) {
    case TileKind::Frozen: return 'F';
    case TileKind::Hole: return 'H';
    case TileKind::Goal: return 'G';
    case TileKind::SubGoal: return 'S';
  }
  return '?';
}

inline TileKind tile_from_char(char c) {
  switch (c) {
    case 'F': return TileKind::Frozen;
    case 'H': return TileKind::Hole;
    case 'G': return TileKind::Goal;
    case 'S': return TileKind::SubGoal;
    default: throw std::runtime_error(std::string("unknown tile character: ") + c);
  }
}

struct TileMap {
  int width = 0;
  int height = 0;
  std::vector<TileKind> cells;  // row-major
  std::uint64_t map_id = 0;

  TileKind at(int row, int col) const { return cells[static_cast<std::size_t>(row) * width + col]; }
  TileKind& at(int row, int col) { return cells[static_cast<std::size_t>(row) * width + col]; }
  bool in_bounds(int row, int col) const { return row >= 0 && row < height && col >= 0 && col < width; }
  int cell_index(int row, int col) const { return row * width + col; }
};

struct MapGenParams {
  int width = 16;
  int height = 16;
  double hole_fraction = 0.15;
  int n_subgoals = 1;
};

struct VolatilitySchedule {
  std::optional<int> reset_every;       // K; nullopt = static map
  bool respawn_on_episode_start = false;
};

// Canonical five volatility levels, as percent -> K.
inline VolatilitySchedule volatility_from_percent(int percent) {
  switch (percent) {
    case 0: return {std::nullopt, false};
    case 25: return {40, true};
    case 50: return {20, true};
    case 75: return {10, true};
    case 100: return {1, true};
    default: throw std::invalid_argument("volatility percent must be one of 0,25,50,75,100");
  }
}

struct Observation {
  int position_index = 0;
  std::array<TileKind, 9> local_patch{};  // 3x3 window, out of bounds padded as Hole
  int reward_cat = 0;
};

namespace detail {

// Every walkable (non-Hole) cell must reach the Goal through walkable cells.
inline bool fully_connected(const TileMap& m) {
  int goal = -1;
  for (std::size_t i = 0; i < m.cells.size(); ++i)
    if (m.cells[i] == TileKind::Goal) goal = static_cast<int>(i);
  if (goal < 0) return false;
  std::vector<char> seen(m.cells.size(), 0);
  std::queue<int> q;
  q.push(goal);
  seen[goal] = 1;
  while (!q.empty()) {
    const int idx = q.front();
    q.pop();
    const int r = idx / m.width, c = idx % m.width;
    const int dr[4] = {0, 0, 1, -1};
    const int dc[4] = {1, -1, 0, 0};
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (!m.in_bounds(nr, nc)) continue;
      const int ni = m.cell_index(nr, nc);
      if (seen[ni] || m.cells[ni] == TileKind::Hole) continue;
      seen[ni] = 1;
      q.push(ni);
    }
  }
  for (std::size_t i = 0; i < m.cells.size(); ++i)
    if (m.cells[i] != TileKind::Hole && !seen[i]) return false;
  return true;
}

}  // namespace detail

// Procedural map: exactly one Goal, n_subgoals SubGoals, floor(hole_fraction *
// cells) Holes, remainder Frozen. Regenerates until connected, bounded at 100
// attempts.
inline TileMap generate_map(Rng& rng, const MapGenParams& p) {
  if (p.width < 2 || p.height < 2) throw std::invalid_argument("generate_map: map too small");
  if (!(p.hole_fraction >= 0.0 && p.hole_fraction < 0.5))
    throw std::invalid_argument("generate_map: hole_fraction must be in [0, 0.5)");
  if (p.n_subgoals < 1) throw std::invalid_argument("generate_map: need at least one sub-goal");
  const int cells = p.width * p.height;
  const int n_holes = static_cast<int>(p.hole_fraction * cells);
  // Frozen stays the majority category
  if (cells - 1 - p.n_subgoals - n_holes <= cells / 2)
    throw std::invalid_argument("generate_map: tile budget leaves too few frozen cells");

  for (int attempt = 0; attempt < 100; ++attempt) {
    TileMap m;
    m.width = p.width;
    m.height = p.height;
    m.cells.assign(static_cast<std::size_t>(cells), TileKind::Frozen);
    // Fisher-Yates order of cell indices
    std::vector<int> order(static_cast<std::size_t>(cells));
    for (int i = 0; i < cells; ++i) order[i] = i;
    for (int i = cells - 1; i > 0; --i) std::swap(order[i], order[rng.next_int(i + 1)]);
    int k = 0;
    m.cells[order[k++]] = TileKind::Goal;
    for (int s = 0; s < p.n_subgoals; ++s) m.cells[order[k++]] = TileKind::SubGoal;
    for (int h = 0; h < n_holes; ++h) m.cells[order[k++]] = TileKind::Hole;
    if (detail::fully_connected(m)) return m;
  }
  throw std::runtime_error("generate_map: no connected map found in 100 attempts");
}

inline std::string serialize_map(const TileMap& m) {
  std::string out = std::to_string(m.width) + " " + std::to_string(m.height) + " " +
                    std::to_string(m.map_id) + "\n";
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) out += tile_char(m.at(r, c));
    out += '\n';
  }
  return out;
}

inline TileMap parse_map(std::string_view text) {
  std::istringstream in{std::string(text)};
  TileMap m;
  if (!(in >> m.width >> m.height >> m.map_id)) throw std::runtime_error("parse_map: bad header");
  m.cells.resize(static_cast<std::size_t>(m.width) * m.height);
  std::string line;
  std::getline(in, line);
  for (int r = 0; r < m.height; ++r) {
    if (!std::getline(in, line) || static_cast<int>(line.size()) < m.width)
      throw std::runtime_error("parse_map: truncated row");
    for (int c = 0; c < m.width; ++c) m.at(r, c) = tile_from_char(line[c]);
  }
  return m;
}

enum class Action : int { Left = 0, Right = 1, Down = 2, Up = 3 };
constexpr int kNumActions = 4;

// FrozenLake-style gridworld with a volatility schedule. Owns its RNG stream;
// one environment per run.
class GridEnv {
 public:
  GridEnv(const MapGenParams& params, const VolatilitySchedule& schedule, std::uint64_t seed)
      : params_(params), schedule_(schedule), rng_(seed) {
    map_ = generate_map(rng_, params_);
    map_.map_id = 0;
    agent_row_ = 0;
    agent_col_ = 0;
  }

  Observation reset() {
    step_index_ = 0;
    if (schedule_.respawn_on_episode_start) {
      std::vector<int> frozen;
      for (int i = 0; i < params_.width * params_.height; ++i)
        if (map_.cells[i] == TileKind::Frozen) frozen.push_back(i);
      const int pick = frozen[rng_.next_int(static_cast<int>(frozen.size()))];
      agent_row_ = pick / map_.width;
      agent_col_ = pick % map_.width;
    } else {
      // fixed start: first Frozen cell in row-major order
      for (int i = 0; i < params_.width * params_.height; ++i)
        if (map_.cells[i] == TileKind::Frozen) {
          agent_row_ = i / map_.width;
          agent_col_ = i % map_.width;
          break;
        }
    }
    return observe();
  }

  // Regenerates the map when the schedule says the current step is due.
  // Returns whether a switch happened. Agent stays in place.
  bool apply_volatility() {
    if (!schedule_.reset_every || step_index_ == 0) return false;
    if (step_index_ % *schedule_.reset_every != 0) return false;
    const std::uint64_t id = map_.map_id;
    map_ = generate_map(rng_, params_);
    map_.map_id = id + 1;
    if (agent_row_ >= map_.height) agent_row_ = map_.height - 1;
    if (agent_col_ >= map_.width) agent_col_ = map_.width - 1;
    return true;
  }

  Observation step(Action action) {
    ++step_index_;
    apply_volatility();
    int dr = 0, dc = 0;
    switch (action) {
      case Action::Left: dc = -1; break;
      case Action::Right: dc = 1; break;
      case Action::Down: dr = 1; break;
      case Action::Up: dr = -1; break;
    }
    const int nr = agent_row_ + dr, nc = agent_col_ + dc;
    if (map_.in_bounds(nr, nc)) {
      agent_row_ = nr;
      agent_col_ = nc;
    }
    return observe();
  }

  Observation observe() const {
    Observation o;
    o.position_index = map_.cell_index(agent_row_, agent_col_);
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int r = agent_row_ + dr, c = agent_col_ + dc;
        o.local_patch[(dr + 1) * 3 + (dc + 1)] =
            map_.in_bounds(r, c) ? map_.at(r, c) : TileKind::Hole;
      }
    o.reward_cat = reward_category(map_.at(agent_row_, agent_col_));
    return o;
  }

  const TileMap& map() const { return map_; }
  int agent_row() const { return agent_row_; }
  int agent_col() const { return agent_col_; }
  int step_index() const { return step_index_; }
  const VolatilitySchedule& schedule() const { return schedule_; }
  const MapGenParams& params() const { return params_; }

 private:
  MapGenParams params_;
  VolatilitySchedule schedule_;
  Rng rng_;
  TileMap map_;
  int agent_row_ = 0;
  int agent_col_ = 0;
  int step_index_ = 0;
};

}  // namespace pepper
