#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "pagnet/envs.hpp"

namespace pagnet {
namespace {

constexpr int kAgentFeatures = 3;
constexpr int kFoodFeatures = 4;

int chebyshev(const Lbf::Entity& a, const Lbf::Entity& b) {
  return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

bool touching(const Lbf::Entity& a, const Lbf::Entity& b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y) == 1;
}

}  // namespace

Lbf::Lbf(LbfConfig cfg) : cfg_(cfg) {
  if (cfg_.grid < 2) throw ConfigError("lbf.grid must be >= 2");
  if (cfg_.agents < 1 || cfg_.foods < 1) throw ConfigError("lbf.agents and lbf.foods must be >= 1");
  if (cfg_.sight < 0) throw ConfigError("lbf.sight must be >= 0");
  if (cfg_.max_agent_level < 1) throw ConfigError("lbf.max_agent_level must be >= 1");
  if (cfg_.horizon < 1) throw ConfigError("lbf.horizon must be >= 1");
  if (cfg_.agents + cfg_.foods > cfg_.grid * cfg_.grid)
    throw ConfigError("lbf grid too small to place every agent and food");

  int offset = 0;
  for (int i = 0; i < cfg_.agents; ++i) {
    layout_.segments.push_back(
        {"agent" + std::to_string(i) + ".xyl", offset, offset + kAgentFeatures, false, i});
    offset += kAgentFeatures;
  }
  for (int f = 0; f < cfg_.foods; ++f) {
    layout_.segments.push_back(
        {"food" + std::to_string(f) + ".xyla", offset, offset + kFoodFeatures, false, -1});
    offset += kFoodFeatures;
  }
  layout_.state_len = offset;
  spec_.n_agents = cfg_.agents;
  spec_.n_actions = 6;
  spec_.obs_len = offset;
  spec_.state_len = offset;
  spec_.horizon = cfg_.horizon;
  agents_.resize(cfg_.agents);
  foods_.resize(cfg_.foods);
}

std::string Lbf::descriptor() const {
  std::ostringstream os;
  os << "lbf:" << cfg_.grid << ':' << cfg_.agents << ':' << cfg_.foods << ':' << cfg_.sight << ':'
     << cfg_.max_agent_level << ':' << cfg_.horizon;
  return os.str();
}

GlobalState Lbf::encode() const {
  GlobalState s;
  s.values.assign(spec_.state_len, 0.0);
  const double span = cfg_.grid - 1;
  int k = 0;
  for (const auto& a : agents_) {
    s.values[k++] = a.x / span;
    s.values[k++] = a.y / span;
    s.values[k++] = static_cast<double>(a.level) / cfg_.max_agent_level;
  }
  for (const auto& f : foods_) {
    if (f.alive) {
      s.values[k] = f.x / span;
      s.values[k + 1] = f.y / span;
      s.values[k + 2] = static_cast<double>(f.level) / max_food_level();
      s.values[k + 3] = 1.0;
    }
    k += kFoodFeatures;
  }
  return s;
}

void Lbf::decode(const GlobalState& state, std::vector<Entity>& agents,
                 std::vector<Entity>& foods) const {
  if (static_cast<int>(state.values.size()) != spec_.state_len)
    throw InputError("state length mismatch for lbf");
  const double span = cfg_.grid - 1;
  const auto& v = state.values;
  agents.resize(cfg_.agents);
  foods.resize(cfg_.foods);
  int k = 0;
  for (auto& a : agents) {
    a.x = static_cast<int>(std::lround(v[k] * span));
    a.y = static_cast<int>(std::lround(v[k + 1] * span));
    a.level = static_cast<int>(std::lround(v[k + 2] * cfg_.max_agent_level));
    a.alive = true;
    k += kAgentFeatures;
  }
  for (auto& f : foods) {
    f.alive = v[k + 3] > 0.5;
    f.x = static_cast<int>(std::lround(v[k] * span));
    f.y = static_cast<int>(std::lround(v[k + 1] * span));
    f.level = static_cast<int>(std::lround(v[k + 2] * max_food_level()));
    k += kFoodFeatures;
  }
}

AgentObservation Lbf::observe(const GlobalState& state, int agent) const {
  if (agent < 0 || agent >= spec_.n_agents) throw UsageError("agent index out of range");
  std::vector<Entity> agents;
  std::vector<Entity> foods;
  decode(state, agents, foods);

  AgentObservation out;
  out.obs_row.assign(spec_.obs_len, 0.0);
  out.raw_length = spec_.obs_len;
  out.visibility.mask.assign(spec_.state_len, 0);
  auto map_block = [&](int begin, int width) {
    for (int k = begin; k < begin + width; ++k) {
      out.visibility.mask[k] = 1;
      out.visibility.gather.emplace_back(k, k);
      out.obs_row[k] = state.values[k];
    }
  };
  const auto& self = agents[agent];
  for (int j = 0; j < cfg_.agents; ++j)
    if (j == agent || chebyshev(self, agents[j]) <= cfg_.sight) map_block(j * kAgentFeatures, kAgentFeatures);
  const int food_base = cfg_.agents * kAgentFeatures;
  for (int f = 0; f < cfg_.foods; ++f)
    if (foods[f].alive && chebyshev(self, foods[f]) <= cfg_.sight)
      map_block(food_base + f * kFoodFeatures, kFoodFeatures);
  return out;
}

std::vector<double> Lbf::liveness(const GlobalState& state) const {
  std::vector<Entity> agents;
  std::vector<Entity> foods;
  decode(state, agents, foods);
  std::vector<double> out(cfg_.agents, 0.0);
  const double far = 2.0 * (cfg_.grid - 1);
  for (int i = 0; i < cfg_.agents; ++i) {
    int best = -1;
    for (const auto& f : foods) {
      if (!f.alive) continue;
      const int d = std::abs(f.x - agents[i].x) + std::abs(f.y - agents[i].y);
      if (best < 0 || d < best) best = d;
    }
    if (best >= 0) out[i] = 1.0 - best / far;
  }
  return out;
}

bool Lbf::occupied(int x, int y) const {
  for (const auto& a : agents_)
    if (a.x == x && a.y == y) return true;
  for (const auto& f : foods_)
    if (f.alive && f.x == x && f.y == y) return true;
  return false;
}

bool Lbf::adjacent_alive_food(const Entity& a) const {
  return std::any_of(foods_.begin(), foods_.end(),
                     [&](const Entity& f) { return f.alive && touching(a, f); });
}

StepResult Lbf::emit(double reward, bool won) const {
  StepResult r;
  r.state = encode();
  r.obs = ObservationSet(spec_.n_agents, spec_.obs_len);
  for (int i = 0; i < spec_.n_agents; ++i) {
    auto o = observe(r.state, i);
    std::copy(o.obs_row.begin(), o.obs_row.end(), r.obs.values.begin() + i * spec_.obs_len);
    r.obs.raw_lengths[i] = o.raw_length;
  }
  r.reward = reward;
  r.done = done_;
  r.won = won;
  r.t = t_;
  r.avail.assign(static_cast<size_t>(spec_.n_agents) * spec_.n_actions, 0);
  static constexpr int dx[] = {0, 0, 0, -1, 1};
  static constexpr int dy[] = {0, -1, 1, 0, 0};
  for (int i = 0; i < spec_.n_agents; ++i) {
    auto* row = r.avail.data() + static_cast<size_t>(i) * spec_.n_actions;
    row[kNone] = 1;
    for (int a = kNorth; a <= kEast; ++a) {
      const int nx = agents_[i].x + dx[a];
      const int ny = agents_[i].y + dy[a];
      row[a] = nx >= 0 && ny >= 0 && nx < cfg_.grid && ny < cfg_.grid && !occupied(nx, ny);
    }
    row[kLoad] = adjacent_alive_food(agents_[i]);
  }
  return r;
}

StepResult Lbf::reset(std::int64_t seed) {
  if (seed < 0) throw UsageError("seed must be >= 0");
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  const int g = cfg_.grid;

  // Foods avoid the border (when the grid allows it) and never touch each other.
  std::vector<std::pair<int, int>> cells;
  const int lo = g >= 3 ? 1 : 0;
  const int hi = g >= 3 ? g - 2 : g - 1;
  for (int y = lo; y <= hi; ++y)
    for (int x = lo; x <= hi; ++x) cells.emplace_back(x, y);
  std::shuffle(cells.begin(), cells.end(), rng);

  for (auto& a : agents_) a.level = std::uniform_int_distribution<int>(1, cfg_.max_agent_level)(rng);
  int level_sum = 0;
  for (const auto& a : agents_) level_sum += a.level;

  size_t next = 0;
  for (auto& f : foods_) {
    bool placed = false;
    for (; next < cells.size() && !placed; ++next) {
      const auto [x, y] = cells[next];
      const bool crowded = std::any_of(foods_.begin(), foods_.begin() + (&f - foods_.data()),
                                       [&](const Entity& o) {
                                         return std::max(std::abs(o.x - x), std::abs(o.y - y)) <= 1;
                                       });
      if (crowded) continue;
      f = {x, y, std::uniform_int_distribution<int>(1, level_sum)(rng), true};
      placed = true;
    }
    if (!placed) throw ConfigError("lbf grid too small to place foods without adjacency");
  }

  std::vector<std::pair<int, int>> free;
  for (int y = 0; y < g; ++y)
    for (int x = 0; x < g; ++x) {
      const bool has_food = std::any_of(foods_.begin(), foods_.end(),
                                        [&](const Entity& f) { return f.x == x && f.y == y; });
      if (!has_food) free.emplace_back(x, y);
    }
  if (free.size() < agents_.size()) throw ConfigError("lbf grid too small to place every agent");
  std::shuffle(free.begin(), free.end(), rng);
  for (size_t i = 0; i < agents_.size(); ++i) {
    agents_[i].x = free[i].first;
    agents_[i].y = free[i].second;
  }

  total_food_level_ = 0.0;
  for (const auto& f : foods_) total_food_level_ += f.level;
  t_ = 0;
  done_ = false;
  return emit(0.0, false);
}

void Lbf::set_board(std::vector<Entity> agents, std::vector<Entity> foods) {
  if (static_cast<int>(agents.size()) != cfg_.agents || static_cast<int>(foods.size()) != cfg_.foods)
    throw UsageError("board entity counts must match the config");
  agents_ = std::move(agents);
  foods_ = std::move(foods);
  total_food_level_ = 0.0;
  for (const auto& f : foods_) total_food_level_ += f.level;
  t_ = 0;
  done_ = false;
}

StepResult Lbf::step(std::span<const int> joint_action) {
  if (done_) throw UsageError("step called after the episode ended");
  if (static_cast<int>(joint_action.size()) != spec_.n_agents)
    throw UsageError("joint action length must equal n_agents");
  const auto before = emit(0.0, false);
  for (int i = 0; i < spec_.n_agents; ++i) {
    const int a = joint_action[i];
    if (a < 0 || a >= spec_.n_actions || !before.available(i, a, spec_.n_actions))
      throw UsageError("unavailable action " + std::to_string(a) + " for agent " + std::to_string(i));
  }

  static constexpr int dx[] = {0, 0, 0, -1, 1};
  static constexpr int dy[] = {0, -1, 1, 0, 0};
  std::vector<std::pair<int, int>> target(agents_.size());
  for (size_t i = 0; i < agents_.size(); ++i) {
    const int a = joint_action[i];
    target[i] = {agents_[i].x, agents_[i].y};
    if (a >= kNorth && a <= kEast) target[i] = {agents_[i].x + dx[a], agents_[i].y + dy[a]};
  }
  // Agents contending for the same cell all stay put.
  for (size_t i = 0; i < agents_.size(); ++i) {
    const int a = joint_action[i];
    if (a < kNorth || a > kEast) continue;
    const auto contenders = std::count(target.begin(), target.end(), target[i]);
    if (contenders == 1) {
      agents_[i].x = target[i].first;
      agents_[i].y = target[i].second;
    }
  }

  double reward = 0.0;
  for (auto& f : foods_) {
    if (!f.alive) continue;
    int combined = 0;
    for (size_t i = 0; i < agents_.size(); ++i)
      if (joint_action[i] == kLoad && touching(agents_[i], f)) combined += agents_[i].level;
    if (combined > 0 && combined >= f.level) {
      f.alive = false;
      reward += f.level / total_food_level_;
    }
  }

  ++t_;
  ++steps_taken_;
  const bool cleared = std::none_of(foods_.begin(), foods_.end(), [](const Entity& f) { return f.alive; });
  done_ = cleared || t_ >= spec_.horizon;
  auto r = emit(reward, cleared);
  r.truncated = done_ && !cleared;
  return r;
}

}  // namespace pagnet
