#include <algorithm>
#include <random>
#include <sstream>

#include "pagnet/envs.hpp"

namespace pagnet {

Hallway::Hallway(HallwayConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.lengths.empty()) throw ConfigError("hallway.lengths must name at least one chain");
  int offset = 0;
  int longest = 0;
  for (size_t i = 0; i < cfg_.lengths.size(); ++i) {
    const int len = cfg_.lengths[i];
    if (len < 1) throw ConfigError("hallway.lengths entries must be >= 1");
    offsets_.push_back(offset);
    layout_.segments.push_back({"agent" + std::to_string(i) + ".pos", offset, offset + len + 1,
                                true, static_cast<int>(i)});
    offset += len + 1;
    longest = std::max(longest, len);
  }
  layout_.state_len = offset;
  spec_.n_agents = static_cast<int>(cfg_.lengths.size());
  spec_.n_actions = 3;
  spec_.obs_len = longest + 1;
  spec_.state_len = offset;
  spec_.horizon = longest + 10;
  pos_.assign(spec_.n_agents, 1);
}

std::string Hallway::descriptor() const {
  std::ostringstream os;
  os << "hallway";
  for (int len : cfg_.lengths) os << ':' << len;
  return os.str();
}

GlobalState Hallway::encode() const {
  GlobalState s;
  s.values.assign(spec_.state_len, 0.0);
  for (int i = 0; i < spec_.n_agents; ++i) s.values[offsets_[i] + pos_[i]] = 1.0;
  return s;
}

std::vector<int> Hallway::decode_positions(const GlobalState& state) const {
  std::vector<int> pos(spec_.n_agents, 0);
  for (int i = 0; i < spec_.n_agents; ++i) {
    const auto& seg = layout_.segments[i];
    const auto first = state.values.begin() + seg.begin;
    pos[i] = static_cast<int>(std::max_element(first, state.values.begin() + seg.end) - first);
  }
  return pos;
}

AgentObservation Hallway::observe(const GlobalState& state, int agent) const {
  if (agent < 0 || agent >= spec_.n_agents) throw UsageError("agent index out of range");
  if (static_cast<int>(state.values.size()) != spec_.state_len)
    throw InputError("state length mismatch for hallway");
  AgentObservation out;
  const int seg_len = cfg_.lengths[agent] + 1;
  out.obs_row.assign(spec_.obs_len, 0.0);
  out.raw_length = seg_len;
  out.visibility.mask.assign(spec_.state_len, 0);
  for (int k = 0; k < seg_len; ++k) {
    const int s = offsets_[agent] + k;
    out.visibility.mask[s] = 1;
    out.visibility.gather.emplace_back(s, k);
    out.obs_row[k] = state.values[s];
  }
  return out;
}

std::vector<double> Hallway::liveness(const GlobalState& state) const {
  const auto pos = decode_positions(state);
  std::vector<double> out(spec_.n_agents);
  for (int i = 0; i < spec_.n_agents; ++i)
    out[i] = 1.0 - static_cast<double>(pos[i]) / cfg_.lengths[i];
  return out;
}

StepResult Hallway::emit(double reward, bool won) const {
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
  r.avail.assign(static_cast<size_t>(spec_.n_agents) * spec_.n_actions, 1);
  return r;
}

StepResult Hallway::reset(std::int64_t seed) {
  if (seed < 0) throw UsageError("seed must be >= 0");
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  for (int i = 0; i < spec_.n_agents; ++i)
    pos_[i] = std::uniform_int_distribution<int>(1, cfg_.lengths[i])(rng);
  t_ = 0;
  done_ = false;
  return emit(0.0, false);
}

void Hallway::set_positions(std::vector<int> pos) {
  if (static_cast<int>(pos.size()) != spec_.n_agents) throw UsageError("position count mismatch");
  for (int i = 0; i < spec_.n_agents; ++i)
    if (pos[i] < 0 || pos[i] > cfg_.lengths[i]) throw UsageError("position outside chain");
  pos_ = std::move(pos);
  done_ = false;
}

StepResult Hallway::step(std::span<const int> joint_action) {
  if (done_) throw UsageError("step called after the episode ended");
  if (static_cast<int>(joint_action.size()) != spec_.n_agents)
    throw UsageError("joint action length must equal n_agents");
  for (int a : joint_action)
    if (a < 0 || a >= spec_.n_actions) throw UsageError("unavailable action " + std::to_string(a));

  for (int i = 0; i < spec_.n_agents; ++i) {
    switch (joint_action[i]) {
      case kTowardGoal: pos_[i] = std::max(0, pos_[i] - 1); break;
      case kAway: pos_[i] = std::min(cfg_.lengths[i], pos_[i] + 1); break;
      default: break;
    }
  }
  ++t_;
  ++steps_taken_;
  const int arrived = static_cast<int>(std::count(pos_.begin(), pos_.end(), 0));
  const bool won = arrived == spec_.n_agents;
  done_ = arrived > 0 || t_ >= spec_.horizon;
  auto r = emit(won ? 10.0 : 0.0, won);
  r.truncated = done_ && arrived == 0;
  return r;
}

}  // namespace pagnet
