#include <random>
#include <sstream>

#include "pagnet/envs.hpp"

namespace pagnet {

SliceFixture::SliceFixture(SliceConfig cfg) : cfg_(cfg) {
  if (cfg_.agents < 1 || cfg_.slice < 1) throw ConfigError("slice.agents and slice.slice must be >= 1");
  spec_.n_agents = cfg_.agents;
  spec_.n_actions = 1;
  spec_.obs_len = cfg_.slice;
  spec_.state_len = cfg_.agents * cfg_.slice;
  spec_.horizon = 1;
  for (int i = 0; i < cfg_.agents; ++i)
    layout_.segments.push_back({"agent" + std::to_string(i) + ".slice", i * cfg_.slice,
                                (i + 1) * cfg_.slice, false, i});
  layout_.state_len = spec_.state_len;
  state_.assign(spec_.state_len, 0.0);
}

std::string SliceFixture::descriptor() const {
  std::ostringstream os;
  os << "slice:" << cfg_.agents << ':' << cfg_.slice;
  return os.str();
}

AgentObservation SliceFixture::observe(const GlobalState& state, int agent) const {
  if (agent < 0 || agent >= spec_.n_agents) throw UsageError("agent index out of range");
  if (static_cast<int>(state.values.size()) != spec_.state_len)
    throw InputError("state length mismatch for slice fixture");
  AgentObservation out;
  out.obs_row.assign(spec_.obs_len, 0.0);
  out.raw_length = cfg_.slice;
  out.visibility.mask.assign(spec_.state_len, 0);
  for (int k = 0; k < cfg_.slice; ++k) {
    const int s = agent * cfg_.slice + k;
    out.visibility.mask[s] = 1;
    out.visibility.gather.emplace_back(s, k);
    out.obs_row[k] = state.values[s];
  }
  return out;
}

std::vector<double> SliceFixture::liveness(const GlobalState&) const {
  return std::vector<double>(spec_.n_agents, 1.0);
}

StepResult SliceFixture::emit(bool done) const {
  StepResult r;
  r.state.values = state_;
  r.obs = ObservationSet(spec_.n_agents, spec_.obs_len);
  for (int i = 0; i < spec_.n_agents; ++i) {
    auto o = observe(r.state, i);
    std::copy(o.obs_row.begin(), o.obs_row.end(), r.obs.values.begin() + i * spec_.obs_len);
    r.obs.raw_lengths[i] = o.raw_length;
  }
  r.done = done;
  r.t = done ? 1 : 0;
  r.avail.assign(spec_.n_agents, 1);
  return r;
}

StepResult SliceFixture::reset(std::int64_t seed) {
  if (seed < 0) throw UsageError("seed must be >= 0");
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : state_) v = u(rng);
  done_ = false;
  return emit(false);
}

StepResult SliceFixture::step(std::span<const int> joint_action) {
  if (done_) throw UsageError("step called after the episode ended");
  if (static_cast<int>(joint_action.size()) != spec_.n_agents)
    throw UsageError("joint action length must equal n_agents");
  for (int a : joint_action)
    if (a != 0) throw UsageError("unavailable action " + std::to_string(a));
  done_ = true;
  ++steps_taken_;
  return emit(true);
}

}  // namespace pagnet
