#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pagnet/error.hpp"

namespace pagnet {

struct EnvSpec {
  int n_agents = 0;
  int n_actions = 0;
  int obs_len = 0;    // l, common padded observation length
  int state_len = 0;  // L
  int horizon = 0;
};

// n x l matrix of agent observations, row-major, zero padded past raw_lengths.
struct ObservationSet {
  int n = 0;
  int l = 0;
  std::vector<double> values;
  std::vector<int> raw_lengths;

  ObservationSet() = default;
  ObservationSet(int n_agents, int obs_len)
      : n(n_agents),
        l(obs_len),
        values(static_cast<size_t>(n_agents) * obs_len, 0.0),
        raw_lengths(n_agents, 0) {}

  double& at(int agent, int k) { return values[static_cast<size_t>(agent) * l + k]; }
  double at(int agent, int k) const { return values[static_cast<size_t>(agent) * l + k]; }
  std::span<const double> row(int agent) const {
    return {values.data() + static_cast<size_t>(agent) * l, static_cast<size_t>(l)};
  }
};

struct GlobalState {
  std::vector<double> values;
  bool is_generated = false;
};

struct StepResult {
  ObservationSet obs;
  GlobalState state;
  double reward = 0.0;
  bool done = false;
  bool won = false;        // the environment's success condition held on this step
  bool truncated = false;  // done only because the horizon was reached
  // n x n_actions, row-major; 1 = available
  std::vector<std::uint8_t> avail;
  int t = 0;

  bool available(int agent, int action, int n_actions) const {
    return avail[static_cast<size_t>(agent) * n_actions + action] != 0;
  }
};

// One agent's row of the observation operator: which state entries it sees and
// where each lands in its observation vector.
struct VisibilityRow {
  std::vector<std::uint8_t> mask;             // length L
  std::vector<std::pair<int, int>> gather;    // (state index, obs index)

  // Applies the gather to an arbitrary state; unmapped coordinates are zero.
  std::vector<double> apply(std::span<const double> state, int obs_len) const;
};

// Per-agent visibility for one timestep.
struct VisibilityMask {
  std::vector<VisibilityRow> rows;
};

struct AgentObservation {
  std::vector<double> obs_row;  // length l
  int raw_length = 0;
  VisibilityRow visibility;
};

struct StateSegment {
  std::string name;
  int begin = 0;
  int end = 0;          // exclusive
  bool one_hot = false;  // segment of a real state sums to exactly 1
  int agent = -1;        // owning agent, -1 for non-agent entities
};

struct StateLayout {
  std::vector<StateSegment> segments;
  int state_len = 0;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const std::string& name() const = 0;
  virtual const EnvSpec& spec() const = 0;
  virtual StepResult reset(std::int64_t seed) = 0;
  virtual StepResult step(std::span<const int> joint_action) = 0;
  // Pure in (state, agent). The state must be a well-formed true state.
  virtual AgentObservation observe(const GlobalState& state, int agent) const = 0;
  virtual const StateLayout& state_layout() const = 0;
  // Scalar in [0,1] per agent used by trace dumps as a health analogue.
  virtual std::vector<double> liveness(const GlobalState& state) const = 0;
  // Stable text identifying the env and its parameters; hashed into checkpoints.
  virtual std::string descriptor() const = 0;

  VisibilityMask visibility(const GlobalState& state) const;
  std::int64_t steps_taken() const { return steps_taken_; }

 protected:
  std::int64_t steps_taken_ = 0;
};

std::uint64_t fnv1a64(std::string_view text);
std::uint64_t env_hash(const Environment& env);

}  // namespace pagnet
