#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pagnet/env.hpp"

namespace pagnet {

struct HallwayConfig {
  std::vector<int> lengths{4, 6, 8, 10};
};

struct LbfConfig {
  int grid = 8;
  int agents = 3;
  int foods = 2;
  int sight = 2;
  int max_agent_level = 3;
  int horizon = 50;
};

// Two agents, each observing a fixed contiguous slice of a 12-value state.
struct SliceConfig {
  int agents = 2;
  int slice = 6;
};

struct EnvConfig {
  std::string name = "hallway";
  HallwayConfig hallway;
  LbfConfig lbf;
  SliceConfig slice;
};

// Agents walk chains toward a shared goal g; they win only by arriving together.
// Chain i has positions {0 = g, 1..lengths[i]}; actions are toward-g, away, stay.
class Hallway final : public Environment {
 public:
  enum Action : int { kTowardGoal = 0, kAway = 1, kStay = 2 };

  explicit Hallway(HallwayConfig cfg);

  const std::string& name() const override { return name_; }
  const EnvSpec& spec() const override { return spec_; }
  StepResult reset(std::int64_t seed) override;
  StepResult step(std::span<const int> joint_action) override;
  AgentObservation observe(const GlobalState& state, int agent) const override;
  const StateLayout& state_layout() const override { return layout_; }
  std::vector<double> liveness(const GlobalState& state) const override;
  std::string descriptor() const override;

  const std::vector<int>& positions() const { return pos_; }
  // Test hook: place agents directly (t is left unchanged).
  void set_positions(std::vector<int> pos);
  std::vector<int> decode_positions(const GlobalState& state) const;

 private:
  StepResult emit(double reward, bool won) const;
  GlobalState encode() const;

  std::string name_ = "hallway";
  HallwayConfig cfg_;
  EnvSpec spec_;
  StateLayout layout_;
  std::vector<int> offsets_;
  std::vector<int> pos_;
  int t_ = 0;
  bool done_ = true;
};

// Level-based foraging: agents load adjacent food when their combined level
// reaches the food's level. Team reward is normalized so an episode sums to at
// most 1. Coordinates and levels are scaled to [0,1].
class Lbf final : public Environment {
 public:
  enum Action : int { kNone = 0, kNorth = 1, kSouth = 2, kWest = 3, kEast = 4, kLoad = 5 };

  struct Entity {
    int x = 0;
    int y = 0;
    int level = 0;
    bool alive = true;
  };

  explicit Lbf(LbfConfig cfg);

  const std::string& name() const override { return name_; }
  const EnvSpec& spec() const override { return spec_; }
  StepResult reset(std::int64_t seed) override;
  StepResult step(std::span<const int> joint_action) override;
  AgentObservation observe(const GlobalState& state, int agent) const override;
  const StateLayout& state_layout() const override { return layout_; }
  std::vector<double> liveness(const GlobalState& state) const override;
  std::string descriptor() const override;

  // Test hook: install a hand-built board (t resets to 0).
  void set_board(std::vector<Entity> agents, std::vector<Entity> foods);
  const std::vector<Entity>& agents() const { return agents_; }
  const std::vector<Entity>& foods() const { return foods_; }
  int max_food_level() const { return cfg_.agents * cfg_.max_agent_level; }

 private:
  StepResult emit(double reward, bool won) const;
  GlobalState encode() const;
  void decode(const GlobalState& state, std::vector<Entity>& agents,
              std::vector<Entity>& foods) const;
  bool occupied(int x, int y) const;
  bool adjacent_alive_food(const Entity& a) const;

  std::string name_ = "lbf";
  LbfConfig cfg_;
  EnvSpec spec_;
  StateLayout layout_;
  std::vector<Entity> agents_;
  std::vector<Entity> foods_;
  double total_food_level_ = 1.0;
  int t_ = 0;
  bool done_ = true;
};

// Synthetic completion fixture: state is uniform in [0,1]^(agents*slice), agent
// i observes entries [i*slice, (i+1)*slice). One-step episodes.
class SliceFixture final : public Environment {
 public:
  explicit SliceFixture(SliceConfig cfg);

  const std::string& name() const override { return name_; }
  const EnvSpec& spec() const override { return spec_; }
  StepResult reset(std::int64_t seed) override;
  StepResult step(std::span<const int> joint_action) override;
  AgentObservation observe(const GlobalState& state, int agent) const override;
  const StateLayout& state_layout() const override { return layout_; }
  std::vector<double> liveness(const GlobalState& state) const override;
  std::string descriptor() const override;

 private:
  StepResult emit(bool done) const;

  std::string name_ = "slice";
  SliceConfig cfg_;
  EnvSpec spec_;
  StateLayout layout_;
  std::vector<double> state_;
  bool done_ = true;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& cfg);

}  // namespace pagnet
