#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pagnet/env.hpp"

namespace pagnet {

// One trajectory. Per-step arrays hold length + 1 entries for observations,
// states and availability (the final entry is the post-terminal view) and
// length entries for actions, rewards and weight summaries.
struct EpisodeRecord {
  int n_agents = 0;
  int obs_len = 0;
  int state_len = 0;
  int n_actions = 0;
  int length = 0;
  std::vector<float> obs;             // (length+1) * n * l
  std::vector<float> states;          // (length+1) * L
  std::vector<std::uint8_t> avail;    // (length+1) * n * A
  std::vector<std::int32_t> actions;  // length * n
  std::vector<float> rewards;         // length
  std::vector<float> mean_w;          // length * n, per-agent mean communication weight
  bool terminated = false;            // ended by the env, not by the horizon
  bool won = false;

  double episode_return() const;
  GlobalState state_at(int t) const;
};

std::string serialize_episodes(const std::vector<EpisodeRecord>& episodes);
std::vector<EpisodeRecord> parse_episodes(std::string_view data);
void save_episodes(const std::string& path, const std::vector<EpisodeRecord>& episodes);
std::vector<EpisodeRecord> load_episodes(const std::string& path);

// FIFO ring of immutable episodes.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);

  void insert(EpisodeRecord episode);
  // Uniform without replacement within one batch. Requires batch <= size().
  std::vector<std::shared_ptr<const EpisodeRecord>> sample(int batch, std::mt19937_64& rng) const;
  std::vector<int> sample_indices(int batch, std::mt19937_64& rng) const;

  int size() const { return static_cast<int>(slots_.size()); }
  int capacity() const { return capacity_; }
  std::int64_t inserted() const { return inserted_; }
  // i-th stored episode in insertion order (0 = oldest).
  const EpisodeRecord& at(int i) const;

 private:
  int capacity_;
  std::int64_t inserted_ = 0;
  std::vector<std::shared_ptr<const EpisodeRecord>> slots_;
};

}  // namespace pagnet
