#include "pagnet/replay.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "pagnet/binary_io.hpp"
#include "pagnet/error.hpp"

namespace pagnet {

namespace bin {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace bin

namespace {
constexpr std::string_view kEpisodeMagic = "PAGE";
constexpr std::uint32_t kEpisodeVersion = 1;
}  // namespace

double EpisodeRecord::episode_return() const {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

GlobalState EpisodeRecord::state_at(int t) const {
  GlobalState s;
  s.values.assign(states.begin() + static_cast<size_t>(t) * state_len,
                  states.begin() + static_cast<size_t>(t + 1) * state_len);
  return s;
}

std::string serialize_episodes(const std::vector<EpisodeRecord>& episodes) {
  bin::Writer w;
  w.bytes(kEpisodeMagic);
  w.u32(kEpisodeVersion);
  w.u64(episodes.size());
  for (const auto& e : episodes) {
    w.u32(e.n_agents);
    w.u32(e.obs_len);
    w.u32(e.state_len);
    w.u32(e.n_actions);
    w.u32(e.length);
    w.u8(e.terminated);
    w.u8(e.won);
    w.floats(e.obs);
    w.floats(e.states);
    w.bytes({reinterpret_cast<const char*>(e.avail.data()), e.avail.size()});
    for (auto a : e.actions) w.u32(static_cast<std::uint32_t>(a));
    w.floats(e.rewards);
    w.floats(e.mean_w);
  }
  return w.data();
}

std::vector<EpisodeRecord> parse_episodes(std::string_view data) {
  bin::Reader r(data);
  if (r.bytes(4, "magic") != kEpisodeMagic) throw LoadError("bad magic in episode file");
  const auto version = r.u32("version");
  if (version != kEpisodeVersion)
    throw LoadError("episode file version " + std::to_string(version) + " unsupported");
  const auto count = r.u64("episode count");
  std::vector<EpisodeRecord> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    EpisodeRecord e;
    e.n_agents = static_cast<int>(r.u32("n_agents"));
    e.obs_len = static_cast<int>(r.u32("obs_len"));
    e.state_len = static_cast<int>(r.u32("state_len"));
    e.n_actions = static_cast<int>(r.u32("n_actions"));
    e.length = static_cast<int>(r.u32("length"));
    e.terminated = r.u8("terminated") != 0;
    e.won = r.u8("won") != 0;
    const size_t steps = static_cast<size_t>(e.length);
    e.obs.resize((steps + 1) * e.n_agents * e.obs_len);
    r.floats(e.obs, "obs");
    e.states.resize((steps + 1) * e.state_len);
    r.floats(e.states, "states");
    const auto av = r.bytes((steps + 1) * e.n_agents * e.n_actions, "avail");
    e.avail.assign(av.begin(), av.end());
    e.actions.resize(steps * e.n_agents);
    for (auto& a : e.actions) a = static_cast<std::int32_t>(r.u32("actions"));
    e.rewards.resize(steps);
    r.floats(e.rewards, "rewards");
    e.mean_w.resize(steps * e.n_agents);
    r.floats(e.mean_w, "mean_w");
    out.push_back(std::move(e));
  }
  if (!r.done()) throw LoadError("trailing bytes after episodes");
  return out;
}

void save_episodes(const std::string& path, const std::vector<EpisodeRecord>& episodes) {
  bin::write_file(path, serialize_episodes(episodes));
}

std::vector<EpisodeRecord> load_episodes(const std::string& path) {
  return parse_episodes(bin::read_file(path));
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("replay capacity must be positive");
  slots_.reserve(std::min(capacity, 1 << 16));
}

void ReplayBuffer::insert(EpisodeRecord episode) {
  auto ptr = std::make_shared<const EpisodeRecord>(std::move(episode));
  if (static_cast<int>(slots_.size()) < capacity_) {
    slots_.push_back(std::move(ptr));
  } else {
    slots_[inserted_ % capacity_] = std::move(ptr);
  }
  ++inserted_;
}

const EpisodeRecord& ReplayBuffer::at(int i) const {
  if (i < 0 || i >= size()) throw UsageError("replay index out of range");
  if (size() < capacity_) return *slots_[i];
  return *slots_[(inserted_ + i) % capacity_];
}

std::vector<int> ReplayBuffer::sample_indices(int batch, std::mt19937_64& rng) const {
  if (batch > size()) throw UsageError("batch larger than the replay buffer");
  std::vector<int> idx(size());
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < batch; ++i) {
    const int j = std::uniform_int_distribution<int>(i, size() - 1)(rng);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch);
  return idx;
}

std::vector<std::shared_ptr<const EpisodeRecord>> ReplayBuffer::sample(int batch,
                                                                      std::mt19937_64& rng) const {
  std::vector<std::shared_ptr<const EpisodeRecord>> out;
  for (int i : sample_indices(batch, rng)) out.push_back(slots_[i]);
  return out;
}

}  // namespace pagnet
