#include "pagnet/env.hpp"

#include <sstream>

#include "pagnet/envs.hpp"

namespace pagnet {

std::vector<double> VisibilityRow::apply(std::span<const double> state, int obs_len) const {
  std::vector<double> out(obs_len, 0.0);
  for (const auto& [s, o] : gather) out[o] = state[s];
  return out;
}

VisibilityMask Environment::visibility(const GlobalState& state) const {
  VisibilityMask vis;
  vis.rows.reserve(spec().n_agents);
  for (int i = 0; i < spec().n_agents; ++i) vis.rows.push_back(observe(state, i).visibility);
  return vis;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t env_hash(const Environment& env) {
  const auto& s = env.spec();
  std::ostringstream os;
  os << env.descriptor() << "|n=" << s.n_agents << "|a=" << s.n_actions << "|l=" << s.obs_len
     << "|L=" << s.state_len << "|h=" << s.horizon;
  return fnv1a64(os.str());
}

std::unique_ptr<Environment> make_environment(const EnvConfig& cfg) {
  if (cfg.name == "hallway") return std::make_unique<Hallway>(cfg.hallway);
  if (cfg.name == "lbf") return std::make_unique<Lbf>(cfg.lbf);
  if (cfg.name == "slice") return std::make_unique<SliceFixture>(cfg.slice);
  throw ConfigError("env.name must be one of hallway, lbf, slice; got '" + cfg.name + "'");
}

}  // namespace pagnet
