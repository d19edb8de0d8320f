#include "pagnet/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "pagnet/error.hpp"

using nlohmann::json;

namespace pagnet {

Mode parse_mode(std::string_view text) {
  if (text == "pagnet") return Mode::kPagnet;
  if (text == "pagnet_fc") return Mode::kPagnetFc;
  if (text == "pagnet_pt") return Mode::kPagnetPt;
  if (text == "qmix") return Mode::kQmix;
  throw ConfigError("unknown mode '" + std::string(text) + "' (pagnet, pagnet_fc, pagnet_pt, qmix)");
}

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::kPagnet: return "pagnet";
    case Mode::kPagnetFc: return "pagnet_fc";
    case Mode::kPagnetPt: return "pagnet_pt";
    case Mode::kQmix: return "qmix";
  }
  return "pagnet";
}

json to_json(const TrainConfig& c) {
  const auto& m = c.model;
  return json{
      {"env", {{"name", c.env.name}}},
      {"hallway", {{"lengths", c.env.hallway.lengths}}},
      {"lbf",
       {{"grid", c.env.lbf.grid},
        {"agents", c.env.lbf.agents},
        {"foods", c.env.lbf.foods},
        {"sight", c.env.lbf.sight},
        {"max_level", c.env.lbf.max_agent_level},
        {"horizon", c.env.lbf.horizon}}},
      {"slice", {{"agents", c.env.slice.agents}, {"slice", c.env.slice.slice}}},
      {"model",
       {{"weight_dim", m.weight_dim},
        {"weight_dropout", m.weight_dropout},
        {"decoder_dim", m.decoder_dim},
        {"decoder_heads", m.decoder_heads},
        {"decoder_layers", m.decoder_layers},
        {"decoder_ff", m.decoder_ff},
        {"generator_channels", m.generator_channels},
        {"discriminator_embed", m.discriminator_embed},
        {"mixer_embed", m.mixer_embed},
        {"hyper_hidden", m.hyper_hidden}}},
      {"train",
       {{"mode", std::string(mode_name(c.mode))},
        {"gamma", c.gamma},
        {"buffer_capacity", c.buffer_capacity},
        {"batch_size", c.batch_size},
        {"lr", c.learning_rate},
        {"epsilon_start", c.epsilon_start},
        {"epsilon_end", c.epsilon_end},
        {"epsilon_anneal_steps", c.epsilon_anneal_steps},
        {"target_sync_interval", c.target_sync_interval},
        {"checkpoint_interval", c.checkpoint_interval},
        {"alpha", c.alpha},
        {"grad_clip", c.grad_clip},
        {"gan_samples", c.gan_samples},
        {"pretrain_updates", c.pretrain_updates},
        {"total_env_steps", c.total_env_steps},
        {"eval_interval", c.eval_interval},
        {"eval_episodes", c.eval_episodes},
        {"seed", c.seed},
        {"pretrained", c.pretrained},
        {"unfreeze_generator", c.unfreeze_generator},
        {"out_dir", c.out_dir}}},
  };
}

namespace {

void reject_unknown(const json& given, const json& reference, const std::string& path) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw ConfigError("unknown config key '" + full + "'");
    if (reference[key].is_object()) reject_unknown(value, reference[key], full);
  }
}

template <typename T>
void read(const json& doc, const char* section, const char* key, T& out) {
  if (!doc.contains(section) || !doc[section].contains(key)) return;
  try {
    out = doc[section][key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + section + "." + key + "' has the wrong type");
  }
}

}  // namespace

TrainConfig config_from_json(const json& doc) {
  TrainConfig c;
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  reject_unknown(doc, to_json(c), "");
  read(doc, "env", "name", c.env.name);
  read(doc, "hallway", "lengths", c.env.hallway.lengths);
  read(doc, "lbf", "grid", c.env.lbf.grid);
  read(doc, "lbf", "agents", c.env.lbf.agents);
  read(doc, "lbf", "foods", c.env.lbf.foods);
  read(doc, "lbf", "sight", c.env.lbf.sight);
  read(doc, "lbf", "max_level", c.env.lbf.max_agent_level);
  read(doc, "lbf", "horizon", c.env.lbf.horizon);
  read(doc, "slice", "agents", c.env.slice.agents);
  read(doc, "slice", "slice", c.env.slice.slice);
  auto& m = c.model;
  read(doc, "model", "weight_dim", m.weight_dim);
  read(doc, "model", "weight_dropout", m.weight_dropout);
  read(doc, "model", "decoder_dim", m.decoder_dim);
  read(doc, "model", "decoder_heads", m.decoder_heads);
  read(doc, "model", "decoder_layers", m.decoder_layers);
  read(doc, "model", "decoder_ff", m.decoder_ff);
  read(doc, "model", "generator_channels", m.generator_channels);
  read(doc, "model", "discriminator_embed", m.discriminator_embed);
  read(doc, "model", "mixer_embed", m.mixer_embed);
  read(doc, "model", "hyper_hidden", m.hyper_hidden);
  std::string mode = std::string(mode_name(c.mode));
  read(doc, "train", "mode", mode);
  c.mode = parse_mode(mode);
  read(doc, "train", "gamma", c.gamma);
  read(doc, "train", "buffer_capacity", c.buffer_capacity);
  read(doc, "train", "batch_size", c.batch_size);
  read(doc, "train", "lr", c.learning_rate);
  read(doc, "train", "epsilon_start", c.epsilon_start);
  read(doc, "train", "epsilon_end", c.epsilon_end);
  read(doc, "train", "epsilon_anneal_steps", c.epsilon_anneal_steps);
  read(doc, "train", "target_sync_interval", c.target_sync_interval);
  read(doc, "train", "checkpoint_interval", c.checkpoint_interval);
  read(doc, "train", "alpha", c.alpha);
  read(doc, "train", "grad_clip", c.grad_clip);
  read(doc, "train", "gan_samples", c.gan_samples);
  read(doc, "train", "pretrain_updates", c.pretrain_updates);
  read(doc, "train", "total_env_steps", c.total_env_steps);
  read(doc, "train", "eval_interval", c.eval_interval);
  read(doc, "train", "eval_episodes", c.eval_episodes);
  read(doc, "train", "seed", c.seed);
  read(doc, "train", "pretrained", c.pretrained);
  read(doc, "train", "unfreeze_generator", c.unfreeze_generator);
  read(doc, "train", "out_dir", c.out_dir);
  c.validate();
  return c;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override must look like key=value: '" + std::string(assignment) + "'");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed override key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

void TrainConfig::validate() const {
  if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("train.gamma must lie in [0,1)");
  if (buffer_capacity < 1) throw ConfigError("train.buffer_capacity must be positive");
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (batch_size > buffer_capacity) throw ConfigError("train.batch_size exceeds buffer capacity");
  if (learning_rate <= 0.0) throw ConfigError("train.lr must be positive");
  if (epsilon_end > epsilon_start) throw ConfigError("train.epsilon_end must be <= epsilon_start");
  if (epsilon_start > 1.0 || epsilon_end < 0.0) throw ConfigError("epsilon values must lie in [0,1]");
  if (epsilon_anneal_steps < 1) throw ConfigError("train.epsilon_anneal_steps must be positive");
  if (target_sync_interval < 1) throw ConfigError("train.target_sync_interval must be positive");
  if (checkpoint_interval < 0) throw ConfigError("train.checkpoint_interval must be >= 0");
  if (alpha < 0.0) throw ConfigError("train.alpha must be >= 0");
  if (grad_clip <= 0.0) throw ConfigError("train.grad_clip must be positive");
  if (gan_samples < 1) throw ConfigError("train.gan_samples must be positive");
  if (pretrain_updates < 0) throw ConfigError("train.pretrain_updates must be >= 0");
  if (total_env_steps < 1) throw ConfigError("train.total_env_steps must be positive");
  if (eval_interval < 0 || eval_episodes < 0) throw ConfigError("eval cadence must be >= 0");
  if (seed < 0) throw ConfigError("train.seed must be >= 0");
  if (mode == Mode::kPagnetPt && pretrained.empty())
    throw ConfigError("mode pagnet_pt requires train.pretrained (a checkpoint path)");
  if (env.name != "hallway" && env.name != "lbf" && env.name != "slice")
    throw ConfigError("env.name must be one of hallway, lbf, slice");
  if (model.weight_dim < 2 || model.weight_dim % 2) throw ConfigError("model.weight_dim must be even");
  if (model.weight_dropout < 0.0 || model.weight_dropout >= 1.0)
    throw ConfigError("model.weight_dropout must lie in [0,1)");
}

std::int64_t TrainConfig::effective_eval_interval() const {
  if (eval_interval > 0) return eval_interval;
  return env.name == "lbf" ? 50000 : 10000;
}

double epsilon_at(std::int64_t step, const EpsilonSchedule& s) {
  if (step <= 0) return s.start;
  if (step >= s.anneal_steps) return s.end;
  const double frac = static_cast<double>(step) / static_cast<double>(s.anneal_steps);
  return s.start + frac * (s.end - s.start);
}

}  // namespace pagnet
