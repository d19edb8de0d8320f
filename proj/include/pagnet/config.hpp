#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pagnet/envs.hpp"

namespace pagnet {

enum class Mode { kPagnet, kPagnetFc, kPagnetPt, kQmix };

Mode parse_mode(std::string_view text);
std::string_view mode_name(Mode mode);

struct ModelConfig {
  int weight_dim = 64;
  double weight_dropout = 0.1;
  int decoder_dim = 128;
  int decoder_heads = 4;
  int decoder_layers = 2;
  int decoder_ff = 256;
  int generator_channels = 32;
  int discriminator_embed = 128;
  int mixer_embed = 32;
  int hyper_hidden = 64;
};

struct TrainConfig {
  EnvConfig env;
  ModelConfig model;
  Mode mode = Mode::kPagnet;
  double gamma = 0.99;
  int buffer_capacity = 5000;
  int batch_size = 32;
  double learning_rate = 0.0005;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::int64_t epsilon_anneal_steps = 50000;
  int target_sync_interval = 200;
  int checkpoint_interval = 0;  // updates between weight-net saves; 0 = target_sync_interval
  double alpha = 0.0004;
  double grad_clip = 10.0;
  int gan_samples = 256;           // (obs, state) pairs per GAN update
  int pretrain_updates = 2000;
  std::int64_t total_env_steps = 2000000;
  std::int64_t eval_interval = 0;  // M; 0 = environment default
  int eval_episodes = 100;         // N
  std::int64_t seed = 0;
  std::string pretrained;          // checkpoint for pagnet_pt
  bool unfreeze_generator = false;
  std::string out_dir = "runs";

  // Throws ConfigError on any violated invariant.
  void validate() const;
  std::int64_t effective_eval_interval() const;
  int effective_checkpoint_interval() const {
    return checkpoint_interval > 0 ? checkpoint_interval : target_sync_interval;
  }
};

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& doc);
TrainConfig load_config(const std::string& path);
// Applies "dotted.key=value" to the JSON form; value parsed as JSON when
// possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, std::string_view assignment);

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  std::int64_t anneal_steps = 50000;
};

// Linear from start to end over anneal_steps, constant afterwards.
double epsilon_at(std::int64_t step, const EpsilonSchedule& schedule);

}  // namespace pagnet
