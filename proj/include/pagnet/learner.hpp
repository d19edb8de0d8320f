#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "pagnet/checkpoint.hpp"
#include "pagnet/comm_weight.hpp"
#include "pagnet/config.hpp"
#include "pagnet/env.hpp"
#include "pagnet/infocomp.hpp"
#include "pagnet/policy.hpp"
#include "pagnet/replay.hpp"

namespace pagnet {

struct UpdateStats {
  double td_loss = 0.0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double mse_loss = 0.0;
  double d_real_mean = 0.0;
  double d_fake_mean = 0.0;
  bool gan_updated = false;
};

// Communication and completion outputs for one timestep of one episode.
struct StepView {
  torch::Tensor weights;    // [n,n,l]
  torch::Tensor mixed;      // [n,n,l] decoder input per receiver
  torch::Tensor generated;  // [L], undefined in qmix mode
};

// Owns every parameter group (weight net psi, generator/discriminator phi,
// decoder+mixer theta and their target copies) and the three optimizers.
class Learner {
 public:
  Learner(const TrainConfig& cfg, const Environment& env);

  Mode mode() const { return cfg_.mode; }
  const TrainConfig& config() const { return cfg_; }
  const EnvSpec& spec() const { return spec_; }

  // One episode with epsilon-greedy actions. `noise_rng` drives both the
  // message noise and exploration so rollouts replay exactly under a seed.
  EpisodeRecord rollout(Environment& env, std::int64_t env_seed, double epsilon,
                        std::mt19937_64& rng, std::vector<StepView>* views = nullptr);

  // D step, G+psi step, TD step, then a target sync every target_sync_interval.
  UpdateStats update(const std::vector<std::shared_ptr<const EpisodeRecord>>& batch);
  // GAN-only update on explicit (obs, state) samples; used by pretraining.
  UpdateStats gan_update(const torch::Tensor& obs, const torch::Tensor& states,
                         const std::vector<GlobalState>& true_states);
  // Held-out masked MSE of the current generator on (obs, state) samples.
  double evaluate_mse(const torch::Tensor& obs, const std::vector<GlobalState>& true_states);

  void sync_target();
  std::int64_t updates() const { return updates_; }

  ParameterCheckpoint checkpoint(std::int64_t step, bool comm_only = false) const;
  // Loads whichever groups the checkpoint holds.
  void load(const ParameterCheckpoint& ck);

  // Instrumentation hook: receives "d_step", "g_step", "td_step",
  // "target_sync", "generator_forward", "discriminator_forward".
  std::function<void(std::string_view)> probe;

  comm::WeightNet weight_net{nullptr};
  infocomp::Generator generator{nullptr};
  infocomp::Discriminator discriminator{nullptr};
  policy::Decoder decoder{nullptr};
  policy::Decoder target_decoder{nullptr};
  policy::Mixer mixer{nullptr};
  policy::Mixer target_mixer{nullptr};

  bool uses_generator() const { return cfg_.mode != Mode::kQmix; }
  bool gan_trainable() const;

 private:
  struct Inputs {
    torch::Tensor weights;  // [N,n,n,l]
    torch::Tensor mixed;    // [N,n,n,l]
  };
  Inputs comm_inputs(const torch::Tensor& obs, bool train_mode);
  torch::Tensor generate(const torch::Tensor& mixed);
  torch::Tensor conditioning(const torch::Tensor& mixed, const torch::Tensor& weights,
                             const torch::Tensor& states);
  UpdateStats gan_step(const torch::Tensor& obs, const torch::Tensor& states,
                       const infocomp::GatherIndex& gather);
  void emit(std::string_view event) const {
    if (probe) probe(event);
  }

  TrainConfig cfg_;
  EnvSpec spec_;
  std::unique_ptr<Environment> observer_;  // pure observe() for visibility masks
  std::unique_ptr<torch::optim::Adam> d_opt_;
  std::unique_ptr<torch::optim::Adam> g_opt_;
  std::unique_ptr<torch::optim::Adam> td_opt_;
  std::vector<torch::Tensor> g_params_;
  std::vector<torch::Tensor> td_params_;
  std::int64_t updates_ = 0;
};

// Uniform-random policy episode without any network evaluation.
EpisodeRecord random_rollout(Environment& env, std::int64_t env_seed, std::mt19937_64& rng);

void copy_parameters(const torch::nn::Module& from, torch::nn::Module& to);

}  // namespace pagnet
