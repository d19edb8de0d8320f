#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

#include <torch/torch.h>

namespace pagnet::policy {

struct DecoderOptions {
  int n_agents = 1;
  int obs_len = 1;
  int n_actions = 1;
  int dim = 128;
  int heads = 4;
  int layers = 2;
  int ff = 256;
};

class SelfAttentionBlockImpl : public torch::nn::Module {
 public:
  SelfAttentionBlockImpl(int dim, int heads, int ff);
  torch::Tensor forward(const torch::Tensor& x);  // [N, tokens, dim]

 private:
  int heads_;
  torch::nn::Linear qkv_{nullptr}, proj_{nullptr}, ff1_{nullptr}, ff2_{nullptr};
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
};
TORCH_MODULE(SelfAttentionBlock);

// Recurrent Transformer decoder for one agent. Each sender slot j of the
// receiver's mixed block becomes a token embed([x_j || h_prev]) + p_j; the
// tokens pass through the Transformer blocks, are mean-pooled, concatenated
// with h_prev and mapped to Q-values and the next hidden state.
class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(DecoderOptions options);

  // x: [N, n, l], h_prev: [N, dim] -> (q [N, A], h_next [N, dim])
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x, const torch::Tensor& h_prev);
  torch::Tensor initial_hidden(std::int64_t rows) const;
  void zero_head();

  const DecoderOptions& options() const { return options_; }

 private:
  DecoderOptions options_;
  torch::nn::Linear embed_{nullptr};
  torch::nn::ModuleList blocks_;
  torch::nn::Linear head_{nullptr};
  torch::Tensor pos_;
};
TORCH_MODULE(Decoder);

struct MixerOptions {
  int n_agents = 1;
  int cond_dim = 1;
  int embed = 32;
  int hyper_hidden = 64;
};

// Monotonic mixing network: hypernetworks conditioned on [state || mean W]
// emit absolute-valued mixing weights, so dQ_tot/dq_i >= 0.
class MixerImpl : public torch::nn::Module {
 public:
  explicit MixerImpl(MixerOptions options);

  // q: [N, n], cond: [N, cond_dim] -> [N]
  torch::Tensor forward(const torch::Tensor& q, const torch::Tensor& cond);
  void zero_hypernet_outputs();

 private:
  MixerOptions options_;
  torch::nn::Sequential hyper_w1_{nullptr}, hyper_w2_{nullptr}, hyper_b2_{nullptr};
  torch::nn::Linear hyper_b1_{nullptr};
};
TORCH_MODULE(Mixer);

// Epsilon-greedy over available actions; ties in the greedy branch resolve to
// the lowest index.
int select_action(std::span<const float> q, std::span<const std::uint8_t> avail, double epsilon,
                  std::mt19937_64& rng);

struct TdBatch {
  torch::Tensor inputs;      // [B, T+1, n_recv, n_send, l] decoder inputs
  torch::Tensor cond;        // [B, T+1, cond_dim] mixer conditioning
  torch::Tensor actions;     // [B, T, n] int64
  torch::Tensor rewards;     // [B, T]
  torch::Tensor avail;       // [B, T+1, n, A] bool
  torch::Tensor terminated;  // [B, T]
  torch::Tensor mask;        // [B, T], 1 on real steps
};

// Runs the decoder over a batch of trajectories from a zero hidden state.
// inputs: [B, T, n, n, l] -> [B, T, n, A]
torch::Tensor unroll_q(Decoder& decoder, const torch::Tensor& inputs);

struct TdOutput {
  torch::Tensor loss;
  torch::Tensor q_tot;    // [B, T]
  torch::Tensor targets;  // [B, T]
};

// Masked mean of (y - Q_tot)^2 with y = r + gamma * (1 - terminated) *
// Q_tot_target(next greedy per-agent actions). Throws TrainingFault naming the
// first episode whose loss is not finite.
TdOutput td_loss(const TdBatch& batch, Decoder& online, Mixer& online_mixer, Decoder& target,
                 Mixer& target_mixer, double gamma);

}  // namespace pagnet::policy
