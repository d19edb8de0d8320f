#pragma once

#include <torch/torch.h>

namespace pagnet::comm {

// Sinusoidal encoding indexed by agent: P[i,2j] = sin(i / 10000^(2j/d)),
// P[i,2j+1] = cos(i / 10000^(2j/d)). d must be even.
torch::Tensor positional_encoding(int n, int d, torch::Dtype dtype = torch::kFloat);

struct WeightNetOptions {
  int n_agents = 1;
  int obs_len = 1;
  int dim = 64;           // attention width d
  double dropout = 0.1;   // applied to attention probabilities in train mode only
};

struct WeightNetOutput {
  torch::Tensor weights;    // [B, n_recv, n_send, l], entries in [0,1]
  torch::Tensor attention;  // [B, n_recv, n_rows, n_send], rows sum to 1
};

// Information-level weight network. Each receiver i queries every sender's
// message with (o_i + p_i) repeated n times; keys and values come from the
// message matrix M (all observations) plus the positional encoding. The
// attention output is projected back to message width and squashed by a
// logistic sigmoid.
class WeightNetImpl : public torch::nn::Module {
 public:
  explicit WeightNetImpl(WeightNetOptions options);

  // obs: [B, n, l]
  WeightNetOutput forward(const torch::Tensor& obs, bool train_mode);

  const WeightNetOptions& options() const { return options_; }

 private:
  WeightNetOptions options_;
  torch::nn::Linear embed_{nullptr};
  torch::nn::Linear query_{nullptr};
  torch::nn::Linear key_{nullptr};
  torch::nn::Linear value_{nullptr};
  torch::nn::Linear out_{nullptr};
  torch::Tensor pos_;
};
TORCH_MODULE(WeightNet);

// (1 - W) * M + W * eps, elementwise over matching shapes.
torch::Tensor mix_information(const torch::Tensor& messages, const torch::Tensor& weights,
                              const torch::Tensor& eps);

// obs [B,n,l], weights [B,n,n,l], eps [B,n,l] -> mixed [B,n_recv,n_send,l].
// One noise sample per timestep is shared by every receiver.
torch::Tensor receiver_mix(const torch::Tensor& obs, const torch::Tensor& weights,
                           const torch::Tensor& eps);

// Per-receiver mean weight, [B,n,n,l] -> [B,n].
torch::Tensor mean_weight_per_agent(const torch::Tensor& weights);

}  // namespace pagnet::comm
