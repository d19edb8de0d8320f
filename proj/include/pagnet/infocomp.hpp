#pragma once

#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "pagnet/env.hpp"

namespace pagnet::infocomp {

// Convolution (or transposed convolution) followed by Mish.
class ConvMishImpl : public torch::nn::Module {
 public:
  ConvMishImpl(int in_ch, int out_ch, int kernel, int stride, int padding, bool transposed);
  torch::Tensor forward(const torch::Tensor& x);

  bool transposed() const { return transposed_; }

 private:
  torch::nn::Conv1d conv_{nullptr};
  torch::nn::ConvTranspose1d deconv_{nullptr};
  bool transposed_ = false;
};
TORCH_MODULE(ConvMish);

struct GeneratorOptions {
  int n_agents = 1;
  int obs_len = 1;
  int state_len = 1;
  int base_channels = 32;
};

struct ShapeRecord {
  std::string stage;
  std::int64_t channels = 0;
  std::int64_t length = 0;
};

// Obs length rounded up to a multiple of 4 so both stride-2 stages divide evenly.
int padded_length(int obs_len);

// 1D U-Net completion network: affine channel lift, three down stages, a
// bottleneck, three up stages joined to the down path by concatenation, and a
// convolutional decoder with a final affine map to the state length.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(GeneratorOptions options);

  // x: [B, n, l] aggregated weighted information -> [B, L]
  torch::Tensor forward(const torch::Tensor& x);
  // Same as forward, also recording (stage, channels, length) after each stage.
  torch::Tensor forward_traced(const torch::Tensor& x, std::vector<ShapeRecord>& trace);

  const GeneratorOptions& options() const { return options_; }

 private:
  torch::Tensor run(const torch::Tensor& x, std::vector<ShapeRecord>* trace);

  GeneratorOptions options_;
  int padded_len_ = 0;
  torch::nn::Linear encoder_{nullptr};
  ConvMish down0_a_{nullptr}, down0_b_{nullptr}, down0_s_{nullptr};
  ConvMish down1_a_{nullptr}, down1_b_{nullptr}, down1_s_{nullptr};
  ConvMish down2_a_{nullptr}, down2_b_{nullptr};
  ConvMish mid_a_{nullptr}, mid_b_{nullptr};
  ConvMish up0_a_{nullptr}, up0_b_{nullptr}, up0_s_{nullptr};
  ConvMish up1_a_{nullptr}, up1_b_{nullptr}, up1_s_{nullptr};
  ConvMish up2_a_{nullptr}, up2_b_{nullptr};
  ConvMish dec_conv_{nullptr}, dec_point_{nullptr};
  torch::nn::Linear dec_linear_{nullptr};
};
TORCH_MODULE(Generator);

struct DiscriminatorOptions {
  int state_len = 1;
  int embed = 128;
  std::vector<int> channels{16, 32, 64, 64};
};

// Global discriminator: affine embedding of the state, four stride-2 kernel-5
// convolutions, flatten, affine head. forward returns logits; probability()
// applies the sigmoid.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(DiscriminatorOptions options);

  torch::Tensor forward(const torch::Tensor& state);  // [B,L] -> logits [B]
  torch::Tensor probability(const torch::Tensor& state) { return torch::sigmoid(forward(state)); }
  torch::Tensor forward_traced(const torch::Tensor& state, std::vector<ShapeRecord>& trace);
  void zero_head();

 private:
  torch::Tensor run(const torch::Tensor& state, std::vector<ShapeRecord>* trace);

  DiscriminatorOptions options_;
  torch::nn::Linear encoder_{nullptr};
  torch::nn::ModuleList convs_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(Discriminator);

// Sender-wise mean over receivers: [B,n_recv,n_send,l] -> [B,n_send,l].
torch::Tensor aggregate_input(const torch::Tensor& mixed);

// Flattened observation operator for a batch: generated[b, state_idx[b,k]] is
// compared with obs_flat[b, obs_idx[b,k]] wherever valid[b,k] = 1.
struct GatherIndex {
  torch::Tensor state_idx;  // [B,K] int64
  torch::Tensor obs_idx;    // [B,K] int64, index into the flattened n*l observation
  torch::Tensor valid;      // [B,K]
};

GatherIndex build_gather(std::span<const VisibilityMask> masks, int obs_len,
                         torch::Dtype dtype = torch::kFloat);

// Squared Euclidean residual between the visible part of each generated state
// and the observations, per sample: [B].
torch::Tensor masked_mse(const torch::Tensor& generated, const torch::Tensor& obs,
                         const GatherIndex& gather);

constexpr double kProbabilityClamp = 1e-7;

// -mean log D(real) - mean log(1 - D(fake)), with fake detached.
torch::Tensor discriminator_loss(Discriminator& disc, const torch::Tensor& real,
                                 const torch::Tensor& fake);
// Non-saturating generator loss -mean log D(fake).
torch::Tensor generator_adversarial_loss(Discriminator& disc, const torch::Tensor& fake);

struct GanLossReport {
  double d_loss = 0.0;
  double g_adv_loss = 0.0;
  double mse_loss = 0.0;
  double combined_g_loss = 0.0;
  double d_real_mean = 0.0;
  double d_fake_mean = 0.0;
};

struct GanLosses {
  torch::Tensor d_loss;
  torch::Tensor g_adv_loss;
  torch::Tensor mse_loss;
  torch::Tensor combined_g_loss;
  torch::Tensor d_real_mean;
  torch::Tensor d_fake_mean;

  GanLossReport report() const;
};

// Losses for one batch given already generated states (which carry the
// generator/weight-net graph). combined = mse + alpha * g_adv.
GanLosses gan_step_losses(Discriminator& disc, const torch::Tensor& real,
                          const torch::Tensor& generated, const torch::Tensor& obs,
                          const GatherIndex& gather, double alpha);

}  // namespace pagnet::infocomp
