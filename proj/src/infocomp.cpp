#include "pagnet/infocomp.hpp"

#include <algorithm>

#include "pagnet/error.hpp"

namespace F = torch::nn::functional;

namespace pagnet::infocomp {

ConvMishImpl::ConvMishImpl(int in_ch, int out_ch, int kernel, int stride, int padding,
                           bool transposed)
    : transposed_(transposed) {
  if (transposed) {
    deconv_ = register_module(
        "conv", torch::nn::ConvTranspose1d(
                    torch::nn::ConvTranspose1dOptions(in_ch, out_ch, kernel).stride(stride).padding(padding)));
  } else {
    conv_ = register_module(
        "conv", torch::nn::Conv1d(torch::nn::Conv1dOptions(in_ch, out_ch, kernel).stride(stride).padding(padding)));
  }
}

torch::Tensor ConvMishImpl::forward(const torch::Tensor& x) {
  return F::mish(transposed_ ? deconv_(x) : conv_(x));
}

int padded_length(int obs_len) { return (obs_len + 3) / 4 * 4; }

GeneratorImpl::GeneratorImpl(GeneratorOptions o) : options_(o) {
  if (o.n_agents < 1 || o.obs_len < 1 || o.state_len < 1 || o.base_channels < 1)
    throw ConfigError("generator dimensions must be positive");
  padded_len_ = padded_length(o.obs_len);
  const int c1 = o.base_channels;
  const int c2 = 2 * c1;
  const int c4 = 4 * c1;
  auto conv = [this](const char* name, int in, int out, int k, int s, int p, bool t = false) {
    return register_module(name, ConvMish(in, out, k, s, p, t));
  };
  encoder_ = register_module("encoder", torch::nn::Linear(o.n_agents, c1));
  down0_a_ = conv("down0_a", c1, c2, 5, 1, 2);
  down0_b_ = conv("down0_b", c2, c2, 5, 1, 2);
  down0_s_ = conv("down0_s", c2, c2, 3, 2, 1);
  down1_a_ = conv("down1_a", c2, c4, 5, 1, 2);
  down1_b_ = conv("down1_b", c4, c4, 5, 1, 2);
  down1_s_ = conv("down1_s", c4, c4, 3, 2, 1);
  down2_a_ = conv("down2_a", c4, c4, 5, 1, 2);
  down2_b_ = conv("down2_b", c4, c4, 5, 1, 2);
  mid_a_ = conv("mid_a", c4, c4, 5, 1, 2);
  mid_b_ = conv("mid_b", c4, c4, 5, 1, 2);
  up0_a_ = conv("up0_a", 2 * c4, c4, 5, 1, 2);
  up0_b_ = conv("up0_b", c4, c4, 5, 1, 2);
  up0_s_ = conv("up0_s", c4, c4, 4, 2, 1, true);
  up1_a_ = conv("up1_a", 2 * c4, c2, 5, 1, 2);
  up1_b_ = conv("up1_b", c2, c2, 5, 1, 2);
  up1_s_ = conv("up1_s", c2, c2, 4, 2, 1, true);
  up2_a_ = conv("up2_a", 2 * c2, c1, 5, 1, 2);
  up2_b_ = conv("up2_b", c1, c1, 5, 1, 2);
  dec_conv_ = conv("dec_conv", c1, c1, 5, 1, 2);
  // Pointwise projection back to one channel per agent; a single channel would
  // cap the final affine at rank l' < L.
  dec_point_ = conv("dec_point", c1, o.n_agents, 1, 1, 0);
  dec_linear_ = register_module("dec_linear", torch::nn::Linear(o.n_agents * padded_len_, o.state_len));
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x) { return run(x, nullptr); }

torch::Tensor GeneratorImpl::forward_traced(const torch::Tensor& x, std::vector<ShapeRecord>& trace) {
  return run(x, &trace);
}

torch::Tensor GeneratorImpl::run(const torch::Tensor& x, std::vector<ShapeRecord>* trace) {
  if (x.dim() != 3 || x.size(1) != options_.n_agents || x.size(2) != options_.obs_len)
    throw InputError("generator input must be [B, n_agents, obs_len]");
  auto note = [trace](const char* stage, const torch::Tensor& t) {
    if (trace) trace->push_back({stage, t.size(1), t.size(2)});
  };
  auto h = F::pad(x, F::PadFuncOptions({0, padded_len_ - options_.obs_len}));
  h = encoder_(h.transpose(1, 2)).transpose(1, 2);  // [B,C,l']
  note("encoder", h);

  auto skip0 = down0_b_(down0_a_(h));
  h = down0_s_(skip0);
  note("down0", h);
  auto skip1 = down1_b_(down1_a_(h));
  h = down1_s_(skip1);
  note("down1", h);
  auto skip2 = h + down2_b_(down2_a_(h));
  note("down2", skip2);

  h = mid_b_(mid_a_(skip2));
  note("mid", h);

  h = up0_s_(up0_b_(up0_a_(torch::cat({h, skip2}, 1))));
  note("up0", h);
  h = up1_s_(up1_b_(up1_a_(torch::cat({h, skip1}, 1))));
  note("up1", h);
  auto a = up2_a_(torch::cat({h, skip0}, 1));
  h = a + up2_b_(a);
  note("up2", h);

  h = dec_point_(dec_conv_(h));
  note("decoder_conv", h);
  return dec_linear_(h.flatten(1));
}

DiscriminatorImpl::DiscriminatorImpl(DiscriminatorOptions o) : options_(std::move(o)) {
  if (options_.state_len < 1 || options_.embed < 1 || options_.channels.size() != 4)
    throw ConfigError("discriminator needs positive sizes and four conv widths");
  encoder_ = register_module("encoder", torch::nn::Linear(options_.state_len, options_.embed));
  convs_ = register_module("convs", torch::nn::ModuleList());
  int in = 1;
  std::int64_t len = options_.embed;
  for (int c : options_.channels) {
    convs_->push_back(ConvMish(in, c, 5, 2, 2, false));
    in = c;
    len = (len + 2 * 2 - 5) / 2 + 1;
  }
  head_ = register_module("head", torch::nn::Linear(in * len, 1));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& state) { return run(state, nullptr); }

torch::Tensor DiscriminatorImpl::forward_traced(const torch::Tensor& state,
                                                std::vector<ShapeRecord>& trace) {
  return run(state, &trace);
}

torch::Tensor DiscriminatorImpl::run(const torch::Tensor& state, std::vector<ShapeRecord>* trace) {
  if (state.dim() != 2 || state.size(1) != options_.state_len)
    throw InputError("discriminator input must be [B, state_len]");
  auto h = encoder_(state).unsqueeze(1);
  if (trace) trace->push_back({"encoder", h.size(1), h.size(2)});
  int k = 0;
  for (const auto& m : *convs_) {
    h = m->as<ConvMish>()->forward(h);
    if (trace) trace->push_back({"conv" + std::to_string(k++), h.size(1), h.size(2)});
  }
  return head_(h.flatten(1)).squeeze(1);
}

void DiscriminatorImpl::zero_head() {
  torch::NoGradGuard guard;
  head_->weight.zero_();
  head_->bias.zero_();
}

torch::Tensor aggregate_input(const torch::Tensor& mixed) {
  if (mixed.dim() != 4) throw InputError("aggregate_input expects [B,n,n,l]");
  return mixed.mean(1);
}

GatherIndex build_gather(std::span<const VisibilityMask> masks, int obs_len, torch::Dtype dtype) {
  const auto batch = static_cast<std::int64_t>(masks.size());
  std::int64_t width = 1;
  for (const auto& m : masks) {
    std::int64_t count = 0;
    for (const auto& row : m.rows) count += static_cast<std::int64_t>(row.gather.size());
    width = std::max(width, count);
  }
  auto sidx = torch::zeros({batch, width}, torch::kLong);
  auto oidx = torch::zeros({batch, width}, torch::kLong);
  auto valid = torch::zeros({batch, width}, torch::kDouble);
  auto s = sidx.accessor<std::int64_t, 2>();
  auto o = oidx.accessor<std::int64_t, 2>();
  auto v = valid.accessor<double, 2>();
  for (std::int64_t b = 0; b < batch; ++b) {
    std::int64_t k = 0;
    for (size_t agent = 0; agent < masks[b].rows.size(); ++agent) {
      for (const auto& [state_i, obs_i] : masks[b].rows[agent].gather) {
        s[b][k] = state_i;
        o[b][k] = static_cast<std::int64_t>(agent) * obs_len + obs_i;
        v[b][k] = 1.0;
        ++k;
      }
    }
  }
  return {sidx, oidx, valid.to(dtype)};
}

torch::Tensor masked_mse(const torch::Tensor& generated, const torch::Tensor& obs,
                         const GatherIndex& gather) {
  auto picked = generated.gather(1, gather.state_idx);
  auto target = obs.flatten(1).gather(1, gather.obs_idx);
  auto diff = (picked - target) * gather.valid;
  return diff.pow(2).sum(1);
}

namespace {
torch::Tensor clamped(const torch::Tensor& p) {
  return p.clamp(kProbabilityClamp, 1.0 - kProbabilityClamp);
}

// Keeps the discriminator's parameters out of the graph while the generator's
// adversarial term is built; restores the previous flags on exit.
class FrozenScope {
 public:
  explicit FrozenScope(torch::nn::Module& m) : params_(m.parameters()) {
    for (auto& p : params_) {
      flags_.push_back(p.requires_grad());
      p.set_requires_grad(false);
    }
  }
  ~FrozenScope() {
    for (size_t i = 0; i < params_.size(); ++i) params_[i].set_requires_grad(flags_[i]);
  }

 private:
  std::vector<torch::Tensor> params_;
  std::vector<bool> flags_;
};
}  // namespace

torch::Tensor discriminator_loss(Discriminator& disc, const torch::Tensor& real,
                                 const torch::Tensor& fake) {
  auto d_real = clamped(disc->probability(real));
  auto d_fake = clamped(disc->probability(fake.detach()));
  return -torch::log(d_real).mean() - torch::log(1 - d_fake).mean();
}

torch::Tensor generator_adversarial_loss(Discriminator& disc, const torch::Tensor& fake) {
  FrozenScope frozen(*disc);
  return -torch::log(clamped(disc->probability(fake))).mean();
}

GanLossReport GanLosses::report() const {
  return {d_loss.item<double>(),          g_adv_loss.item<double>(),
          mse_loss.item<double>(),        combined_g_loss.item<double>(),
          d_real_mean.item<double>(),     d_fake_mean.item<double>()};
}

GanLosses gan_step_losses(Discriminator& disc, const torch::Tensor& real,
                          const torch::Tensor& generated, const torch::Tensor& obs,
                          const GatherIndex& gather, double alpha) {
  if (alpha < 0) throw ConfigError("alpha must be >= 0");
  if (real.sizes() != generated.sizes()) throw InputError("real/generated batch shape mismatch");
  GanLosses out;
  auto p_real = clamped(disc->probability(real));
  auto p_fake_detached = clamped(disc->probability(generated.detach()));
  out.d_loss = -torch::log(p_real).mean() - torch::log(1 - p_fake_detached).mean();
  out.g_adv_loss = generator_adversarial_loss(disc, generated);
  out.mse_loss = masked_mse(generated, obs, gather).mean();
  out.combined_g_loss = out.mse_loss + alpha * out.g_adv_loss;
  out.d_real_mean = p_real.mean().detach();
  out.d_fake_mean = p_fake_detached.mean().detach();
  return out;
}

}  // namespace pagnet::infocomp
