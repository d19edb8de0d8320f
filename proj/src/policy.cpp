#include "pagnet/policy.hpp"

#include <cmath>
#include <limits>

#include "pagnet/comm_weight.hpp"
#include "pagnet/error.hpp"

namespace F = torch::nn::functional;

namespace pagnet::policy {

SelfAttentionBlockImpl::SelfAttentionBlockImpl(int dim, int heads, int ff) : heads_(heads) {
  if (dim % heads != 0) throw ConfigError("decoder width must be divisible by the head count");
  qkv_ = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
  proj_ = register_module("proj", torch::nn::Linear(dim, dim));
  ff1_ = register_module("ff1", torch::nn::Linear(dim, ff));
  ff2_ = register_module("ff2", torch::nn::Linear(ff, dim));
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
}

torch::Tensor SelfAttentionBlockImpl::forward(const torch::Tensor& x) {
  const auto rows = x.size(0);
  const auto tokens = x.size(1);
  const auto dim = x.size(2);
  const auto head_dim = dim / heads_;
  auto qkv = qkv_(x).view({rows, tokens, 3, heads_, head_dim}).permute({2, 0, 3, 1, 4});
  auto q = qkv[0];
  auto k = qkv[1];
  auto v = qkv[2];
  auto probs = torch::softmax(torch::matmul(q, k.transpose(-1, -2)) / std::sqrt(double(head_dim)), -1);
  auto attended = torch::matmul(probs, v).transpose(1, 2).reshape({rows, tokens, dim});
  auto h = norm1_(x + proj_(attended));
  return norm2_(h + ff2_(torch::relu(ff1_(h))));
}

DecoderImpl::DecoderImpl(DecoderOptions o) : options_(o) {
  if (o.dim < 2 || o.dim % 2 != 0) throw ConfigError("decoder width must be even");
  if (o.layers < 1 || o.heads < 1 || o.n_actions < 1) throw ConfigError("decoder sizes must be positive");
  embed_ = register_module("embed", torch::nn::Linear(o.obs_len + o.dim, o.dim));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < o.layers; ++i) blocks_->push_back(SelfAttentionBlock(o.dim, o.heads, o.ff));
  head_ = register_module("head", torch::nn::Linear(2 * o.dim, o.n_actions + o.dim));
  pos_ = register_buffer("pos", comm::positional_encoding(o.n_agents, o.dim));
}

std::pair<torch::Tensor, torch::Tensor> DecoderImpl::forward(const torch::Tensor& x,
                                                             const torch::Tensor& h_prev) {
  const auto slots = x.size(1);
  auto h_tok = h_prev.unsqueeze(1).expand({-1, slots, -1});
  auto t = embed_(torch::cat({x, h_tok}, -1)) + pos_;
  for (const auto& block : *blocks_) t = block->as<SelfAttentionBlock>()->forward(t);
  auto out = head_(torch::cat({t.mean(1), h_prev}, -1));
  auto q = out.narrow(1, 0, options_.n_actions);
  auto h_next = torch::tanh(out.narrow(1, options_.n_actions, options_.dim));
  return {q, h_next};
}

torch::Tensor DecoderImpl::initial_hidden(std::int64_t rows) const {
  return torch::zeros({rows, options_.dim}, head_->weight.options());
}

void DecoderImpl::zero_head() {
  torch::NoGradGuard guard;
  head_->weight.zero_();
  head_->bias.zero_();
}

MixerImpl::MixerImpl(MixerOptions o) : options_(o) {
  if (o.n_agents < 1 || o.cond_dim < 1 || o.embed < 1 || o.hyper_hidden < 1)
    throw ConfigError("mixer sizes must be positive");
  auto hyper = [&](int out) {
    return torch::nn::Sequential(torch::nn::Linear(o.cond_dim, o.hyper_hidden), torch::nn::Mish(),
                                 torch::nn::Linear(o.hyper_hidden, out));
  };
  hyper_w1_ = register_module("hyper_w1", hyper(o.n_agents * o.embed));
  hyper_b1_ = register_module("hyper_b1", torch::nn::Linear(o.cond_dim, o.embed));
  hyper_w2_ = register_module("hyper_w2", hyper(o.embed));
  hyper_b2_ = register_module("hyper_b2", hyper(1));
}

torch::Tensor MixerImpl::forward(const torch::Tensor& q, const torch::Tensor& cond) {
  const auto rows = q.size(0);
  auto w1 = torch::abs(hyper_w1_->forward(cond)).view({rows, options_.n_agents, options_.embed});
  auto b1 = hyper_b1_(cond).view({rows, 1, options_.embed});
  auto hidden = F::elu(torch::bmm(q.view({rows, 1, options_.n_agents}), w1) + b1);
  auto w2 = torch::abs(hyper_w2_->forward(cond)).view({rows, options_.embed, 1});
  auto b2 = hyper_b2_->forward(cond).view({rows, 1, 1});
  return (torch::bmm(hidden, w2) + b2).view({rows});
}

void MixerImpl::zero_hypernet_outputs() {
  torch::NoGradGuard guard;
  auto zero_last = [](torch::nn::Sequential& seq) {
    auto last = seq[seq->size() - 1]->as<torch::nn::Linear>();
    last->weight.zero_();
    last->bias.zero_();
  };
  zero_last(hyper_w1_);
  zero_last(hyper_w2_);
  zero_last(hyper_b2_);
  hyper_b1_->weight.zero_();
  hyper_b1_->bias.zero_();
}

int select_action(std::span<const float> q, std::span<const std::uint8_t> avail, double epsilon,
                  std::mt19937_64& rng) {
  if (q.size() != avail.size()) throw UsageError("q and availability lengths differ");
  std::vector<int> allowed;
  for (size_t a = 0; a < avail.size(); ++a)
    if (avail[a]) allowed.push_back(static_cast<int>(a));
  if (allowed.empty()) throw UsageError("no available action");
  if (epsilon > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon)
    return allowed[std::uniform_int_distribution<size_t>(0, allowed.size() - 1)(rng)];
  int best = allowed.front();
  for (int a : allowed)
    if (q[a] > q[best]) best = a;
  return best;
}

torch::Tensor unroll_q(Decoder& decoder, const torch::Tensor& inputs) {
  const auto batch = inputs.size(0);
  const auto steps = inputs.size(1);
  const auto n = inputs.size(2);
  auto h = decoder->initial_hidden(batch * n);
  std::vector<torch::Tensor> qs;
  qs.reserve(steps);
  for (std::int64_t t = 0; t < steps; ++t) {
    auto x = inputs.select(1, t).reshape({batch * n, inputs.size(3), inputs.size(4)});
    auto [q, h_next] = decoder->forward(x, h);
    qs.push_back(q.view({batch, n, -1}));
    h = h_next;
  }
  return torch::stack(qs, 1);
}

TdOutput td_loss(const TdBatch& batch, Decoder& online, Mixer& online_mixer, Decoder& target,
                 Mixer& target_mixer, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("gamma must lie in [0,1)");
  const auto b = batch.actions.size(0);
  const auto steps = batch.actions.size(1);
  const auto n = batch.actions.size(2);

  auto q_all = unroll_q(online, batch.inputs);  // [B,T+1,n,A]
  auto chosen = q_all.narrow(1, 0, steps).gather(3, batch.actions.unsqueeze(3)).squeeze(3);
  auto cond_now = batch.cond.narrow(1, 0, steps);
  auto q_tot = online_mixer->forward(chosen.reshape({b * steps, n}),
                                     cond_now.reshape({b * steps, -1}))
                   .view({b, steps});

  torch::Tensor targets;
  {
    torch::NoGradGuard guard;
    auto q_target = unroll_q(target, batch.inputs).narrow(1, 1, steps);
    auto avail_next = batch.avail.narrow(1, 1, steps);
    auto masked = q_target.masked_fill(avail_next.logical_not(), -std::numeric_limits<double>::infinity());
    auto greedy = masked.argmax(3, true);
    auto next_q = q_target.gather(3, greedy).squeeze(3);
    auto cond_next = batch.cond.narrow(1, 1, steps);
    auto next_tot = target_mixer->forward(next_q.reshape({b * steps, n}),
                                          cond_next.reshape({b * steps, -1}))
                        .view({b, steps});
    targets = batch.rewards + gamma * (1 - batch.terminated) * next_tot;
  }

  auto err = (targets - q_tot) * batch.mask;
  auto per_episode = err.pow(2).sum(1);
  auto finite = torch::isfinite(per_episode);
  if (!finite.all().item<bool>()) {
    const auto bad = finite.logical_not().nonzero()[0][0].item<std::int64_t>();
    throw TrainingFault("non-finite TD loss in batch episode " + std::to_string(bad));
  }
  auto loss = per_episode.sum() / batch.mask.sum().clamp_min(1.0);
  return {loss, q_tot, targets};
}

}  // namespace pagnet::policy
