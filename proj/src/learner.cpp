#include "pagnet/learner.hpp"

#include <algorithm>

#include "pagnet/error.hpp"
#include "pagnet/envs.hpp"

namespace pagnet {

namespace {

torch::Tensor to_tensor(const std::vector<float>& v, std::vector<std::int64_t> shape) {
  return torch::from_blob(const_cast<float*>(v.data()), shape, torch::kFloat).clone();
}

void append_params(std::vector<torch::Tensor>& out, const torch::nn::Module& m) {
  for (const auto& p : m.parameters()) out.push_back(p);
}

void set_trainable(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.set_requires_grad(on);
}

struct BatchTensors {
  torch::Tensor obs;         // [B,T+1,n,l]
  torch::Tensor states;      // [B,T+1,L]
  torch::Tensor avail;       // [B,T+1,n,A] bool
  torch::Tensor actions;     // [B,T,n]
  torch::Tensor rewards;     // [B,T]
  torch::Tensor terminated;  // [B,T]
  torch::Tensor mask;        // [B,T]
  torch::Tensor filled;      // [B,T+1] real entries of obs/states
};

BatchTensors stack_batch(const std::vector<std::shared_ptr<const EpisodeRecord>>& batch,
                         const EnvSpec& spec) {
  const auto b = static_cast<std::int64_t>(batch.size());
  int steps = 1;
  for (const auto& e : batch) steps = std::max(steps, e->length);
  const int n = spec.n_agents, l = spec.obs_len, big_l = spec.state_len, a = spec.n_actions;
  BatchTensors t;
  t.obs = torch::zeros({b, steps + 1, n, l});
  t.states = torch::zeros({b, steps + 1, big_l});
  t.avail = torch::zeros({b, steps + 1, n, a}, torch::kBool);
  t.actions = torch::zeros({b, steps, n}, torch::kLong);
  t.rewards = torch::zeros({b, steps});
  t.terminated = torch::zeros({b, steps});
  t.mask = torch::zeros({b, steps});
  t.filled = torch::zeros({b, steps + 1});
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& e = *batch[i];
    const int len = e.length;
    t.obs[i].narrow(0, 0, len + 1).copy_(to_tensor(e.obs, {len + 1, n, l}));
    t.states[i].narrow(0, 0, len + 1).copy_(to_tensor(e.states, {len + 1, big_l}));
    std::vector<std::uint8_t> av(e.avail);
    t.avail[i].narrow(0, 0, len + 1)
        .copy_(torch::from_blob(av.data(), {len + 1, n, a}, torch::kUInt8).to(torch::kBool));
    if (len > 0) {
      std::vector<std::int64_t> acts(e.actions.begin(), e.actions.end());
      t.actions[i].narrow(0, 0, len).copy_(torch::from_blob(acts.data(), {len, n}, torch::kLong));
      t.rewards[i].narrow(0, 0, len).copy_(to_tensor(e.rewards, {len}));
      t.mask[i].narrow(0, 0, len).fill_(1.0);
      if (e.terminated) t.terminated[i][len - 1] = 1.0;
    }
    t.filled[i].narrow(0, 0, len + 1).fill_(1.0);
  }
  return t;
}

}  // namespace

void copy_parameters(const torch::nn::Module& from, torch::nn::Module& to) {
  torch::NoGradGuard guard;
  auto src = from.parameters();
  auto dst = to.parameters();
  if (src.size() != dst.size()) throw UsageError("parameter lists differ in length");
  for (size_t i = 0; i < src.size(); ++i) dst[i].copy_(src[i]);
}

Learner::Learner(const TrainConfig& cfg, const Environment& env) : cfg_(cfg), spec_(env.spec()) {
  cfg_.validate();
  observer_ = make_environment(cfg_.env);
  if (env_hash(*observer_) != env_hash(env))
    throw ConfigError("learner config does not describe the supplied environment");
  torch::manual_seed(static_cast<std::uint64_t>(cfg_.seed));
  const auto& m = cfg_.model;
  const int n = spec_.n_agents;
  weight_net = comm::WeightNet(comm::WeightNetOptions{n, spec_.obs_len, m.weight_dim, m.weight_dropout});
  generator = infocomp::Generator(
      infocomp::GeneratorOptions{n, spec_.obs_len, spec_.state_len, m.generator_channels});
  infocomp::DiscriminatorOptions dopts;
  dopts.state_len = spec_.state_len;
  dopts.embed = m.discriminator_embed;
  discriminator = infocomp::Discriminator(dopts);
  policy::DecoderOptions dec{n, spec_.obs_len, spec_.n_actions, m.decoder_dim, m.decoder_heads,
                             m.decoder_layers, m.decoder_ff};
  decoder = policy::Decoder(dec);
  target_decoder = policy::Decoder(dec);
  policy::MixerOptions mix{n, spec_.state_len + n, m.mixer_embed, m.hyper_hidden};
  mixer = policy::Mixer(mix);
  target_mixer = policy::Mixer(mix);
  sync_target();
  set_trainable(*target_decoder, false);
  set_trainable(*target_mixer, false);

  if (cfg_.mode == Mode::kPagnetPt) {
    auto ck = ParameterCheckpoint::load(cfg_.pretrained);
    ck.require_env_hash(env_hash(env));
    if (!ck.has_prefix("weight_net") || !ck.has_prefix("generator"))
      throw LoadError("pretrained checkpoint lacks weight_net or generator parameters");
    ck.load_module("weight_net", *weight_net);
    ck.load_module("generator", *generator);
    if (ck.has_prefix("discriminator")) ck.load_module("discriminator", *discriminator);
    set_trainable(*weight_net, false);
    if (!cfg_.unfreeze_generator) set_trainable(*generator, false);
  }

  const torch::optim::AdamOptions opts(cfg_.learning_rate);
  if (gan_trainable()) {
    g_params_.clear();
    append_params(g_params_, *generator);
    if (cfg_.mode == Mode::kPagnet) append_params(g_params_, *weight_net);
    d_opt_ = std::make_unique<torch::optim::Adam>(discriminator->parameters(), opts);
    g_opt_ = std::make_unique<torch::optim::Adam>(g_params_, opts);
  }
  append_params(td_params_, *decoder);
  append_params(td_params_, *mixer);
  td_opt_ = std::make_unique<torch::optim::Adam>(td_params_, opts);
}

bool Learner::gan_trainable() const {
  switch (cfg_.mode) {
    case Mode::kPagnet:
    case Mode::kPagnetFc: return true;
    case Mode::kPagnetPt: return cfg_.unfreeze_generator;
    case Mode::kQmix: return false;
  }
  return false;
}

Learner::Inputs Learner::comm_inputs(const torch::Tensor& obs, bool train_mode) {
  const auto rows = obs.size(0);
  const auto n = obs.size(1);
  const auto l = obs.size(2);
  Inputs in;
  if (cfg_.mode == Mode::kQmix) {
    in.weights = torch::zeros({rows, n, n, l});
    auto eye = torch::eye(n).view({1, n, n, 1});
    in.mixed = eye * obs.unsqueeze(1);
    return in;
  }
  if (cfg_.mode == Mode::kPagnetFc) {
    in.weights = torch::zeros({rows, n, n, l});
  } else {
    in.weights = weight_net->forward(obs, train_mode).weights;
  }
  in.mixed = comm::receiver_mix(obs, in.weights, torch::randn_like(obs));
  return in;
}

torch::Tensor Learner::generate(const torch::Tensor& mixed) {
  emit("generator_forward");
  return generator->forward(infocomp::aggregate_input(mixed));
}

torch::Tensor Learner::conditioning(const torch::Tensor& mixed, const torch::Tensor& weights,
                                    const torch::Tensor& states) {
  const auto mean_w = comm::mean_weight_per_agent(weights);
  if (cfg_.mode == Mode::kQmix) return torch::cat({states, mean_w}, 1);
  return torch::cat({generate(mixed), mean_w}, 1);
}

EpisodeRecord Learner::rollout(Environment& env, std::int64_t env_seed, double epsilon,
                               std::mt19937_64& rng, std::vector<StepView>* views) {
  torch::NoGradGuard guard;
  const int n = spec_.n_agents, l = spec_.obs_len, a = spec_.n_actions, big_l = spec_.state_len;
  EpisodeRecord rec;
  rec.n_agents = n;
  rec.obs_len = l;
  rec.state_len = big_l;
  rec.n_actions = a;

  auto step = env.reset(env_seed);
  auto h = decoder->initial_hidden(n);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::vector<float> noise(static_cast<size_t>(n) * l);
  std::vector<int> joint(n);

  auto record_view = [&](const StepResult& s) {
    rec.obs.insert(rec.obs.end(), s.obs.values.begin(), s.obs.values.end());
    rec.states.insert(rec.states.end(), s.state.values.begin(), s.state.values.end());
    rec.avail.insert(rec.avail.end(), s.avail.begin(), s.avail.end());
  };

  while (!step.done) {
    record_view(step);
    std::vector<float> obs_f(step.obs.values.begin(), step.obs.values.end());
    auto obs = to_tensor(obs_f, {1, n, l});
    for (auto& v : noise) v = gauss(rng);
    auto eps = to_tensor(noise, {1, n, l});

    torch::Tensor weights;
    torch::Tensor mixed;
    if (cfg_.mode == Mode::kQmix) {
      weights = torch::zeros({1, n, n, l});
      mixed = torch::eye(n).view({1, n, n, 1}) * obs.unsqueeze(1);
    } else {
      weights = cfg_.mode == Mode::kPagnetFc ? torch::zeros({1, n, n, l})
                                             : weight_net->forward(obs, false).weights;
      mixed = comm::receiver_mix(obs, weights, eps);
    }
    auto [q, h_next] = decoder->forward(mixed.squeeze(0), h);
    h = h_next;
    auto q_c = q.contiguous();
    auto mean_w = comm::mean_weight_per_agent(weights).squeeze(0).contiguous();
    for (int i = 0; i < n; ++i) {
      std::span<const float> qi(q_c.data_ptr<float>() + static_cast<size_t>(i) * a, a);
      std::span<const std::uint8_t> av(step.avail.data() + static_cast<size_t>(i) * a, a);
      joint[i] = policy::select_action(qi, av, epsilon, rng);
      rec.mean_w.push_back(mean_w[i].item<float>());
    }
    if (views) {
      StepView v{weights.squeeze(0), mixed.squeeze(0), {}};
      if (uses_generator()) v.generated = generate(mixed).squeeze(0);
      views->push_back(std::move(v));
    }
    rec.actions.insert(rec.actions.end(), joint.begin(), joint.end());
    step = env.step(joint);
    rec.rewards.push_back(static_cast<float>(step.reward));
    ++rec.length;
    if (step.won) rec.won = true;
  }
  record_view(step);
  rec.terminated = !step.truncated;
  return rec;
}

EpisodeRecord random_rollout(Environment& env, std::int64_t env_seed, std::mt19937_64& rng) {
  const auto& spec = env.spec();
  EpisodeRecord rec;
  rec.n_agents = spec.n_agents;
  rec.obs_len = spec.obs_len;
  rec.state_len = spec.state_len;
  rec.n_actions = spec.n_actions;
  auto step = env.reset(env_seed);
  std::vector<int> joint(spec.n_agents);
  std::vector<float> zeros(spec.n_actions, 0.0f);
  auto record_view = [&](const StepResult& s) {
    rec.obs.insert(rec.obs.end(), s.obs.values.begin(), s.obs.values.end());
    rec.states.insert(rec.states.end(), s.state.values.begin(), s.state.values.end());
    rec.avail.insert(rec.avail.end(), s.avail.begin(), s.avail.end());
  };
  while (!step.done) {
    record_view(step);
    for (int i = 0; i < spec.n_agents; ++i) {
      std::span<const std::uint8_t> av(step.avail.data() + static_cast<size_t>(i) * spec.n_actions,
                                       spec.n_actions);
      joint[i] = policy::select_action(zeros, av, 1.0, rng);
      rec.mean_w.push_back(0.0f);
    }
    rec.actions.insert(rec.actions.end(), joint.begin(), joint.end());
    step = env.step(joint);
    rec.rewards.push_back(static_cast<float>(step.reward));
    ++rec.length;
    if (step.won) rec.won = true;
  }
  record_view(step);
  rec.terminated = !step.truncated;
  return rec;
}

UpdateStats Learner::gan_step(const torch::Tensor& obs, const torch::Tensor& states,
                              const infocomp::GatherIndex& gather) {
  UpdateStats stats;
  auto in = comm_inputs(obs, true);
  auto generated = generate(in.mixed);

  emit("discriminator_forward");
  auto d_loss = infocomp::discriminator_loss(discriminator, states, generated);
  d_opt_->zero_grad();
  d_loss.backward();
  torch::nn::utils::clip_grad_norm_(discriminator->parameters(), cfg_.grad_clip);
  d_opt_->step();
  emit("d_step");

  set_trainable(*discriminator, false);
  auto g_adv = infocomp::generator_adversarial_loss(discriminator, generated);
  auto mse = infocomp::masked_mse(generated, obs, gather).mean();
  auto combined = mse + cfg_.alpha * g_adv;
  g_opt_->zero_grad();
  combined.backward();
  torch::nn::utils::clip_grad_norm_(g_params_, cfg_.grad_clip);
  g_opt_->step();
  set_trainable(*discriminator, true);
  emit("g_step");

  {
    torch::NoGradGuard guard;
    stats.d_real_mean = discriminator->probability(states).mean().item<double>();
    stats.d_fake_mean = discriminator->probability(generated.detach()).mean().item<double>();
  }
  stats.d_loss = d_loss.item<double>();
  stats.g_loss = combined.item<double>();
  stats.mse_loss = mse.item<double>();
  stats.gan_updated = true;
  return stats;
}

UpdateStats Learner::gan_update(const torch::Tensor& obs, const torch::Tensor& states,
                                const std::vector<GlobalState>& true_states) {
  if (!gan_trainable()) throw UsageError("GAN parameters are frozen in this mode");
  std::vector<VisibilityMask> masks;
  masks.reserve(true_states.size());
  for (const auto& s : true_states) masks.push_back(observer_->visibility(s));
  auto gather = infocomp::build_gather(masks, spec_.obs_len);
  return gan_step(obs, states, gather);
}

double Learner::evaluate_mse(const torch::Tensor& obs, const std::vector<GlobalState>& true_states) {
  torch::NoGradGuard guard;
  std::vector<VisibilityMask> masks;
  for (const auto& s : true_states) masks.push_back(observer_->visibility(s));
  auto gather = infocomp::build_gather(masks, spec_.obs_len);
  auto in = comm_inputs(obs, false);
  return infocomp::masked_mse(generate(in.mixed), obs, gather).mean().item<double>();
}

UpdateStats Learner::update(const std::vector<std::shared_ptr<const EpisodeRecord>>& batch) {
  if (batch.empty()) throw UsageError("empty training batch");
  auto bt = stack_batch(batch, spec_);
  const auto b = bt.obs.size(0);
  const auto t1 = bt.obs.size(1);
  const int n = spec_.n_agents, l = spec_.obs_len, big_l = spec_.state_len;
  UpdateStats stats;

  if (gan_trainable()) {
    auto flat_obs = bt.obs.view({b * t1, n, l});
    auto flat_states = bt.states.view({b * t1, big_l});
    auto real_rows = bt.filled.view({b * t1}).nonzero().squeeze(1);
    const auto take = std::min<std::int64_t>(cfg_.gan_samples, real_rows.size(0));
    auto pick = real_rows.index_select(0, torch::randperm(real_rows.size(0), torch::kLong).narrow(0, 0, take));
    auto obs_s = flat_obs.index_select(0, pick);
    auto states_s = flat_states.index_select(0, pick);
    std::vector<VisibilityMask> masks;
    masks.reserve(take);
    auto pick_acc = pick.accessor<std::int64_t, 1>();
    for (std::int64_t k = 0; k < take; ++k) {
      const auto row = pick_acc[k];
      const auto& e = *batch[row / t1];
      masks.push_back(observer_->visibility(e.state_at(static_cast<int>(row % t1))));
    }
    stats = gan_step(obs_s, states_s, infocomp::build_gather(masks, l));
  }

  policy::TdBatch td;
  {
    torch::NoGradGuard guard;
    auto flat_obs = bt.obs.view({b * t1, n, l});
    auto in = comm_inputs(flat_obs, false);
    auto cond = conditioning(in.mixed, in.weights, bt.states.view({b * t1, big_l}));
    td.inputs = in.mixed.view({b, t1, n, n, l});
    td.cond = cond.view({b, t1, -1});
  }
  td.actions = bt.actions;
  td.rewards = bt.rewards;
  td.avail = bt.avail;
  td.terminated = bt.terminated;
  td.mask = bt.mask;
  auto out = policy::td_loss(td, decoder, mixer, target_decoder, target_mixer, cfg_.gamma);
  td_opt_->zero_grad();
  out.loss.backward();
  torch::nn::utils::clip_grad_norm_(td_params_, cfg_.grad_clip);
  td_opt_->step();
  emit("td_step");
  stats.td_loss = out.loss.item<double>();

  ++updates_;
  if (updates_ % cfg_.target_sync_interval == 0) sync_target();
  return stats;
}

void Learner::sync_target() {
  copy_parameters(*decoder, *target_decoder);
  copy_parameters(*mixer, *target_mixer);
  emit("target_sync");
}

ParameterCheckpoint Learner::checkpoint(std::int64_t step, bool comm_only) const {
  ParameterCheckpoint ck;
  ck.metadata["env_hash"] = hash_hex(env_hash(*observer_));
  ck.metadata["env"] = observer_->descriptor();
  ck.metadata["mode"] = std::string(mode_name(cfg_.mode));
  ck.metadata["step"] = std::to_string(step);
  ck.metadata["config"] = to_json(cfg_).dump();
  ck.add_module("weight_net", *weight_net);
  ck.add_module("generator", *generator);
  ck.add_module("discriminator", *discriminator);
  if (!comm_only) {
    ck.add_module("decoder", *decoder);
    ck.add_module("mixer", *mixer);
  }
  return ck;
}

void Learner::load(const ParameterCheckpoint& ck) {
  ck.require_env_hash(env_hash(*observer_));
  if (ck.has_prefix("weight_net")) ck.load_module("weight_net", *weight_net);
  if (ck.has_prefix("generator")) ck.load_module("generator", *generator);
  if (ck.has_prefix("discriminator")) ck.load_module("discriminator", *discriminator);
  if (ck.has_prefix("decoder")) ck.load_module("decoder", *decoder);
  if (ck.has_prefix("mixer")) ck.load_module("mixer", *mixer);
  sync_target();
}

}  // namespace pagnet
