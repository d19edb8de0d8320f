#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fd_oracle.hpp"
#include "pagnet/error.hpp"
#include "pagnet/learner.hpp"
#include "pagnet/policy.hpp"

using namespace pagnet;
using namespace pagnet::policy;

namespace {

void set_output_bias(Mixer& mixer, double value) {
  torch::NoGradGuard guard;
  for (auto& p : mixer->named_parameters())
    if (p.key() == "hyper_b2.2.bias") p.value().fill_(value);
}

TdBatch one_step_batch(int n, int l, int a, int cond_dim, double reward, double terminated) {
  TdBatch b;
  b.inputs = torch::randn({1, 2, n, n, l}, torch::kDouble);
  b.cond = torch::randn({1, 2, cond_dim}, torch::kDouble);
  b.actions = torch::zeros({1, 1, n}, torch::kLong);
  b.rewards = torch::full({1, 1}, reward, torch::kDouble);
  b.avail = torch::ones({1, 2, n, a}, torch::kBool);
  b.terminated = torch::full({1, 1}, terminated, torch::kDouble);
  b.mask = torch::ones({1, 1}, torch::kDouble);
  return b;
}

}  // namespace

TEST(SelectAction, GreedyTiesGoToLowestAvailable) {
  std::mt19937_64 rng(0);
  const std::vector<float> q{1.0f, 3.0f, 3.0f, 0.5f};
  EXPECT_EQ(select_action(q, std::vector<std::uint8_t>{1, 1, 1, 1}, 0.0, rng), 1);
  EXPECT_EQ(select_action(q, std::vector<std::uint8_t>{1, 0, 1, 1}, 0.0, rng), 2);
  EXPECT_EQ(select_action(q, std::vector<std::uint8_t>{1, 0, 0, 1}, 0.0, rng), 0);
  EXPECT_THROW(select_action(q, std::vector<std::uint8_t>{0, 0, 0, 0}, 0.0, rng), UsageError);
}

TEST(SelectAction, MaskingNeverChangesArgmaxAmongAvailable) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g;
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<float> q(6);
    std::vector<std::uint8_t> avail(6);
    for (auto& v : q) v = g(rng);
    for (auto& v : avail) v = rng() % 2;
    avail[rng() % 6] = 1;
    int best = -1;
    for (int k = 0; k < 6; ++k)
      if (avail[k] && (best < 0 || q[k] > q[best])) best = k;
    EXPECT_EQ(select_action(q, avail, 0.0, rng), best);
    auto masked = torch::tensor(q).masked_fill(
        torch::tensor(std::vector<int>(avail.begin(), avail.end())) == 0, -INFINITY);
    EXPECT_EQ(masked.argmax().item<std::int64_t>(), best);
  }
}

TEST(SelectAction, ExplorationIsUniformOverAvailable) {
  std::mt19937_64 rng(2);
  const std::vector<float> q{5, 0, 0, 0, 0};
  const std::vector<std::uint8_t> avail{1, 1, 0, 1, 1};
  const int draws = 40000;
  std::vector<int> hits(5, 0);
  for (int k = 0; k < draws; ++k) ++hits[select_action(q, avail, 1.0, rng)];
  EXPECT_EQ(hits[2], 0);
  const double p = 0.25, sigma = std::sqrt(draws * p * (1 - p));
  for (int k : {0, 1, 3, 4}) EXPECT_LE(std::abs(hits[k] - draws * p), 3 * sigma);
}

TEST(Mixer, ZeroHypernetworkGivesZero) {
  Mixer mixer(MixerOptions{3, 5, 32, 64});
  mixer->zero_hypernet_outputs();
  auto out = mixer->forward(torch::randn({4, 3}), torch::randn({4, 5}));
  EXPECT_EQ(out.abs().max().item<float>(), 0.0f);
}

TEST(Mixer, MonotoneInEveryAgentQ) {
  torch::manual_seed(3);
  Mixer mixer(MixerOptions{4, 36, 32, 64});
  mixer->to(torch::kDouble);
  torch::NoGradGuard guard;
  const int samples = 1000;
  auto q = torch::randn({samples, 4}, torch::kDouble) * 5;
  auto cond = torch::randn({samples, 36}, torch::kDouble) * 2;
  const double h = 1e-5;
  double worst = 1e300;
  for (int i = 0; i < 4; ++i) {
    auto up = q.clone(), down = q.clone();
    up.select(1, i) += h;
    down.select(1, i) -= h;
    auto d = (mixer->forward(up, cond) - mixer->forward(down, cond)) / (2 * h);
    worst = std::min(worst, d.min().item<double>());
    auto bumped = q.clone();
    bumped.select(1, i) += 1.0;
    EXPECT_GE((mixer->forward(bumped, cond) - mixer->forward(q, cond)).min().item<double>(), 0.0);
  }
  EXPECT_GE(worst, -1e-8);
}

TEST(TdLoss, BootstrapArithmetic) {
  torch::manual_seed(4);
  DecoderOptions dopt{1, 3, 2, 8, 2, 1, 8};
  Decoder online(dopt), target(dopt);
  Mixer mix(MixerOptions{1, 4, 4, 4}), target_mix(MixerOptions{1, 4, 4, 4});
  for (auto* m : std::vector<torch::nn::Module*>{online.get(), target.get(), mix.get(), target_mix.get()})
    m->to(torch::kDouble);
  online->zero_head();
  target->zero_head();
  mix->zero_hypernet_outputs();
  target_mix->zero_hypernet_outputs();
  set_output_bias(target_mix, 2.0);
  set_output_bias(mix, 1.98);

  auto batch = one_step_batch(1, 3, 2, 4, 0.0, 0.0);
  auto out = td_loss(batch, online, mix, target, target_mix, 0.99);
  EXPECT_NEAR(out.targets.item<double>(), 1.98, 1e-12);
  EXPECT_NEAR(out.loss.item<double>(), 0.0, 1e-20);

  auto terminal = one_step_batch(1, 3, 2, 4, 10.0, 1.0);
  EXPECT_DOUBLE_EQ(td_loss(terminal, online, mix, target, target_mix, 0.99).targets.item<double>(), 10.0);
  auto no_bootstrap = one_step_batch(1, 3, 2, 4, 0.5, 0.0);
  EXPECT_DOUBLE_EQ(td_loss(no_bootstrap, online, mix, target, target_mix, 0.0).targets.item<double>(), 0.5);
  EXPECT_THROW(td_loss(batch, online, mix, target, target_mix, 1.0), ConfigError);
}

TEST(TdLoss, NonFiniteLossNamesEpisode) {
  DecoderOptions dopt{1, 3, 2, 8, 2, 1, 8};
  Decoder online(dopt), target(dopt);
  Mixer mix(MixerOptions{1, 4, 4, 4}), target_mix(MixerOptions{1, 4, 4, 4});
  TdBatch b;
  b.inputs = torch::randn({3, 2, 1, 1, 3});
  b.cond = torch::randn({3, 2, 4});
  b.actions = torch::zeros({3, 1, 1}, torch::kLong);
  b.rewards = torch::zeros({3, 1});
  b.rewards[2][0] = NAN;
  b.avail = torch::ones({3, 2, 1, 2}, torch::kBool);
  b.terminated = torch::zeros({3, 1});
  b.mask = torch::ones({3, 1});
  try {
    td_loss(b, online, mix, target, target_mix, 0.9);
    FAIL() << "expected a training fault";
  } catch (const TrainingFault& e) {
    EXPECT_NE(std::string(e.what()).find("episode 2"), std::string::npos);
  }
}

TEST(TdLoss, GradientMatchesFiniteDifferencesOnToy) {
  torch::manual_seed(5);
  DecoderOptions dopt{1, 3, 2, 4, 1, 1, 4};
  Decoder online(dopt), target(dopt);
  Mixer mix(MixerOptions{1, 3, 2, 3}), target_mix(MixerOptions{1, 3, 2, 3});
  for (auto* m : std::vector<torch::nn::Module*>{online.get(), target.get(), mix.get(), target_mix.get()})
    m->to(torch::kDouble);
  TdBatch b;
  b.inputs = torch::randn({2, 4, 1, 1, 3}, torch::kDouble);
  b.cond = torch::randn({2, 4, 3}, torch::kDouble);
  b.actions = torch::randint(0, 2, {2, 3, 1}, torch::kLong);
  b.rewards = torch::randn({2, 3}, torch::kDouble);
  b.avail = torch::ones({2, 4, 1, 2}, torch::kBool);
  b.terminated = torch::zeros({2, 3}, torch::kDouble);
  b.terminated[0][2] = 1.0;
  b.mask = torch::ones({2, 3}, torch::kDouble);
  b.mask[1][2] = 0.0;
  auto loss = [&] { return td_loss(b, online, mix, target, target_mix, 0.9).loss; };
  auto leaves = fixture::leaves_of(*online);
  for (const auto& p : fixture::leaves_of(*mix)) leaves.push_back(p);
  EXPECT_LE(fixture::gradient_relative_error(loss, leaves), 1e-4);
}

TEST(Decoder, StepwiseEqualsBatchedUnroll) {
  torch::manual_seed(6);
  Decoder dec(DecoderOptions{3, 5, 4, 16, 4, 2, 32});
  auto inputs = torch::randn({2, 6, 3, 3, 5});
  const auto batched = unroll_q(dec, inputs);
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 3; ++i) {
      auto h = dec->initial_hidden(1);
      for (int t = 0; t < 6; ++t) {
        auto [q, h_next] = dec->forward(inputs[b][t][i].unsqueeze(0), h);
        EXPECT_TRUE(torch::allclose(q[0], batched[b][t][i], 1e-6, 1e-6));
        h = h_next;
      }
    }
}

TEST(Decoder, TargetUnchangedByOnlineStep) {
  torch::manual_seed(7);
  DecoderOptions dopt{2, 3, 2, 8, 2, 1, 8};
  Decoder online(dopt), target(dopt);
  Mixer mix(MixerOptions{2, 4, 4, 4}), target_mix(MixerOptions{2, 4, 4, 4});
  copy_parameters(*online, *target);
  copy_parameters(*mix, *target_mix);
  TdBatch b;
  b.inputs = torch::randn({2, 3, 2, 2, 3});
  b.cond = torch::randn({2, 3, 4});
  b.actions = torch::randint(0, 2, {2, 2, 2}, torch::kLong);
  b.rewards = torch::randn({2, 2});
  b.avail = torch::ones({2, 3, 2, 2}, torch::kBool);
  b.terminated = torch::zeros({2, 2});
  b.mask = torch::ones({2, 2});
  auto probe = torch::randn({4, 2, 3});
  const auto before = unroll_q(target, b.inputs);
  torch::optim::Adam opt(online->parameters(), 1e-2);
  for (int k = 0; k < 3; ++k) {
    opt.zero_grad();
    td_loss(b, online, mix, target, target_mix, 0.9).loss.backward();
    opt.step();
  }
  EXPECT_TRUE(torch::equal(before, unroll_q(target, b.inputs)));
  EXPECT_FALSE(torch::equal(before, unroll_q(online, b.inputs)));
}
