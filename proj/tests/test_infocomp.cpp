#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fd_oracle.hpp"
#include "pagnet/envs.hpp"
#include "pagnet/infocomp.hpp"

using namespace pagnet;
using namespace pagnet::infocomp;

namespace {

std::int64_t conv_len(std::int64_t in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }
std::int64_t deconv_len(std::int64_t in, int k, int s, int p) { return (in - 1) * s - 2 * p + k; }

double mish(double x) { return x * std::tanh(std::log1p(std::exp(x))); }

// One-agent visibility of a 2-coordinate observation drawn from a 4-value state.
VisibilityMask two_coordinate_mask() {
  VisibilityMask m;
  VisibilityRow row;
  row.mask = {1, 0, 1, 0};
  row.gather = {{0, 0}, {2, 1}};
  m.rows.push_back(row);
  return m;
}

}  // namespace

TEST(Generator, ShapeLadderFollowsConvolutionArithmetic) {
  for (int l : {5, 8, 11, 12, 32}) {
    for (int L : {12, 32, 34}) {
      Generator g(GeneratorOptions{3, l, L, 32});
      std::vector<ShapeRecord> trace;
      const auto out = g->forward_traced(torch::randn({2, 3, l}), trace);
      EXPECT_EQ(out.sizes(), (torch::IntArrayRef{2, L}));

      const std::int64_t lp = padded_length(l);
      EXPECT_EQ(lp % 4, 0);
      EXPECT_GE(lp, l);
      const std::int64_t d0 = conv_len(conv_len(conv_len(lp, 5, 1, 2), 5, 1, 2), 3, 2, 1);
      const std::int64_t d1 = conv_len(conv_len(conv_len(d0, 5, 1, 2), 5, 1, 2), 3, 2, 1);
      const std::int64_t u0 = deconv_len(d1, 4, 2, 1);
      const std::int64_t u1 = deconv_len(u0, 4, 2, 1);
      const std::vector<std::pair<std::string, std::pair<std::int64_t, std::int64_t>>> expected{
          {"encoder", {32, lp}}, {"down0", {64, d0}}, {"down1", {128, d1}}, {"down2", {128, d1}},
          {"mid", {128, d1}},    {"up0", {128, u0}},  {"up1", {64, u1}},    {"up2", {32, u1}},
          {"decoder_conv", {3, u1}}};
      ASSERT_EQ(trace.size(), expected.size());
      for (size_t k = 0; k < trace.size(); ++k) {
        EXPECT_EQ(trace[k].stage, expected[k].first);
        EXPECT_EQ(trace[k].channels, expected[k].second.first) << trace[k].stage;
        EXPECT_EQ(trace[k].length, expected[k].second.second) << trace[k].stage;
      }
      EXPECT_EQ(u0, d0);  // skip joins line up
      EXPECT_EQ(u1, lp);
    }
  }
}

TEST(Discriminator, ShapeLadder) {
  Discriminator d(DiscriminatorOptions{32, 128, {16, 32, 64, 64}});
  std::vector<ShapeRecord> trace;
  const auto out = d->forward_traced(torch::randn({5, 32}), trace);
  EXPECT_EQ(out.sizes(), (torch::IntArrayRef{5}));
  std::int64_t len = 128;
  const int widths[] = {16, 32, 64, 64};
  ASSERT_EQ(trace.size(), 5u);
  EXPECT_EQ(trace[0].length, 128);
  for (int k = 0; k < 4; ++k) {
    len = conv_len(len, 5, 2, 2);
    EXPECT_EQ(trace[k + 1].channels, widths[k]);
    EXPECT_EQ(trace[k + 1].length, len);
  }
}

TEST(ConvMish, EveryConvolutionIsFollowedByMish) {
  Generator g(GeneratorOptions{2, 8, 12, 4});
  Discriminator d(DiscriminatorOptions{12, 16, {4, 4, 4, 4}});
  int wrapped = 0;
  for (torch::nn::Module* net : {static_cast<torch::nn::Module*>(g.get()), static_cast<torch::nn::Module*>(d.get())}) {
    int convs = 0;
    for (const auto& item : net->named_modules()) {
      auto* m = item.value().get();
      if (dynamic_cast<torch::nn::Conv1dImpl*>(m) || dynamic_cast<torch::nn::ConvTranspose1dImpl*>(m)) ++convs;
      if (auto* cm = dynamic_cast<ConvMishImpl*>(m)) {
        ++wrapped;
        // Probe: zero kernel, bias -1 -> every output equals mish(-1).
        torch::NoGradGuard guard;
        for (auto& p : cm->named_parameters()) {
          if (p.key().find("bias") != std::string::npos) p.value().fill_(-1.0);
          else p.value().zero_();
        }
        const int in_ch = cm->named_parameters()["conv.weight"].size(cm->transposed() ? 0 : 1);
        const auto y = cm->forward(torch::randn({1, in_ch, 8}));
        EXPECT_NEAR(y.min().item<float>(), mish(-1.0), 1e-6);
        EXPECT_NEAR(y.max().item<float>(), mish(-1.0), 1e-6);
      }
    }
    EXPECT_GT(convs, 0);
  }
  EXPECT_EQ(wrapped, 20 + 4);
}

TEST(MaskedMse, SmallCases) {
  const VisibilityMask mask = two_coordinate_mask();
  const auto gather = build_gather(std::span<const VisibilityMask>(&mask, 1), 2, torch::kDouble);
  auto obs = torch::tensor({0.3, 0.7}, torch::kDouble).view({1, 1, 2});
  auto exact = torch::tensor({0.3, 5.0, 0.7, -2.0}, torch::kDouble).view({1, 4});
  EXPECT_EQ(masked_mse(exact, obs, gather).item<double>(), 0.0);
  auto off = torch::tensor({1.3, 5.0, 0.7, -2.0}, torch::kDouble).view({1, 4});
  EXPECT_NEAR(masked_mse(off, obs, gather).item<double>(), 1.0, 1e-15);
}

TEST(MaskedMse, MatchesScalarOracleOnHallwayStates) {
  Hallway env({{4, 6, 8, 10}});
  const auto& s = env.spec();
  std::mt19937_64 rng(21);
  std::vector<VisibilityMask> masks;
  std::vector<std::vector<double>> obs_rows;
  const int batch = 100;
  for (int b = 0; b < batch; ++b) {
    env.reset(b);
    std::vector<int> pos;
    for (int len : {4, 6, 8, 10}) pos.push_back(std::uniform_int_distribution<int>(0, len)(rng));
    env.set_positions(pos);
    GlobalState st;
    st.values.assign(s.state_len, 0.0);
    int off = 0, i = 0;
    for (int len : {4, 6, 8, 10}) {
      st.values[off + pos[i++]] = 1.0;
      off += len + 1;
    }
    masks.push_back(env.visibility(st));
    std::vector<double> flat;
    for (int a = 0; a < s.n_agents; ++a) {
      auto o = env.observe(st, a);
      flat.insert(flat.end(), o.obs_row.begin(), o.obs_row.end());
    }
    obs_rows.push_back(flat);
  }
  auto generated = torch::randn({batch, s.state_len}, torch::kDouble);
  auto obs = torch::empty({batch, s.n_agents, s.obs_len}, torch::kDouble);
  for (int b = 0; b < batch; ++b)
    for (int k = 0; k < s.n_agents * s.obs_len; ++k) obs.view({batch, -1})[b][k] = obs_rows[b][k];
  const auto gather = build_gather(masks, s.obs_len, torch::kDouble);
  const auto got = masked_mse(generated, obs, gather);
  for (int b = 0; b < batch; ++b) {
    double ref = 0.0;
    for (int a = 0; a < s.n_agents; ++a)
      for (const auto& [si, oi] : masks[b].rows[a].gather) {
        const double d = generated[b][si].item<double>() - obs_rows[b][a * s.obs_len + oi];
        ref += d * d;
      }
    EXPECT_NEAR(got[b].item<double>(), ref, 1e-12);
  }
}

TEST(GanLosses, ConstantDiscriminatorArithmetic) {
  Discriminator d(DiscriminatorOptions{4, 16, {4, 4, 4, 4}});
  d->zero_head();
  const VisibilityMask mask = two_coordinate_mask();
  const auto gather = build_gather(std::span<const VisibilityMask>(&mask, 1), 2);
  auto obs = torch::tensor({0.0f, 0.0f}).view({1, 1, 2});
  auto real = torch::rand({1, 4});
  auto gen = torch::tensor({1.0f, 0.0f, -1.0f, 0.0f}).view({1, 4});  // masked mse = 2
  const auto r = gan_step_losses(d, real, gen, obs, gather, 0.0004).report();
  EXPECT_NEAR(r.d_loss, -2 * std::log(0.5), 1e-6);
  EXPECT_NEAR(r.d_loss, 1.3863, 1e-4);
  EXPECT_NEAR(r.g_adv_loss, 0.6931, 1e-4);
  EXPECT_NEAR(r.mse_loss, 2.0, 1e-6);
  EXPECT_NEAR(r.combined_g_loss, 2.000277, 1e-6);
  const auto zero_alpha = gan_step_losses(d, real, gen, obs, gather, 0.0);
  EXPECT_TRUE(torch::equal(zero_alpha.combined_g_loss, zero_alpha.mse_loss));
}

namespace {

struct TinyGan {
  Generator gen{GeneratorOptions{2, 8, 12, 4}};
  Discriminator disc{DiscriminatorOptions{12, 16, {4, 4, 4, 4}}};
  torch::Tensor x, real, obs;
  GatherIndex gather;

  TinyGan() {
    torch::manual_seed(31);
    gen->to(torch::kDouble);
    disc->to(torch::kDouble);
    x = torch::randn({3, 2, 8}, torch::kDouble);
    real = torch::rand({3, 12}, torch::kDouble);
    obs = torch::randn({3, 2, 8}, torch::kDouble);
    std::vector<VisibilityMask> masks(3);
    for (auto& m : masks) {
      m.rows.resize(2);
      for (int a = 0; a < 2; ++a)
        for (int k = 0; k < 6; ++k) m.rows[a].gather.emplace_back(a * 6 + k, k);
    }
    gather = build_gather(masks, 8, torch::kDouble);
  }
};

}  // namespace

TEST(Generator, GradientMatchesFiniteDifferences) {
  TinyGan t;
  auto loss = [&] { return masked_mse(t.gen->forward(t.x), t.obs, t.gather).mean(); };
  EXPECT_LE(fixture::gradient_relative_error(loss, fixture::leaves_of(*t.gen)), 1e-4);
}

TEST(Discriminator, GradientMatchesFiniteDifferences) {
  TinyGan t;
  auto fake = torch::rand({3, 12}, torch::kDouble);
  auto loss = [&] { return discriminator_loss(t.disc, t.real, fake); };
  EXPECT_LE(fixture::gradient_relative_error(loss, fixture::leaves_of(*t.disc)), 1e-4);
}

TEST(GanLosses, GradientIsolation) {
  TinyGan t;
  auto generated = t.gen->forward(t.x);
  auto losses = gan_step_losses(t.disc, t.real, generated, t.obs, t.gather, 0.5);

  losses.d_loss.backward({}, true);
  for (const auto& p : t.gen->parameters()) EXPECT_FALSE(p.grad().defined() && p.grad().abs().sum().item<double>() != 0.0);
  bool d_touched = false;
  for (const auto& p : t.disc->parameters()) d_touched |= p.grad().defined() && p.grad().abs().sum().item<double>() > 0;
  EXPECT_TRUE(d_touched);

  for (auto& p : t.disc->parameters())
    if (p.grad().defined()) p.mutable_grad().zero_();
  losses.combined_g_loss.backward();
  for (const auto& p : t.disc->parameters())
    EXPECT_FALSE(p.grad().defined() && p.grad().abs().sum().item<double>() != 0.0);
  bool g_touched = false;
  for (const auto& p : t.gen->parameters()) g_touched |= p.grad().defined() && p.grad().abs().sum().item<double>() > 0;
  EXPECT_TRUE(g_touched);
  for (const auto& p : t.disc->parameters()) EXPECT_TRUE(p.requires_grad());
}

TEST(AggregateInput, MeanOverReceivers) {
  auto mixed = torch::arange(2 * 2 * 3, torch::kDouble).view({1, 2, 2, 3});
  auto agg = aggregate_input(mixed);
  EXPECT_EQ(agg.sizes(), (torch::IntArrayRef{1, 2, 3}));
  EXPECT_DOUBLE_EQ(agg[0][0][0].item<double>(), 3.0);
  EXPECT_DOUBLE_EQ(agg[0][1][2].item<double>(), 8.0);
}
