#include <cmath>

#include <gtest/gtest.h>

#include "fd_oracle.hpp"
#include "pagnet/comm_weight.hpp"
#include "pagnet/error.hpp"

using namespace pagnet;
using namespace pagnet::comm;

namespace {

torch::Tensor param(const torch::nn::Module& m, const std::string& name) {
  return m.named_parameters()[name];
}

// Straight-line re-derivation of the weight network from its parameters.
std::vector<double> reference_weights(const WeightNet& net, const torch::Tensor& obs_in) {
  auto obs = obs_in.to(torch::kDouble);
  const int n = obs.size(1), l = obs.size(2), d = net->options().dim;
  auto get = [&](const char* name) { return param(*net, name).detach().to(torch::kDouble); };
  auto We = get("embed.weight"), be = get("embed.bias");
  auto Wq = get("query.weight"), bq = get("query.bias");
  auto Wk = get("key.weight"), bk = get("key.bias");
  auto Wv = get("value.weight"), bv = get("value.bias");
  auto Wo = get("out.weight"), bo = get("out.bias");
  auto affine = [](const torch::Tensor& W, const torch::Tensor& b, const std::vector<double>& x) {
    std::vector<double> y(W.size(0));
    for (int r = 0; r < W.size(0); ++r) {
      double acc = b[r].item<double>();
      for (int c = 0; c < W.size(1); ++c) acc += W[r][c].item<double>() * x[c];
      y[r] = acc;
    }
    return y;
  };
  std::vector<std::vector<double>> tok(n), q(n), k(n), v(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> o(l);
    for (int c = 0; c < l; ++c) o[c] = obs[0][i][c].item<double>();
    tok[i] = affine(We, be, o);
    for (int c = 0; c < d; ++c) {
      const double angle = i / std::pow(10000.0, 2.0 * (c / 2) / d);
      tok[i][c] += c % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
    q[i] = affine(Wq, bq, tok[i]);
    k[i] = affine(Wk, bk, tok[i]);
    v[i] = affine(Wv, bv, tok[i]);
  }
  // Output layout [recv][send][l]
  std::vector<double> out(static_cast<size_t>(n) * n * l);
  for (int i = 0; i < n; ++i) {
    std::vector<double> s(n);
    double mx = -1e300;
    for (int j = 0; j < n; ++j) {
      s[j] = 0;
      for (int c = 0; c < d; ++c) s[j] += q[i][c] * k[j][c];
      s[j] /= std::sqrt(double(d));
      mx = std::max(mx, s[j]);
    }
    double z = 0;
    for (int j = 0; j < n; ++j) z += std::exp(s[j] - mx);
    std::vector<double> att(d, 0.0);
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < d; ++c) att[c] += std::exp(s[j] - mx) / z * v[j][c];
    const auto proj = affine(Wo, bo, att);
    for (int row = 0; row < n; ++row)
      for (int c = 0; c < l; ++c) out[(i * n + row) * l + c] = 1.0 / (1.0 + std::exp(-proj[c]));
  }
  return out;
}

}  // namespace

TEST(PositionalEncoding, KnownValues) {
  const auto p = positional_encoding(4, 4, torch::kDouble);
  EXPECT_DOUBLE_EQ(p[0][0].item<double>(), 0.0);
  EXPECT_DOUBLE_EQ(p[0][1].item<double>(), 1.0);
  EXPECT_DOUBLE_EQ(p[1][0].item<double>(), std::sin(1.0));
  EXPECT_DOUBLE_EQ(p[3][2].item<double>(), std::sin(3.0 / 100.0));
  EXPECT_DOUBLE_EQ(p[3][3].item<double>(), std::cos(3.0 / 100.0));
  EXPECT_THROW(positional_encoding(4, 3), ConfigError);
}

TEST(WeightNet, MatchesScalarReference) {
  torch::manual_seed(1);
  WeightNet net(WeightNetOptions{3, 5, 8, 0.1});
  auto obs = torch::randn({1, 3, 5});
  const auto out = net->forward(obs, false).weights;
  const auto ref = reference_weights(net, obs);
  auto flat = out.contiguous().view({-1});
  for (size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(flat[k].item<float>(), ref[k], 1e-5);
}

TEST(WeightNet, RangeAndNormalization) {
  torch::manual_seed(2);
  WeightNet net(WeightNetOptions{4, 11, 64, 0.1});
  for (double scale : {0.0, 1.0, 100.0, 1e6}) {
    auto obs = torch::randn({7, 4, 11}) * scale;
    for (bool train : {false, true}) {
      const auto o = net->forward(obs, train);
      EXPECT_GE(o.weights.min().item<float>(), 0.0f);
      EXPECT_LE(o.weights.max().item<float>(), 1.0f);
      EXPECT_LT((o.attention.sum(-1) - 1).abs().max().item<float>(), 1e-6f);
    }
  }
  auto bad = torch::zeros({1, 4, 11});
  bad[0][1][2] = std::nan("");
  EXPECT_THROW(net->forward(bad, false), InputError);
}

TEST(WeightNet, EvalModeIsDeterministic) {
  torch::manual_seed(3);
  WeightNet net(WeightNetOptions{4, 11, 64, 0.5});
  auto obs = torch::randn({5, 4, 11});
  const auto a = net->forward(obs, false).weights;
  const auto b = net->forward(obs, false).weights;
  EXPECT_TRUE(torch::equal(a, b));
  const auto c = net->forward(obs, true).weights;
  EXPECT_FALSE(torch::equal(a, c));
}

TEST(MixInformation, Arithmetic) {
  auto m = torch::full({1}, 2.0, torch::kDouble);
  auto w = torch::full({1}, 0.5, torch::kDouble);
  auto e = torch::zeros({1}, torch::kDouble);
  EXPECT_DOUBLE_EQ(mix_information(m, w, e).item<double>(), 1.0);
  EXPECT_THROW(mix_information(m, torch::zeros({2}), e), InputError);
}

TEST(ReceiverMix, ExactLimits) {
  torch::manual_seed(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto obs = torch::randn({3, 4, 7}) * 10;
    auto eps = torch::randn({3, 4, 7});
    auto zeros = torch::zeros({3, 4, 4, 7});
    auto ones = torch::ones({3, 4, 4, 7});
    EXPECT_TRUE(torch::equal(receiver_mix(obs, zeros, eps), obs.unsqueeze(1).expand({3, 4, 4, 7})));
    EXPECT_TRUE(torch::equal(receiver_mix(obs, ones, eps), eps.unsqueeze(1).expand({3, 4, 4, 7})));
  }
}

TEST(ReceiverMix, SingleAgentReduction) {
  auto obs = torch::randn({1, 1, 5}, torch::kDouble);
  auto w = torch::rand({1, 1, 1, 5}, torch::kDouble);
  auto eps = torch::randn({1, 1, 5}, torch::kDouble);
  auto x = receiver_mix(obs, w, eps);
  EXPECT_TRUE(torch::allclose(x[0][0][0], (1 - w[0][0][0]) * obs[0][0] + w[0][0][0] * eps[0][0], 0, 0));
}

TEST(ReceiverMix, MatchesScalarLoop) {
  torch::manual_seed(5);
  const int B = 2, n = 3, l = 4;
  auto obs = torch::randn({B, n, l}, torch::kDouble);
  auto w = torch::rand({B, n, n, l}, torch::kDouble);
  auto eps = torch::randn({B, n, l}, torch::kDouble);
  auto x = receiver_mix(obs, w, eps);
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < l; ++k) {
          const double ww = w[b][i][j][k].item<double>();
          const double ref = (1 - ww) * obs[b][j][k].item<double>() + ww * eps[b][j][k].item<double>();
          EXPECT_DOUBLE_EQ(x[b][i][j][k].item<double>(), ref);
        }
  EXPECT_THROW(receiver_mix(obs, torch::rand({B, n, n, l + 1}, torch::kDouble), eps), InputError);
}

TEST(WeightNet, GradientMatchesFiniteDifferences) {
  torch::manual_seed(6);
  WeightNet net(WeightNetOptions{2, 6, 8, 0.0});
  net->to(torch::kDouble);
  auto obs = torch::randn({1, 2, 6}, torch::kDouble).requires_grad_(true);
  auto eps = torch::randn({1, 2, 6}, torch::kDouble);
  auto probe = torch::randn({1, 2, 2, 6}, torch::kDouble);
  auto loss = [&] {
    auto w = net->forward(obs, false).weights;
    return (receiver_mix(obs, w, eps) * probe).sum();
  };
  auto leaves = fixture::leaves_of(*net);
  leaves.push_back(obs);
  EXPECT_LE(fixture::gradient_relative_error(loss, leaves), 1e-4);
}

TEST(MeanWeight, PerReceiverMean) {
  auto w = torch::arange(16, torch::kDouble).view({1, 2, 2, 4});
  auto m = mean_weight_per_agent(w);
  EXPECT_DOUBLE_EQ(m[0][0].item<double>(), 3.5);
  EXPECT_DOUBLE_EQ(m[0][1].item<double>(), 11.5);
}
