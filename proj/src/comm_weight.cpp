#include "pagnet/comm_weight.hpp"

#include <cmath>

#include "pagnet/error.hpp"

namespace pagnet::comm {

torch::Tensor positional_encoding(int n, int d, torch::Dtype dtype) {
  if (n < 1) throw ConfigError("positional encoding needs n >= 1");
  if (d < 2 || d % 2 != 0) throw ConfigError("positional encoding width must be even and >= 2");
  auto p = torch::empty({n, d}, torch::kDouble);
  auto acc = p.accessor<double, 2>();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d / 2; ++j) {
      const double angle = i / std::pow(10000.0, 2.0 * j / d);
      acc[i][2 * j] = std::sin(angle);
      acc[i][2 * j + 1] = std::cos(angle);
    }
  }
  return p.to(dtype);
}

WeightNetImpl::WeightNetImpl(WeightNetOptions options) : options_(options) {
  if (options_.dropout < 0.0 || options_.dropout >= 1.0)
    throw ConfigError("weight dropout must lie in [0,1)");
  if (options_.dim < 1) throw ConfigError("weight dim must be positive");
  embed_ = register_module("embed", torch::nn::Linear(options_.obs_len, options_.dim));
  query_ = register_module("query", torch::nn::Linear(options_.dim, options_.dim));
  key_ = register_module("key", torch::nn::Linear(options_.dim, options_.dim));
  value_ = register_module("value", torch::nn::Linear(options_.dim, options_.dim));
  out_ = register_module("out", torch::nn::Linear(options_.dim, options_.obs_len));
  pos_ = register_buffer("pos", positional_encoding(options_.n_agents, options_.dim));
}

WeightNetOutput WeightNetImpl::forward(const torch::Tensor& obs, bool train_mode) {
  if (!torch::isfinite(obs).all().item<bool>()) throw InputError("non-finite observation");
  const auto n = obs.size(1);
  auto tokens = embed_(obs) + pos_;                     // [B,n,d]
  auto q = query_(tokens).unsqueeze(2).expand({-1, -1, n, -1});  // [B,recv,rows,d]
  auto k = key_(tokens);                                // [B,send,d]
  auto v = value_(tokens);
  auto scores = torch::matmul(q, k.unsqueeze(1).transpose(-1, -2)) / std::sqrt(double(options_.dim));
  auto probs = torch::softmax(scores, -1);              // [B,recv,rows,send]
  auto dropped = torch::dropout(probs, options_.dropout, train_mode);
  auto attended = torch::matmul(dropped, v.unsqueeze(1));  // [B,recv,rows,d]
  return {torch::sigmoid(out_(attended)), probs};
}

torch::Tensor mix_information(const torch::Tensor& messages, const torch::Tensor& weights,
                              const torch::Tensor& eps) {
  if (messages.sizes() != weights.sizes() || messages.sizes() != eps.sizes())
    throw InputError("mix_information shape mismatch");
  return (1 - weights) * messages + weights * eps;
}

torch::Tensor receiver_mix(const torch::Tensor& obs, const torch::Tensor& weights,
                           const torch::Tensor& eps) {
  if (obs.dim() != 3 || weights.dim() != 4 || eps.sizes() != obs.sizes() ||
      weights.size(0) != obs.size(0) || weights.size(1) != obs.size(1) ||
      weights.size(2) != obs.size(1) || weights.size(3) != obs.size(2))
    throw InputError("receiver_mix shape mismatch");
  auto m = obs.unsqueeze(1).expand_as(weights);
  auto e = eps.unsqueeze(1).expand_as(weights);
  return (1 - weights) * m + weights * e;
}

torch::Tensor mean_weight_per_agent(const torch::Tensor& weights) {
  return weights.mean({2, 3});
}

}  // namespace pagnet::comm
