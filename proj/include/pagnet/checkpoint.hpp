#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace pagnet {

struct NamedArray {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

// Binary archive: "PAGN", u32 version, length-prefixed "key=value" metadata
// text, a manifest of (name, shape, element count), then every payload as
// little-endian float32 in manifest order.
class ParameterCheckpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> metadata;
  std::vector<NamedArray> arrays;

  // Copies every parameter of `module` under "<prefix>.<param name>".
  void add_module(const std::string& prefix, const torch::nn::Module& module);
  // Strict load: every parameter under prefix must exist with a matching shape.
  void load_module(const std::string& prefix, torch::nn::Module& module) const;
  bool has_prefix(const std::string& prefix) const;
  const NamedArray* find(const std::string& name) const;

  std::string serialize() const;
  static ParameterCheckpoint parse(std::string_view bytes);
  void save(const std::string& path) const;
  static ParameterCheckpoint load(const std::string& path);

  // Throws LoadError naming env_hash when the stored hash differs.
  void require_env_hash(std::uint64_t expected) const;
};

std::string hash_hex(std::uint64_t h);
// FNV-1a over every payload byte under prefix; used to verify freezes.
std::uint64_t parameter_hash(const torch::nn::Module& module);

}  // namespace pagnet
