#include "pagnet/checkpoint.hpp"

#include <cstdio>
#include <sstream>

#include "pagnet/binary_io.hpp"
#include "pagnet/env.hpp"
#include "pagnet/error.hpp"

namespace pagnet {

namespace {
constexpr std::string_view kMagic = "PAGN";

std::string shape_text(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}
}  // namespace

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ParameterCheckpoint::add_module(const std::string& prefix, const torch::nn::Module& module) {
  for (const auto& item : module.named_parameters(true)) {
    auto t = item.value().detach().to(torch::kCPU, torch::kFloat).contiguous();
    NamedArray a;
    a.name = prefix + "." + item.key();
    a.shape.assign(t.sizes().begin(), t.sizes().end());
    a.data.assign(t.data_ptr<float>(), t.data_ptr<float>() + t.numel());
    arrays.push_back(std::move(a));
  }
}

const NamedArray* ParameterCheckpoint::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

bool ParameterCheckpoint::has_prefix(const std::string& prefix) const {
  const auto p = prefix + ".";
  for (const auto& a : arrays)
    if (a.name.compare(0, p.size(), p) == 0) return true;
  return false;
}

void ParameterCheckpoint::load_module(const std::string& prefix, torch::nn::Module& module) const {
  torch::NoGradGuard guard;
  for (auto& item : module.named_parameters(true)) {
    const auto name = prefix + "." + item.key();
    const auto* a = find(name);
    if (!a) throw LoadError("checkpoint is missing parameter " + name);
    auto& param = item.value();
    const std::vector<std::int64_t> want(param.sizes().begin(), param.sizes().end());
    if (a->shape != want)
      throw LoadError("shape mismatch for " + name + ": stored " + shape_text(a->shape) +
                      ", expected " + shape_text(want));
    auto src = torch::from_blob(const_cast<float*>(a->data.data()), param.sizes(), torch::kFloat);
    param.copy_(src.to(param.dtype()));
  }
}

std::string ParameterCheckpoint::serialize() const {
  bin::Writer w;
  w.bytes(kMagic);
  w.u32(kVersion);
  std::string meta;
  for (const auto& [k, v] : metadata) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw UsageError("metadata entries may not contain '=' in keys or newlines");
    meta += k + "=" + v + "\n";
  }
  w.str(meta);
  w.u32(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    w.str(a.name);
    w.u32(static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) w.i64(d);
    w.u64(a.data.size());
  }
  for (const auto& a : arrays) w.floats(a.data);
  return w.data();
}

ParameterCheckpoint ParameterCheckpoint::parse(std::string_view bytes) {
  bin::Reader r(bytes);
  if (r.bytes(4, "magic") != kMagic) throw LoadError("bad magic: not a PAGN checkpoint");
  const auto version = r.u32("version");
  if (version != kVersion)
    throw LoadError("version mismatch: file has " + std::to_string(version) + ", reader expects " +
                    std::to_string(kVersion));
  ParameterCheckpoint ck;
  std::istringstream meta(r.str("metadata"));
  for (std::string line; std::getline(meta, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw LoadError("malformed metadata line: " + line);
    ck.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto count = r.u32("manifest count");
  ck.arrays.resize(count);
  for (auto& a : ck.arrays) {
    a.name = r.str("manifest name");
    const auto rank = r.u32("manifest rank");
    std::int64_t expect = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      a.shape.push_back(r.i64("manifest shape"));
      expect *= a.shape.back();
    }
    const auto elements = r.u64("manifest element count");
    if (static_cast<std::int64_t>(elements) != expect)
      throw LoadError("manifest element count disagrees with shape for " + a.name);
    a.data.resize(elements);
  }
  for (auto& a : ck.arrays) r.floats(a.data, ("payload " + a.name).c_str());
  if (!r.done()) throw LoadError("trailing bytes after payloads");
  return ck;
}

void ParameterCheckpoint::save(const std::string& path) const { bin::write_file(path, serialize()); }

ParameterCheckpoint ParameterCheckpoint::load(const std::string& path) {
  return parse(bin::read_file(path));
}

void ParameterCheckpoint::require_env_hash(std::uint64_t expected) const {
  const auto it = metadata.find("env_hash");
  if (it == metadata.end()) throw LoadError("env_hash missing from checkpoint metadata");
  if (it->second != hash_hex(expected))
    throw LoadError("env_hash mismatch: checkpoint " + it->second + ", environment " +
                    hash_hex(expected));
}

std::uint64_t parameter_hash(const torch::nn::Module& module) {
  std::string bytes;
  for (const auto& item : module.named_parameters(true)) {
    auto t = item.value().detach().to(torch::kCPU).contiguous();
    bytes += item.key();
    bytes.append(static_cast<const char*>(t.data_ptr()), t.nbytes());
  }
  return fnv1a64(bytes);
}

}  // namespace pagnet
