#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pagnet/error.hpp"

namespace pagnet::bin {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void bytes(std::string_view s) { buf_.append(s); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  void floats(std::span<const float> v) { raw(v.data(), v.size_bytes()); }

  const std::string& data() const { return buf_; }

 private:
  void raw(const void* p, size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string buf_;
};

// Every read names the field so truncation errors say what was missing.
class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint8_t u8(const char* field) {
    std::uint8_t v;
    raw(&v, sizeof v, field);
    return v;
  }
  std::uint32_t u32(const char* field) {
    std::uint32_t v;
    raw(&v, sizeof v, field);
    return v;
  }
  std::uint64_t u64(const char* field) {
    std::uint64_t v;
    raw(&v, sizeof v, field);
    return v;
  }
  std::int64_t i64(const char* field) {
    std::int64_t v;
    raw(&v, sizeof v, field);
    return v;
  }
  float f32(const char* field) {
    float v;
    raw(&v, sizeof v, field);
    return v;
  }
  std::string bytes(size_t n, const char* field) {
    need(n, field);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string str(const char* field) { return bytes(u32(field), field); }
  void floats(std::span<float> out, const char* field) { raw(out.data(), out.size_bytes(), field); }

  bool done() const { return pos_ == data_.size(); }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(size_t n, const char* field) const {
    if (data_.size() - pos_ < n) throw LoadError(std::string("truncated data while reading ") + field);
  }
  void raw(void* p, size_t n, const char* field) {
    need(n, field);
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }

  std::string_view data_;
  size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view data);

}  // namespace pagnet::bin
