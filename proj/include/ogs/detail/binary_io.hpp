#pragma once

// Little-endian encode/decode helpers shared by the OGSM and OGPM formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "ogs/errors.hpp"

namespace ogs::detail {

class ByteWriter {
 public:
  void bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<char>& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

  void expect_magic(const char (&magic)[5]) {
    need(4, "truncated magic");
    if (std::memcmp(buf_.data(), magic, 4) != 0) throw FormatError(what_ + ": bad magic", 0);
    pos_ = 4;
  }
  std::uint32_t u32() {
    need(4, "truncated field");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8, "truncated field");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

  /// Verifies n more bytes are present before a bulk read.
  void need(std::size_t n, const char* msg) const {
    if (remaining() < n) throw FormatError(what_ + ": " + msg, pos_);
  }

 private:
  const std::vector<char>& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<char>& data);

}  // namespace ogs::detail
