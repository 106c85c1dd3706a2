#pragma once

// Little-endian table encoding shared by the index reader and writer.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "search_tracker/errors.hpp"

namespace search_tracker::detail {

class ByteWriter {
 public:
  void u32(std::uint32_t value) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((value >> (8 * i)) & 0xffu));
  }
  void i32(std::int32_t value) { u32(static_cast<std::uint32_t>(value)); }
  void f32(float value) { u32(std::bit_cast<std::uint32_t>(value)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw FormatError("write failed for " + path.string());
  }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::filesystem::path& path) : name_(path.filename().string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open table " + path.string());
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t value = 0;
    for (int i = 0; i < 4; ++i) {
      value |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return value;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void expect_magic(const char (&magic)[5]) {
    need(4);
    if (std::string(bytes_.data() + pos_, 4) != std::string(magic, 4)) {
      throw FormatError(name_ + ": bad table magic");
    }
    pos_ += 4;
  }
  /// Guards element counts against the bytes that remain.
  std::uint32_t count(std::size_t min_bytes_each) {
    const auto n = u32();
    if (min_bytes_each > 0 && static_cast<std::size_t>(n) * min_bytes_each > bytes_.size() - pos_) {
      throw FormatError(name_ + ": element count exceeds payload");
    }
    return n;
  }
  void finish() const {
    if (pos_ != bytes_.size()) throw FormatError(name_ + ": trailing bytes");
  }
  [[noreturn]] void fail(const std::string& what) const { throw FormatError(name_ + ": " + what); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError(name_ + ": truncated payload");
  }

  std::string name_;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace search_tracker::detail
