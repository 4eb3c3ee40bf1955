#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "quadtask/error.hpp"

namespace quadtask {

using Bytes = std::vector<std::byte>;

// Little-endian writer used by every chunk payload encoding.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<std::byte>(v)); }

  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>(v >> s));
  }

  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) u8(static_cast<std::uint8_t>(v >> s));
  }

  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void f64s(std::span<const double> vs) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto old = out_.size();
      out_.resize(old + vs.size_bytes());
      if (!vs.empty()) std::memcpy(out_.data() + old, vs.data(), vs.size_bytes());
    } else {
      for (double v : vs) f64(v);
    }
  }

  void raw(std::span<const std::byte> bs) { out_.insert(out_.end(), bs.begin(), bs.end()); }

  void reserve(std::size_t n) { out_.reserve(n); }
  std::size_t size() const { return out_.size(); }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int s = 0; s < 32; s += 8) v |= std::uint32_t{static_cast<std::uint8_t>(in_[pos_++])} << s;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int s = 0; s < 64; s += 8) v |= std::uint64_t{static_cast<std::uint8_t>(in_[pos_++])} << s;
    return v;
  }

  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

  double f64() { return std::bit_cast<double>(u64()); }

  void f64s(std::span<double> out) {
    need(out.size_bytes());
    if constexpr (std::endian::native == std::endian::little) {
      if (!out.empty()) std::memcpy(out.data(), in_.data() + pos_, out.size_bytes());
      pos_ += out.size_bytes();
    } else {
      for (double& v : out) v = f64();
    }
  }

  bool at_end() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("truncated payload");
  }

  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

}  // namespace quadtask
