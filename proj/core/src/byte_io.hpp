// SPDX-License-Identifier: Apache-2.0
// Little-endian primitives shared by the HSF1 and HSFW codecs.
#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "hsf/error.hpp"

namespace hsf::detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& os) : os_(os) {}

  void bytes(const void* p, std::size_t n) {
    os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    written_ += n;
  }
  template <typename UInt>
  void uint(UInt v) {
    std::array<unsigned char, sizeof(UInt)> buf{};
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      buf[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    bytes(buf.data(), buf.size());
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  // Narrows a size to a u32 field, refusing values that would wrap.
  static std::uint32_t u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
      throw DimensionError(std::string(what) + " does not fit in 32 bits");
    }
    return static_cast<std::uint32_t>(v);
  }
  void string(std::string_view s) {
    uint(u32(s.size(), "string length"));
    bytes(s.data(), s.size());
  }

  std::size_t written() const noexcept { return written_; }

 private:
  std::ostream& os_;
  std::size_t written_ = 0;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> data) : data_(data) {}

  std::uint64_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

  /// Names what is being read, for truncation messages.
  void context(std::string what) { context_ = std::move(what); }
  const std::string& context() const noexcept { return context_; }

  std::span<const std::byte> take(std::size_t n) {
    if (n > remaining()) {
      throw FormatError("truncated stream while reading " + context_, pos_);
    }
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  template <typename UInt>
  UInt uint() {
    const auto b = take(sizeof(UInt));
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      v |= static_cast<UInt>(std::to_integer<unsigned>(b[i])) << (8 * i);
    }
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string string() {
    const auto len = uint<std::uint32_t>();
    const auto b = take(len);
    return {reinterpret_cast<const char*>(b.data()), b.size()};
  }

 private:
  std::span<const std::byte> data_;
  std::size_t pos_ = 0;
  std::string context_ = "header";
};

}  // namespace hsf::detail
