#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

#include "ddsd/error.hpp"

namespace ddsd {

namespace detail {

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return value;
  }
}

}  // namespace detail

// Appends little-endian scalars to a byte string.
class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    const T le = detail::to_little(value);
    char raw[sizeof(T)];
    std::memcpy(raw, &le, sizeof(T));
    bytes_.append(raw, sizeof(T));
  }

  void put_bytes(std::string_view raw) { bytes_.append(raw); }

  void put_string(std::string_view text) {
    put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
    bytes_.append(text);
  }

  const std::string& bytes() const { return bytes_; }
  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

// Reads little-endian scalars; running past the end raises DataError with the
// byte offset of the failed read.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes, std::string context = "buffer")
      : bytes_(bytes), context_(std::move(context)) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return detail::to_little(value);
  }

  std::string_view get_bytes(std::size_t count) {
    require(count);
    std::string_view out = bytes_.substr(offset_, count);
    offset_ += count;
    return out;
  }

  std::string get_string() {
    const auto length = get<std::uint32_t>();
    return std::string(get_bytes(length));
  }

  std::size_t offset() const { return offset_; }
  const std::string& context() const { return context_; }
  bool at_end() const { return offset_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - offset_; }

 private:
  void require(std::size_t count) const {
    if (bytes_.size() - offset_ < count) {
      throw DataError(context_ + ": truncated at byte offset " + std::to_string(offset_) +
                      " (needed " + std::to_string(count) + " bytes, " +
                      std::to_string(bytes_.size() - offset_) + " available)");
    }
  }

  std::string_view bytes_;
  std::string context_;
  std::size_t offset_ = 0;
};

}  // namespace ddsd
