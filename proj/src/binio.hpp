// Little-endian binary encode/decode helpers for the on-disk formats.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

#include "ganedit/core.hpp"

namespace ganedit::binio {

inline void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

inline void put_i64(std::string& buf, std::int64_t v) {
  put_u64(buf, static_cast<std::uint64_t>(v));
}

inline void put_f64(std::string& buf, double v) {
  put_u64(buf, std::bit_cast<std::uint64_t>(v));
}

inline void put_f32(std::string& buf, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) {
    buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  Reader(const void* data, std::size_t size)
      : data_(static_cast<const std::uint8_t*>(data)), size_(size) {}

  void read_raw(void* out, std::size_t n) {
    if (pos_ + n > size_) {
      throw IoError("unexpected end of binary data");
    }
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }

  std::uint64_t read_u64() {
    std::uint8_t b[8];
    read_raw(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
      v = (v << 8) | b[i];
    }
    return v;
  }

  std::int64_t read_i64() { return static_cast<std::int64_t>(read_u64()); }

  double read_f64() { return std::bit_cast<double>(read_u64()); }

  float read_f32() {
    std::uint8_t b[4];
    read_raw(b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | b[i];
    }
    return std::bit_cast<float>(v);
  }

  std::size_t remaining() const { return size_ - pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace ganedit::binio
