#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "nag/errors.hpp"

namespace nag::io {

// Little-endian encoder for fixed-layout binary headers.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void text(const std::string& s) {
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void zeros(std::size_t count) { buf_.insert(buf_.end(), count, 0); }

  const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
  template <typename T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

// Little-endian decoder over a stream; short reads raise LoadError(truncated).
class StreamReader {
 public:
  StreamReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  std::uint8_t u8() { return get_le<std::uint8_t>(); }
  std::uint16_t u16() { return get_le<std::uint16_t>(); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  void bytes(std::span<std::uint8_t> out);
  std::string text(std::size_t len);
  void f64_array(std::span<double> out);
  // Throws LoadError(trailing_bytes) unless the stream is exhausted.
  void expect_end();

 private:
  template <typename T>
  T get_le() {
    std::uint8_t raw[sizeof(T)];
    bytes(raw);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(raw[i]) << (8 * i));
    return v;
  }
  std::istream& in_;
  std::string what_;
};

void write_f64_array(std::ostream& out, std::span<const double> values);

std::ifstream open_for_read(const std::string& path, const std::string& what);
std::ofstream open_for_write(const std::string& path);

}  // namespace nag::io
