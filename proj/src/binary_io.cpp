#include "nag/binary_io.hpp"

#include <algorithm>

namespace nag::io {

void StreamReader::bytes(std::span<std::uint8_t> out) {
  in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (static_cast<std::size_t>(in_.gcount()) != out.size())
    throw LoadError(LoadFailure::truncated, "truncated " + what_);
}

std::string StreamReader::text(std::size_t len) {
  std::string s(len, '\0');
  bytes({reinterpret_cast<std::uint8_t*>(s.data()), len});
  return s;
}

void StreamReader::f64_array(std::span<double> out) {
  constexpr std::size_t chunk = 1 << 16;
  for (std::size_t off = 0; off < out.size(); off += chunk) {
    const std::size_t len = std::min(chunk, out.size() - off);
    auto dst = out.subspan(off, len);
    bytes({reinterpret_cast<std::uint8_t*>(dst.data()), len * sizeof(double)});
    if constexpr (std::endian::native == std::endian::big) {
      for (double& v : dst) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        bits = __builtin_bswap64(bits);
        v = std::bit_cast<double>(bits);
      }
    }
  }
}

void StreamReader::expect_end() {
  if (in_.peek() != std::char_traits<char>::eof())
    throw LoadError(LoadFailure::trailing_bytes, what_ + " has trailing bytes");
}

void write_f64_array(std::ostream& out, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      auto bits = __builtin_bswap64(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
}

std::ifstream open_for_read(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadFailure::not_found, what + " not found: " + path);
  return in;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  return out;
}

}  // namespace nag::io
