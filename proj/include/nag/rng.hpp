#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nag {

// Every random draw in the toolkit comes from a named stream derived from a
// user seed. Streams are independent of call order elsewhere in the program.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream_name);

inline std::mt19937_64 make_stream(std::uint64_t seed, std::string_view stream_name) {
  return std::mt19937_64(stream_seed(seed, stream_name));
}

// Unbiased integer in [0, bound) by rejection; stable across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound);

// Uniform double in [0, 1) built from the top 53 bits.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Fisher-Yates with uniform_below; std::shuffle is implementation-defined.
template <typename T>
void shuffle_in_place(T* first, std::size_t count, std::mt19937_64& gen) {
  for (std::size_t i = count; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(gen, i));
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace nag
