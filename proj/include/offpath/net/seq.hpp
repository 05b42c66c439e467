#pragma once

#include <cassert>
#include <cstdint>

// Sequence-space arithmetic. Every operation is modulo 2^32.
namespace offpath::net {

inline constexpr std::uint64_t kSeqSpace = std::uint64_t{1} << 32;
inline constexpr std::uint32_t kHalfSeqSpace = std::uint32_t{1} << 31;

// True iff x is one of {lo, lo+1, ..., lo+size} mod 2^32.
constexpr bool seq_in_window(std::uint32_t x, std::uint32_t lo, std::uint32_t size) {
  assert(size < kHalfSeqSpace);
  return static_cast<std::uint32_t>(x - lo) <= size;
}

// Forward distance from `from` to `to`.
constexpr std::uint32_t seq_distance(std::uint32_t from, std::uint32_t to) {
  return to - from;
}

constexpr bool seq_before(std::uint32_t a, std::uint32_t b) {
  return static_cast<std::int32_t>(a - b) < 0;
}

}  // namespace offpath::net
