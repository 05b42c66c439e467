#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace offpath::victim {

struct SipKey {
  std::uint64_t k0 = 0;
  std::uint64_t k1 = 0;
};

// SipHash-2-4.
std::uint64_t siphash24(const SipKey& key, std::span<const std::uint8_t> data);

}  // namespace offpath::victim
