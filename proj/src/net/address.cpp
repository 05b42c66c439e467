#include "offpath/net/address.hpp"

#include <charconv>

#include <fmt/format.h>

namespace offpath::net {

std::string Ipv4Addr::to_string() const {
  return fmt::format("{}.{}.{}.{}", value >> 24, (value >> 16) & 0xff, (value >> 8) & 0xff,
                     value & 0xff);
}

std::optional<Ipv4Addr> Ipv4Addr::parse(std::string_view text) {
  std::uint32_t out = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 4; ++i) {
    if (i > 0) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
    unsigned octet = 0;
    auto [next, ec] = std::from_chars(p, end, octet);
    if (ec != std::errc{} || next == p || next - p > 3 || octet > 255) return std::nullopt;
    out = (out << 8) | octet;
    p = next;
  }
  if (p != end) return std::nullopt;
  return Ipv4Addr{out};
}

Ipv4Addr Ipv4Prefix::at(std::uint64_t offset) const {
  return Ipv4Addr{static_cast<std::uint32_t>(base.value + (offset % size()))};
}

bool Ipv4Prefix::contains(Ipv4Addr addr) const {
  if (length == 0) return true;
  std::uint32_t mask = ~std::uint32_t{0} << (32 - length);
  return (addr.value & mask) == (base.value & mask);
}

std::string Ipv4Prefix::to_string() const { return fmt::format("{}/{}", base.to_string(), length); }

std::optional<Ipv4Prefix> Ipv4Prefix::parse(std::string_view text) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  auto addr = Ipv4Addr::parse(text.substr(0, slash));
  if (!addr) return std::nullopt;
  auto len_text = text.substr(slash + 1);
  int len = -1;
  auto [next, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), len);
  if (ec != std::errc{} || next != len_text.data() + len_text.size() || len < 0 || len > 32)
    return std::nullopt;
  std::uint32_t mask = len == 0 ? 0 : ~std::uint32_t{0} << (32 - len);
  return Ipv4Prefix{Ipv4Addr{addr->value & mask}, len};
}

}  // namespace offpath::net
