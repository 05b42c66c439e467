#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace offpath::net {

struct Ipv4Addr {
  std::uint32_t value = 0;

  constexpr Ipv4Addr() = default;
  constexpr explicit Ipv4Addr(std::uint32_t v) : value(v) {}
  constexpr Ipv4Addr(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
      : value((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) |
              (std::uint32_t{c} << 8) | std::uint32_t{d}) {}

  friend constexpr auto operator<=>(Ipv4Addr, Ipv4Addr) = default;

  std::string to_string() const;
  static std::optional<Ipv4Addr> parse(std::string_view text);
};

struct Ipv4Prefix {
  Ipv4Addr base;
  int length = 32;

  std::uint64_t size() const { return std::uint64_t{1} << (32 - length); }
  Ipv4Addr at(std::uint64_t offset) const;
  bool contains(Ipv4Addr addr) const;

  std::string to_string() const;
  // "a.b.c.d/n"; host bits of the base are cleared.
  static std::optional<Ipv4Prefix> parse(std::string_view text);
};

enum class HostId : std::uint32_t {};

}  // namespace offpath::net

template <>
struct std::hash<offpath::net::Ipv4Addr> {
  std::size_t operator()(offpath::net::Ipv4Addr a) const noexcept {
    return std::hash<std::uint32_t>{}(a.value);
  }
};
