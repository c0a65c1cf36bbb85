#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pfplm {

/// Virtual or wall-clock time since an arbitrary origin. Simulations start at 0.
using Timestamp = std::chrono::nanoseconds;
using Duration = std::chrono::nanoseconds;

/// 128-bit IPv6 address in network byte order.
struct Ipv6Address {
  std::array<std::uint8_t, 16> bytes{};

  auto operator<=>(const Ipv6Address&) const = default;

  /// Parses textual form ("2001:db8::1"). Returns nullopt on malformed input.
  static std::optional<Ipv6Address> parse(std::string_view text);
  /// Like parse() but throws ConfigError.
  static Ipv6Address from_string(std::string_view text);
  std::string to_string() const;

  /// Builds an address from its high and low 64-bit halves (host order).
  static Ipv6Address from_u64(std::uint64_t hi, std::uint64_t lo);
};

/// A segment identifier is an IPv6 address.
using Sid = Ipv6Address;

/// The two alternate-marking colors. The enumerator value is the wire bit.
enum class Color : std::uint8_t { A = 0, B = 1 };

constexpr Color opposite(Color c) { return c == Color::A ? Color::B : Color::A; }
constexpr std::size_t color_index(Color c) { return static_cast<std::size_t>(c); }
constexpr std::string_view to_string(Color c) { return c == Color::A ? "A" : "B"; }

std::optional<Color> parse_color(std::string_view text);

}  // namespace pfplm
