#include "pfplm/types.hpp"

#include <arpa/inet.h>

#include <string>

#include "pfplm/error.hpp"

namespace pfplm {

std::optional<Ipv6Address> Ipv6Address::parse(std::string_view text) {
  std::string buf(text);
  Ipv6Address addr;
  if (inet_pton(AF_INET6, buf.c_str(), addr.bytes.data()) != 1) return std::nullopt;
  return addr;
}

Ipv6Address Ipv6Address::from_string(std::string_view text) {
  auto addr = parse(text);
  if (!addr) throw ConfigError("invalid IPv6 address '" + std::string(text) + "'");
  return *addr;
}

std::string Ipv6Address::to_string() const {
  char buf[INET6_ADDRSTRLEN];
  inet_ntop(AF_INET6, bytes.data(), buf, sizeof(buf));
  return buf;
}

Ipv6Address Ipv6Address::from_u64(std::uint64_t hi, std::uint64_t lo) {
  Ipv6Address addr;
  for (int i = 0; i < 8; ++i) {
    addr.bytes[i] = static_cast<std::uint8_t>(hi >> (56 - 8 * i));
    addr.bytes[8 + i] = static_cast<std::uint8_t>(lo >> (56 - 8 * i));
  }
  return addr;
}

std::optional<Color> parse_color(std::string_view text) {
  if (text == "A" || text == "a") return Color::A;
  if (text == "B" || text == "b") return Color::B;
  return std::nullopt;
}

}  // namespace pfplm
