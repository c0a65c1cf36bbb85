#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pfplm/sid_list.hpp"
#include "pfplm/types.hpp"

// Bit-exact IPv6 / Segment Routing Header (routing type 4) / UDP codec and the
// DS-field alternate-marking helpers. All functions are pure.
namespace pfplm::codec {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kProtoIpv4 = 4;
inline constexpr std::uint8_t kProtoUdp = 17;
inline constexpr std::uint8_t kProtoIpv6 = 41;
inline constexpr std::uint8_t kProtoRouting = 43;
inline constexpr std::uint8_t kProtoNoNext = 59;
inline constexpr std::uint8_t kRoutingTypeSrh = 4;

inline constexpr std::size_t kIpv6HeaderSize = 40;
inline constexpr std::size_t kSrhFixedSize = 8;
inline constexpr std::size_t kUdpHeaderSize = 8;

// The version nibble is implicit: it always encodes and decodes as 6.
struct Ipv6Header {
  std::uint8_t traffic_class = 0;
  std::uint32_t flow_label = 0;  // 20 bits
  std::uint16_t payload_length = 0;  // recomputed by encode_packet()
  std::uint8_t next_header = kProtoNoNext;
  std::uint8_t hop_limit = 64;
  Ipv6Address src;
  Ipv6Address dst;

  bool operator==(const Ipv6Header&) const = default;
};

/// SRH with segment_list in wire order: segment_list[0] is the final segment.
/// hdr_ext_len and last_entry are derived from the list size.
struct SegmentRoutingHeader {
  std::uint8_t next_header = kProtoIpv6;
  std::uint8_t segments_left = 0;
  std::uint8_t flags = 0;
  std::uint16_t tag = 0;
  std::vector<Sid> segment_list;

  static constexpr std::uint8_t routing_type = kRoutingTypeSrh;
  std::uint8_t hdr_ext_len() const { return static_cast<std::uint8_t>(2 * segment_list.size()); }
  std::uint8_t last_entry() const { return static_cast<std::uint8_t>(segment_list.size() - 1); }
  std::size_t wire_size() const { return kSrhFixedSize + 16 * segment_list.size(); }

  /// Segment list in path order. Throws MatcherError if it exceeds kMaxSids.
  SidList path() const;

  bool operator==(const SegmentRoutingHeader&) const = default;
};

struct UdpHeader {
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint16_t length = 0;
  std::uint16_t checksum = 0;

  bool operator==(const UdpHeader&) const = default;
};

/// Parsed view of an IPv6 packet. Everything after the (optional) SRH is
/// opaque payload.
struct PacketView {
  Ipv6Header ip;
  std::optional<SegmentRoutingHeader> srh;
  Bytes payload;

  bool operator==(const PacketView&) const = default;
};

/// Writes the view to wire format. payload_length is computed; an SRH forces
/// ip.next_header to 43. Throws CodecError on an empty or oversize SID list.
Bytes encode_packet(const PacketView& view);

/// Parses and validates. Throws CodecError on any malformed header.
PacketView decode_packet(std::span<const std::uint8_t> octets);

// --- DS-field marking -------------------------------------------------------

/// Bit 0 of the traffic class carries the color, bit 1 the monitored flag.
inline constexpr std::uint8_t kColorBit = 0x01;
inline constexpr std::uint8_t kMonitoredBit = 0x02;
inline constexpr std::uint8_t kMarkMask = kColorBit | kMonitoredBit;

struct ColorMark {
  Color color = Color::A;
  bool monitored = false;

  bool operator==(const ColorMark&) const = default;
};

constexpr std::uint8_t mark_traffic_class(std::uint8_t tc, Color c) {
  return static_cast<std::uint8_t>((tc & ~kMarkMask) | kMonitoredBit |
                                   (c == Color::B ? kColorBit : 0));
}

constexpr ColorMark read_mark(std::uint8_t tc) {
  return {(tc & kColorBit) ? Color::B : Color::A, (tc & kMonitoredBit) != 0};
}

PacketView set_color(PacketView packet, Color color);
/// nullopt when the monitored flag is clear.
std::optional<Color> get_color(const PacketView& packet);

/// In-place variants on wire bytes. Caller guarantees >= 2 bytes of IPv6.
void set_color_in_place(std::span<std::uint8_t> packet, Color color);
std::uint8_t traffic_class_of(std::span<const std::uint8_t> packet);
std::optional<Color> peek_color(std::span<const std::uint8_t> packet);

// --- SRv6 encapsulation -----------------------------------------------------

struct EncapOptions {
  Ipv6Address source;
  std::uint8_t hop_limit = 64;
  std::uint8_t traffic_class = 0;  // outer DS field, marks included
};

/// H.Encaps-style: new outer IPv6 + SRH carrying `sids`, inner as payload.
/// outer dst = first path segment, segments_left = size - 1. The inner packet
/// is opaque apart from its version nibble, which selects the next header.
PacketView encapsulate(std::span<const std::uint8_t> inner, const SidList& sids,
                       const EncapOptions& options = {});

/// encode_packet(encapsulate(...)) without the intermediate copy.
Bytes encapsulate_wire(std::span<const std::uint8_t> inner, const SidList& sids,
                       const EncapOptions& options = {});

/// Returns the inner packet. Throws CodecError(kNotFinalSegment) when
/// segments_left != 0 and kNoInnerPacket when nothing is encapsulated.
Bytes decapsulate(const PacketView& packet);

/// Models traversal of the SR path: segments_left := 0, dst := final SID.
void advance_to_final_segment(PacketView& packet);
void advance_to_final_segment_in_place(std::span<std::uint8_t> packet);

// --- Zero-copy inspection ---------------------------------------------------

struct SrhRef {
  std::uint8_t next_header = 0;
  std::uint8_t segments_left = 0;
  std::span<const std::uint8_t> segments;  // wire order, 16 bytes each

  std::size_t segment_count() const { return segments.size() / 16; }
  Sid segment(std::size_t wire_index) const;
  /// nullopt when the list is empty or exceeds kMaxSids.
  std::optional<SidList> path() const;
};

struct OuterRef {
  std::uint8_t traffic_class = 0;
  std::uint8_t next_header = 0;  // of the fixed header
  std::optional<SrhRef> srh;
  std::size_t payload_offset = kIpv6HeaderSize;
  std::uint8_t payload_protocol() const { return srh ? srh->next_header : next_header; }
};

/// Same validation as decode_packet() without copying.
OuterRef peek_outer(std::span<const std::uint8_t> octets);

// --- UDP over IPv6 ----------------------------------------------------------

struct UdpDatagram {
  Ipv6Header ip;
  UdpHeader udp;
  Bytes payload;
};

/// Builds IPv6 + UDP with length and checksum filled in.
Bytes encode_udp6(const Ipv6Address& src, const Ipv6Address& dst, std::uint16_t src_port,
                  std::uint16_t dst_port, std::span<const std::uint8_t> payload,
                  std::uint8_t traffic_class = 0);

/// nullopt if the packet is not IPv6 + UDP (no extension headers) or the UDP
/// length is inconsistent. Throws CodecError for malformed IPv6.
std::optional<UdpDatagram> decode_udp6(std::span<const std::uint8_t> octets);

std::uint16_t udp6_checksum(const Ipv6Address& src, const Ipv6Address& dst,
                            std::span<const std::uint8_t> udp_segment);

// --- Hex helpers for golden vectors -----------------------------------------

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Accepts whitespace between digits. Throws CodecError on odd length or bad digits.
Bytes from_hex(std::string_view text);

}  // namespace pfplm::codec
