#include "pfplm/codec.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "pfplm/error.hpp"

namespace pfplm::codec {

namespace {

void put16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 8);
  p[1] = static_cast<std::uint8_t>(v);
}

std::uint16_t get16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

void write_fixed_header(std::uint8_t* p, const Ipv6Header& ip, std::uint16_t payload_length,
                        std::uint8_t next_header) {
  const std::uint32_t word = (6u << 28) | (std::uint32_t{ip.traffic_class} << 20) |
                             (ip.flow_label & 0xfffffu);
  p[0] = static_cast<std::uint8_t>(word >> 24);
  p[1] = static_cast<std::uint8_t>(word >> 16);
  p[2] = static_cast<std::uint8_t>(word >> 8);
  p[3] = static_cast<std::uint8_t>(word);
  put16(p + 4, payload_length);
  p[6] = next_header;
  p[7] = ip.hop_limit;
  std::memcpy(p + 8, ip.src.bytes.data(), 16);
  std::memcpy(p + 24, ip.dst.bytes.data(), 16);
}

Ipv6Header read_fixed_header(const std::uint8_t* p) {
  Ipv6Header ip;
  ip.traffic_class = static_cast<std::uint8_t>(((p[0] & 0x0f) << 4) | (p[1] >> 4));
  ip.flow_label = (std::uint32_t{p[1] & 0x0fu} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
  ip.payload_length = get16(p + 4);
  ip.next_header = p[6];
  ip.hop_limit = p[7];
  std::memcpy(ip.src.bytes.data(), p + 8, 16);
  std::memcpy(ip.dst.bytes.data(), p + 24, 16);
  return ip;
}

void check_segment_count(std::size_t n) {
  if (n == 0) throw CodecError(CodecErrc::kEmptySidList, "segment list is empty");
  if (n > kMaxSids) {
    throw CodecError(CodecErrc::kTooManySids,
                     "segment list has " + std::to_string(n) + " SIDs (max 16)");
  }
}

std::uint16_t checked_payload_length(std::size_t n) {
  if (n > 0xffff) throw CodecError(CodecErrc::kPayloadTooLarge, "payload exceeds 65535 bytes");
  return static_cast<std::uint16_t>(n);
}

void write_srh(std::uint8_t* p, std::uint8_t next_header, std::uint8_t segments_left,
               std::uint8_t flags, std::uint16_t tag, std::size_t count) {
  p[0] = next_header;
  p[1] = static_cast<std::uint8_t>(2 * count);
  p[2] = kRoutingTypeSrh;
  p[3] = segments_left;
  p[4] = static_cast<std::uint8_t>(count - 1);
  p[5] = flags;
  put16(p + 6, tag);
}

std::uint8_t inner_protocol(std::span<const std::uint8_t> inner) {
  if (inner.empty()) throw CodecError(CodecErrc::kNoInnerPacket, "inner packet is empty");
  switch (inner[0] >> 4) {
    case 6:
      return kProtoIpv6;
    case 4:
      return kProtoIpv4;
    default:
      throw CodecError(CodecErrc::kMalformedInner,
                       "inner packet version " + std::to_string(inner[0] >> 4) +
                           " is neither 4 nor 6");
  }
}

}  // namespace

SidList SegmentRoutingHeader::path() const { return SidList::from_wire_order(segment_list); }

Bytes encode_packet(const PacketView& view) {
  std::size_t ext = 0;
  if (view.srh) {
    check_segment_count(view.srh->segment_list.size());
    ext = view.srh->wire_size();
  }
  const auto payload_length = checked_payload_length(ext + view.payload.size());

  Bytes out(kIpv6HeaderSize + payload_length);
  std::uint8_t* p = out.data();
  write_fixed_header(p, view.ip, payload_length, view.srh ? kProtoRouting : view.ip.next_header);
  p += kIpv6HeaderSize;
  if (view.srh) {
    const auto& srh = *view.srh;
    write_srh(p, srh.next_header, srh.segments_left, srh.flags, srh.tag, srh.segment_list.size());
    p += kSrhFixedSize;
    for (const auto& sid : srh.segment_list) {
      std::memcpy(p, sid.bytes.data(), 16);
      p += 16;
    }
  }
  if (!view.payload.empty()) std::memcpy(p, view.payload.data(), view.payload.size());
  return out;
}

OuterRef peek_outer(std::span<const std::uint8_t> octets) {
  if (octets.size() < kIpv6HeaderSize) {
    throw CodecError(CodecErrc::kTruncated, "truncated IPv6 header (" +
                                                std::to_string(octets.size()) + " bytes)");
  }
  if ((octets[0] >> 4) != 6) {
    throw CodecError(CodecErrc::kBadVersion,
                     "IP version " + std::to_string(octets[0] >> 4) + " is not 6");
  }
  const std::size_t payload_length = get16(octets.data() + 4);
  if (payload_length != octets.size() - kIpv6HeaderSize) {
    if (payload_length > octets.size() - kIpv6HeaderSize) {
      throw CodecError(CodecErrc::kTruncated, "truncated packet: payload length " +
                                                  std::to_string(payload_length) + ", have " +
                                                  std::to_string(octets.size() - kIpv6HeaderSize));
    }
    throw CodecError(CodecErrc::kLengthMismatch, "trailing bytes after IPv6 payload");
  }

  OuterRef ref;
  ref.traffic_class = static_cast<std::uint8_t>(((octets[0] & 0x0f) << 4) | (octets[1] >> 4));
  ref.next_header = octets[6];
  if (ref.next_header != kProtoRouting) return ref;

  auto rest = octets.subspan(kIpv6HeaderSize);
  if (rest.size() < kSrhFixedSize) {
    throw CodecError(CodecErrc::kTruncatedExtensionHeader, "truncated extension header");
  }
  if (rest[2] != kRoutingTypeSrh) {
    throw CodecError(CodecErrc::kBadRoutingType,
                     "routing type " + std::to_string(rest[2]) + " is not SRH (4)");
  }
  const std::size_t hdr_ext_len = rest[1];
  const std::size_t srh_size = kSrhFixedSize + 8 * hdr_ext_len;
  if (srh_size > rest.size()) {
    throw CodecError(CodecErrc::kTruncatedExtensionHeader, "truncated extension header");
  }
  const std::size_t last_entry = rest[4];
  if (hdr_ext_len == 0 || hdr_ext_len % 2 != 0 || hdr_ext_len != 2 * (last_entry + 1)) {
    throw CodecError(CodecErrc::kLengthMismatch,
                     "hdr_ext_len " + std::to_string(hdr_ext_len) +
                         " inconsistent with last_entry " + std::to_string(last_entry));
  }
  if (rest[3] > last_entry) {
    throw CodecError(CodecErrc::kInvalidSrh, "segments_left " + std::to_string(rest[3]) +
                                                 " exceeds last_entry " +
                                                 std::to_string(last_entry));
  }
  SrhRef srh;
  srh.next_header = rest[0];
  srh.segments_left = rest[3];
  srh.segments = rest.subspan(kSrhFixedSize, srh_size - kSrhFixedSize);
  ref.srh = srh;
  ref.payload_offset = kIpv6HeaderSize + srh_size;
  return ref;
}

PacketView decode_packet(std::span<const std::uint8_t> octets) {
  const OuterRef ref = peek_outer(octets);
  PacketView view;
  view.ip = read_fixed_header(octets.data());
  if (ref.srh) {
    const auto* p = octets.data() + kIpv6HeaderSize;
    SegmentRoutingHeader srh;
    srh.next_header = p[0];
    srh.segments_left = p[3];
    srh.flags = p[5];
    srh.tag = get16(p + 6);
    srh.segment_list.resize(ref.srh->segment_count());
    for (std::size_t i = 0; i < srh.segment_list.size(); ++i) {
      srh.segment_list[i] = ref.srh->segment(i);
    }
    view.srh = std::move(srh);
  }
  view.payload.assign(octets.begin() + static_cast<std::ptrdiff_t>(ref.payload_offset),
                      octets.end());
  return view;
}

Sid SrhRef::segment(std::size_t wire_index) const {
  Sid sid;
  std::memcpy(sid.bytes.data(), segments.data() + 16 * wire_index, 16);
  return sid;
}

std::optional<SidList> SrhRef::path() const {
  const std::size_t n = segment_count();
  if (n == 0 || n > kMaxSids) return std::nullopt;
  std::array<Sid, kMaxSids> tmp;
  for (std::size_t i = 0; i < n; ++i) tmp[n - 1 - i] = segment(i);
  return SidList(std::span<const Sid>(tmp.data(), n));
}

PacketView set_color(PacketView packet, Color color) {
  packet.ip.traffic_class = mark_traffic_class(packet.ip.traffic_class, color);
  return packet;
}

std::optional<Color> get_color(const PacketView& packet) {
  const auto mark = read_mark(packet.ip.traffic_class);
  if (!mark.monitored) return std::nullopt;
  return mark.color;
}

// The traffic class straddles bytes 0 and 1; its two low bits are bits 4-5 of byte 1.
void set_color_in_place(std::span<std::uint8_t> packet, Color color) {
  const std::uint8_t tc = traffic_class_of(packet);
  const std::uint8_t marked = mark_traffic_class(tc, color);
  packet[1] = static_cast<std::uint8_t>((packet[1] & 0x0f) | ((marked & 0x0f) << 4));
}

std::uint8_t traffic_class_of(std::span<const std::uint8_t> packet) {
  return static_cast<std::uint8_t>(((packet[0] & 0x0f) << 4) | (packet[1] >> 4));
}

std::optional<Color> peek_color(std::span<const std::uint8_t> packet) {
  const auto mark = read_mark(traffic_class_of(packet));
  if (!mark.monitored) return std::nullopt;
  return mark.color;
}

PacketView encapsulate(std::span<const std::uint8_t> inner, const SidList& sids,
                       const EncapOptions& options) {
  if (sids.empty()) throw CodecError(CodecErrc::kEmptySidList, "segment list is empty");
  PacketView view;
  view.ip.hop_limit = options.hop_limit;
  view.ip.traffic_class = options.traffic_class;
  view.ip.src = options.source;
  view.ip.dst = sids.front();
  view.ip.next_header = kProtoRouting;
  SegmentRoutingHeader srh;
  srh.next_header = inner_protocol(inner);
  srh.segments_left = static_cast<std::uint8_t>(sids.size() - 1);
  srh.segment_list.assign(sids.path().rbegin(), sids.path().rend());
  view.srh = std::move(srh);
  view.payload.assign(inner.begin(), inner.end());
  view.ip.payload_length = checked_payload_length(view.srh->wire_size() + inner.size());
  return view;
}

Bytes encapsulate_wire(std::span<const std::uint8_t> inner, const SidList& sids,
                       const EncapOptions& options) {
  if (sids.empty()) throw CodecError(CodecErrc::kEmptySidList, "segment list is empty");
  const std::uint8_t proto = inner_protocol(inner);
  const std::size_t n = sids.size();
  const std::size_t srh_size = kSrhFixedSize + 16 * n;
  const auto payload_length = checked_payload_length(srh_size + inner.size());

  Bytes out(kIpv6HeaderSize + payload_length);
  std::uint8_t* p = out.data();
  Ipv6Header ip;
  ip.hop_limit = options.hop_limit;
  ip.traffic_class = options.traffic_class;
  ip.src = options.source;
  ip.dst = sids.front();
  write_fixed_header(p, ip, payload_length, kProtoRouting);
  p += kIpv6HeaderSize;
  write_srh(p, proto, static_cast<std::uint8_t>(n - 1), 0, 0, n);
  p += kSrhFixedSize;
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(p, sids[n - 1 - i].bytes.data(), 16);
    p += 16;
  }
  std::memcpy(p, inner.data(), inner.size());
  return out;
}

Bytes decapsulate(const PacketView& packet) {
  std::uint8_t proto = packet.ip.next_header;
  if (packet.srh) {
    if (packet.srh->segments_left != 0) {
      throw CodecError(CodecErrc::kNotFinalSegment,
                       "not at final segment (segments_left = " +
                           std::to_string(packet.srh->segments_left) + ")");
    }
    proto = packet.srh->next_header;
  }
  if ((proto != kProtoIpv6 && proto != kProtoIpv4) || packet.payload.empty()) {
    throw CodecError(CodecErrc::kNoInnerPacket, "no encapsulated packet present");
  }
  return packet.payload;
}

void advance_to_final_segment(PacketView& packet) {
  if (!packet.srh || packet.srh->segment_list.empty()) return;
  packet.srh->segments_left = 0;
  packet.ip.dst = packet.srh->segment_list.front();
}

void advance_to_final_segment_in_place(std::span<std::uint8_t> packet) {
  const OuterRef ref = peek_outer(packet);
  if (!ref.srh || ref.srh->segment_count() == 0) return;
  packet[kIpv6HeaderSize + 3] = 0;
  std::memcpy(packet.data() + 24, ref.srh->segments.data(), 16);
}

std::uint16_t udp6_checksum(const Ipv6Address& src, const Ipv6Address& dst,
                            std::span<const std::uint8_t> udp_segment) {
  std::uint64_t sum = 0;
  auto add_bytes = [&sum](std::span<const std::uint8_t> b) {
    for (std::size_t i = 0; i + 1 < b.size(); i += 2) sum += get16(b.data() + i);
    if (b.size() % 2) sum += std::uint32_t{b.back()} << 8;
  };
  add_bytes(src.bytes);
  add_bytes(dst.bytes);
  sum += static_cast<std::uint32_t>(udp_segment.size());
  sum += kProtoUdp;
  add_bytes(udp_segment);
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  auto csum = static_cast<std::uint16_t>(~sum);
  return csum == 0 ? 0xffff : csum;
}

Bytes encode_udp6(const Ipv6Address& src, const Ipv6Address& dst, std::uint16_t src_port,
                  std::uint16_t dst_port, std::span<const std::uint8_t> payload,
                  std::uint8_t traffic_class) {
  const auto udp_length = checked_payload_length(kUdpHeaderSize + payload.size());
  Bytes out(kIpv6HeaderSize + udp_length);
  Ipv6Header ip;
  ip.traffic_class = traffic_class;
  ip.src = src;
  ip.dst = dst;
  write_fixed_header(out.data(), ip, udp_length, kProtoUdp);
  std::uint8_t* u = out.data() + kIpv6HeaderSize;
  put16(u, src_port);
  put16(u + 2, dst_port);
  put16(u + 4, udp_length);
  put16(u + 6, 0);
  if (!payload.empty()) std::memcpy(u + kUdpHeaderSize, payload.data(), payload.size());
  put16(u + 6, udp6_checksum(src, dst, {u, udp_length}));
  return out;
}

std::optional<UdpDatagram> decode_udp6(std::span<const std::uint8_t> octets) {
  const OuterRef ref = peek_outer(octets);
  if (ref.next_header != kProtoUdp) return std::nullopt;
  auto seg = octets.subspan(kIpv6HeaderSize);
  if (seg.size() < kUdpHeaderSize) return std::nullopt;
  UdpDatagram d;
  d.ip = read_fixed_header(octets.data());
  d.udp.src_port = get16(seg.data());
  d.udp.dst_port = get16(seg.data() + 2);
  d.udp.length = get16(seg.data() + 4);
  d.udp.checksum = get16(seg.data() + 6);
  if (d.udp.length != seg.size()) return std::nullopt;
  d.payload.assign(seg.begin() + kUdpHeaderSize, seg.end());
  return d;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out += kDigits[b >> 4];
    out += kDigits[b & 0xf];
  }
  return out;
}

Bytes from_hex(std::string_view text) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  Bytes out;
  int hi = -1;
  for (char c : text) {
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') continue;
    const int v = nibble(c);
    if (v < 0) throw CodecError(CodecErrc::kBadHex, std::string("bad hex digit '") + c + "'");
    if (hi < 0) {
      hi = v;
    } else {
      out.push_back(static_cast<std::uint8_t>((hi << 4) | v));
      hi = -1;
    }
  }
  if (hi >= 0) throw CodecError(CodecErrc::kBadHex, "odd number of hex digits");
  return out;
}

}  // namespace pfplm::codec
