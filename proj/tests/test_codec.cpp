#include <gtest/gtest.h>

#include <random>

#include "pfplm/codec.hpp"
#include "pfplm/error.hpp"
#include "support/oracle.hpp"

using namespace pfplm;
using namespace pfplm::codec;

namespace {

Ipv6Address addr(const char* s) { return Ipv6Address::from_string(s); }

Bytes bare_inner() {
  PacketView inner;
  inner.ip.src = addr("2001:db8:a::1");
  inner.ip.dst = addr("2001:db8:b::1");
  return encode_packet(inner);
}

CodecErrc decode_error(const Bytes& wire) {
  try {
    decode_packet(wire);
  } catch (const CodecError& e) {
    return e.code();
  }
  ADD_FAILURE() << "packet was accepted";
  return CodecErrc::kBadHex;
}

}  // namespace

TEST(Codec, EncapsulateMatchesHandPackedLayout) {
  const std::vector<Sid> path{addr("fc00:1::1"), addr("fc00:2::1"), addr("fc00:3::1")};
  const Bytes inner = bare_inner();
  const Bytes wire = encapsulate_wire(inner, SidList(path), {addr("2001:db8::1"), 64});
  const Bytes want = oracle::pack_packet(0, 0, 64, addr("2001:db8::1"), path[0], &path,
                                         kProtoIpv6, 2, 0, inner);
  EXPECT_EQ(wire, want);
}

TEST(Codec, SrhDerivedFieldsForThreeSids) {
  const PacketView p = encapsulate(bare_inner(), SidList{addr("fc00::1"), addr("fc00::2"), addr("fc00::3")});
  ASSERT_TRUE(p.srh);
  EXPECT_EQ(p.srh->hdr_ext_len(), 6);
  EXPECT_EQ(p.srh->last_entry(), 2);
  EXPECT_EQ(p.srh->segments_left, 2);
  EXPECT_EQ(p.srh->segment_list.front(), addr("fc00::3"));  // wire order: final first
  EXPECT_EQ(p.ip.dst, addr("fc00::1"));
  EXPECT_EQ(p.srh->path(), (SidList{addr("fc00::1"), addr("fc00::2"), addr("fc00::3")}));
}

TEST(Codec, Ipv4InnerSelectsNextHeader4) {
  const Bytes v4 = {0x45, 0, 0, 20, 0, 0, 0, 0, 64, 59, 0, 0, 192, 0, 2, 1, 198, 51, 100, 1};
  EXPECT_EQ(encapsulate(v4, SidList{addr("fc00::1")}).srh->next_header, kProtoIpv4);
  EXPECT_EQ(encapsulate(bare_inner(), SidList{addr("fc00::1")}).srh->next_header, kProtoIpv6);
}

TEST(Codec, EncapsulateRejectsEmptyAndNonIpInner) {
  try {
    encapsulate(Bytes{}, SidList{addr("fc00::1")});
    FAIL();
  } catch (const CodecError& e) {
    EXPECT_EQ(e.code(), CodecErrc::kNoInnerPacket);
  }
  try {
    encapsulate(Bytes{0x10, 0, 0, 0}, SidList{addr("fc00::1")});
    FAIL();
  } catch (const CodecError& e) {
    EXPECT_EQ(e.code(), CodecErrc::kMalformedInner);
  }
}

TEST(Codec, EncodeRejectsOversizeAndEmptySegmentList) {
  PacketView p = encapsulate(bare_inner(), SidList{addr("fc00::1")});
  p.srh->segment_list.assign(17, addr("fc00::1"));
  try {
    encode_packet(p);
    FAIL();
  } catch (const CodecError& e) {
    EXPECT_EQ(e.code(), CodecErrc::kTooManySids);
  }
  p.srh->segment_list.clear();
  try {
    encode_packet(p);
    FAIL();
  } catch (const CodecError& e) {
    EXPECT_EQ(e.code(), CodecErrc::kEmptySidList);
  }
}

TEST(Codec, DecodeErrors) {
  const Bytes good = encapsulate_wire(bare_inner(), SidList{addr("fc00::1"), addr("fc00::2")});
  EXPECT_EQ(decode_error(Bytes(good.begin(), good.begin() + 39)), CodecErrc::kTruncated);

  Bytes b = good;
  b[0] = 0x45;
  EXPECT_EQ(decode_error(b), CodecErrc::kBadVersion);

  b = good;
  b[42] = 0;  // routing type 0
  EXPECT_EQ(decode_error(b), CodecErrc::kBadRoutingType);

  b = good;
  b[43] = 5;
  EXPECT_EQ(decode_error(b), CodecErrc::kInvalidSrh);

  b = good;
  b[41] = 3;  // odd hdr_ext_len
  EXPECT_EQ(decode_error(b), CodecErrc::kLengthMismatch);

  b = good;
  b.pop_back();
  EXPECT_EQ(decode_error(b), CodecErrc::kTruncated);

  b = Bytes(good.begin(), good.begin() + 46);
  b[4] = 0;
  b[5] = 6;
  EXPECT_EQ(decode_error(b), CodecErrc::kTruncatedExtensionHeader);
}

TEST(Codec, SrhDeclaringMoreSegmentsThanPresentIsTruncated) {
  Bytes b = encapsulate_wire(bare_inner(), SidList{addr("fc00::1")});
  b[41] = 8;  // 4 segments: 72 bytes of SRH, only 64 bytes follow the fixed header
  b[44] = 3;
  EXPECT_EQ(decode_error(b), CodecErrc::kTruncatedExtensionHeader);
}

TEST(Codec, ColorMarkingTouchesOnlyTwoBits) {
  for (int tc = 0; tc < 256; ++tc) {
    for (Color c : {Color::A, Color::B}) {
      const auto marked = mark_traffic_class(static_cast<std::uint8_t>(tc), c);
      EXPECT_EQ(marked & ~kMarkMask, tc & ~kMarkMask);
      EXPECT_EQ(read_mark(marked), (ColorMark{c, true}));
    }
  }
}

TEST(Codec, UnmarkedPacketHasNoColor) {
  const PacketView p = encapsulate(bare_inner(), SidList{addr("fc00::1")});
  EXPECT_FALSE(get_color(p));
  EXPECT_EQ(get_color(set_color(p, Color::B)), Color::B);
}

TEST(Codec, InPlaceColorMatchesViewColor) {
  Bytes wire = encapsulate_wire(bare_inner(), SidList{addr("fc00::1")});
  set_color_in_place(wire, Color::B);
  EXPECT_EQ(peek_color(wire), Color::B);
  EXPECT_EQ(wire, encode_packet(set_color(decode_packet(encapsulate_wire(bare_inner(), SidList{addr("fc00::1")})), Color::B)));
  // traffic class straddles bytes 0 and 1: low nibble of byte 0, high nibble of byte 1
  EXPECT_EQ(wire[0], 0x60);
  EXPECT_EQ(wire[1] >> 4, 0x03);
}

TEST(Codec, DecapsulateRequiresFinalSegment) {
  PacketView p = encapsulate(bare_inner(), SidList{addr("fc00::1"), addr("fc00::2")});
  try {
    decapsulate(p);
    FAIL();
  } catch (const CodecError& e) {
    EXPECT_EQ(e.code(), CodecErrc::kNotFinalSegment);
  }
  advance_to_final_segment(p);
  EXPECT_EQ(p.ip.dst, addr("fc00::2"));
  EXPECT_EQ(decapsulate(p), bare_inner());
}

TEST(Codec, AdvanceInPlaceAgreesWithViewVersion) {
  const SidList sids{addr("fc00::1"), addr("fc00::2"), addr("fc00::3")};
  Bytes wire = encapsulate_wire(bare_inner(), sids);
  advance_to_final_segment_in_place(wire);
  PacketView p = encapsulate(bare_inner(), sids);
  advance_to_final_segment(p);
  EXPECT_EQ(wire, encode_packet(p));
}

TEST(Codec, PeekOuterFindsSrh) {
  const Bytes wire = encapsulate_wire(bare_inner(), SidList{addr("fc00::1"), addr("fc00::2")});
  const OuterRef ref = peek_outer(wire);
  ASSERT_TRUE(ref.srh);
  EXPECT_EQ(ref.srh->segment_count(), 2u);
  EXPECT_EQ(ref.payload_offset, 40u + 8u + 32u);
  EXPECT_EQ(ref.payload_protocol(), kProtoIpv6);
  EXPECT_EQ(ref.srh->path(), (SidList{addr("fc00::1"), addr("fc00::2")}));
}

TEST(Codec, Udp6ChecksumVerifies) {
  const Bytes payload = {1, 2, 3, 4, 5};
  const Bytes wire = encode_udp6(addr("2001:db8::1"), addr("2001:db8::2"), 1234, 8862, payload);
  const auto d = decode_udp6(wire);
  ASSERT_TRUE(d);
  EXPECT_EQ(d->udp.src_port, 1234);
  EXPECT_EQ(d->udp.dst_port, 8862);
  EXPECT_EQ(d->udp.length, 13);
  EXPECT_EQ(d->payload, payload);
  // Over a segment that already carries its checksum the sum folds to 0xffff,
  // whose complement 0 is transmitted as 0xffff.
  const std::span<const std::uint8_t> seg(wire.data() + 40, wire.size() - 40);
  EXPECT_EQ(udp6_checksum(addr("2001:db8::1"), addr("2001:db8::2"), seg), 0xffff);
}

TEST(Codec, HexRoundTrip) {
  const Bytes b = {0x00, 0xab, 0xff, 0x10};
  EXPECT_EQ(to_hex(b), "00abff10");
  EXPECT_EQ(from_hex("00 AB ff\n10"), b);
  EXPECT_THROW(from_hex("abc"), CodecError);
  EXPECT_THROW(from_hex("zz"), CodecError);
}

// ≥10^4 random packets: hand-packed bytes decode to the generating fields and
// re-encode identically.
TEST(CodecProperty, RandomRoundTrip) {
  std::mt19937_64 rng(0x5eed);
  auto rand_addr = [&] { return Ipv6Address::from_u64(rng(), rng()); };
  for (int i = 0; i < 10'000; ++i) {
    const auto tc = static_cast<std::uint8_t>(rng());
    const auto fl = static_cast<std::uint32_t>(rng() & 0xfffff);
    const auto hop = static_cast<std::uint8_t>(rng());
    const Ipv6Address src = rand_addr();
    Bytes payload(rng() % 200);
    for (auto& x : payload) x = static_cast<std::uint8_t>(rng());

    const bool with_srh = rng() % 4 != 0;
    std::vector<Ipv6Address> path;
    std::uint8_t sl = 0;
    std::uint8_t srh_next = static_cast<std::uint8_t>(rng());
    if (with_srh) {
      path.resize(1 + rng() % kMaxSids);
      for (auto& s : path) s = rand_addr();
      sl = static_cast<std::uint8_t>(rng() % path.size());
    }
    const Ipv6Address dst = with_srh ? path[path.size() - 1 - sl] : rand_addr();
    const std::uint8_t nh = static_cast<std::uint8_t>(rng() % 2 ? kProtoUdp : kProtoNoNext);
    const Bytes wire = oracle::pack_packet(tc, fl, hop, src, dst, with_srh ? &path : nullptr,
                                           srh_next, sl, nh, payload);

    const PacketView v = decode_packet(wire);
    ASSERT_EQ(v.ip.traffic_class, tc);
    ASSERT_EQ(v.ip.flow_label, fl);
    ASSERT_EQ(v.ip.hop_limit, hop);
    ASSERT_EQ(v.ip.src, src);
    ASSERT_EQ(v.ip.dst, dst);
    ASSERT_EQ(v.payload, payload);
    ASSERT_EQ(v.srh.has_value(), with_srh);
    if (with_srh) {
      ASSERT_EQ(v.srh->segments_left, sl);
      ASSERT_EQ(v.srh->next_header, srh_next);
      ASSERT_EQ(v.srh->path(), SidList(path));
    } else {
      ASSERT_EQ(v.ip.next_header, nh);
    }
    ASSERT_EQ(encode_packet(v), wire) << "case " << i;
  }
}

// Truncating a valid packet anywhere must raise a CodecError, never crash.
TEST(CodecProperty, EveryTruncationIsRejected) {
  const Bytes wire = encapsulate_wire(bare_inner(), SidList{addr("fc00::1"), addr("fc00::2")});
  for (std::size_t n = 0; n < wire.size(); ++n) {
    EXPECT_THROW(decode_packet(std::span(wire.data(), n)), CodecError) << n;
  }
}

TEST(CodecProperty, RandomBytesNeverCrash) {
  std::mt19937_64 rng(99);
  int accepted = 0;
  for (int i = 0; i < 5000; ++i) {
    Bytes b(rng() % 120);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    if (b.size() >= 6 && i % 2 == 0) {
      b[0] = static_cast<std::uint8_t>(0x60 | (b[0] & 0x0f));
      if (b.size() >= 40) {
        b[4] = static_cast<std::uint8_t>((b.size() - 40) >> 8);
        b[5] = static_cast<std::uint8_t>(b.size() - 40);
      }
    }
    try {
      const PacketView v = decode_packet(b);
      ++accepted;
      EXPECT_EQ(encode_packet(v), b);
    } catch (const CodecError&) {
    }
  }
  EXPECT_GT(accepted, 0);
}
