#include "pfplm/golden.hpp"

#include <functional>
#include <sstream>

#include "json.hpp"
#include "pfplm/codec.hpp"
#include "pfplm/lm_protocol.hpp"

namespace pfplm::golden {

namespace {

using nlohmann::json;
using codec::Bytes;

// Thrown inside a single vector check; becomes that vector's failure detail.
struct Mismatch {
  std::string what;
};

template <class T>
void expect_eq(const std::string& field, const T& got, const T& want) {
  if (!(got == want)) {
    std::ostringstream ss;
    if constexpr (std::is_same_v<T, Ipv6Address>) {
      ss << field << ": got " << got.to_string() << ", want " << want.to_string();
    } else if constexpr (std::is_integral_v<T>) {
      ss << field << ": got " << +got << ", want " << +want;
    } else {
      ss << field << " differs";
    }
    throw Mismatch{ss.str()};
  }
}

const json& field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError(std::string("golden vector missing field '") + key + "'");
  }
  return obj.at(key);
}

template <class T>
T as_uint(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_number_unsigned()) throw ConfigError(std::string("field '") + key + "' must be unsigned");
  return static_cast<T>(v.get<std::uint64_t>());
}

Ipv6Address as_address(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_string()) throw ConfigError(std::string("field '") + key + "' must be a string");
  return Ipv6Address::from_string(v.get<std::string>());
}

Color color_named(const std::string& text) {
  const auto c = parse_color(text);
  if (!c) throw ConfigError("bad color '" + text + "'");
  return *c;
}

Color as_color(const json& obj, const char* key) { return color_named(field(obj, key).get<std::string>()); }

Bytes as_hex(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_string()) throw ConfigError(std::string("field '") + key + "' must be a hex string");
  return codec::from_hex(v.get<std::string>());
}

void check_packet(const json& vec) {
  const Bytes wire = as_hex(vec, "hex");
  const json& ip = field(vec, "ip");
  const codec::PacketView view = codec::decode_packet(wire);

  expect_eq("ip.traffic_class", view.ip.traffic_class, as_uint<std::uint8_t>(ip, "traffic_class"));
  expect_eq("ip.flow_label", view.ip.flow_label, as_uint<std::uint32_t>(ip, "flow_label"));
  expect_eq("ip.payload_length", view.ip.payload_length, as_uint<std::uint16_t>(ip, "payload_length"));
  expect_eq("ip.next_header", view.ip.next_header, as_uint<std::uint8_t>(ip, "next_header"));
  expect_eq("ip.hop_limit", view.ip.hop_limit, as_uint<std::uint8_t>(ip, "hop_limit"));
  expect_eq("ip.src", view.ip.src, as_address(ip, "src"));
  expect_eq("ip.dst", view.ip.dst, as_address(ip, "dst"));

  const json& srh = field(vec, "srh");
  if (srh.is_null()) {
    if (view.srh) throw Mismatch{"unexpected SRH"};
  } else {
    if (!view.srh) throw Mismatch{"missing SRH"};
    const auto& s = *view.srh;
    expect_eq("srh.next_header", s.next_header, as_uint<std::uint8_t>(srh, "next_header"));
    expect_eq("srh.hdr_ext_len", s.hdr_ext_len(), as_uint<std::uint8_t>(srh, "hdr_ext_len"));
    expect_eq("srh.routing_type", codec::SegmentRoutingHeader::routing_type,
              as_uint<std::uint8_t>(srh, "routing_type"));
    expect_eq("srh.segments_left", s.segments_left, as_uint<std::uint8_t>(srh, "segments_left"));
    expect_eq("srh.last_entry", s.last_entry(), as_uint<std::uint8_t>(srh, "last_entry"));
    expect_eq("srh.flags", s.flags, as_uint<std::uint8_t>(srh, "flags"));
    expect_eq("srh.tag", s.tag, as_uint<std::uint16_t>(srh, "tag"));
    const json& list = field(srh, "segment_list");
    expect_eq("srh.segment_list size", s.segment_list.size(), list.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
      expect_eq("srh.segment_list[" + std::to_string(i) + "]", s.segment_list[i],
                Ipv6Address::from_string(list.at(i).get<std::string>()));
    }
  }
  expect_eq("payload", view.payload, as_hex(vec, "payload_hex"));

  const auto mark = codec::read_mark(view.ip.traffic_class);
  expect_eq("monitored", mark.monitored, field(vec, "monitored").get<bool>());
  const json& color = field(vec, "color");
  const std::optional<Color> want =
      color.is_null() ? std::nullopt : std::optional<Color>(color_named(color.get<std::string>()));
  if (codec::get_color(view) != want) throw Mismatch{"color differs"};

  if (codec::encode_packet(view) != wire) throw Mismatch{"re-encoding is not byte-identical"};
}

lm::LmQuery query_of(const json& m) {
  return {as_uint<std::uint32_t>(m, "sender_seq"), as_color(m, "block"),
          as_uint<std::uint64_t>(m, "sender_counter")};
}

void check_lm(const json& vec) {
  const Bytes wire = as_hex(vec, "hex");
  const json& m = field(vec, "message");
  const std::string type = field(m, "type").get<std::string>();
  const lm::LmMessage msg = lm::deserialize_message(wire);
  if (type == "query") {
    const auto* q = std::get_if<lm::LmQuery>(&msg);
    if (!q) throw Mismatch{"decoded as a response"};
    expect_eq("sender_seq", q->sender_seq, as_uint<std::uint32_t>(m, "sender_seq"));
    if (q->block_number != as_color(m, "block")) throw Mismatch{"block differs"};
    expect_eq("sender_counter", q->sender_counter, as_uint<std::uint64_t>(m, "sender_counter"));
  } else if (type == "response") {
    const auto* r = std::get_if<lm::LmResponse>(&msg);
    if (!r) throw Mismatch{"decoded as a query"};
    expect_eq("receiver_seq", r->receiver_seq, as_uint<std::uint32_t>(m, "receiver_seq"));
    expect_eq("receiver_counter", r->receiver_counter, as_uint<std::uint64_t>(m, "receiver_counter"));
    expect_eq("transmit_counter", r->transmit_counter, as_uint<std::uint64_t>(m, "transmit_counter"));
    if (r->block_number != as_color(m, "block")) throw Mismatch{"block differs"};
    const std::string status = field(m, "status").get<std::string>();
    const lm::ResponseStatus want = status == "ok"             ? lm::ResponseStatus::kOk
                                    : status == "unknown_flow" ? lm::ResponseStatus::kUnknownFlow
                                    : status == "discontinuity"
                                        ? lm::ResponseStatus::kDiscontinuity
                                        : throw ConfigError("unknown status '" + status + "'");
    if (r->status != want) throw Mismatch{"status differs"};
    if (!(r->echoed_query == query_of(field(m, "echoed")))) throw Mismatch{"echoed query differs"};
  } else {
    throw ConfigError("unknown LM message type '" + type + "'");
  }
  if (lm::serialize_message(msg) != wire) throw Mismatch{"re-encoding is not byte-identical"};
}

void check_error(const json& vec) {
  const Bytes wire = as_hex(vec, "hex");
  const std::string kind = field(vec, "kind").get<std::string>();
  const std::string want = field(vec, "error").get<std::string>();
  std::string got;
  if (kind == "packet") {
    try {
      codec::decode_packet(wire);
    } catch (const CodecError& e) {
      got = error_name(e.code());
    }
  } else if (kind == "lm") {
    try {
      lm::deserialize_message(wire);
    } catch (const ProtocolError& e) {
      got = error_name(e.code());
    }
  } else {
    throw ConfigError("unknown error-vector kind '" + kind + "'");
  }
  if (got.empty()) throw Mismatch{"accepted, want error " + want};
  if (got != want) throw Mismatch{"error " + got + ", want " + want};
}

// --- Built-in vector set -------------------------------------------------------

Ipv6Address addr(const char* text) { return Ipv6Address::from_string(text); }

Bytes bare_ipv6_inner() {
  codec::PacketView inner;
  inner.ip.src = addr("2001:db8:a::1");
  inner.ip.dst = addr("2001:db8:b::1");
  inner.ip.next_header = codec::kProtoNoNext;
  return codec::encode_packet(inner);
}

Bytes ipv4_inner() {
  // 20-byte IPv4 header, total length 20, protocol 59, checksum left at 0.
  return {0x45, 0x00, 0x00, 0x14, 0x00, 0x01, 0x00, 0x00, 0x40, 0x3b,
          0x00, 0x00, 0xc0, 0x00, 0x02, 0x01, 0xc6, 0x33, 0x64, 0x01};
}

json packet_entry(const std::string& name, const codec::PacketView& view) {
  const Bytes wire = codec::encode_packet(view);
  const codec::PacketView v = codec::decode_packet(wire);
  json ip = {{"traffic_class", v.ip.traffic_class}, {"flow_label", v.ip.flow_label},
             {"payload_length", v.ip.payload_length}, {"next_header", v.ip.next_header},
             {"hop_limit", v.ip.hop_limit}, {"src", v.ip.src.to_string()},
             {"dst", v.ip.dst.to_string()}};
  json srh = nullptr;
  if (v.srh) {
    json list = json::array();
    for (const auto& sid : v.srh->segment_list) list.push_back(sid.to_string());
    srh = {{"next_header", v.srh->next_header}, {"hdr_ext_len", v.srh->hdr_ext_len()},
           {"routing_type", codec::kRoutingTypeSrh}, {"segments_left", v.srh->segments_left},
           {"last_entry", v.srh->last_entry()}, {"flags", v.srh->flags},
           {"tag", v.srh->tag}, {"segment_list", list}};
  }
  const auto color = codec::get_color(v);
  return {{"name", name},
          {"hex", codec::to_hex(wire)},
          {"ip", ip},
          {"srh", srh},
          {"payload_hex", codec::to_hex(v.payload)},
          {"color", color ? json(std::string(to_string(*color))) : json(nullptr)},
          {"monitored", codec::read_mark(v.ip.traffic_class).monitored}};
}

json query_json(const lm::LmQuery& q) {
  return {{"type", "query"}, {"sender_seq", q.sender_seq},
          {"block", std::string(to_string(q.block_number))}, {"sender_counter", q.sender_counter}};
}

json lm_entry(const std::string& name, const lm::LmMessage& msg) {
  json m;
  if (const auto* q = std::get_if<lm::LmQuery>(&msg)) {
    m = query_json(*q);
  } else {
    const auto& r = std::get<lm::LmResponse>(msg);
    json echoed = query_json(r.echoed_query);
    echoed.erase("type");
    m = {{"type", "response"},
         {"receiver_seq", r.receiver_seq},
         {"receiver_counter", r.receiver_counter},
         {"transmit_counter", r.transmit_counter},
         {"block", std::string(to_string(r.block_number))},
         {"status", r.status == lm::ResponseStatus::kOk             ? "ok"
                    : r.status == lm::ResponseStatus::kUnknownFlow ? "unknown_flow"
                                                                   : "discontinuity"},
         {"echoed", echoed}};
  }
  return {{"name", name}, {"hex", codec::to_hex(lm::serialize_message(msg))}, {"message", m}};
}

json error_entry(const std::string& name, const char* kind, const Bytes& wire, const char* error) {
  return {{"name", name}, {"kind", kind}, {"hex", codec::to_hex(wire)}, {"error", error}};
}

}  // namespace

std::string_view error_name(CodecErrc code) {
  switch (code) {
    case CodecErrc::kBadVersion: return "bad_version";
    case CodecErrc::kBadRoutingType: return "bad_routing_type";
    case CodecErrc::kTruncated: return "truncated";
    case CodecErrc::kTruncatedExtensionHeader: return "truncated_extension_header";
    case CodecErrc::kLengthMismatch: return "length_mismatch";
    case CodecErrc::kInvalidSrh: return "invalid_srh";
    case CodecErrc::kPayloadTooLarge: return "payload_too_large";
    case CodecErrc::kBadHex: return "bad_hex";
    case CodecErrc::kEmptySidList: return "empty_sid_list";
    case CodecErrc::kTooManySids: return "too_many_sids";
    case CodecErrc::kNotFinalSegment: return "not_final_segment";
    case CodecErrc::kNoInnerPacket: return "no_inner_packet";
    case CodecErrc::kMalformedInner: return "malformed_inner";
  }
  return "unknown";
}

std::string_view error_name(LmErrc code) {
  switch (code) {
    case LmErrc::kBlockStillActive: return "block_still_active";
    case LmErrc::kGuardNotReached: return "guard_not_reached";
    case LmErrc::kOutstandingQuery: return "outstanding_query";
    case LmErrc::kStaleResponse: return "stale_response";
    case LmErrc::kNegativeLoss: return "negative_loss";
    case LmErrc::kUnknownFlow: return "unknown_flow";
    case LmErrc::kCounterDiscontinuity: return "counter_discontinuity";
    case LmErrc::kUnknownMessageType: return "unknown_message_type";
    case LmErrc::kTruncated: return "truncated";
    case LmErrc::kMalformed: return "malformed";
  }
  return "unknown";
}

std::vector<VectorCheck> verify_vectors(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("golden vectors: ") + e.what());
  }
  if (!doc.is_object() || doc.value("schema_version", 0) != 1) {
    throw ConfigError("golden vectors: expected an object with schema_version 1");
  }

  std::vector<VectorCheck> out;
  auto run = [&](const char* section, const std::function<void(const json&)>& check) {
    if (!doc.contains(section)) return;
    for (const auto& vec : doc.at(section)) {
      VectorCheck result;
      result.name = field(vec, "name").get<std::string>();
      try {
        check(vec);
        result.passed = true;
      } catch (const Mismatch& m) {
        result.detail = m.what;
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        result.detail = e.what();
      } catch (const json::exception& e) {
        throw ConfigError("golden vector '" + result.name + "': " + e.what());
      }
      out.push_back(std::move(result));
    }
  };
  run("packets", check_packet);
  run("lm", check_lm);
  run("errors", check_error);
  return out;
}

std::string dump_vectors() {
  json packets = json::array();
  {
    codec::PacketView p = codec::encapsulate(bare_ipv6_inner(), SidList{addr("fc00:1::1")},
                                             {addr("2001:db8::1"), 64});
    p = codec::set_color(p, Color::A);
    packets.push_back(packet_entry("srh_one_sid_ipv6_inner_color_a", p));
  }
  {
    codec::PacketView p =
        codec::encapsulate(bare_ipv6_inner(),
                           SidList{addr("fc00:1::1"), addr("fc00:2::1"), addr("fc00:3::1")},
                           {addr("2001:db8::1"), 63});
    p.ip.traffic_class = 0xb8;
    p.ip.flow_label = 0x12345;
    p = codec::set_color(p, Color::B);
    packets.push_back(packet_entry("srh_three_sids_dscp_ef_color_b", p));
  }
  {
    codec::PacketView p = codec::encapsulate(ipv4_inner(), SidList{addr("fc00:9::")},
                                             {addr("2001:db8::2"), 64});
    packets.push_back(packet_entry("srh_ipv4_inner_unmonitored", p));
  }
  {
    std::vector<Sid> sids;
    for (std::uint64_t i = 1; i <= kMaxSids; ++i) sids.push_back(Ipv6Address::from_u64(0xfc00000000000000ULL | i << 32, 1));
    codec::PacketView p = codec::encapsulate(bare_ipv6_inner(), SidList(sids), {addr("2001:db8::3"), 255});
    codec::advance_to_final_segment(p);
    p.srh->tag = 0xbeef;
    p = codec::set_color(p, Color::A);
    packets.push_back(packet_entry("srh_sixteen_sids_final_segment", p));
  }
  {
    const std::uint8_t payload[] = {'p', 'f', 'p', 'l', 'm'};
    const Bytes wire = codec::encode_udp6(addr("2001:db8::10"), addr("2001:db8::20"), 40000,
                                          lm::kDefaultPort, payload);
    packets.push_back(packet_entry("plain_ipv6_udp", codec::decode_packet(wire)));
  }

  json lm_vectors = json::array();
  const lm::LmQuery q0{0, Color::A, 0};
  const lm::LmQuery q7{7, Color::B, 0x0102030405060708ULL};
  lm_vectors.push_back(lm_entry("query_seq0_block_a", q0));
  lm_vectors.push_back(lm_entry("query_seq7_block_b", q7));
  lm_vectors.push_back(lm_entry(
      "response_ok_block_b", lm::LmResponse{3, 1000, 0, Color::B, lm::ResponseStatus::kOk, q7}));
  lm_vectors.push_back(lm_entry(
      "response_unknown_flow",
      lm::LmResponse{0, 0, 0, Color::A, lm::ResponseStatus::kUnknownFlow, q0}));
  lm_vectors.push_back(lm_entry(
      "response_discontinuity",
      lm::LmResponse{9, 0, 0, Color::B, lm::ResponseStatus::kDiscontinuity, q7}));

  json errors = json::array();
  const Bytes good = codec::encode_packet(
      codec::encapsulate(bare_ipv6_inner(), SidList{addr("fc00:1::1"), addr("fc00:2::1")},
                         {addr("2001:db8::1"), 64}));
  errors.push_back(error_entry("truncated_ipv6_header", "packet", Bytes(good.begin(), good.begin() + 20),
                               "truncated"));
  {
    Bytes b = good;
    b[0] = static_cast<std::uint8_t>(0x40 | (b[0] & 0x0f));
    errors.push_back(error_entry("version_4", "packet", b, "bad_version"));
  }
  {
    Bytes b = good;
    b[40 + 2] = 3;
    errors.push_back(error_entry("routing_type_3", "packet", b, "bad_routing_type"));
  }
  {
    Bytes b = good;
    b[40 + 3] = 2;  // segments_left beyond last_entry (1)
    errors.push_back(error_entry("segments_left_beyond_last_entry", "packet", b, "invalid_srh"));
  }
  {
    Bytes b = good;
    b[40 + 4] = 2;  // last_entry disagrees with hdr_ext_len
    errors.push_back(error_entry("last_entry_mismatch", "packet", b, "length_mismatch"));
  }
  {
    Bytes b = good;
    b.push_back(0);
    errors.push_back(error_entry("trailing_byte", "packet", b, "length_mismatch"));
  }
  {
    Bytes b(good.begin(), good.begin() + 44);
    b[4] = 0;
    b[5] = 4;
    errors.push_back(error_entry("truncated_srh", "packet", b, "truncated_extension_header"));
  }
  {
    Bytes b = lm::serialize_message(q0);
    b[0] = 9;
    errors.push_back(error_entry("lm_unknown_type", "lm", b, "unknown_message_type"));
  }
  {
    Bytes b = lm::serialize_message(q7);
    b.resize(10);
    errors.push_back(error_entry("lm_truncated_query", "lm", b, "truncated"));
  }

  json doc = {{"schema_version", 1}, {"packets", packets}, {"lm", lm_vectors}, {"errors", errors}};
  return doc.dump(2) + "\n";
}

}  // namespace pfplm::golden
