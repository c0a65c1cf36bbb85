#!/usr/bin/env python3
"""Writes golden/vectors.json from first principles with struct.

Independent of the C++ codec: every byte here is packed by hand from the
header layouts (IPv6 fixed header, SRH routing type 4, UDP, LM messages).
"""

import argparse
import ipaddress
import json
import struct
import sys

PROTO_IPV4 = 4
PROTO_UDP = 17
PROTO_IPV6 = 41
PROTO_ROUTING = 43
PROTO_NONE = 59

COLOR_BIT = 0x01
MONITORED_BIT = 0x02


def a(text):
    return ipaddress.IPv6Address(text)


def ipv6_header(tc, flow_label, payload_len, next_header, hop_limit, src, dst):
    first = (6 << 28) | (tc << 20) | flow_label
    return struct.pack("!IHBB", first, payload_len, next_header, hop_limit) + src.packed + dst.packed


def srh(next_header, segments_left, path, flags=0, tag=0):
    wire = list(reversed(path))
    n = len(wire)
    head = struct.pack("!BBBBBBH", next_header, 2 * n, 4, segments_left, n - 1, flags, tag)
    return head + b"".join(s.packed for s in wire)


def mark(tc, color):
    tc = (tc & ~(COLOR_BIT | MONITORED_BIT)) | MONITORED_BIT
    return tc | (COLOR_BIT if color == "B" else 0)


def checksum(data):
    if len(data) % 2:
        data += b"\0"
    total = sum(struct.unpack("!%dH" % (len(data) // 2), data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return (~total) & 0xFFFF


def udp6(src, dst, sport, dport, payload):
    length = 8 + len(payload)
    pseudo = src.packed + dst.packed + struct.pack("!IxxxB", length, PROTO_UDP)
    csum = checksum(pseudo + struct.pack("!HHHH", sport, dport, length, 0) + payload)
    if csum == 0:
        csum = 0xFFFF
    seg = struct.pack("!HHHH", sport, dport, length, csum) + payload
    return ipv6_header(0, 0, len(seg), PROTO_UDP, 64, src, dst) + seg


def bare_inner():
    return ipv6_header(0, 0, 0, PROTO_NONE, 64, a("2001:db8:a::1"), a("2001:db8:b::1"))


def ipv4_inner():
    return bytes([0x45, 0x00, 0x00, 0x14, 0x00, 0x01, 0x00, 0x00, 0x40, 0x3B,
                  0x00, 0x00, 0xC0, 0x00, 0x02, 0x01, 0xC6, 0x33, 0x64, 0x01])


def encap_entry(name, inner, inner_nh, path, src, hop, tc=0, flow_label=0, color=None,
                segments_left=None, tag=0):
    if color is not None:
        tc = mark(tc, color)
    sl = len(path) - 1 if segments_left is None else segments_left
    ext = srh(inner_nh, sl, path, tag=tag)
    dst = path[len(path) - 1 - sl]
    body = ext + inner
    wire = ipv6_header(tc, flow_label, len(body), PROTO_ROUTING, hop, src, dst) + body
    return {
        "name": name,
        "hex": wire.hex(),
        "ip": {"traffic_class": tc, "flow_label": flow_label, "payload_length": len(body),
               "next_header": PROTO_ROUTING, "hop_limit": hop, "src": str(src), "dst": str(dst)},
        "srh": {"next_header": inner_nh, "hdr_ext_len": 2 * len(path), "routing_type": 4,
                "segments_left": sl, "last_entry": len(path) - 1, "flags": 0, "tag": tag,
                "segment_list": [str(s) for s in reversed(path)]},
        "payload_hex": inner.hex(),
        "color": color,
        "monitored": color is not None,
    }


def query(seq, block, counter):
    flags = 1 if block == "B" else 0
    return struct.pack("!BBHIQ", 1, flags, 0, seq, counter)


def response(rseq, rx, tx, block, status, echoed):
    flags = (1 if block == "B" else 0) | {"ok": 0, "unknown_flow": 2, "discontinuity": 4}[status]
    return struct.pack("!BBHIQQ", 2, flags, 0, rseq, rx, tx) + echoed


def packets():
    out = [
        encap_entry("srh_one_sid_ipv6_inner_color_a", bare_inner(), PROTO_IPV6, [a("fc00:1::1")],
                    a("2001:db8::1"), 64, color="A"),
        encap_entry("srh_three_sids_dscp_ef_color_b", bare_inner(), PROTO_IPV6,
                    [a("fc00:1::1"), a("fc00:2::1"), a("fc00:3::1")], a("2001:db8::1"), 63,
                    tc=0xB8, flow_label=0x12345, color="B"),
        encap_entry("srh_ipv4_inner_unmonitored", ipv4_inner(), PROTO_IPV4, [a("fc00:9::")],
                    a("2001:db8::2"), 64),
        encap_entry("srh_sixteen_sids_final_segment", bare_inner(), PROTO_IPV6,
                    [ipaddress.IPv6Address(((0xFC00 << 48 | i << 32) << 64) | 1) for i in range(1, 17)],
                    a("2001:db8::3"), 255, color="A", segments_left=0, tag=0xBEEF),
    ]
    udp = udp6(a("2001:db8::10"), a("2001:db8::20"), 40000, 8862, b"pfplm")
    out.append({
        "name": "plain_ipv6_udp",
        "hex": udp.hex(),
        "ip": {"traffic_class": 0, "flow_label": 0, "payload_length": len(udp) - 40,
               "next_header": PROTO_UDP, "hop_limit": 64, "src": "2001:db8::10",
               "dst": "2001:db8::20"},
        "srh": None,
        "payload_hex": udp[40:].hex(),
        "color": None,
        "monitored": False,
    })
    return out


def q_fields(seq, block, counter):
    return {"sender_seq": seq, "block": block, "sender_counter": counter}


def lm():
    q0 = (0, "A", 0)
    q7 = (7, "B", 0x0102030405060708)

    def resp(name, rseq, rx, tx, block, status, q):
        return {"name": name, "hex": response(rseq, rx, tx, block, status, query(*q)).hex(),
                "message": {"type": "response", "receiver_seq": rseq, "receiver_counter": rx,
                            "transmit_counter": tx, "block": block, "status": status,
                            "echoed": q_fields(*q)}}

    return [
        {"name": "query_seq0_block_a", "hex": query(*q0).hex(),
         "message": dict(type="query", **q_fields(*q0))},
        {"name": "query_seq7_block_b", "hex": query(*q7).hex(),
         "message": dict(type="query", **q_fields(*q7))},
        resp("response_ok_block_b", 3, 1000, 0, "B", "ok", q7),
        resp("response_unknown_flow", 0, 0, 0, "A", "unknown_flow", q0),
        resp("response_discontinuity", 9, 0, 0, "B", "discontinuity", q7),
    ]


def errors():
    path = [a("fc00:1::1"), a("fc00:2::1")]
    body = srh(PROTO_IPV6, 1, path) + bare_inner()
    good = ipv6_header(0, 0, len(body), PROTO_ROUTING, 64, a("2001:db8::1"), path[0]) + body

    def patched(offset, value):
        b = bytearray(good)
        b[offset] = value
        return bytes(b)

    truncated_srh = bytearray(good[:44])
    truncated_srh[4:6] = struct.pack("!H", 4)
    bad_type = bytearray(query(0, "A", 0))
    bad_type[0] = 9

    def e(name, kind, wire, error):
        return {"name": name, "kind": kind, "hex": bytes(wire).hex(), "error": error}

    return [
        e("truncated_ipv6_header", "packet", good[:20], "truncated"),
        e("version_4", "packet", patched(0, 0x40 | (good[0] & 0x0F)), "bad_version"),
        e("routing_type_3", "packet", patched(42, 3), "bad_routing_type"),
        e("segments_left_beyond_last_entry", "packet", patched(43, 2), "invalid_srh"),
        e("last_entry_mismatch", "packet", patched(44, 2), "length_mismatch"),
        e("trailing_byte", "packet", good + b"\0", "length_mismatch"),
        e("truncated_srh", "packet", truncated_srh, "truncated_extension_header"),
        e("lm_unknown_type", "lm", bad_type, "unknown_message_type"),
        e("lm_truncated_query", "lm", query(7, "B", 0x0102030405060708)[:10], "truncated"),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("-o", "--out", default="-")
    args = parser.parse_args()
    doc = {"schema_version": 1, "packets": packets(), "lm": lm(), "errors": errors()}
    text = json.dumps(doc, indent=2) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as f:
            f.write(text)


if __name__ == "__main__":
    main()
