#include "pfplm/dataplane.hpp"

#include <cstring>
#include <string>

#include "pfplm/error.hpp"

namespace pfplm {

// --- Ipv6Prefix ----------------------------------------------------------------

Ipv6Prefix Ipv6Prefix::make(const Ipv6Address& address, std::uint8_t length) {
  if (length > 128) throw DataplaneError(DataplaneErrc::kBadPrefix, "prefix length > 128");
  Ipv6Prefix p;
  p.length = length;
  for (std::size_t i = 0; i < 16; ++i) {
    const int bits = std::clamp(static_cast<int>(length) - static_cast<int>(8 * i), 0, 8);
    const auto mask = static_cast<std::uint8_t>(bits == 0 ? 0 : 0xff << (8 - bits));
    p.address.bytes[i] = address.bytes[i] & mask;
  }
  return p;
}

Ipv6Prefix Ipv6Prefix::parse(std::string_view text) {
  const auto slash = text.find('/');
  const auto addr = Ipv6Address::from_string(text.substr(0, slash));
  int length = 128;
  if (slash != std::string_view::npos) {
    const std::string len_text(text.substr(slash + 1));
    std::size_t used = 0;
    try {
      length = std::stoi(len_text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != len_text.size() || length < 0 || length > 128) {
      throw ConfigError("invalid prefix length in '" + std::string(text) + "'");
    }
  }
  return make(addr, static_cast<std::uint8_t>(length));
}

bool Ipv6Prefix::contains(const Ipv6Address& address) const {
  return make(address, length).address == this->address;
}

std::string Ipv6Prefix::to_string() const {
  return address.to_string() + "/" + std::to_string(length);
}

std::size_t Ipv6AddressHash::operator()(const Ipv6Address& a) const noexcept {
  std::uint64_t hi, lo;
  std::memcpy(&hi, a.bytes.data(), 8);
  std::memcpy(&lo, a.bytes.data() + 8, 8);
  std::uint64_t h = hi * 0x9e3779b97f4a7c15ULL ^ (lo + 0x632be59bd9b4e019ULL);
  h ^= h >> 31;
  h *= 0xbf58476d1ce4e5b9ULL;
  return h ^ (h >> 29);
}

// --- SrPolicyTable -------------------------------------------------------------

void SrPolicyTable::add(SrPolicy policy) {
  auto& bucket = by_length_[policy.prefix.length];
  if (bucket.contains(policy.prefix.address)) {
    throw DataplaneError(DataplaneErrc::kDuplicatePolicy,
                         "duplicate policy for prefix " + policy.prefix.to_string());
  }
  bucket.emplace(policy.prefix.address, policies_.size());
  policies_.push_back(std::move(policy));
}

const SrPolicy* SrPolicyTable::lookup(const Ipv6Address& destination) const {
  for (const auto& [length, bucket] : by_length_) {
    auto it = bucket.find(Ipv6Prefix::make(destination, length).address);
    if (it != bucket.end()) return &policies_[it->second];
  }
  return nullptr;
}

void SrPolicyTable::register_monitored(MatcherEngine& engine) const {
  for (const auto& policy : policies_) {
    if (!policy.monitored) continue;
    try {
      engine.add_flow(policy.sids);
    } catch (const MatcherError& e) {
      if (e.code() != MatcherErrc::kDuplicateFlow) throw;
    }
  }
}

// --- ColoringSchedule ----------------------------------------------------------

ColoringSchedule::ColoringSchedule(Duration period, Timestamp start, Color initial)
    : period_(period), start_(start), initial_(initial), last_now_(start.count()) {
  if (period <= Duration::zero()) {
    throw DataplaneError(DataplaneErrc::kBadPeriod, "marking period must be positive");
  }
}

ColoringSchedule::ColoringSchedule(const ColoringSchedule& other)
    : period_(other.period_),
      start_(other.start_),
      initial_(other.initial_),
      block_(other.block_.load()),
      last_now_(other.last_now_.load()) {}

std::uint64_t ColoringSchedule::block_at(Timestamp t) const {
  if (t <= start_) return 0;
  return static_cast<std::uint64_t>((t - start_) / period_);
}

std::vector<ColoringSchedule::Flip> ColoringSchedule::tick(Timestamp now) {
  std::int64_t last = last_now_.load(std::memory_order_relaxed);
  while (true) {
    if (now.count() < last) {
      throw DataplaneError(DataplaneErrc::kTimeRegression,
                           "time went backwards: " + std::to_string(now.count()) + " < " +
                               std::to_string(last));
    }
    if (last_now_.compare_exchange_weak(last, now.count(), std::memory_order_relaxed)) break;
  }

  std::vector<Flip> flips;
  const std::uint64_t target = block_at(now);
  std::uint64_t current = block_.load(std::memory_order_acquire);
  while (current < target) {
    if (block_.compare_exchange_weak(current, target, std::memory_order_acq_rel)) {
      for (std::uint64_t k = current + 1; k <= target; ++k) {
        flips.push_back({block_start(k), color_of_block(k), k});
      }
      break;
    }
  }
  return flips;
}

// --- IngressNode ---------------------------------------------------------------

IngressNode::IngressNode(const SrPolicyTable& policies, MatcherEngine& engine,
                         ColoringSchedule& schedule, IngressOptions options)
    : policies_(policies), engine_(engine), schedule_(schedule), options_(options) {}

IngressResult IngressNode::process(std::span<const std::uint8_t> inner, Timestamp now) {
  if (inner.size() < codec::kIpv6HeaderSize || (inner[0] >> 4) != 6) {
    throw CodecError(CodecErrc::kMalformedInner, "inner packet is not a valid IPv6 packet");
  }
  Ipv6Address destination;
  std::memcpy(destination.bytes.data(), inner.data() + 24, 16);

  IngressResult result;
  result.policy = policies_.lookup(destination);
  if (!result.policy) {
    result.packet.assign(inner.begin(), inner.end());
    return result;
  }

  schedule_.tick(now);
  if (!result.policy->monitored) {
    result.packet = codec::encapsulate_wire(inner, result.policy->sids, options_.encap);
    return result;
  }
  const Color color = schedule_.active_color();
  if (options_.color_packets) {
    // the mark is written with the outer header
    codec::EncapOptions encap = options_.encap;
    encap.traffic_class = codec::mark_traffic_class(encap.traffic_class, color);
    result.packet = codec::encapsulate_wire(inner, result.policy->sids, encap);
    result.color = color;
  } else {
    result.packet = codec::encapsulate_wire(inner, result.policy->sids, options_.encap);
  }
  result.counted = engine_.match_and_count(result.policy->sids, color);
  return result;
}

// --- EgressNode ----------------------------------------------------------------

EgressResult EgressNode::process(std::span<const std::uint8_t> outer) {
  const codec::OuterRef ref = codec::peek_outer(outer);
  EgressResult result;
  result.color = codec::read_mark(ref.traffic_class).monitored
                     ? std::optional(codec::read_mark(ref.traffic_class).color)
                     : std::nullopt;

  if (ref.srh) {
    result.sids = ref.srh->path();
    if (result.color) {
      if (result.sids) {
        result.counted = engine_.match_and_count(*result.sids, *result.color);
      } else {
        std::vector<Sid> wire(ref.srh->segment_count());
        for (std::size_t i = 0; i < wire.size(); ++i) wire[i] = ref.srh->segment(i);
        engine_.match_wire_and_count(wire, *result.color);
      }
    }
    if (ref.srh->segments_left != 0) {
      throw CodecError(CodecErrc::kNotFinalSegment,
                       "not at final segment (segments_left = " +
                           std::to_string(ref.srh->segments_left) + ")");
    }
  }

  const std::uint8_t proto = ref.payload_protocol();
  const bool has_inner = proto == codec::kProtoIpv6 || proto == codec::kProtoIpv4;
  if (!has_inner || ref.payload_offset == outer.size()) {
    if (ref.srh) throw CodecError(CodecErrc::kNoInnerPacket, "no encapsulated packet present");
    result.packet.assign(outer.begin(), outer.end());
    return result;
  }
  result.packet.assign(outer.begin() + static_cast<std::ptrdiff_t>(ref.payload_offset),
                       outer.end());
  result.decapsulated = true;
  return result;
}

}  // namespace pfplm
