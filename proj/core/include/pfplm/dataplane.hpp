#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pfplm/codec.hpp"
#include "pfplm/flow_matcher.hpp"
#include "pfplm/sid_list.hpp"
#include "pfplm/types.hpp"

namespace pfplm {

struct Ipv6Prefix {
  Ipv6Address address;  // host bits cleared
  std::uint8_t length = 0;

  /// "2001:db8::/32"; a bare address means /128. Throws ConfigError.
  static Ipv6Prefix parse(std::string_view text);
  static Ipv6Prefix make(const Ipv6Address& address, std::uint8_t length);
  bool contains(const Ipv6Address& address) const;
  std::string to_string() const;

  bool operator==(const Ipv6Prefix&) const = default;
};

/// Inner destination prefix -> SID list, with a per-policy monitored flag.
struct SrPolicy {
  Ipv6Prefix prefix;
  SidList sids;
  bool monitored = false;
};

struct Ipv6AddressHash {
  std::size_t operator()(const Ipv6Address& a) const noexcept;
};

/// Longest-prefix-match table; at most one policy per exact prefix.
class SrPolicyTable {
 public:
  /// Throws DataplaneError(kDuplicatePolicy) on an exact prefix clash.
  void add(SrPolicy policy);
  const SrPolicy* lookup(const Ipv6Address& destination) const;
  const std::vector<SrPolicy>& policies() const { return policies_; }
  std::size_t size() const { return policies_.size(); }

  /// Adds every monitored policy's SID list to `engine` (skipping repeats).
  void register_monitored(MatcherEngine& engine) const;

 private:
  std::vector<SrPolicy> policies_;
  // prefix length (descending) -> masked address -> index into policies_
  std::map<std::uint8_t, std::unordered_map<Ipv6Address, std::size_t, Ipv6AddressHash>,
           std::greater<>>
      by_length_;
};

/// Alternate-marking color schedule. Block k covers [start + kT, start + (k+1)T);
/// a packet stamped exactly at a boundary belongs to the new block. Even blocks
/// carry the initial color.
///
/// tick() may race with readers: each observes either the old or the new block.
class ColoringSchedule {
 public:
  struct Flip {
    Timestamp at;
    Color color;
    std::uint64_t block_index;

    bool operator==(const Flip&) const = default;
  };

  static constexpr Duration kDefaultPeriod = std::chrono::seconds(2);

  /// Throws DataplaneError(kBadPeriod) if period <= 0.
  explicit ColoringSchedule(Duration period = kDefaultPeriod, Timestamp start = Timestamp{0},
                            Color initial = Color::A);
  ColoringSchedule(const ColoringSchedule& other);

  /// Advances to `now` and reports the flips crossed, in order.
  /// Throws DataplaneError(kTimeRegression) if now precedes an earlier tick.
  std::vector<Flip> tick(Timestamp now);

  Color active_color() const { return color_of_block(block_index()); }
  std::uint64_t block_index() const { return block_.load(std::memory_order_acquire); }
  Timestamp epoch() const { return block_start(block_index()); }
  Duration period() const { return period_; }
  Timestamp start() const { return start_; }

  // Stateless helpers.
  std::uint64_t block_at(Timestamp t) const;
  Color color_at(Timestamp t) const { return color_of_block(block_at(t)); }
  Color color_of_block(std::uint64_t index) const {
    return index % 2 == 0 ? initial_ : opposite(initial_);
  }
  Timestamp block_start(std::uint64_t index) const {
    return start_ + period_ * static_cast<std::int64_t>(index);
  }

 private:
  Duration period_;
  Timestamp start_;
  Color initial_;
  std::atomic<std::uint64_t> block_{0};
  std::atomic<std::int64_t> last_now_;
};

struct IngressOptions {
  codec::EncapOptions encap;
  /// When false, monitored packets are still counted but not marked.
  bool color_packets = true;
};

struct IngressResult {
  codec::Bytes packet;
  const SrPolicy* policy = nullptr;  // nullptr: no policy, forwarded unchanged
  std::optional<Color> color;        // color written into the outer header
  bool counted = false;
};

/// Classify -> encapsulate -> color -> count. Counting happens on the
/// emitted (post-encapsulation) packet.
class IngressNode {
 public:
  IngressNode(const SrPolicyTable& policies, MatcherEngine& engine, ColoringSchedule& schedule,
              IngressOptions options = {});

  /// Throws CodecError(kMalformedInner) if the inner packet is not IPv6.
  IngressResult process(std::span<const std::uint8_t> inner, Timestamp now);

  const SrPolicyTable& policies() const { return policies_; }
  MatcherEngine& engine() { return engine_; }
  ColoringSchedule& schedule() { return schedule_; }

 private:
  const SrPolicyTable& policies_;
  MatcherEngine& engine_;
  ColoringSchedule& schedule_;
  IngressOptions options_;
};

struct EgressResult {
  codec::Bytes packet;  // inner packet, or the original when not encapsulated
  bool decapsulated = false;
  std::optional<SidList> sids;  // outer SID list when present and within the cap
  std::optional<Color> color;   // carried color, nullopt when unmonitored
  bool counted = false;
};

/// Count by carried color, then decapsulate. The egress never consults a
/// local schedule for counting.
class EgressNode {
 public:
  explicit EgressNode(MatcherEngine& engine) : engine_(engine) {}

  /// Throws CodecError for malformed packets or decapsulation failures.
  EgressResult process(std::span<const std::uint8_t> outer);

  MatcherEngine& engine() { return engine_; }

 private:
  MatcherEngine& engine_;
};

}  // namespace pfplm
