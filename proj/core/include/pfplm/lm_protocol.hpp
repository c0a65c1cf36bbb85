#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "pfplm/codec.hpp"
#include "pfplm/dataplane.hpp"
#include "pfplm/flow_matcher.hpp"
#include "pfplm/sid_list.hpp"
#include "pfplm/types.hpp"

// Loss-measurement query/response exchange between a Sender (ingress side)
// and a Reflector (egress side).
//
// Wire layout, network byte order:
//   common header  u8 type (1 query, 2 response) | u8 flags | u16 reserved (0)
//   query body     u32 sender_seq | u64 sender_counter                (16 bytes total)
//   response body  u32 receiver_seq | u64 receiver_counter | u64 transmit_counter
//                  | 16-byte echoed query                             (40 bytes total)
// Flags: bit 0 block number (0 = A, 1 = B). Responses also use bit 1 for
// "unknown flow" and bit 2 for "counter discontinuity".
//
// Counters are per-block deltas. Sequence numbers start at 0 in every session.
namespace pfplm::lm {

inline constexpr std::uint8_t kTypeQuery = 1;
inline constexpr std::uint8_t kTypeResponse = 2;
inline constexpr std::uint8_t kFlagBlockB = 0x01;
inline constexpr std::uint8_t kFlagUnknownFlow = 0x02;
inline constexpr std::uint8_t kFlagDiscontinuity = 0x04;
inline constexpr std::size_t kQuerySize = 16;
inline constexpr std::size_t kResponseSize = 40;
inline constexpr std::uint16_t kDefaultPort = 8862;

struct LmQuery {
  std::uint32_t sender_seq = 0;
  Color block_number = Color::A;
  std::uint64_t sender_counter = 0;

  bool operator==(const LmQuery&) const = default;
};

enum class ResponseStatus : std::uint8_t { kOk, kUnknownFlow, kDiscontinuity };

struct LmResponse {
  std::uint32_t receiver_seq = 0;
  std::uint64_t receiver_counter = 0;
  std::uint64_t transmit_counter = 0;
  Color block_number = Color::A;  // reverse path
  ResponseStatus status = ResponseStatus::kOk;
  LmQuery echoed_query;

  bool operator==(const LmResponse&) const = default;
};

using LmMessage = std::variant<LmQuery, LmResponse>;

std::array<std::uint8_t, kQuerySize> serialize(const LmQuery& query);
std::array<std::uint8_t, kResponseSize> serialize(const LmResponse& response);
codec::Bytes serialize_message(const LmMessage& message);

/// Throws ProtocolError(kUnknownMessageType | kTruncated).
LmMessage deserialize_message(std::span<const std::uint8_t> octets);

/// One measured color block.
struct LossRecord {
  Color block_color = Color::A;
  std::uint64_t block_index = 0;
  std::uint64_t tx_count = 0;
  std::uint64_t rx_count = 0;
  std::uint64_t loss = 0;
  std::uint32_t sender_seq = 0;

  bool operator==(const LossRecord&) const = default;
};

/// A query whose response never arrived.
struct Gap {
  Color block_color;
  std::uint64_t block_index;
  std::uint32_t sender_seq;

  bool operator==(const Gap&) const = default;
};

struct SenderOptions {
  /// Delay after a flip before the completed block may be queried. Defaults to T/2.
  std::optional<Duration> guard;
  /// Outstanding queries older than this are expired as gaps. Defaults to T.
  std::optional<Duration> response_timeout;
};

/// Sender-side state machine for one monitored flow. Reads the ingress
/// engine's counters and the ingress coloring schedule.
class SenderSession {
 public:
  SenderSession(SidList flow, const MatcherEngine& engine, const ColoringSchedule& schedule,
                SenderOptions options = {});

  /// Queries the block that completed most recently (the inactive color).
  LmQuery build_query(Timestamp now);
  /// Queries a specific color. Throws kBlockStillActive if it is active at
  /// `now`, kGuardNotReached before the guard, kOutstandingQuery if a query for
  /// that color is pending or the block was already queried.
  LmQuery build_query(Timestamp now, Color block);

  /// Matches the echoed query against the outstanding set and records the
  /// loss. Throws kStaleResponse, kNegativeLoss, kUnknownFlow or
  /// kCounterDiscontinuity; the outstanding query is cleared in the latter three.
  LossRecord process_response(const LmResponse& response);

  /// Drops outstanding queries older than the response timeout.
  std::vector<Gap> expire(Timestamp now);

  /// Earliest time at which block `index` may be queried.
  Timestamp query_time(std::uint64_t index) const;

  const SidList& flow() const { return flow_; }
  const std::vector<LossRecord>& history() const { return history_; }
  const std::vector<Gap>& gaps() const { return gaps_; }
  std::uint32_t next_seq() const { return next_seq_; }
  std::size_t outstanding_count() const;
  std::uint64_t reflector_resets() const { return reflector_resets_; }
  Duration guard() const { return guard_; }
  Duration response_timeout() const { return timeout_; }

 private:
  struct Pending {
    LmQuery query;
    std::uint64_t block_index;
    Timestamp sent_at;
  };

  SidList flow_;
  const MatcherEngine& engine_;
  const ColoringSchedule& schedule_;
  Duration guard_;
  Duration timeout_;
  std::uint32_t next_seq_ = 0;
  std::array<std::uint64_t, 2> baseline_{};
  std::array<std::optional<std::uint64_t>, 2> last_block_{};
  std::array<std::optional<Pending>, 2> outstanding_{};
  std::optional<std::uint32_t> last_receiver_seq_;
  std::uint64_t reflector_resets_ = 0;
  std::vector<LossRecord> history_;
  std::vector<Gap> gaps_;
};

/// Reflector-side state for one flow. Reads the egress engine's counters.
class ReflectorSession {
 public:
  /// `restarted`: counters were lost, so the first query of each color
  /// only re-establishes the baseline.
  ReflectorSession(SidList flow, const MatcherEngine& engine, bool restarted = false);

  /// Counter delta for the queried color since the previous query of that
  /// color. When a same-color query was missed (sequence gap, or a first query
  /// with seq >= 2) the delta spans several blocks and the response carries
  /// kDiscontinuity instead of a measurement.
  LmResponse process_query(const LmQuery& query);

  const SidList& flow() const { return flow_; }
  std::uint32_t next_seq() const { return next_seq_; }

 private:
  SidList flow_;
  const MatcherEngine& engine_;
  std::uint32_t next_seq_ = 0;
  std::array<std::uint64_t, 2> baseline_{};
  std::array<std::optional<std::uint32_t>, 2> last_query_seq_{};
  std::array<bool, 2> resync_{};
};

/// Demultiplexes queries to per-flow sessions.
class Reflector {
 public:
  explicit Reflector(const MatcherEngine& engine) : engine_(engine) {}

  void add_flow(const SidList& flow);
  /// Unknown flows yield a response with status kUnknownFlow.
  LmResponse process_query(const SidList& flow, const LmQuery& query);
  /// Drops all session state, as after a restart. The next query of each
  /// color per flow is answered with kDiscontinuity.
  void reset();

  std::size_t session_count() const { return sessions_.size(); }

 private:
  const MatcherEngine& engine_;
  std::map<SidList, ReflectorSession> sessions_;
  std::uint32_t error_seq_ = 0;
};

}  // namespace pfplm::lm
