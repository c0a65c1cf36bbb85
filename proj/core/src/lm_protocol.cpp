#include "pfplm/lm_protocol.hpp"

#include <string>

#include "pfplm/error.hpp"

namespace pfplm::lm {

namespace {

void put32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
}

void put64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
}

std::uint32_t get32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

Color block_of(std::uint8_t flags) { return (flags & kFlagBlockB) ? Color::B : Color::A; }

std::uint8_t block_flag(Color c) { return c == Color::B ? kFlagBlockB : 0; }

LmQuery parse_query(std::span<const std::uint8_t> b) {
  if (b.size() < kQuerySize) throw ProtocolError(LmErrc::kTruncated, "truncated LM query");
  if (b[0] != kTypeQuery) {
    throw ProtocolError(LmErrc::kUnknownMessageType,
                        "unknown message type " + std::to_string(b[0]));
  }
  return {get32(b.data() + 4), block_of(b[1]), get64(b.data() + 8)};
}

}  // namespace

std::array<std::uint8_t, kQuerySize> serialize(const LmQuery& query) {
  std::array<std::uint8_t, kQuerySize> out{};
  out[0] = kTypeQuery;
  out[1] = block_flag(query.block_number);
  put32(out.data() + 4, query.sender_seq);
  put64(out.data() + 8, query.sender_counter);
  return out;
}

std::array<std::uint8_t, kResponseSize> serialize(const LmResponse& response) {
  std::array<std::uint8_t, kResponseSize> out{};
  out[0] = kTypeResponse;
  out[1] = block_flag(response.block_number);
  if (response.status == ResponseStatus::kUnknownFlow) out[1] |= kFlagUnknownFlow;
  if (response.status == ResponseStatus::kDiscontinuity) out[1] |= kFlagDiscontinuity;
  put32(out.data() + 4, response.receiver_seq);
  put64(out.data() + 8, response.receiver_counter);
  put64(out.data() + 16, response.transmit_counter);
  const auto echoed = serialize(response.echoed_query);
  std::copy(echoed.begin(), echoed.end(), out.begin() + 24);
  return out;
}

codec::Bytes serialize_message(const LmMessage& message) {
  return std::visit(
      [](const auto& m) {
        const auto raw = serialize(m);
        return codec::Bytes(raw.begin(), raw.end());
      },
      message);
}

LmMessage deserialize_message(std::span<const std::uint8_t> octets) {
  if (octets.size() < 4) throw ProtocolError(LmErrc::kTruncated, "truncated LM header");
  switch (octets[0]) {
    case kTypeQuery:
      if (octets.size() != kQuerySize) {
        throw ProtocolError(octets.size() < kQuerySize ? LmErrc::kTruncated : LmErrc::kMalformed,
                            "LM query must be 16 bytes, got " + std::to_string(octets.size()));
      }
      return parse_query(octets);
    case kTypeResponse: {
      if (octets.size() != kResponseSize) {
        throw ProtocolError(
            octets.size() < kResponseSize ? LmErrc::kTruncated : LmErrc::kMalformed,
            "LM response must be 40 bytes, got " + std::to_string(octets.size()));
      }
      const std::uint8_t flags = octets[1];
      if ((flags & kFlagUnknownFlow) && (flags & kFlagDiscontinuity)) {
        throw ProtocolError(LmErrc::kMalformed, "conflicting response status flags");
      }
      LmResponse r;
      r.block_number = block_of(flags);
      r.status = (flags & kFlagUnknownFlow)     ? ResponseStatus::kUnknownFlow
                 : (flags & kFlagDiscontinuity) ? ResponseStatus::kDiscontinuity
                                                : ResponseStatus::kOk;
      r.receiver_seq = get32(octets.data() + 4);
      r.receiver_counter = get64(octets.data() + 8);
      r.transmit_counter = get64(octets.data() + 16);
      r.echoed_query = parse_query(octets.subspan(24));
      return r;
    }
    default:
      throw ProtocolError(LmErrc::kUnknownMessageType,
                          "unknown message type " + std::to_string(octets[0]));
  }
}

// --- SenderSession -------------------------------------------------------------

SenderSession::SenderSession(SidList flow, const MatcherEngine& engine,
                             const ColoringSchedule& schedule, SenderOptions options)
    : flow_(std::move(flow)),
      engine_(engine),
      schedule_(schedule),
      guard_(options.guard.value_or(schedule.period() / 2)),
      timeout_(options.response_timeout.value_or(schedule.period())) {}

Timestamp SenderSession::query_time(std::uint64_t index) const {
  return schedule_.block_start(index + 1) + guard_;
}

LmQuery SenderSession::build_query(Timestamp now) {
  const std::uint64_t current = schedule_.block_at(now);
  return build_query(now, opposite(schedule_.color_of_block(current)));
}

LmQuery SenderSession::build_query(Timestamp now, Color block) {
  const std::uint64_t current = schedule_.block_at(now);
  if (schedule_.color_of_block(current) == block) {
    throw ProtocolError(LmErrc::kBlockStillActive,
                        "block " + std::string(to_string(block)) + " is still active");
  }
  if (current == 0) {
    throw ProtocolError(LmErrc::kBlockStillActive, "no completed block yet");
  }
  const std::uint64_t target = current - 1;
  if (now < schedule_.block_start(current) + guard_) {
    throw ProtocolError(LmErrc::kGuardNotReached, "query guard window not reached");
  }
  const auto slot = color_index(block);
  if (outstanding_[slot]) {
    throw ProtocolError(LmErrc::kOutstandingQuery,
                        "query for block " + std::string(to_string(block)) + " outstanding");
  }
  if (last_block_[slot] && *last_block_[slot] >= target) {
    throw ProtocolError(LmErrc::kOutstandingQuery,
                        "block " + std::to_string(target) + " already queried");
  }

  const std::uint64_t counter = engine_.read_counter(flow_, block);
  LmQuery query{next_seq_++, block, counter - baseline_[slot]};
  baseline_[slot] = counter;
  last_block_[slot] = target;
  outstanding_[slot] = Pending{query, target, now};
  return query;
}

LossRecord SenderSession::process_response(const LmResponse& response) {
  const auto& echoed = response.echoed_query;
  auto& pending = outstanding_[color_index(echoed.block_number)];
  if (!pending || pending->query != echoed) {
    throw ProtocolError(LmErrc::kStaleResponse,
                        "stale response for sender_seq " + std::to_string(echoed.sender_seq));
  }
  if (last_receiver_seq_ && response.receiver_seq <= *last_receiver_seq_) ++reflector_resets_;
  last_receiver_seq_ = response.receiver_seq;
  const Pending done = *pending;
  pending.reset();

  if (response.status == ResponseStatus::kUnknownFlow) {
    throw ProtocolError(LmErrc::kUnknownFlow,
                        "reflector does not monitor flow " + flow_.to_string());
  }
  if (response.status == ResponseStatus::kDiscontinuity) {
    gaps_.push_back({done.query.block_number, done.block_index, done.query.sender_seq});
    throw ProtocolError(LmErrc::kCounterDiscontinuity,
                        "reflector counter discontinuity at block " +
                            std::to_string(done.block_index));
  }
  if (response.receiver_counter > echoed.sender_counter) {
    throw ProtocolError(LmErrc::kNegativeLoss,
                        "negative loss: received " + std::to_string(response.receiver_counter) +
                            " > sent " + std::to_string(echoed.sender_counter));
  }
  LossRecord record{echoed.block_number,
                    done.block_index,
                    echoed.sender_counter,
                    response.receiver_counter,
                    echoed.sender_counter - response.receiver_counter,
                    echoed.sender_seq};
  history_.push_back(record);
  return record;
}

std::vector<Gap> SenderSession::expire(Timestamp now) {
  std::vector<Gap> expired;
  for (auto& pending : outstanding_) {
    if (pending && now - pending->sent_at >= timeout_) {
      expired.push_back({pending->query.block_number, pending->block_index,
                         pending->query.sender_seq});
      pending.reset();
    }
  }
  gaps_.insert(gaps_.end(), expired.begin(), expired.end());
  return expired;
}

std::size_t SenderSession::outstanding_count() const {
  return static_cast<std::size_t>(outstanding_[0].has_value()) +
         static_cast<std::size_t>(outstanding_[1].has_value());
}

// --- ReflectorSession ----------------------------------------------------------

ReflectorSession::ReflectorSession(SidList flow, const MatcherEngine& engine, bool restarted)
    : flow_(std::move(flow)), engine_(engine), resync_{restarted, restarted} {}

LmResponse ReflectorSession::process_query(const LmQuery& query) {
  const auto slot = color_index(query.block_number);
  LmResponse response;
  response.receiver_seq = next_seq_++;
  response.block_number = query.block_number;
  response.echoed_query = query;

  const std::uint64_t counter = engine_.read_counter(flow_, query.block_number);
  const std::uint64_t delta = counter - baseline_[slot];
  baseline_[slot] = counter;

  const auto& last = last_query_seq_[slot];
  const bool contiguous =
      !resync_[slot] && (last ? query.sender_seq == *last + 2 : query.sender_seq < 2);
  last_query_seq_[slot] = query.sender_seq;
  resync_[slot] = false;
  if (!contiguous) {
    response.status = ResponseStatus::kDiscontinuity;
    return response;
  }
  response.receiver_counter = delta;
  return response;
}

// --- Reflector -----------------------------------------------------------------

void Reflector::add_flow(const SidList& flow) { sessions_.try_emplace(flow, flow, engine_); }

LmResponse Reflector::process_query(const SidList& flow, const LmQuery& query) {
  auto it = sessions_.find(flow);
  bool known = it != sessions_.end();
  if (known) {
    try {
      return it->second.process_query(query);
    } catch (const MatcherError&) {
      known = false;
    }
  }
  LmResponse response;
  response.receiver_seq = error_seq_++;
  response.block_number = query.block_number;
  response.status = ResponseStatus::kUnknownFlow;
  response.echoed_query = query;
  return response;
}

void Reflector::reset() {
  std::vector<SidList> flows;
  for (const auto& [flow, session] : sessions_) flows.push_back(flow);
  sessions_.clear();
  error_seq_ = 0;
  for (const auto& flow : flows) sessions_.try_emplace(flow, flow, engine_, true);
}

}  // namespace pfplm::lm
