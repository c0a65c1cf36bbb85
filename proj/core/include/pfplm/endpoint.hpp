#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pfplm/flow_matcher.hpp"
#include "pfplm/lm_protocol.hpp"
#include "pfplm/sid_list.hpp"
#include "pfplm/types.hpp"

// Live Sender/Reflector endpoints over plain UDP sockets. Each datagram
// carries a complete outer IPv6 + SRH packet as its payload, so the full
// encapsulate/color/count path runs without raw sockets or privileges.
//
// Sender -> reflector: colored data packets and uncolored LM queries, both
// encapsulated with the flow's SID list (LM queries inner: IPv6/UDP to the LM
// port, source port 40000 + flow index). Reflector -> sender: plain IPv6/UDP
// LM responses.
namespace pfplm::live {

struct EndpointFlow {
  SidList sids;
  Ipv6Address destination;
  double rate_pps = 100.0;
};

enum class EndpointRole { kSender, kReflector };

struct EndpointConfig {
  EndpointRole role = EndpointRole::kSender;
  EngineKind engine = EngineKind::kHash;
  Duration period = std::chrono::seconds(2);
  std::optional<Duration> guard;
  std::optional<Duration> response_timeout;
  /// Reflector: address to bind. Sender: local address to bind (port 0).
  std::string bind_address = "127.0.0.1";
  /// Sender only: where the reflector listens.
  std::string peer_address = "127.0.0.1";
  /// Reflector listens here; 0 picks an ephemeral port (see local_port()).
  std::uint16_t lm_port = lm::kDefaultPort;
  std::vector<EndpointFlow> flows;
  /// Stop after this long; run until the stop flag otherwise.
  std::optional<Duration> run_for;
};

/// Throws ConfigError.
void validate(const EndpointConfig& config);

struct SenderEvents {
  std::function<void(std::size_t flow, const lm::LossRecord&)> on_record;
  std::function<void(std::size_t flow, const lm::Gap&)> on_gap;
  std::function<void(std::size_t flow, const std::string& message)> on_error;
};

struct SenderStats {
  std::uint64_t data_sent = 0;
  std::uint64_t queries_sent = 0;
  std::uint64_t responses = 0;
  std::uint64_t records = 0;
  std::uint64_t gaps = 0;
  std::uint64_t errors = 0;
};

class SenderEndpoint {
 public:
  /// Validates and binds. Throws ConfigError or IoError.
  SenderEndpoint(EndpointConfig config, SenderEvents events);
  ~SenderEndpoint();
  SenderEndpoint(const SenderEndpoint&) = delete;
  SenderEndpoint& operator=(const SenderEndpoint&) = delete;

  /// Generates traffic and runs the LM exchange until `stop` is set or
  /// run_for elapses. A socket reader thread handles responses; session state
  /// is shared under a mutex.
  void run(const std::atomic<bool>& stop);

  std::uint16_t local_port() const;
  SenderStats stats() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ReflectorStats {
  std::uint64_t data_received = 0;
  std::uint64_t queries = 0;
  std::uint64_t malformed = 0;
};

class ReflectorEndpoint {
 public:
  /// Validates and binds the LM port. Throws ConfigError or IoError.
  explicit ReflectorEndpoint(EndpointConfig config);
  ~ReflectorEndpoint();
  ReflectorEndpoint(const ReflectorEndpoint&) = delete;
  ReflectorEndpoint& operator=(const ReflectorEndpoint&) = delete;

  void run(const std::atomic<bool>& stop);

  std::uint16_t local_port() const;
  ReflectorStats stats() const;
  /// Counters of the egress engine, by flow in configuration order.
  std::vector<ColorBank> counters() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pfplm::live
