#include "pfplm/endpoint.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <mutex>
#include <set>
#include <thread>

#include "pfplm/codec.hpp"
#include "pfplm/dataplane.hpp"
#include "pfplm/error.hpp"

namespace pfplm::live {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint16_t kSenderPortBase = 40000;
constexpr std::uint16_t kDataPort = 9;
constexpr std::size_t kMaxDatagram = 65536;
const Ipv6Address kIngressAddress = Ipv6Address::from_u64(0xfc00ffff00000000ULL, 1);
const Ipv6Address kEgressAddress = Ipv6Address::from_u64(0xfc00ffff00000000ULL, 2);
const Ipv6Address kTrafficSource = Ipv6Address::from_u64(0x20010db8ffff0000ULL, 1);

struct SockAddr {
  sockaddr_storage storage{};
  socklen_t length = 0;

  const sockaddr* get() const { return reinterpret_cast<const sockaddr*>(&storage); }
};

SockAddr resolve(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_DGRAM;
  hints.ai_flags = AI_NUMERICHOST | AI_NUMERICSERV;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw ConfigError("bad address '" + host + "': " + gai_strerror(rc));
  }
  SockAddr out;
  std::memcpy(&out.storage, res->ai_addr, res->ai_addrlen);
  out.length = res->ai_addrlen;
  freeaddrinfo(res);
  return out;
}

class Socket {
 public:
  explicit Socket(const SockAddr& bind_to) {
    fd_ = ::socket(bind_to.storage.ss_family, SOCK_DGRAM, 0);
    if (fd_ < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
    timeval tv{0, 50'000};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    if (::bind(fd_, bind_to.get(), bind_to.length) != 0) {
      const std::string why = std::strerror(errno);
      ::close(fd_);
      throw IoError("bind: " + why);
    }
  }
  ~Socket() { ::close(fd_); }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  std::uint16_t port() const {
    sockaddr_storage ss{};
    socklen_t len = sizeof ss;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&ss), &len);
    if (ss.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port);
    return ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
  }

  // Send errors are not fatal for a datagram endpoint; they surface as gaps.
  bool send_to(std::span<const std::uint8_t> bytes, const SockAddr& to) const {
    return ::sendto(fd_, bytes.data(), bytes.size(), 0, to.get(), to.length) ==
           static_cast<ssize_t>(bytes.size());
  }

  // Empty result on timeout.
  std::optional<codec::Bytes> receive(SockAddr& from) const {
    codec::Bytes buf(kMaxDatagram);
    from.length = sizeof from.storage;
    const ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                                 reinterpret_cast<sockaddr*>(&from.storage), &from.length);
    if (n < 0) return std::nullopt;
    buf.resize(static_cast<std::size_t>(n));
    return buf;
  }

 private:
  int fd_ = -1;
};

Duration interval_of(double rate_pps) {
  return Duration{static_cast<std::int64_t>(std::llround(1e9 / rate_pps))};
}

}  // namespace

void validate(const EndpointConfig& c) {
  if (c.period <= Duration::zero()) throw ConfigError("marking period must be positive");
  if (c.flows.empty()) throw ConfigError("at least one flow is required");
  if (c.guard && (*c.guard <= Duration::zero() || *c.guard >= c.period)) {
    throw ConfigError("query guard must lie inside (0, T)");
  }
  if (c.response_timeout && *c.response_timeout <= Duration::zero()) {
    throw ConfigError("response timeout must be positive");
  }
  if (c.run_for && *c.run_for <= Duration::zero()) throw ConfigError("run_for must be positive");
  if (c.role == EndpointRole::kSender && c.lm_port == 0) {
    throw ConfigError("sender needs the reflector's LM port");
  }
  if (c.flows.size() > 65535 - kSenderPortBase) throw ConfigError("too many flows");
  std::set<SidList> seen;
  std::set<Ipv6Address> dst;
  for (std::size_t i = 0; i < c.flows.size(); ++i) {
    const auto& f = c.flows[i];
    const std::string which = "flow " + std::to_string(i) + ": ";
    if (f.sids.empty()) throw ConfigError(which + "empty SID list");
    if (!(f.rate_pps > 0.0 && f.rate_pps <= 1e6)) {
      throw ConfigError(which + "rate must be in (0, 1e6] pps");
    }
    if (!seen.insert(f.sids).second) throw ConfigError(which + "duplicate SID list");
    if (!dst.insert(f.destination).second) throw ConfigError(which + "duplicate destination");
  }
  resolve(c.bind_address, 0);
  if (c.role == EndpointRole::kSender) resolve(c.peer_address, c.lm_port);
}

// --- Sender --------------------------------------------------------------------

struct SenderEndpoint::Impl {
  EndpointConfig config;
  SenderEvents events;
  SockAddr peer;
  std::unique_ptr<Socket> socket;

  SrPolicyTable policies;
  std::unique_ptr<MatcherEngine> engine;
  ColoringSchedule schedule;
  std::unique_ptr<IngressNode> ingress;
  std::vector<lm::SenderSession> sessions;
  std::vector<std::uint64_t> next_query_block;
  std::vector<Timestamp> next_send;
  std::vector<codec::Bytes> inner;

  mutable std::mutex mutex;
  SenderStats stats;

  Impl(EndpointConfig c, SenderEvents e)
      : config(std::move(c)), events(std::move(e)), schedule(config.period) {
    validate(config);
    if (config.role != EndpointRole::kSender) throw ConfigError("configuration is not a sender");
    peer = resolve(config.peer_address, config.lm_port);
    socket = std::make_unique<Socket>(resolve(config.bind_address, 0));
    engine = make_engine(config.engine);
    for (const auto& f : config.flows) {
      policies.add({Ipv6Prefix::make(f.destination, 128), f.sids, true});
    }
    policies.register_monitored(*engine);
    IngressOptions options;
    options.encap.source = kIngressAddress;
    ingress = std::make_unique<IngressNode>(policies, *engine, schedule, options);
    for (const auto& f : config.flows) {
      sessions.emplace_back(f.sids, *engine, schedule,
                            lm::SenderOptions{config.guard, config.response_timeout});
      next_query_block.push_back(0);
      next_send.push_back(Timestamp{0});
      const std::uint8_t payload[8] = {};
      inner.push_back(codec::encode_udp6(kTrafficSource, f.destination, 1024, kDataPort, payload));
    }
  }

  void report_gaps(std::size_t flow, const std::vector<lm::Gap>& gaps) {
    for (const auto& g : gaps) {
      ++stats.gaps;
      if (events.on_gap) events.on_gap(flow, g);
    }
  }

  void send_query(std::size_t flow, Timestamp now) {
    auto& session = sessions[flow];
    const std::uint64_t current = schedule.block_at(now);
    std::uint64_t& target = next_query_block[flow];
    if (current == 0 || target + 1 > current) return;
    if (target + 1 < current) target = current - 1;  // we fell behind; skip stale blocks
    if (now < session.query_time(target)) return;
    lm::LmQuery query;
    try {
      query = session.build_query(now, schedule.color_of_block(target));
    } catch (const ProtocolError& e) {
      if (e.code() == LmErrc::kOutstandingQuery) return;  // retry after expiry
      ++stats.errors;
      if (events.on_error) events.on_error(flow, e.what());
      ++target;
      return;
    }
    ++target;
    const auto body = lm::serialize(query);
    const codec::Bytes udp = codec::encode_udp6(
        kIngressAddress, kEgressAddress, static_cast<std::uint16_t>(kSenderPortBase + flow),
        config.lm_port, body);
    codec::Bytes packet = codec::encapsulate_wire(udp, config.flows[flow].sids, {kIngressAddress, 64});
    codec::advance_to_final_segment_in_place(packet);
    socket->send_to(packet, peer);
    ++stats.queries_sent;
  }

  void handle_response(const codec::Bytes& datagram) {
    std::optional<codec::UdpDatagram> udp;
    try {
      udp = codec::decode_udp6(datagram);
    } catch (const CodecError&) {
      return;
    }
    if (!udp || udp->udp.dst_port < kSenderPortBase) return;
    const std::size_t flow = udp->udp.dst_port - kSenderPortBase;
    if (flow >= sessions.size()) return;
    std::lock_guard lock(mutex);
    ++stats.responses;
    try {
      const auto msg = lm::deserialize_message(udp->payload);
      const auto* response = std::get_if<lm::LmResponse>(&msg);
      if (!response) return;
      const auto record = sessions[flow].process_response(*response);
      ++stats.records;
      if (events.on_record) events.on_record(flow, record);
    } catch (const ProtocolError& e) {
      if (e.code() == LmErrc::kCounterDiscontinuity) {
        report_gaps(flow, {sessions[flow].gaps().back()});
        return;
      }
      ++stats.errors;
      if (events.on_error) events.on_error(flow, e.what());
    }
  }

  void run(const std::atomic<bool>& stop) {
    const auto t0 = Clock::now();
    std::atomic<bool> done{false};
    auto elapsed = [&] { return std::chrono::duration_cast<Duration>(Clock::now() - t0); };
    auto finished = [&] {
      return stop.load() || done.load() || (config.run_for && elapsed() >= *config.run_for);
    };

    std::thread reader([&] {
      SockAddr from;
      while (!finished()) {
        if (auto datagram = socket->receive(from)) handle_response(*datagram);
      }
    });

    while (!finished()) {
      const Timestamp now = elapsed();
      {
        std::lock_guard lock(mutex);
        for (std::size_t i = 0; i < sessions.size(); ++i) {
          const Duration step = interval_of(config.flows[i].rate_pps);
          // Bounded catch-up after a stall.
          for (int burst = 0; next_send[i] <= now && burst < 64; ++burst) {
            const auto result = ingress->process(inner[i], now);
            codec::Bytes packet = result.packet;
            codec::advance_to_final_segment_in_place(packet);
            socket->send_to(packet, peer);
            ++stats.data_sent;
            next_send[i] += step;
          }
          if (next_send[i] <= now) next_send[i] = now + step;
          send_query(i, now);
          report_gaps(i, sessions[i].expire(now));
        }
      }
      std::this_thread::sleep_for(std::chrono::microseconds(500));
    }
    done = true;
    reader.join();
  }
};

SenderEndpoint::SenderEndpoint(EndpointConfig config, SenderEvents events)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(events))) {}

SenderEndpoint::~SenderEndpoint() = default;

void SenderEndpoint::run(const std::atomic<bool>& stop) { impl_->run(stop); }

std::uint16_t SenderEndpoint::local_port() const { return impl_->socket->port(); }

SenderStats SenderEndpoint::stats() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->stats;
}

// --- Reflector -----------------------------------------------------------------

struct ReflectorEndpoint::Impl {
  EndpointConfig config;
  std::unique_ptr<Socket> socket;
  std::unique_ptr<MatcherEngine> engine;
  std::unique_ptr<EgressNode> egress;
  std::unique_ptr<lm::Reflector> reflector;
  std::uint16_t lm_port = 0;
  mutable std::mutex mutex;
  ReflectorStats stats;

  explicit Impl(EndpointConfig c) : config(std::move(c)) {
    validate(config);
    if (config.role != EndpointRole::kReflector) {
      throw ConfigError("configuration is not a reflector");
    }
    socket = std::make_unique<Socket>(resolve(config.bind_address, config.lm_port));
    lm_port = socket->port();
    engine = make_engine(config.engine);
    egress = std::make_unique<EgressNode>(*engine);
    reflector = std::make_unique<lm::Reflector>(*engine);
    for (const auto& f : config.flows) {
      engine->add_flow(f.sids);
      reflector->add_flow(f.sids);
    }
  }

  void handle(const codec::Bytes& datagram, const SockAddr& from) {
    std::lock_guard lock(mutex);
    EgressResult result;
    try {
      result = egress->process(datagram);
    } catch (const CodecError&) {
      ++stats.malformed;
      return;
    }
    if (result.color) {
      ++stats.data_received;
      return;
    }
    if (!result.decapsulated || !result.sids) return;
    std::optional<codec::UdpDatagram> udp;
    try {
      udp = codec::decode_udp6(result.packet);
    } catch (const CodecError&) {
      ++stats.malformed;
      return;
    }
    if (!udp || udp->udp.dst_port != lm_port) return;
    lm::LmMessage msg;
    try {
      msg = lm::deserialize_message(udp->payload);
    } catch (const ProtocolError&) {
      ++stats.malformed;
      return;
    }
    const auto* query = std::get_if<lm::LmQuery>(&msg);
    if (!query) return;
    ++stats.queries;
    const lm::LmResponse response = reflector->process_query(*result.sids, *query);
    const auto body = lm::serialize(response);
    const codec::Bytes reply = codec::encode_udp6(kEgressAddress, udp->ip.src, lm_port,
                                                  udp->udp.src_port, body);
    socket->send_to(reply, from);
  }

  void run(const std::atomic<bool>& stop) {
    const auto t0 = Clock::now();
    SockAddr from;
    while (!stop.load()) {
      if (config.run_for && Clock::now() - t0 >= *config.run_for) break;
      if (auto datagram = socket->receive(from)) handle(*datagram, from);
    }
  }
};

ReflectorEndpoint::ReflectorEndpoint(EndpointConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

ReflectorEndpoint::~ReflectorEndpoint() = default;

void ReflectorEndpoint::run(const std::atomic<bool>& stop) { impl_->run(stop); }

std::uint16_t ReflectorEndpoint::local_port() const { return impl_->lm_port; }

ReflectorStats ReflectorEndpoint::stats() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->stats;
}

std::vector<ColorBank> ReflectorEndpoint::counters() const {
  std::lock_guard lock(impl_->mutex);
  std::vector<ColorBank> out;
  for (const auto& f : impl_->config.flows) {
    out.push_back({impl_->engine->read_counter(f.sids, Color::A),
                   impl_->engine->read_counter(f.sids, Color::B)});
  }
  return out;
}

}  // namespace pfplm::live
