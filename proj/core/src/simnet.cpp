#include "pfplm/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pfplm/codec.hpp"
#include "pfplm/error.hpp"

namespace pfplm::sim {

namespace {

const Ipv6Address kTrafficSource = Ipv6Address::from_u64(0x20010db8ffff0000ULL, 1);
const Ipv6Address kIngressAddress = Ipv6Address::from_u64(0xfc00ffff00000000ULL, 1);
const Ipv6Address kEgressAddress = Ipv6Address::from_u64(0xfc00ffff00000000ULL, 2);
constexpr std::uint16_t kSenderPortBase = 40000;
constexpr std::uint16_t kDataPort = 9;

[[noreturn]] void invalid(const std::string& why) {
  throw SimError(SimErrc::kInvalidScenario, "invalid scenario: " + why);
}

Duration packet_interval(double rate_pps) {
  return Duration{static_cast<std::int64_t>(std::llround(1e9 / rate_pps))};
}

Scenario validated(Scenario s) {
  validate(s);
  return s;
}

std::uint64_t seed_or(std::uint64_t seed, std::uint64_t fallback) {
  return seed != 0 ? seed : fallback;
}

}  // namespace

void validate(const Scenario& s) {
  if (s.period <= Duration::zero()) invalid("marking period must be positive");
  if (s.blocks == 0) invalid("at least one color block is required");
  if (s.flows.empty()) invalid("no flows");
  if (s.link.propagation_delay < Duration::zero()) invalid("negative propagation delay");
  if (s.link.propagation_delay * 2 >= s.period) {
    invalid("propagation delay must be below T/2 (delay " +
            std::to_string(s.link.propagation_delay.count()) + " ns, T " +
            std::to_string(s.period.count()) + " ns)");
  }
  if (s.guard && (*s.guard <= Duration::zero() || *s.guard >= s.period)) {
    invalid("query guard must lie inside (0, T)");
  }
  for (const DropPlan* plan : {&s.link.data_drops, &s.link.lm_drops}) {
    if (!(plan->probability >= 0.0 && plan->probability <= 1.0)) {
      invalid("drop probability outside [0, 1]");
    }
  }
  std::set<SidList> seen_sids;
  std::set<Ipv6Address> seen_dst;
  for (std::size_t i = 0; i < s.flows.size(); ++i) {
    const auto& f = s.flows[i];
    const std::string which = "flow " + std::to_string(i) + ": ";
    if (f.sids.empty()) invalid(which + "empty SID list");
    if (!(f.rate_pps > 0.0) || packet_interval(f.rate_pps) <= Duration::zero()) {
      invalid(which + "rate must be positive and at most 1e9 pps");
    }
    if (f.start < Timestamp{0}) invalid(which + "negative start time");
    if (f.stop && *f.stop < f.start) invalid(which + "stop precedes start");
    if (!seen_sids.insert(f.sids).second) invalid(which + "duplicate SID list");
    if (!seen_dst.insert(f.destination).second) invalid(which + "duplicate destination");
  }
  for (const auto& t : s.faults.drop_queries) {
    if (t.flow >= s.flows.size()) invalid("fault targets unknown flow");
  }
  for (const auto& t : s.faults.drop_responses) {
    if (t.flow >= s.flows.size()) invalid("fault targets unknown flow");
  }
  for (const auto& r : s.faults.replay_responses) {
    if (r.target.flow >= s.flows.size()) invalid("fault targets unknown flow");
    if (r.extra_delay < Duration::zero()) invalid("negative replay delay");
  }
  for (const auto& t : s.faults.reflector_restarts) {
    if (t < Timestamp{0}) invalid("restart before time 0");
  }
}

std::uint64_t FlowResult::total_dropped() const {
  std::uint64_t total = 0;
  for (const auto& [block, t] : truth) total += t.dropped;
  return total;
}

std::vector<std::string> SimResult::mismatches() const {
  std::vector<std::string> out;
  for (const auto& f : flows) {
    for (const auto& r : f.records) {
      auto it = f.truth.find(r.block_index);
      const BlockTruth t = it != f.truth.end() ? it->second : BlockTruth{};
      if (r.tx_count != t.transmitted || r.rx_count != t.delivered || r.loss != t.dropped ||
          (t.transmitted > 0 && r.block_color != t.color)) {
        std::ostringstream msg;
        msg << "flow " << f.flow << " block " << r.block_index << ": tx " << r.tx_count << "/"
            << t.transmitted << " rx " << r.rx_count << "/" << t.delivered << " loss " << r.loss
            << "/" << t.dropped;
        out.push_back(msg.str());
      }
    }
  }
  return out;
}

bool SimResult::exact() const { return mismatches().empty(); }

void write_results_csv(const SimResult& result, std::ostream& out) {
  out << "flow,block,color,tx,rx,loss,truth\n";
  for (const auto& f : result.flows) {
    for (const auto& r : f.records) {
      auto it = f.truth.find(r.block_index);
      const std::uint64_t truth = it != f.truth.end() ? it->second.dropped : 0;
      out << f.flow << ',' << r.block_index << ',' << to_string(r.block_color) << ','
          << r.tx_count << ',' << r.rx_count << ',' << r.loss << ',' << truth << '\n';
    }
  }
}

void write_event_log(const SimResult& result, std::ostream& out) {
  for (const auto& line : result.event_log) out << line << '\n';
}

// --- Simulator -----------------------------------------------------------------

struct Simulator::Event {
  enum class Kind {
    kDataSend,
    kDataArrive,
    kQueryTimer,
    kQueryArrive,
    kResponseArrive,
    kReflectorRestart,
    kFinalExpire,
  };
  Kind kind;
  std::size_t flow = 0;
  std::uint64_t id = 0;  // packet id, or block index for timers
  std::uint64_t block = 0;
  codec::Bytes packet{};
};

struct Simulator::FlowState {
  FlowSpec spec;
  codec::Bytes inner;
  Duration interval{0};
  Timestamp stop{0};
  std::uint64_t sent = 0;
  std::unique_ptr<lm::SenderSession> session;
  FlowResult result;
};

Simulator::Simulator(Scenario scenario)
    : scenario_(validated(std::move(scenario))),
      ingress_engine_(make_engine(scenario_.engine)),
      egress_engine_(make_engine(scenario_.engine)),
      schedule_(scenario_.period),
      data_rng_(seed_or(scenario_.link.data_drops.seed, scenario_.seed)),
      lm_rng_(seed_or(scenario_.link.lm_drops.seed, scenario_.seed ^ 0x6c6d6c6d6c6d6c6dULL)) {
  traffic_end_ = schedule_.block_start(scenario_.blocks);
  for (const auto& f : scenario_.flows) {
    policies_.add({Ipv6Prefix::make(f.destination, 128), f.sids, f.monitored});
  }
  policies_.register_monitored(*ingress_engine_);
  IngressOptions options;
  options.encap.source = kIngressAddress;
  ingress_ = std::make_unique<IngressNode>(policies_, *ingress_engine_, schedule_, options);
  egress_ = std::make_unique<EgressNode>(*egress_engine_);
  reflector_ = std::make_unique<lm::Reflector>(*egress_engine_);

  lm::SenderOptions sender_options;
  sender_options.guard = scenario_.guard;
  const std::uint8_t payload[8] = {};
  flows_.resize(scenario_.flows.size());
  for (std::size_t i = 0; i < flows_.size(); ++i) {
    auto& fs = flows_[i];
    fs.spec = scenario_.flows[i];
    fs.inner = codec::encode_udp6(kTrafficSource, fs.spec.destination, kDataPort, kDataPort,
                                  payload);
    fs.interval = packet_interval(fs.spec.rate_pps);
    fs.stop = std::min(fs.spec.stop.value_or(traffic_end_), traffic_end_);
    fs.result.flow = i;
    fs.result.sids = fs.spec.sids;
    if (fs.spec.monitored) {
      egress_engine_->add_flow(fs.spec.sids);
      reflector_->add_flow(fs.spec.sids);
      fs.session = std::make_unique<lm::SenderSession>(fs.spec.sids, *ingress_engine_, schedule_,
                                                       sender_options);
    }
  }

  for (std::size_t i = 0; i < flows_.size(); ++i) {
    if (flows_[i].spec.start < flows_[i].stop) {
      schedule(flows_[i].spec.start, {Event::Kind::kDataSend, i});
    }
    if (flows_[i].session) {
      schedule(flows_[i].session->query_time(0), {Event::Kind::kQueryTimer, i, 0});
      const auto last_query = flows_[i].session->query_time(scenario_.blocks - 1);
      schedule(last_query + flows_[i].session->response_timeout(),
               {Event::Kind::kFinalExpire, i});
    }
  }
  for (auto t : scenario_.faults.reflector_restarts) {
    schedule(t, {Event::Kind::kReflectorRestart});
  }
}

Simulator::~Simulator() = default;

void Simulator::inject_drop_plan(DropPlan plan) {
  if (started_) throw SimError(SimErrc::kAlreadyStarted, "simulation already started");
  if (!(plan.probability >= 0.0 && plan.probability <= 1.0)) {
    invalid("drop probability outside [0, 1]");
  }
  data_rng_.seed(seed_or(plan.seed, scenario_.seed));
  scenario_.link.data_drops = std::move(plan);
}

void Simulator::schedule(Timestamp at, Event event) {
  if (at < now_) {
    throw SimError(SimErrc::kEventInPast, "event scheduled at " + std::to_string(at.count()) +
                                              " before clock " + std::to_string(now_.count()));
  }
  queue_.emplace(std::pair{at, insertion_++}, std::make_unique<Event>(std::move(event)));
}

bool Simulator::step() {
  if (queue_.empty()) return false;
  started_ = true;
  auto node = queue_.extract(queue_.begin());
  now_ = node.key().first;
  dispatch(*node.mapped());
  return true;
}

void Simulator::run_until(Timestamp t) {
  while (!queue_.empty() && queue_.begin()->first.first <= t) step();
  if (t > now_) now_ = t;
  started_ = true;
}

SimResult Simulator::run() {
  if (finished_) throw SimError(SimErrc::kAlreadyStarted, "simulation already ran");
  while (step()) {
  }
  finished_ = true;
  return collect();
}

void Simulator::dispatch(const Event& e) {
  switch (e.kind) {
    case Event::Kind::kDataSend:
      on_data_send(e.flow);
      break;
    case Event::Kind::kDataArrive:
      on_data_arrive(e.flow, e.id, e.block, e.packet);
      break;
    case Event::Kind::kQueryTimer:
      on_query_timer(e.flow, e.id);
      break;
    case Event::Kind::kQueryArrive:
      on_query_arrive(e.flow, e.id, e.packet);
      break;
    case Event::Kind::kResponseArrive:
      on_response_arrive(e.flow, e.id, e.packet);
      break;
    case Event::Kind::kReflectorRestart:
      on_reflector_restart();
      break;
    case Event::Kind::kFinalExpire:
      for (const auto& gap : flows_[e.flow].session->expire(now_)) {
        log("sender", "gap", gap.sender_seq, "block=" + std::to_string(gap.block_index));
      }
      break;
  }
}

void Simulator::log(std::string_view node, std::string_view action, std::uint64_t id,
                    std::string_view detail) {
  if (!scenario_.record_event_log) return;
  std::string line = std::to_string(now_.count());
  line += ' ';
  line += node;
  line += ' ';
  line += action;
  line += ' ';
  line += std::to_string(id);
  if (!detail.empty()) {
    line += ' ';
    line += detail;
  }
  log_.push_back(std::move(line));
}

void Simulator::on_data_send(std::size_t flow) {
  auto& fs = flows_[flow];
  const IngressResult out = ingress_->process(fs.inner, now_);
  const std::uint64_t block = schedule_.block_index();
  BlockTruth* truth = nullptr;
  if (fs.spec.monitored) {
    truth = &fs.result.truth[block];
    truth->color = schedule_.active_color();
    ++truth->transmitted;
  }

  const std::uint64_t id = next_data_index_++;
  const auto& plan = scenario_.link.data_drops;
  bool dropped = plan.indices.contains(id);
  if (plan.probability > 0.0) {
    const bool coin = std::uniform_real_distribution<double>(0.0, 1.0)(data_rng_) <
                      plan.probability;
    dropped = dropped || coin;
  }
  if (dropped) {
    ++data_dropped_;
    if (truth) ++truth->dropped;
    log("link", "drop", id);
  } else {
    log("ingress", "send", id);
    schedule(now_ + scenario_.link.propagation_delay,
             {Event::Kind::kDataArrive, flow, id, block, out.packet});
  }

  ++fs.sent;
  const Timestamp next = fs.spec.start + fs.interval * static_cast<std::int64_t>(fs.sent);
  if (next < fs.stop) schedule(next, {Event::Kind::kDataSend, flow});
}

void Simulator::on_data_arrive(std::size_t flow, std::uint64_t id, std::uint64_t block,
                               const codec::Bytes& packet) {
  codec::Bytes copy = packet;
  codec::advance_to_final_segment_in_place(copy);
  egress_->process(copy);
  auto& fs = flows_[flow];
  if (fs.spec.monitored) ++fs.result.truth[block].delivered;
  log("egress", "recv", id);
}

bool Simulator::drop_lm(const DropPlan& plan, std::mt19937_64& rng) {
  bool dropped = plan.indices.contains(next_lm_index_);
  if (plan.probability > 0.0) {
    dropped = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < plan.probability || dropped;
  }
  return dropped;
}

void Simulator::on_query_timer(std::size_t flow, std::uint64_t block) {
  auto& fs = flows_[flow];
  for (const auto& gap : fs.session->expire(now_)) {
    log("sender", "gap", gap.sender_seq, "block=" + std::to_string(gap.block_index));
  }
  if (block + 1 < scenario_.blocks) {
    schedule(fs.session->query_time(block + 1), {Event::Kind::kQueryTimer, flow, block + 1});
  }

  lm::LmQuery query;
  try {
    query = fs.session->build_query(now_);
  } catch (const ProtocolError& e) {
    fs.result.protocol_errors.push_back(e.what());
    log("sender", "query-error", block);
    return;
  }
  const auto payload = lm::serialize(query);
  const auto inner =
      codec::encode_udp6(kIngressAddress, kEgressAddress,
                         static_cast<std::uint16_t>(kSenderPortBase + flow), lm::kDefaultPort,
                         payload);
  codec::EncapOptions encap;
  encap.source = kIngressAddress;
  auto outer = codec::encapsulate_wire(inner, fs.spec.sids, encap);

  const std::uint64_t id = next_lm_index_;
  bool dropped = scenario_.faults.drop_queries.contains({flow, query.sender_seq});
  if (!scenario_.link.protect_lm) dropped = drop_lm(scenario_.link.lm_drops, lm_rng_) || dropped;
  ++next_lm_index_;
  if (dropped) {
    ++lm_dropped_;
    log("link", "drop-query", id, "seq=" + std::to_string(query.sender_seq));
    return;
  }
  log("sender", "query", id, "seq=" + std::to_string(query.sender_seq));
  schedule(now_ + scenario_.link.propagation_delay,
           {Event::Kind::kQueryArrive, flow, id, 0, std::move(outer)});
}

void Simulator::on_query_arrive(std::size_t flow, std::uint64_t id, const codec::Bytes& packet) {
  codec::Bytes copy = packet;
  codec::advance_to_final_segment_in_place(copy);
  const EgressResult out = egress_->process(copy);
  const auto datagram = codec::decode_udp6(out.packet);
  if (!datagram || datagram->udp.dst_port != lm::kDefaultPort || !out.sids) return;
  const auto message = lm::deserialize_message(datagram->payload);
  const auto& query = std::get<lm::LmQuery>(message);
  const lm::LmResponse response = reflector_->process_query(*out.sids, query);
  log("reflector", "respond", id, "seq=" + std::to_string(query.sender_seq));

  const auto reply = codec::encode_udp6(kEgressAddress, kIngressAddress, lm::kDefaultPort,
                                        datagram->udp.src_port, lm::serialize(response));
  const std::uint64_t reply_id = next_lm_index_;
  bool dropped = scenario_.faults.drop_responses.contains({flow, query.sender_seq});
  if (!scenario_.link.protect_lm) dropped = drop_lm(scenario_.link.lm_drops, lm_rng_) || dropped;
  ++next_lm_index_;
  if (dropped) {
    ++lm_dropped_;
    log("link", "drop-response", reply_id, "seq=" + std::to_string(query.sender_seq));
    return;
  }
  const Timestamp arrive = now_ + scenario_.link.propagation_delay;
  schedule(arrive, {Event::Kind::kResponseArrive, flow, reply_id, 0, reply});
  for (const auto& replay : scenario_.faults.replay_responses) {
    if (replay.target.flow == flow && replay.target.seq == query.sender_seq) {
      schedule(arrive + replay.extra_delay,
               {Event::Kind::kResponseArrive, flow, reply_id, 0, reply});
    }
  }
}

void Simulator::on_response_arrive(std::size_t flow, std::uint64_t id,
                                   const codec::Bytes& packet) {
  auto& fs = flows_[flow];
  const auto datagram = codec::decode_udp6(packet);
  if (!datagram) return;
  try {
    const auto message = lm::deserialize_message(datagram->payload);
    const auto& response = std::get<lm::LmResponse>(message);
    const auto record = fs.session->process_response(response);
    log("sender", "record", id,
        "block=" + std::to_string(record.block_index) + " loss=" + std::to_string(record.loss));
  } catch (const ProtocolError& e) {
    fs.result.protocol_errors.push_back(e.what());
    log("sender", "response-error", id);
  }
}

void Simulator::on_reflector_restart() {
  reflector_->reset();
  for (const auto& [sids, bank] : egress_engine_->list_flows()) {
    egress_engine_->preset_counters(sids, ColorBank{});
  }
  log("reflector", "restart", 0);
}

SimResult Simulator::collect() {
  SimResult result;
  for (auto& fs : flows_) {
    FlowResult fr = fs.result;
    if (fs.session) {
      fr.records = fs.session->history();
      fr.gaps = fs.session->gaps();
      fr.reflector_resets = fs.session->reflector_resets();
    }
    result.flows.push_back(std::move(fr));
  }
  result.event_log = log_;
  result.data_packets = next_data_index_;
  result.data_dropped = data_dropped_;
  result.lm_packets = next_lm_index_;
  result.lm_dropped = lm_dropped_;
  result.end_time = now_;
  return result;
}

SimResult run_scenario(const Scenario& scenario) { return Simulator(scenario).run(); }

}  // namespace pfplm::sim
