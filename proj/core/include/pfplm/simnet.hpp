#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pfplm/dataplane.hpp"
#include "pfplm/flow_matcher.hpp"
#include "pfplm/lm_protocol.hpp"
#include "pfplm/sid_list.hpp"
#include "pfplm/types.hpp"

// Deterministic discrete-event simulation of ingress -> lossy link -> egress
// with one Sender/Reflector session pair per monitored flow.
namespace pfplm::sim {

/// Either an explicit set of packet indices (0-based, in link-entry order) or
/// a seeded Bernoulli drop probability. An empty plan drops nothing.
struct DropPlan {
  std::set<std::uint64_t> indices;
  double probability = 0.0;
  std::uint64_t seed = 0;

  static DropPlan none() { return {}; }
  static DropPlan explicit_indices(std::set<std::uint64_t> idx) { return {std::move(idx), 0.0, 0}; }
  static DropPlan random(double p, std::uint64_t seed) { return {{}, p, seed}; }
};

struct LinkSpec {
  Duration propagation_delay{0};
  DropPlan data_drops;
  /// LM packets bypass lm_drops when true.
  bool protect_lm = true;
  DropPlan lm_drops;
};

struct FlowSpec {
  SidList sids;
  Ipv6Address destination;
  double rate_pps = 1000.0;
  Timestamp start{0};
  std::optional<Timestamp> stop;  // defaults to the end of the last block
  bool monitored = true;
};

/// Identifies one LM exchange: flow index and the query's sender_seq.
struct LmTarget {
  std::size_t flow = 0;
  std::uint32_t seq = 0;
  auto operator<=>(const LmTarget&) const = default;
};

struct Replay {
  LmTarget target;
  Duration extra_delay{0};
};

struct FaultPlan {
  std::set<LmTarget> drop_queries;
  std::set<LmTarget> drop_responses;
  /// Re-delivers a copy of the response `extra_delay` after the original.
  std::vector<Replay> replay_responses;
  /// The reflector loses its session state and egress counters at these times.
  std::vector<Timestamp> reflector_restarts;
};

struct Scenario {
  std::vector<FlowSpec> flows;
  Duration period = ColoringSchedule::kDefaultPeriod;
  std::uint64_t blocks = 4;
  LinkSpec link;
  FaultPlan faults;
  std::uint64_t seed = 0;  // used when a drop plan does not set its own seed
  EngineKind engine = EngineKind::kHash;
  std::optional<Duration> guard;
  bool record_event_log = false;
};

/// Throws SimError(kInvalidScenario) with a reason. Propagation delay must be
/// below T/2 so every LM round trip completes before the response timeout.
void validate(const Scenario& scenario);

struct BlockTruth {
  Color color = Color::A;
  std::uint64_t transmitted = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;

  bool operator==(const BlockTruth&) const = default;
};

struct FlowResult {
  std::size_t flow = 0;
  SidList sids;
  std::vector<lm::LossRecord> records;
  std::vector<lm::Gap> gaps;
  std::vector<std::string> protocol_errors;
  std::map<std::uint64_t, BlockTruth> truth;  // by block index
  std::uint64_t reflector_resets = 0;

  std::uint64_t total_dropped() const;
};

struct SimResult {
  std::vector<FlowResult> flows;
  std::vector<std::string> event_log;
  std::uint64_t data_packets = 0;
  std::uint64_t data_dropped = 0;
  std::uint64_t lm_packets = 0;
  std::uint64_t lm_dropped = 0;
  Timestamp end_time{0};

  /// Every record's tx/rx/loss equals the ground truth of its block.
  bool exact() const;
  /// Human-readable description of the first few mismatches.
  std::vector<std::string> mismatches() const;
};

/// Columns: flow,block,color,tx,rx,loss,truth
void write_results_csv(const SimResult& result, std::ostream& out);
void write_event_log(const SimResult& result, std::ostream& out);

class Simulator {
 public:
  /// Validates and builds nodes and sessions. Nothing runs until step()/run().
  explicit Simulator(Scenario scenario);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  /// Replaces the data-link drop plan. Throws SimError(kAlreadyStarted).
  void inject_drop_plan(DropPlan plan);

  Timestamp clock_now() const { return now_; }

  /// Processes the next event. Returns false when the queue is empty.
  bool step();
  /// Processes every event with time <= t, then sets the clock to t.
  void run_until(Timestamp t);
  /// Runs to completion and collects results.
  SimResult run();

 private:
  struct Event;
  struct FlowState;

  void schedule(Timestamp at, Event event);
  void dispatch(const Event& event);
  void on_data_send(std::size_t flow);
  void on_data_arrive(std::size_t flow, std::uint64_t id, std::uint64_t block,
                      const codec::Bytes& packet);
  void on_query_timer(std::size_t flow, std::uint64_t block);
  void on_query_arrive(std::size_t flow, std::uint64_t id, const codec::Bytes& packet);
  void on_response_arrive(std::size_t flow, std::uint64_t id, const codec::Bytes& packet);
  void on_reflector_restart();
  bool drop_lm(const DropPlan& plan, std::mt19937_64& rng);
  void log(std::string_view node, std::string_view action, std::uint64_t id,
           std::string_view detail = {});
  SimResult collect();

  Scenario scenario_;
  Timestamp now_{0};
  Timestamp traffic_end_{0};
  bool started_ = false;
  bool finished_ = false;
  std::uint64_t insertion_ = 0;
  std::multimap<std::pair<Timestamp, std::uint64_t>, std::unique_ptr<Event>> queue_;

  SrPolicyTable policies_;
  std::unique_ptr<MatcherEngine> ingress_engine_;
  std::unique_ptr<MatcherEngine> egress_engine_;
  ColoringSchedule schedule_;
  std::unique_ptr<IngressNode> ingress_;
  std::unique_ptr<EgressNode> egress_;
  std::unique_ptr<lm::Reflector> reflector_;
  std::vector<FlowState> flows_;

  std::mt19937_64 data_rng_;
  std::mt19937_64 lm_rng_;
  std::uint64_t next_data_index_ = 0;
  std::uint64_t next_lm_index_ = 0;
  std::uint64_t data_dropped_ = 0;
  std::uint64_t lm_dropped_ = 0;
  std::vector<std::string> log_;
};

/// Convenience: Simulator(scenario).run().
SimResult run_scenario(const Scenario& scenario);

}  // namespace pfplm::sim
