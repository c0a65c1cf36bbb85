#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "pfplm/flow_matcher.hpp"
#include "pfplm/types.hpp"

// In-process throughput harness: packets/second through the ingress and
// egress pipelines versus the number of monitored flows. Absolute numbers
// depend on the host; ratios against the no-monitoring baseline are what
// carry over between machines.
namespace pfplm::bench {

enum class Role { kIngress, kEgress };
std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct BenchConfig {
  std::vector<Role> roles{Role::kIngress, Role::kEgress};
  std::vector<EngineKind> engines{EngineKind::kLinear, EngineKind::kHash};
  std::vector<std::size_t> flow_counts{1, 4, 16, 64, 100, 256, 1024};
  std::size_t sids_per_list = 1;
  /// Share of packets whose SID list is subject to matching but absent from
  /// the flow table (a full-scan miss for the linear engine).
  double unmatched_fraction = 0.0;
  std::size_t inner_payload_bytes = 0;
  bool include_coloring = true;
  std::size_t repetitions = 4;

  /// A trial runs until both trial_duration and min_trial_packets are reached.
  std::chrono::nanoseconds trial_duration = std::chrono::seconds(2);
  std::uint64_t min_trial_packets = 1'000'000;
  /// trial_duration below this is rejected as too short to be stable.
  std::chrono::nanoseconds min_trial_duration = std::chrono::seconds(2);
  std::chrono::nanoseconds warmup_duration = std::chrono::milliseconds(200);
};

/// Throws BenchError(kInvalidConfig | kTrialTooShort).
void validate(const BenchConfig& config);

struct BenchRow {
  Role role = Role::kIngress;
  std::optional<EngineKind> engine;  // nullopt: no-monitoring baseline
  bool coloring = false;
  std::size_t flows = 0;
  double mean_pps = 0.0;
  double stddev_pps = 0.0;
  double ratio_vs_base = 1.0;
  std::vector<double> samples;
  /// Matched packets counted by the engine equal the monitored packets generated.
  bool counters_consistent = true;
};

struct BenchResult {
  std::vector<BenchRow> rows;

  const BenchRow* find(Role role, std::optional<EngineKind> engine, bool coloring,
                       std::size_t flows) const;
};

/// Trials are interleaved across configurations within each repetition so
/// slow drift of the host affects every row alike.
BenchResult run_bench(const BenchConfig& config);

/// Columns: engine,role,coloring,flows,mean_pps,stddev,ratio_vs_base
void write_csv(const BenchResult& result, std::ostream& out);
/// Whitespace-separated series blocks (one per engine/role/coloring) for plotting.
void write_plot_data(const BenchResult& result, std::ostream& out);

// --- PDR search ----------------------------------------------------------------

struct PdrSearch {
  double lower_rate = 0.0;
  double upper_rate = 0.0;
  double threshold = 0.005;  // PDR@0.5%
  double tolerance = 1.0;    // absolute, same unit as the rates
  std::size_t max_iterations = 30;
  /// Probe evaluations per rate; the median drop ratio is used.
  std::size_t retries = 1;
};

struct PdrResult {
  double rate = 0.0;
  std::size_t evaluations = 0;
};

using RateProbe = std::function<double(double offered_rate)>;

/// Highest rate whose drop ratio is <= threshold, bracketed to `tolerance`.
/// Throws BenchError(kInvalidConfig) for bad bounds and kNoConvergence when
/// max_iterations probe evaluations are not enough.
PdrResult pdr_search(const RateProbe& probe, const PdrSearch& search);

/// Drop ratio of a lossless queue that serves `capacity_pps`.
RateProbe capacity_probe(double capacity_pps);

}  // namespace pfplm::bench
