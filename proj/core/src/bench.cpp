#include "pfplm/bench.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <tuple>

#include "pfplm/codec.hpp"
#include "pfplm/dataplane.hpp"
#include "pfplm/error.hpp"

namespace pfplm::bench {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kPoolSize = 4096;  // power of two
constexpr std::uint64_t kBatch = 1024;
constexpr Duration kVirtualStep = std::chrono::microseconds(1);

enum class Mode { kBaseline, kCounting, kColoring };

Ipv6Address flow_destination(std::size_t i) {
  return Ipv6Address::from_u64(0x20010db800010000ULL, i + 1);
}

Ipv6Address unmatched_destination() { return Ipv6Address::from_u64(0x20010db8ffff0000ULL, 1); }

SidList flow_sids(std::uint64_t flow_tag, std::size_t length) {
  std::vector<Sid> sids;
  for (std::size_t j = 0; j < length; ++j) {
    sids.push_back(Ipv6Address::from_u64(0xfc00000000000000ULL | (flow_tag << 16), j + 1));
  }
  return SidList(sids);
}

codec::Bytes inner_packet(const Ipv6Address& dst, std::size_t payload_bytes) {
  const codec::Bytes payload(payload_bytes, 0x5a);
  return codec::encode_udp6(Ipv6Address::from_u64(0x20010db800000000ULL, 1), dst, 1024, 9,
                            payload);
}

// Bresenham-style interleave: entry i is unmatched when the running share
// crosses an integer, otherwise the next monitored flow in round-robin order.
std::vector<long> traffic_pattern(std::size_t flows, double unmatched_fraction) {
  std::vector<long> pattern(kPoolSize);
  std::size_t next_flow = 0;
  for (std::size_t i = 0; i < kPoolSize; ++i) {
    const auto before = static_cast<long>(std::floor(static_cast<double>(i) * unmatched_fraction));
    const auto after =
        static_cast<long>(std::floor(static_cast<double>(i + 1) * unmatched_fraction));
    if (after > before || flows == 0) {
      pattern[i] = -1;
    } else {
      pattern[i] = static_cast<long>(next_flow);
      next_flow = (next_flow + 1) % flows;
    }
  }
  return pattern;
}

std::uint64_t counter_total(const MatcherEngine& engine) {
  std::uint64_t total = 0;
  for (const auto& [sids, bank] : engine.list_flows()) total += bank.count_a + bank.count_b;
  return total;
}

struct Workload {
  Role role;
  std::optional<EngineKind> engine_kind;
  Mode mode;
  std::size_t flows;

  SrPolicyTable policies;
  std::unique_ptr<MatcherEngine> engine;
  std::unique_ptr<ColoringSchedule> schedule;
  std::unique_ptr<IngressNode> ingress;
  std::unique_ptr<EgressNode> egress;

  std::vector<codec::Bytes> pool;
  std::vector<bool> counted;  // pool entry is a matched, monitored packet
  std::size_t cursor = 0;
  Timestamp virtual_now{0};
  std::vector<double> samples;
  bool consistent = true;
  std::uint64_t sink = 0;

  void build(const BenchConfig& config) {
    engine = make_engine(engine_kind.value_or(EngineKind::kHash));
    schedule = std::make_unique<ColoringSchedule>();
    const bool monitored = mode != Mode::kBaseline;
    // The baseline keeps one policy so its packets take the same
    // classification and encapsulation path.
    const std::size_t policy_count = std::max<std::size_t>(flows, 1);
    for (std::size_t i = 0; i < policy_count; ++i) {
      policies.add({Ipv6Prefix::make(flow_destination(i), 128), flow_sids(i + 1, config.sids_per_list),
                    monitored});
    }
    policies.register_monitored(*engine);
    // Monitored but never registered: every lookup for it is a matcher miss.
    const SidList unmatched = flow_sids(0xffff, config.sids_per_list);
    policies.add({Ipv6Prefix::make(unmatched_destination(), 128), unmatched, monitored});

    IngressOptions options;
    options.encap.source = Ipv6Address::from_u64(0x20010db8eeee0000ULL, 1);
    options.color_packets = mode == Mode::kColoring;
    ingress = std::make_unique<IngressNode>(policies, *engine, *schedule, options);
    egress = std::make_unique<EgressNode>(*engine);

    const auto pattern = traffic_pattern(flows, config.unmatched_fraction);
    pool.reserve(kPoolSize);
    counted.reserve(kPoolSize);
    for (std::size_t i = 0; i < kPoolSize; ++i) {
      const bool miss = pattern[i] < 0;
      const Ipv6Address dst =
          miss ? unmatched_destination() : flow_destination(static_cast<std::size_t>(pattern[i]));
      codec::Bytes inner = inner_packet(dst, config.inner_payload_bytes);
      counted.push_back(monitored && !miss);
      if (role == Role::kIngress) {
        pool.push_back(std::move(inner));
        continue;
      }
      const SidList& sids = miss ? unmatched : policies.lookup(dst)->sids;
      codec::Bytes outer = codec::encapsulate_wire(inner, sids, options.encap);
      codec::advance_to_final_segment_in_place(outer);
      if (monitored) codec::set_color_in_place(outer, i % 2 == 0 ? Color::A : Color::B);
      pool.push_back(std::move(outer));
    }
  }

  // Returns packets/second.
  double trial(Duration duration, std::uint64_t min_packets) {
    const std::uint64_t before = counter_total(*engine);
    std::uint64_t expected = 0;
    std::uint64_t packets = 0;
    const auto t0 = Clock::now();
    Duration elapsed{0};
    while (true) {
      for (std::uint64_t k = 0; k < kBatch; ++k) {
        const auto& packet = pool[cursor];
        if (role == Role::kIngress) {
          virtual_now += kVirtualStep;
          sink += ingress->process(packet, virtual_now).packet.size();
        } else {
          sink += egress->process(packet).packet.size();
        }
        expected += counted[cursor] ? 1 : 0;
        cursor = (cursor + 1) & (kPoolSize - 1);
      }
      packets += kBatch;
      elapsed = std::chrono::duration_cast<Duration>(Clock::now() - t0);
      if (packets >= min_packets && elapsed >= duration) break;
    }
    if (counter_total(*engine) - before != expected) consistent = false;
    return static_cast<double>(packets) / std::chrono::duration<double>(elapsed).count();
  }
};

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string_view coloring_label(bool on) { return on ? "on" : "off"; }

}  // namespace

std::string_view to_string(Role role) { return role == Role::kIngress ? "ingress" : "egress"; }

Role parse_role(std::string_view text) {
  if (text == "ingress") return Role::kIngress;
  if (text == "egress") return Role::kEgress;
  throw ConfigError("unknown role '" + std::string(text) + "' (expected ingress or egress)");
}

void validate(const BenchConfig& config) {
  if (config.roles.empty()) throw BenchError(BenchErrc::kInvalidConfig, "no role selected");
  if (config.engines.empty()) throw BenchError(BenchErrc::kInvalidConfig, "no engine selected");
  if (config.flow_counts.empty()) throw BenchError(BenchErrc::kInvalidConfig, "no flow counts");
  for (std::size_t i = 0; i < config.flow_counts.size(); ++i) {
    if (config.flow_counts[i] == 0) {
      throw BenchError(BenchErrc::kInvalidConfig, "flow count must be >= 1");
    }
    if (i > 0 && config.flow_counts[i] <= config.flow_counts[i - 1]) {
      throw BenchError(BenchErrc::kInvalidConfig, "flow counts must be strictly ascending");
    }
  }
  if (config.sids_per_list == 0 || config.sids_per_list > kMaxSids) {
    throw BenchError(BenchErrc::kInvalidConfig,
                     "SID list length must be in 1.." + std::to_string(kMaxSids));
  }
  if (!(config.unmatched_fraction >= 0.0 && config.unmatched_fraction < 1.0)) {
    throw BenchError(BenchErrc::kInvalidConfig, "unmatched fraction must be in [0, 1)");
  }
  if (config.inner_payload_bytes > 9000) {
    throw BenchError(BenchErrc::kInvalidConfig, "inner payload too large");
  }
  if (config.repetitions == 0) throw BenchError(BenchErrc::kInvalidConfig, "repetitions must be >= 1");
  if (config.min_trial_duration.count() <= 0) {
    throw BenchError(BenchErrc::kInvalidConfig, "minimum trial duration must be positive");
  }
  if (config.trial_duration < config.min_trial_duration) {
    throw BenchError(BenchErrc::kTrialTooShort,
                     "trial duration " + std::to_string(config.trial_duration.count() / 1'000'000) +
                         " ms is below the minimum of " +
                         std::to_string(config.min_trial_duration.count() / 1'000'000) + " ms");
  }
  if (config.warmup_duration.count() < 0) {
    throw BenchError(BenchErrc::kInvalidConfig, "warm-up duration must be >= 0");
  }
}

const BenchRow* BenchResult::find(Role role, std::optional<EngineKind> engine, bool coloring,
                                  std::size_t flows) const {
  for (const auto& row : rows) {
    if (row.role == role && row.engine == engine && row.coloring == coloring &&
        row.flows == flows) {
      return &row;
    }
  }
  return nullptr;
}

BenchResult run_bench(const BenchConfig& config) {
  validate(config);

  std::vector<std::unique_ptr<Workload>> workloads;
  auto add = [&](Role role, std::optional<EngineKind> engine, Mode mode, std::size_t flows) {
    auto w = std::make_unique<Workload>();
    w->role = role;
    w->engine_kind = engine;
    w->mode = mode;
    w->flows = flows;
    w->build(config);
    workloads.push_back(std::move(w));
  };
  for (Role role : config.roles) {
    add(role, std::nullopt, Mode::kBaseline, 0);
    for (EngineKind engine : config.engines) {
      for (std::size_t n : config.flow_counts) {
        add(role, engine, Mode::kCounting, n);
        // The egress never writes a color, so it has no separate coloring row.
        if (config.include_coloring && role == Role::kIngress) {
          add(role, engine, Mode::kColoring, n);
        }
      }
    }
  }

  for (auto& w : workloads) {
    if (config.warmup_duration.count() > 0) w->trial(config.warmup_duration, 0);
  }
  for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
    for (auto& w : workloads) {
      w->samples.push_back(w->trial(config.trial_duration, config.min_trial_packets));
    }
  }

  BenchResult result;
  std::map<Role, double> base;
  for (const auto& w : workloads) {
    BenchRow row;
    row.role = w->role;
    row.engine = w->engine_kind;
    row.coloring = w->mode == Mode::kColoring;
    row.flows = w->flows;
    row.samples = w->samples;
    row.mean_pps = mean_of(w->samples);
    row.stddev_pps = stddev_of(w->samples);
    row.counters_consistent = w->consistent;
    if (w->mode == Mode::kBaseline) base[w->role] = row.mean_pps;
    result.rows.push_back(std::move(row));
  }
  for (auto& row : result.rows) {
    const double b = base[row.role];
    row.ratio_vs_base = b > 0.0 ? row.mean_pps / b : 0.0;
  }
  return result;
}

void write_csv(const BenchResult& result, std::ostream& out) {
  out << "engine,role,coloring,flows,mean_pps,stddev,ratio_vs_base\n";
  out.setf(std::ios::fixed);
  for (const auto& row : result.rows) {
    out << (row.engine ? to_string(*row.engine) : std::string_view("none")) << ','
        << to_string(row.role) << ',' << coloring_label(row.coloring) << ',' << row.flows << ',';
    out.precision(1);
    out << row.mean_pps << ',' << row.stddev_pps << ',';
    out.precision(4);
    out << row.ratio_vs_base << '\n';
  }
  if (!out) throw std::ios_base::failure("failed to write bench CSV");
}

void write_plot_data(const BenchResult& result, std::ostream& out) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<const BenchRow*>> series;
  std::vector<Key> order;
  for (const auto& row : result.rows) {
    Key key{std::string(to_string(row.role)),
            std::string(row.engine ? to_string(*row.engine) : "none"),
            std::string(coloring_label(row.coloring))};
    auto [it, inserted] = series.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&row);
  }
  out.setf(std::ios::fixed);
  bool first = true;
  for (const auto& key : order) {
    if (!first) out << "\n\n";
    first = false;
    out << "# role=" << std::get<0>(key) << " engine=" << std::get<1>(key)
        << " coloring=" << std::get<2>(key) << '\n';
    out << "# flows mean_pps stddev ratio_vs_base\n";
    for (const BenchRow* row : series[key]) {
      out.precision(1);
      out << row->flows << ' ' << row->mean_pps << ' ' << row->stddev_pps << ' ';
      out.precision(4);
      out << row->ratio_vs_base << '\n';
    }
  }
  if (!out) throw std::ios_base::failure("failed to write plot data");
}

PdrResult pdr_search(const RateProbe& probe, const PdrSearch& search) {
  if (!probe) throw BenchError(BenchErrc::kInvalidConfig, "no rate probe");
  if (!(search.threshold > 0.0 && search.threshold < 1.0)) {
    throw BenchError(BenchErrc::kInvalidConfig, "drop-ratio threshold must be in (0, 1)");
  }
  if (!(search.lower_rate >= 0.0 && search.upper_rate > search.lower_rate)) {
    throw BenchError(BenchErrc::kInvalidConfig, "rate bounds must satisfy 0 <= lower < upper");
  }
  if (!(search.tolerance > 0.0)) throw BenchError(BenchErrc::kInvalidConfig, "tolerance must be > 0");
  if (search.retries == 0) throw BenchError(BenchErrc::kInvalidConfig, "retries must be >= 1");

  PdrResult result;
  auto passes = [&](double rate) {
    std::vector<double> drops;
    for (std::size_t i = 0; i < search.retries; ++i) {
      if (result.evaluations >= search.max_iterations) {
        throw BenchError(BenchErrc::kNoConvergence,
                         "PDR search did not converge within " +
                             std::to_string(search.max_iterations) + " probe evaluations");
      }
      ++result.evaluations;
      drops.push_back(probe(rate));
    }
    std::nth_element(drops.begin(), drops.begin() + drops.size() / 2, drops.end());
    return drops[drops.size() / 2] <= search.threshold;
  };

  if (passes(search.upper_rate)) {
    result.rate = search.upper_rate;
    return result;
  }
  if (!passes(search.lower_rate)) {
    result.rate = search.lower_rate;
    return result;
  }
  double lo = search.lower_rate;
  double hi = search.upper_rate;
  while (hi - lo > search.tolerance) {
    const double mid = lo + (hi - lo) / 2.0;
    (passes(mid) ? lo : hi) = mid;
  }
  result.rate = lo;
  return result;
}

RateProbe capacity_probe(double capacity_pps) {
  return [capacity_pps](double offered) {
    if (offered <= capacity_pps || offered <= 0.0) return 0.0;
    return 1.0 - capacity_pps / offered;
  };
}

}  // namespace pfplm::bench
