// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
// Usage: pfplm_acceptance [criterion...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pfplm/bench.hpp"
#include "pfplm/codec.hpp"
#include "pfplm/config.hpp"
#include "pfplm/error.hpp"
#include "pfplm/flow_matcher.hpp"
#include "pfplm/golden.hpp"
#include "pfplm/lm_protocol.hpp"
#include "pfplm/simnet.hpp"
#include "support/oracle.hpp"

using namespace pfplm;
using namespace std::chrono_literals;

namespace {

// Pinned tolerances.
constexpr std::size_t kRandomScenarios = 200;
constexpr double kRandomScenarioBudgetSec = 60.0;
constexpr std::size_t kEngineOps = 100'000;
constexpr std::size_t kEngineMaxFlows = 1024;
constexpr double kLinearN100MaxRatio = 0.60;
constexpr double kHashN1024MinRatio = 0.75;
constexpr double kColoringMinRatio = 0.90;
constexpr std::size_t kCodecCases = 10'000;
constexpr std::size_t kPdrMaxEvaluations = 30;
constexpr double kBenchBudgetSec = 300.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string first_mismatch(const sim::SimResult& r) {
  const auto m = r.mismatches();
  return m.empty() ? std::string("no records") : m.front();
}

// Every monitored flow's per-block transmit counts agree with the analytic oracle.
bool tx_matches_oracle(const sim::Scenario& s, const sim::SimResult& r, std::string& why) {
  for (std::size_t i = 0; i < s.flows.size(); ++i) {
    if (!s.flows[i].monitored) continue;
    const auto want = oracle::tx_per_block(s.flows[i], s.period, s.blocks);
    for (const auto& [block, count] : want) {
      auto it = r.flows[i].truth.find(block);
      if (it == r.flows[i].truth.end() || it->second.transmitted != count) {
        why = "flow " + std::to_string(i) + " block " + std::to_string(block) +
              ": simulator transmit count differs from oracle";
        return false;
      }
    }
  }
  return true;
}

// Every monitored flow reports exactly one record per block and the records
// sum to the flow's ground-truth drops.
bool complete_and_exact(const sim::Scenario& s, const sim::SimResult& r, std::string& why) {
  if (!r.exact()) {
    why = first_mismatch(r);
    return false;
  }
  for (const auto& f : r.flows) {
    if (!s.flows[f.flow].monitored) continue;
    if (f.records.size() != s.blocks) {
      why = "flow " + std::to_string(f.flow) + ": " + std::to_string(f.records.size()) + " of " +
            std::to_string(s.blocks) + " blocks reported";
      return false;
    }
    std::uint64_t lost = 0;
    for (const auto& rec : f.records) lost += rec.loss;
    if (lost != f.total_dropped()) {
      why = "flow " + std::to_string(f.flow) + ": reported loss total differs from drops";
      return false;
    }
  }
  return tx_matches_oracle(s, r, why);
}

// --- 1 ------------------------------------------------------------------------

Outcome exact_loss() {
  std::mt19937_64 rng(20240601);
  oracle::RandomScenarioOptions opt;
  const auto t0 = Clock::now();
  std::uint64_t packets = 0;
  std::uint64_t drops = 0;
  std::size_t records = 0;
  for (std::size_t i = 0; i < kRandomScenarios; ++i) {
    const auto s = oracle::random_scenario(rng, opt);
    const auto r = sim::run_scenario(s);
    std::string why;
    if (r.data_packets > opt.max_packets) {
      return {false, "scenario " + std::to_string(i) + " exceeds the packet budget"};
    }
    if (!complete_and_exact(s, r, why)) return {false, "scenario " + std::to_string(i) + ": " + why};
    packets += r.data_packets;
    drops += r.data_dropped;
    for (const auto& f : r.flows) records += f.records.size();
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << kRandomScenarios << " scenarios, " << packets << " packets, " << drops << " drops, "
    << records << " records exact in " << secs << " s";
  return {secs < kRandomScenarioBudgetSec, d.str()};
}

// --- 2 ------------------------------------------------------------------------

Outcome in_flight() {
  // Send intervals that divide T put a send exactly on every flip instant.
  constexpr double kMultiplier[] = {1, 2, 4, 5};
  std::size_t checked = 0;
  for (double rate : {1.0, 10.0, 500.0, 1000.0, 4000.0}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      sim::Scenario s;
      s.period = 2s;
      s.blocks = 6;
      s.seed = seed;
      s.link.propagation_delay = s.period * 2 / 5;
      s.link.data_drops = sim::DropPlan::random(0.03 * static_cast<double>(seed), seed);
      for (std::uint64_t f = 0; f < 4; ++f) {
        sim::FlowSpec fs;
        fs.sids = SidList{Ipv6Address::from_u64(0xfc00000000000000ULL, f + 1),
                          Ipv6Address::from_u64(0xfd00000000000000ULL | f, 1)};
        fs.destination = Ipv6Address::from_u64(0x20010db800000000ULL | f, 1);
        fs.rate_pps = rate * kMultiplier[f];
        s.flows.push_back(fs);
      }
      const auto r = sim::run_scenario(s);
      std::string why;
      if (!complete_and_exact(s, r, why)) {
        return {false, "rate " + std::to_string(rate) + " seed " + std::to_string(seed) + ": " + why};
      }
      // Oracle: a packet sent exactly at block k's start belongs to block k.
      for (const auto& f : r.flows) {
        const double per_block = s.flows[f.flow].rate_pps * 2.0;
        for (const auto& [block, truth] : f.truth) {
          if (truth.transmitted != static_cast<std::uint64_t>(per_block)) {
            return {false, "flip-instant packet misattributed in block " + std::to_string(block)};
          }
        }
      }
      ++checked;
    }
  }
  return {true, std::to_string(checked) + " scenarios at delay 0.4 T exact"};
}

// --- 3 ------------------------------------------------------------------------

SidList random_flow(std::mt19937_64& rng, std::uint64_t id) {
  std::vector<Sid> path(1 + rng() % 4);
  for (std::size_t j = 0; j + 1 < path.size(); ++j) path[j] = Ipv6Address::from_u64(0xfc00ULL << 48, rng() % 8);
  path.back() = Ipv6Address::from_u64(0xfd00ULL << 48 | id, 1);
  return SidList(path);
}

Outcome engine_equivalence() {
  std::mt19937_64 rng(1024);
  LinearEngine linear;
  HashEngine hash;
  std::vector<SidList> universe;
  for (std::uint64_t i = 0; i < kEngineMaxFlows; ++i) universe.push_back(random_flow(rng, i));
  for (std::uint64_t i = 0; i < 256; ++i) {  // near misses
    auto path = std::vector<Sid>(universe[i].path().begin(), universe[i].path().end());
    path.back().bytes[0] ^= 0x01;
    universe.push_back(SidList(path));
  }
  std::set<SidList> present;
  std::size_t adds = 0, matches = 0, reads = 0, removes = 0;
  for (std::size_t op = 0; op < kEngineOps; ++op) {
    const SidList& f = universe[rng() % universe.size()];
    const Color c = rng() % 2 ? Color::A : Color::B;
    const auto kind = rng() % 20;
    if (kind < 3) {
      const bool lin_ok = [&] { try { linear.add_flow(f); return true; } catch (const MatcherError&) { return false; } }();
      const bool hash_ok = [&] { try { hash.add_flow(f); return true; } catch (const MatcherError&) { return false; } }();
      if (lin_ok != hash_ok || lin_ok == present.contains(f)) return {false, "add disagreed at op " + std::to_string(op)};
      present.insert(f);
      ++adds;
    } else if (kind < 4) {
      if (present.contains(f)) {
        if (linear.remove_flow(f) != hash.remove_flow(f)) return {false, "remove disagreed at op " + std::to_string(op)};
        present.erase(f);
        ++removes;
      }
    } else if (kind < 7) {
      if (present.contains(f) && linear.read_counter(f, c) != hash.read_counter(f, c)) {
        return {false, "read disagreed at op " + std::to_string(op)};
      }
      ++reads;
    } else {
      const bool a = linear.match_and_count(f, c);
      const bool b = hash.match_and_count(f, c);
      if (a != b || a != present.contains(f)) return {false, "match disagreed at op " + std::to_string(op)};
      ++matches;
    }
    if (linear.flow_count() != hash.flow_count()) return {false, "flow count diverged"};
  }
  auto l = linear.list_flows();
  auto h = hash.list_flows();
  auto by_sids = [](const auto& x, const auto& y) { return x.first < y.first; };
  std::sort(l.begin(), l.end(), by_sids);
  std::sort(h.begin(), h.end(), by_sids);
  if (l != h) return {false, "final flow tables differ"};
  std::ostringstream d;
  d << kEngineOps << " ops (" << adds << " add, " << removes << " remove, " << matches
    << " match, " << reads << " read), " << l.size() << " flows at end, identical";
  return {true, d.str()};
}

// --- 4 and 5 ------------------------------------------------------------------

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

const bench::BenchResult& ingress_bench() {
  static const bench::BenchResult result = [] {
    bench::BenchConfig c;
    c.roles = {bench::Role::kIngress};
    c.flow_counts = {1, 16, 100, 1024};
    c.unmatched_fraction = 0.9;  // miss-heavy
    c.sids_per_list = 1;
    c.repetitions = 7;
    // Desk-scale trials; shorter than the harness default.
    c.trial_duration = 150ms;
    c.min_trial_duration = 100ms;
    c.min_trial_packets = 20'000;
    c.warmup_duration = 50ms;
    return bench::run_bench(c);
  }();
  return result;
}

// Median of per-repetition samples, normalized to the baseline median.
double normalized(const bench::BenchResult& r, std::optional<EngineKind> e, bool coloring, std::size_t n) {
  const auto* row = r.find(bench::Role::kIngress, e, coloring, n);
  const auto* base = r.find(bench::Role::kIngress, std::nullopt, false, 0);
  if (!row || !base) return 0.0;
  return median(row->samples) / median(base->samples);
}

Outcome scaling_trend() {
  const auto t0 = Clock::now();
  const auto& r = ingress_bench();
  const std::vector<std::size_t> ns{1, 16, 100, 1024};
  for (const auto& row : r.rows) {
    if (!row.counters_consistent) return {false, "engine counters disagree with generated traffic"};
  }
  std::ostringstream d;
  bool pass = true;
  d << "linear";
  double prev = 1e300;
  std::map<std::size_t, double> lin, hsh;
  for (auto n : ns) {
    lin[n] = normalized(r, EngineKind::kLinear, false, n);
    hsh[n] = normalized(r, EngineKind::kHash, false, n);
    d << " N=" << n << ":" << lin[n];
    if (!(lin[n] < prev)) pass = false;
    prev = lin[n];
  }
  d << "; hash";
  for (auto n : ns) d << " N=" << n << ":" << hsh[n];
  const double lin_ratio = lin[100] / lin[1];
  const double hash_ratio = hsh[1024] / hsh[1];
  d << "; linear N100/N1=" << lin_ratio << " hash N1024/N1=" << hash_ratio;
  pass = pass && lin_ratio <= kLinearN100MaxRatio && hash_ratio >= kHashN1024MinRatio &&
         seconds_since(t0) < kBenchBudgetSec;
  return {pass, d.str()};
}

Outcome coloring_overhead() {
  const auto& r = ingress_bench();
  std::ostringstream d;
  bool pass = true;
  double worst = 1e300;
  for (auto e : {EngineKind::kLinear, EngineKind::kHash}) {
    for (std::size_t n : {1, 16, 100, 1024}) {
      const auto* on = r.find(bench::Role::kIngress, e, true, n);
      const auto* off = r.find(bench::Role::kIngress, e, false, n);
      if (!on || !off) return {false, "missing bench rows"};
      const double ratio = median(on->samples) / median(off->samples);
      worst = std::min(worst, ratio);
      if (ratio < kColoringMinRatio) {
        pass = false;
        d << to_string(e) << " N=" << n << " ratio " << ratio << "; ";
      }
    }
  }
  d << "worst coloring/counting ratio " << worst;
  return {pass, d.str()};
}

// --- 6 ------------------------------------------------------------------------

Outcome codec_properties() {
  using namespace pfplm::codec;
  std::mt19937_64 rng(0xc0dec);
  auto rand_addr = [&] { return Ipv6Address::from_u64(rng(), rng()); };
  for (std::size_t i = 0; i < kCodecCases; ++i) {
    const auto tc = static_cast<std::uint8_t>(rng());
    const auto fl = static_cast<std::uint32_t>(rng() & 0xfffff);
    const auto hop = static_cast<std::uint8_t>(rng());
    const Ipv6Address src = rand_addr();
    Bytes payload(rng() % 256);
    for (auto& x : payload) x = static_cast<std::uint8_t>(rng());
    const bool with_srh = rng() % 5 != 0;
    std::vector<Ipv6Address> path;
    std::uint8_t sl = 0;
    if (with_srh) {
      path.resize(1 + rng() % kMaxSids);
      for (auto& s : path) s = rand_addr();
      sl = static_cast<std::uint8_t>(rng() % path.size());
    }
    const Ipv6Address dst = with_srh ? path[path.size() - 1 - sl] : rand_addr();
    const auto srh_next = static_cast<std::uint8_t>(rng() % 2 ? kProtoIpv6 : kProtoIpv4);
    const Bytes wire = oracle::pack_packet(tc, fl, hop, src, dst, with_srh ? &path : nullptr,
                                           srh_next, sl, kProtoUdp, payload);
    try {
      const PacketView v = decode_packet(wire);
      const bool fields = v.ip.traffic_class == tc && v.ip.flow_label == fl && v.ip.hop_limit == hop &&
                          v.ip.src == src && v.ip.dst == dst && v.payload == payload &&
                          v.srh.has_value() == with_srh &&
                          (!with_srh || (v.srh->segments_left == sl && v.srh->path() == SidList(path)));
      if (!fields) return {false, "case " + std::to_string(i) + ": decoded fields differ"};
      if (encode_packet(v) != wire) return {false, "case " + std::to_string(i) + ": re-encode differs"};
      const auto mark = read_mark(tc);
      if (get_color(v) != (mark.monitored ? std::optional(mark.color) : std::nullopt)) {
        return {false, "case " + std::to_string(i) + ": color bits misread"};
      }
    } catch (const Error& e) {
      return {false, "case " + std::to_string(i) + ": " + e.what()};
    }
  }
  // LM messages too.
  for (std::size_t i = 0; i < kCodecCases; ++i) {
    const lm::LmQuery q{static_cast<std::uint32_t>(rng()), rng() % 2 ? Color::A : Color::B, rng()};
    const lm::LmResponse r{static_cast<std::uint32_t>(rng()), rng(), rng(),
                           rng() % 2 ? Color::A : Color::B,
                           static_cast<lm::ResponseStatus>(rng() % 3), q};
    const auto qb = lm::serialize_message(q);
    const auto rb = lm::serialize_message(r);
    if (std::get<lm::LmQuery>(lm::deserialize_message(qb)) != q ||
        std::get<lm::LmResponse>(lm::deserialize_message(rb)) != r) {
      return {false, "LM case " + std::to_string(i) + " round trip differs"};
    }
  }

  const auto path = std::filesystem::path(PFPLM_SOURCE_DIR) / "golden" / "vectors.json";
  std::vector<golden::VectorCheck> checks;
  try {
    checks = golden::verify_vectors(config::read_file(path));
  } catch (const Error& e) {
    return {false, e.what()};
  }
  std::size_t ok = 0;
  for (const auto& c : checks) {
    if (!c.passed) return {false, "golden vector " + c.name + ": " + c.detail};
    ++ok;
  }
  if (ok == 0) return {false, "no golden vectors"};
  return {true, std::to_string(kCodecCases) + " packet + " + std::to_string(kCodecCases) +
                    " LM round trips, " + std::to_string(ok) + " golden vectors"};
}

// --- 7 ------------------------------------------------------------------------

Outcome protocol_robustness() {
  std::mt19937_64 rng(777);
  oracle::RandomScenarioOptions opt;
  opt.max_flows = 12;
  opt.max_packets = 20'000;
  opt.max_blocks = 10;
  std::size_t records = 0, gaps = 0, errors = 0, restarts = 0, stale = 0;
  for (std::size_t i = 0; i < 60; ++i) {
    auto s = oracle::random_scenario(rng, opt);
    const auto flows = s.flows.size();
    const auto max_seq = static_cast<std::uint32_t>(s.blocks);
    for (int k = 0; k < 4; ++k) {
      s.faults.drop_queries.insert({rng() % flows, static_cast<std::uint32_t>(rng() % max_seq)});
      s.faults.drop_responses.insert({rng() % flows, static_cast<std::uint32_t>(rng() % max_seq)});
      s.faults.replay_responses.push_back(
          {{rng() % flows, static_cast<std::uint32_t>(rng() % max_seq)},
           Duration{static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(s.period.count()))}});
    }
    if (i % 2 == 0) {
      const auto end = s.period.count() * static_cast<std::int64_t>(s.blocks);
      s.faults.reflector_restarts.push_back(Duration{static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(end))});
      ++restarts;
    }
    if (i % 3 == 0) {
      s.link.protect_lm = false;
      s.link.lm_drops = sim::DropPlan::random(0.1, rng() | 1);
    }
    const auto r = sim::run_scenario(s);
    if (!r.exact()) return {false, "scenario " + std::to_string(i) + ": " + first_mismatch(r)};
    std::string why;
    if (!tx_matches_oracle(s, r, why)) return {false, "scenario " + std::to_string(i) + ": " + why};
    for (const auto& f : r.flows) {
      for (const auto& rec : f.records) {
        if (rec.rx_count > rec.tx_count || rec.loss != rec.tx_count - rec.rx_count) {
          return {false, "negative loss record in scenario " + std::to_string(i)};
        }
      }
      for (const auto& e : f.protocol_errors) {
        if (e.find("negative loss") != std::string::npos) {
          return {false, "negative loss reported in scenario " + std::to_string(i)};
        }
        if (e.find("stale") != std::string::npos) ++stale;
      }
      // each block is reported at most once
      std::set<std::uint64_t> seen;
      for (const auto& rec : f.records) {
        if (!seen.insert(rec.block_index).second) return {false, "block reported twice"};
      }
      records += f.records.size();
      gaps += f.gaps.size();
      errors += f.protocol_errors.size();
    }
  }
  std::ostringstream d;
  d << "60 faulty scenarios (" << restarts << " with reflector restart): " << records
    << " records exact, " << gaps << " gaps, " << errors << " protocol errors (" << stale
    << " stale), no negative loss";
  return {records > 0 && gaps > 0 && stale > 0, d.str()};
}

// --- 8 ------------------------------------------------------------------------

Outcome pdr() {
  struct Case {
    double knee;
    double threshold;
    double tolerance;
  };
  std::ostringstream d;
  for (const Case& c : {Case{500'000, 0.005, 100}, Case{995'000, 0.005, 1000}, Case{12'345, 0.01, 1},
                        Case{1e6, 0.2, 50}}) {
    // Lossless up to the knee, then drop = 1 - knee / rate; the threshold is
    // crossed exactly at knee / (1 - threshold).
    const auto probe = [k = c.knee](double rate) { return rate <= k ? 0.0 : 1.0 - k / rate; };
    const double exact = c.knee / (1.0 - c.threshold);
    bench::PdrSearch s;
    s.lower_rate = 1.0;
    s.upper_rate = 4.0 * c.knee;
    s.threshold = c.threshold;
    s.tolerance = c.tolerance;
    s.max_iterations = kPdrMaxEvaluations;
    try {
      const auto r = bench::pdr_search(probe, s);
      d << "knee " << c.knee << ": " << r.rate << " (exact " << exact << ") in " << r.evaluations << " evals; ";
      if (std::abs(r.rate - exact) > c.tolerance || r.evaluations > kPdrMaxEvaluations) {
        return {false, d.str()};
      }
    } catch (const BenchError& e) {
      return {false, e.what()};
    }
  }
  return {true, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exact loss over random scenarios", exact_loss},
      {"in-flight packets at delay 0.4 T", in_flight},
      {"linear/hash engine equivalence", engine_equivalence},
      {"flow-count scaling trend", scaling_trend},
      {"coloring overhead", coloring_overhead},
      {"codec round trips and golden vectors", codec_properties},
      {"LM fault injection", protocol_robustness},
      {"PDR search", pdr},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.contains(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
