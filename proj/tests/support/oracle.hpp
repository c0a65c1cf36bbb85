#pragma once

// Reference computations for tests, written from the header layouts and the
// marking rules rather than from the library code.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "pfplm/simnet.hpp"

namespace oracle {

using Bytes = std::vector<std::uint8_t>;

inline void put16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

inline void put_addr(Bytes& b, const pfplm::Ipv6Address& a) {
  b.insert(b.end(), a.bytes.begin(), a.bytes.end());
}

/// IPv6 fixed header + optional SRH (path order in, wire order out) + payload.
inline Bytes pack_packet(std::uint8_t tc, std::uint32_t flow_label, std::uint8_t hop_limit,
                         const pfplm::Ipv6Address& src, const pfplm::Ipv6Address& dst,
                         const std::vector<pfplm::Ipv6Address>* path, std::uint8_t srh_next,
                         std::uint8_t segments_left, std::uint8_t next_if_no_srh,
                         const Bytes& payload) {
  Bytes ext;
  if (path) {
    const auto n = static_cast<std::uint8_t>(path->size());
    ext = {srh_next, static_cast<std::uint8_t>(2 * n), 4, segments_left,
           static_cast<std::uint8_t>(n - 1), 0, 0, 0};
    for (auto it = path->rbegin(); it != path->rend(); ++it) put_addr(ext, *it);
  }
  const std::size_t plen = ext.size() + payload.size();
  Bytes b;
  const std::uint32_t first = (6u << 28) | (std::uint32_t{tc} << 20) | (flow_label & 0xfffff);
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(first >> s));
  put16(b, static_cast<std::uint16_t>(plen));
  b.push_back(path ? 43 : next_if_no_srh);
  b.push_back(hop_limit);
  put_addr(b, src);
  put_addr(b, dst);
  b.insert(b.end(), ext.begin(), ext.end());
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

/// Packets a constant-rate flow puts into each block: send times are
/// start + k * round(1e9 / rate) for every such time below the stop time,
/// and block = floor(t / T).
inline std::map<std::uint64_t, std::uint64_t> tx_per_block(const pfplm::sim::FlowSpec& f,
                                                           pfplm::Duration period,
                                                           std::uint64_t blocks) {
  const std::int64_t interval = std::llround(1e9 / f.rate_pps);
  const std::int64_t end = period.count() * static_cast<std::int64_t>(blocks);
  const std::int64_t stop = f.stop ? std::min<std::int64_t>(f.stop->count(), end) : end;
  std::map<std::uint64_t, std::uint64_t> out;
  for (std::int64_t t = f.start.count(); t < stop; t += interval) {
    ++out[static_cast<std::uint64_t>(t / period.count())];
  }
  return out;
}

struct RandomScenarioOptions {
  std::size_t max_flows = 64;
  std::uint64_t max_packets = 100'000;
  pfplm::Duration period = std::chrono::seconds(2);
  std::uint64_t max_blocks = 6;
  double max_delay_fraction = 0.49;  // of T
};

/// A random valid scenario with a seeded data drop plan (explicit indices
/// or a Bernoulli probability) and at most max_packets data packets.
inline pfplm::sim::Scenario random_scenario(std::mt19937_64& rng,
                                            const RandomScenarioOptions& opt = {}) {
  using namespace pfplm;
  std::uniform_int_distribution<std::size_t> nflows(1, opt.max_flows);
  std::uniform_int_distribution<std::uint64_t> nblocks(2, opt.max_blocks);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  sim::Scenario s;
  s.period = opt.period;
  s.blocks = nblocks(rng);
  s.seed = rng();
  s.engine = unit(rng) < 0.5 ? EngineKind::kLinear : EngineKind::kHash;
  s.link.propagation_delay =
      Duration{static_cast<std::int64_t>(unit(rng) * opt.max_delay_fraction *
                                         static_cast<double>(s.period.count()))};

  const std::size_t n = nflows(rng);
  const double seconds = static_cast<double>(s.blocks) * std::chrono::duration<double>(s.period).count();
  const double budget_pps = static_cast<double>(opt.max_packets) / seconds / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    sim::FlowSpec f;
    const std::size_t len = 1 + rng() % 4;
    std::vector<Sid> path;
    for (std::size_t j = 0; j < len; ++j) {
      path.push_back(Ipv6Address::from_u64(0xfc00000000000000ULL | (rng() & 0xffff) << 16, j + 1));
    }
    path.back() = Ipv6Address::from_u64(0xfd00000000000000ULL | i, 1);  // unique per flow
    f.sids = SidList(path);
    f.destination = Ipv6Address::from_u64(0x20010db800000000ULL | i, 1);
    f.rate_pps = std::max(1.0, std::floor(unit(rng) * budget_pps * 0.9));
    if (unit(rng) < 0.3) {
      f.start = Duration{static_cast<std::int64_t>(unit(rng) * static_cast<double>(s.period.count()))};
    }
    if (unit(rng) < 0.2) {
      f.stop = f.start + Duration{static_cast<std::int64_t>(
          (0.5 + unit(rng)) * static_cast<double>(s.period.count()) * static_cast<double>(s.blocks - 1))};
    }
    f.monitored = unit(rng) < 0.9 || i == 0;
    s.flows.push_back(f);
  }

  if (unit(rng) < 0.5) {
    s.link.data_drops = sim::DropPlan::random(unit(rng) * 0.2, rng() | 1);
  } else {
    std::uint64_t total = 0;
    for (const auto& f : s.flows) {
      for (const auto& [b, c] : tx_per_block(f, s.period, s.blocks)) total += c;
    }
    std::set<std::uint64_t> idx;
    const std::size_t k = total == 0 ? 0 : rng() % std::min<std::uint64_t>(total, 200);
    for (std::size_t j = 0; j < k; ++j) idx.insert(rng() % total);
    s.link.data_drops = sim::DropPlan::explicit_indices(std::move(idx));
  }
  return s;
}

}  // namespace oracle
