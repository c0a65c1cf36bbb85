#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pfplm/sid_list.hpp"
#include "pfplm/types.hpp"

namespace pfplm {

/// Snapshot of a flow's per-color packet counters.
struct ColorBank {
  std::uint64_t count_a = 0;
  std::uint64_t count_b = 0;

  std::uint64_t get(Color c) const { return c == Color::A ? count_a : count_b; }
  bool operator==(const ColorBank&) const = default;
};

/// Live counters. Increments are relaxed atomic adds; they wrap modulo 2^64.
class AtomicColorBank {
 public:
  /// Returns true when the new value has crossed 2^63.
  bool increment(Color c) noexcept {
    const auto prev = counters_[color_index(c)].fetch_add(1, std::memory_order_relaxed);
    return (prev + 1) >> 63;
  }
  std::uint64_t load(Color c) const noexcept {
    return counters_[color_index(c)].load(std::memory_order_relaxed);
  }
  ColorBank snapshot() const noexcept { return {load(Color::A), load(Color::B)}; }
  void store(const ColorBank& bank) noexcept {
    counters_[0].store(bank.count_a, std::memory_order_relaxed);
    counters_[1].store(bank.count_b, std::memory_order_relaxed);
  }

 private:
  std::atomic<std::uint64_t> counters_[2]{};
};

enum class EngineKind { kLinear, kHash };

std::string_view to_string(EngineKind kind);
/// Accepts "linear" or "hash". Throws ConfigError otherwise.
EngineKind parse_engine_kind(std::string_view text);

/// Flow table mapping SID lists to color counters.
///
/// match_and_count() and read_counter() may run concurrently with each
/// other. add_flow(), remove_flow() and preset_counters() need exclusive
/// access relative to every other call.
class MatcherEngine {
 public:
  virtual ~MatcherEngine() = default;

  /// Throws MatcherError(kDuplicateFlow) if already present.
  virtual void add_flow(const SidList& sids) = 0;
  /// Returns the final counters. Throws MatcherError(kUnknownFlow).
  virtual ColorBank remove_flow(const SidList& sids) = 0;
  /// Exact full-list match. Increments the color's counter on a hit.
  virtual bool match_and_count(const SidList& sids, Color color) = 0;
  /// Throws MatcherError(kUnknownFlow).
  virtual std::uint64_t read_counter(const SidList& sids, Color color) const = 0;
  virtual std::vector<std::pair<SidList, ColorBank>> list_flows() const = 0;
  virtual std::size_t flow_count() const = 0;
  /// Overwrites a flow's counters, e.g. when restoring state. Throws kUnknownFlow.
  virtual void preset_counters(const SidList& sids, const ColorBank& bank) = 0;
  virtual EngineKind kind() const = 0;

  /// Matches a SID list taken from a packet. Lists longer than kMaxSids (or
  /// empty) are an automatic miss and bump oversize_count().
  bool match_and_count(std::span<const Sid> path, Color color);
  /// Wire-order (SRH) variant of the above.
  bool match_wire_and_count(std::span<const Sid> wire_order, Color color);

  std::uint64_t oversize_count() const noexcept {
    return oversize_.load(std::memory_order_relaxed);
  }
  /// Latched once any counter crosses 2^63.
  bool saturation_warning() const noexcept {
    return saturation_.load(std::memory_order_relaxed);
  }

 protected:
  void note_increment(bool crossed) noexcept {
    if (crossed) [[unlikely]]
      saturation_.store(true, std::memory_order_relaxed);
  }

 private:
  std::atomic<std::uint64_t> oversize_{0};
  std::atomic<bool> saturation_{false};
};

/// Sequential rule scan: every lookup compares the packet's SID list against
/// each rule in insertion order and a miss visits all of them.
class LinearEngine final : public MatcherEngine {
 public:
  using MatcherEngine::match_and_count;

  void add_flow(const SidList& sids) override;
  ColorBank remove_flow(const SidList& sids) override;
  bool match_and_count(const SidList& sids, Color color) override;
  std::uint64_t read_counter(const SidList& sids, Color color) const override;
  std::vector<std::pair<SidList, ColorBank>> list_flows() const override;
  std::size_t flow_count() const override { return rules_.size(); }
  void preset_counters(const SidList& sids, const ColorBank& bank) override;
  EngineKind kind() const override { return EngineKind::kLinear; }

 private:
  struct Rule {
    SidList sids;
    AtomicColorBank bank;
  };
  Rule* find(const SidList& sids) const;

  std::vector<std::unique_ptr<Rule>> rules_;
};

/// Hash set keyed on SidList::digest(); collisions resolve by full-list
/// comparison, so matching semantics equal LinearEngine's.
class HashEngine final : public MatcherEngine {
 public:
  using MatcherEngine::match_and_count;

  void add_flow(const SidList& sids) override;
  ColorBank remove_flow(const SidList& sids) override;
  bool match_and_count(const SidList& sids, Color color) override;
  std::uint64_t read_counter(const SidList& sids, Color color) const override;
  std::vector<std::pair<SidList, ColorBank>> list_flows() const override;
  std::size_t flow_count() const override { return table_.size(); }
  void preset_counters(const SidList& sids, const ColorBank& bank) override;
  EngineKind kind() const override { return EngineKind::kHash; }

 private:
  AtomicColorBank& bank_of(const SidList& sids) const;

  std::unordered_map<SidList, std::unique_ptr<AtomicColorBank>, SidListHash> table_;
};

std::unique_ptr<MatcherEngine> make_engine(EngineKind kind);

}  // namespace pfplm
