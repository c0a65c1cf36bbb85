#include "pfplm/flow_matcher.hpp"

#include <algorithm>
#include <string>

#include "pfplm/error.hpp"

namespace pfplm {

namespace {

[[noreturn]] void throw_unknown(const SidList& sids) {
  throw MatcherError(MatcherErrc::kUnknownFlow, "unknown flow " + sids.to_string());
}

[[noreturn]] void throw_duplicate(const SidList& sids) {
  throw MatcherError(MatcherErrc::kDuplicateFlow, "flow already monitored: " + sids.to_string());
}

void require_valid(const SidList& sids) {
  if (sids.empty()) throw MatcherError(MatcherErrc::kInvalidSidList, "SID list is empty");
}

}  // namespace

std::string_view to_string(EngineKind kind) {
  return kind == EngineKind::kLinear ? "linear" : "hash";
}

EngineKind parse_engine_kind(std::string_view text) {
  if (text == "linear") return EngineKind::kLinear;
  if (text == "hash") return EngineKind::kHash;
  throw ConfigError("unknown engine '" + std::string(text) + "' (expected linear or hash)");
}

bool MatcherEngine::match_and_count(std::span<const Sid> path, Color color) {
  if (path.empty() || path.size() > kMaxSids) {
    oversize_.fetch_add(1, std::memory_order_relaxed);
    return false;
  }
  return match_and_count(SidList(path), color);
}

bool MatcherEngine::match_wire_and_count(std::span<const Sid> wire_order, Color color) {
  if (wire_order.empty() || wire_order.size() > kMaxSids) {
    oversize_.fetch_add(1, std::memory_order_relaxed);
    return false;
  }
  return match_and_count(SidList::from_wire_order(wire_order), color);
}

// --- LinearEngine ------------------------------------------------------------

LinearEngine::Rule* LinearEngine::find(const SidList& sids) const {
  for (const auto& rule : rules_) {
    if (rule->sids == sids) return rule.get();
  }
  return nullptr;
}

void LinearEngine::add_flow(const SidList& sids) {
  require_valid(sids);
  if (find(sids)) throw_duplicate(sids);
  auto rule = std::make_unique<Rule>();
  rule->sids = sids;
  rules_.push_back(std::move(rule));
}

ColorBank LinearEngine::remove_flow(const SidList& sids) {
  auto it = std::find_if(rules_.begin(), rules_.end(),
                         [&](const auto& rule) { return rule->sids == sids; });
  if (it == rules_.end()) throw_unknown(sids);
  const ColorBank final_counts = (*it)->bank.snapshot();
  rules_.erase(it);
  return final_counts;
}

bool LinearEngine::match_and_count(const SidList& sids, Color color) {
  for (auto& rule : rules_) {
    if (rule->sids == sids) {
      note_increment(rule->bank.increment(color));
      return true;
    }
  }
  return false;
}

std::uint64_t LinearEngine::read_counter(const SidList& sids, Color color) const {
  const Rule* rule = find(sids);
  if (!rule) throw_unknown(sids);
  return rule->bank.load(color);
}

std::vector<std::pair<SidList, ColorBank>> LinearEngine::list_flows() const {
  std::vector<std::pair<SidList, ColorBank>> out;
  out.reserve(rules_.size());
  for (const auto& rule : rules_) out.emplace_back(rule->sids, rule->bank.snapshot());
  return out;
}

void LinearEngine::preset_counters(const SidList& sids, const ColorBank& bank) {
  Rule* rule = find(sids);
  if (!rule) throw_unknown(sids);
  rule->bank.store(bank);
}

// --- HashEngine --------------------------------------------------------------

void HashEngine::add_flow(const SidList& sids) {
  require_valid(sids);
  auto [it, inserted] = table_.try_emplace(sids, nullptr);
  if (!inserted) throw_duplicate(sids);
  it->second = std::make_unique<AtomicColorBank>();
}

ColorBank HashEngine::remove_flow(const SidList& sids) {
  auto it = table_.find(sids);
  if (it == table_.end()) throw_unknown(sids);
  const ColorBank final_counts = it->second->snapshot();
  table_.erase(it);
  return final_counts;
}

bool HashEngine::match_and_count(const SidList& sids, Color color) {
  auto it = table_.find(sids);
  if (it == table_.end()) return false;
  note_increment(it->second->increment(color));
  return true;
}

AtomicColorBank& HashEngine::bank_of(const SidList& sids) const {
  auto it = table_.find(sids);
  if (it == table_.end()) throw_unknown(sids);
  return *it->second;
}

std::uint64_t HashEngine::read_counter(const SidList& sids, Color color) const {
  return bank_of(sids).load(color);
}

std::vector<std::pair<SidList, ColorBank>> HashEngine::list_flows() const {
  std::vector<std::pair<SidList, ColorBank>> out;
  out.reserve(table_.size());
  for (const auto& [sids, bank] : table_) out.emplace_back(sids, bank->snapshot());
  return out;
}

void HashEngine::preset_counters(const SidList& sids, const ColorBank& bank) {
  bank_of(sids).store(bank);
}

std::unique_ptr<MatcherEngine> make_engine(EngineKind kind) {
  if (kind == EngineKind::kLinear) return std::make_unique<LinearEngine>();
  return std::make_unique<HashEngine>();
}

}  // namespace pfplm
