#include "pfplm/sid_list.hpp"

#include <algorithm>
#include <cstring>

#include "pfplm/error.hpp"

namespace pfplm {

namespace {

constexpr std::uint64_t kMul = 0x9e3779b97f4a7c15ULL;

std::uint64_t load64(const std::uint8_t* p) {
  std::uint64_t v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

}  // namespace

SidList::SidList(std::span<const Sid> path) {
  if (path.empty()) throw MatcherError(MatcherErrc::kInvalidSidList, "SID list is empty");
  if (path.size() > kMaxSids) {
    throw MatcherError(MatcherErrc::kInvalidSidList,
                       "SID list has " + std::to_string(path.size()) + " segments (max 16)");
  }
  std::copy(path.begin(), path.end(), segments_.begin());
  size_ = static_cast<std::uint8_t>(path.size());
}

SidList::SidList(std::initializer_list<Sid> path)
    : SidList(std::span<const Sid>(path.begin(), path.size())) {}

SidList SidList::parse(std::string_view text) {
  std::vector<Sid> sids;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    auto item = text.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    sids.push_back(Ipv6Address::from_string(item));
    pos = comma + 1;
  }
  try {
    return SidList(sids);
  } catch (const MatcherError& e) {
    throw ConfigError(e.what());
  }
}

SidList SidList::from_wire_order(std::span<const Sid> reversed) {
  std::array<Sid, kMaxSids> tmp{};
  if (reversed.size() > kMaxSids) return SidList(reversed);  // throws
  std::reverse_copy(reversed.begin(), reversed.end(), tmp.begin());
  return SidList(std::span<const Sid>(tmp.data(), reversed.size()));
}

std::string SidList::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < size_; ++i) {
    if (i) out += ',';
    out += segments_[i].to_string();
  }
  return out;
}

std::uint64_t SidList::digest() const noexcept {
  std::uint64_t h = mix(size_ * kMul + 0x5352364841534831ULL);
  for (std::size_t i = 0; i < size_; ++i) {
    const auto* p = segments_[i].bytes.data();
    h = (h ^ mix(load64(p))) * kMul;
    h = (h ^ mix(load64(p + 8) + i)) * kMul;
  }
  return mix(h);
}

bool operator==(const SidList& a, const SidList& b) noexcept {
  return a.size_ == b.size_ &&
         std::memcmp(a.segments_.data(), b.segments_.data(), a.size_ * sizeof(Sid)) == 0;
}

bool operator<(const SidList& a, const SidList& b) noexcept {
  return std::lexicographical_compare(a.path().begin(), a.path().end(), b.path().begin(),
                                      b.path().end());
}

}  // namespace pfplm
