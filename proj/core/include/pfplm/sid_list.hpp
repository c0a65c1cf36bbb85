#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>

#include "pfplm/types.hpp"

namespace pfplm {

/// Maximum segments in a monitored SID list (the sr6hash compile-time cap).
inline constexpr std::size_t kMaxSids = 16;

/// Ordered list of 1..16 SIDs in path order (first segment visited first).
/// This is the flow key: two lists are equal iff they have the same length
/// and identical SIDs at every position.
class SidList {
 public:
  SidList() = default;
  /// Throws MatcherError(kInvalidSidList) if empty or longer than kMaxSids.
  explicit SidList(std::span<const Sid> path);
  SidList(std::initializer_list<Sid> path);

  /// Parses "sid0,sid1,..." as in the ipset/ip6tables CLI syntax.
  static SidList parse(std::string_view text);
  /// Builds from SRH wire order (segment_list[0] is the final segment).
  static SidList from_wire_order(std::span<const Sid> reversed);

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  std::span<const Sid> path() const noexcept { return {segments_.data(), size_}; }
  const Sid& operator[](std::size_t i) const { return segments_[i]; }
  const Sid& front() const { return segments_[0]; }

  std::string to_string() const;

  /// 64-bit digest over the concatenated SIDs and the length.
  std::uint64_t digest() const noexcept;

  friend bool operator==(const SidList& a, const SidList& b) noexcept;
  friend bool operator<(const SidList& a, const SidList& b) noexcept;

 private:
  std::array<Sid, kMaxSids> segments_{};
  std::uint8_t size_ = 0;
};

struct SidListHash {
  std::size_t operator()(const SidList& l) const noexcept { return l.digest(); }
};

}  // namespace pfplm
