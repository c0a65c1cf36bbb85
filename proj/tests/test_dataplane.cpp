#include <gtest/gtest.h>

#include "pfplm/codec.hpp"
#include "pfplm/dataplane.hpp"
#include "pfplm/error.hpp"

using namespace pfplm;
using namespace std::chrono_literals;

namespace {

Ipv6Address addr(const char* s) { return Ipv6Address::from_string(s); }

codec::Bytes inner_to(const char* dst) {
  const std::uint8_t payload[4] = {1, 2, 3, 4};
  return codec::encode_udp6(addr("2001:db8:ffff::1"), addr(dst), 1000, 2000, payload);
}

}  // namespace

TEST(Ipv6Prefix, ParseMasksAndContains) {
  const auto p = Ipv6Prefix::parse("2001:db8:1:2::5/32");
  EXPECT_EQ(p.length, 32);
  EXPECT_EQ(p.address, addr("2001:db8::"));
  EXPECT_TRUE(p.contains(addr("2001:db8:ffff::1")));
  EXPECT_FALSE(p.contains(addr("2001:db9::1")));
  EXPECT_EQ(Ipv6Prefix::parse("fc00::1").length, 128);
  EXPECT_EQ(Ipv6Prefix::parse("::/0").to_string(), "::/0");
  EXPECT_TRUE(Ipv6Prefix::parse("::/0").contains(addr("fc00::1")));
  EXPECT_THROW(Ipv6Prefix::parse("2001:db8::/129"), ConfigError);
  EXPECT_THROW(Ipv6Prefix::parse("2001:db8::/x"), ConfigError);
}

TEST(SrPolicyTable, LongestPrefixWins) {
  SrPolicyTable t;
  t.add({Ipv6Prefix::parse("2001:db8::/32"), SidList::parse("fc00::1"), false});
  t.add({Ipv6Prefix::parse("2001:db8:1::/48"), SidList::parse("fc00::2"), true});
  t.add({Ipv6Prefix::parse("2001:db8:1::7"), SidList::parse("fc00::3"), true});
  EXPECT_EQ(t.lookup(addr("2001:db8:2::1"))->sids, SidList::parse("fc00::1"));
  EXPECT_EQ(t.lookup(addr("2001:db8:1::1"))->sids, SidList::parse("fc00::2"));
  EXPECT_EQ(t.lookup(addr("2001:db8:1::7"))->sids, SidList::parse("fc00::3"));
  EXPECT_EQ(t.lookup(addr("2001:db9::1")), nullptr);
}

TEST(SrPolicyTable, DuplicatePrefixRejected) {
  SrPolicyTable t;
  t.add({Ipv6Prefix::parse("2001:db8::/32"), SidList::parse("fc00::1"), false});
  try {
    t.add({Ipv6Prefix::parse("2001:db8:ff::/32"), SidList::parse("fc00::2"), false});
    FAIL();
  } catch (const DataplaneError& e) {
    EXPECT_EQ(e.code(), DataplaneErrc::kDuplicatePolicy);
  }
}

TEST(SrPolicyTable, RegisterMonitoredSkipsRepeatsAndUnmonitored) {
  SrPolicyTable t;
  t.add({Ipv6Prefix::parse("2001:db8:1::/48"), SidList::parse("fc00::1"), true});
  t.add({Ipv6Prefix::parse("2001:db8:2::/48"), SidList::parse("fc00::1"), true});
  t.add({Ipv6Prefix::parse("2001:db8:3::/48"), SidList::parse("fc00::3"), false});
  auto engine = make_engine(EngineKind::kHash);
  t.register_monitored(*engine);
  EXPECT_EQ(engine->flow_count(), 1u);
}

TEST(ColoringSchedule, BlocksAreClosedOpen) {
  ColoringSchedule s(2s, Timestamp{0}, Color::A);
  EXPECT_EQ(s.block_at(Timestamp{0}), 0u);
  EXPECT_EQ(s.block_at(2s - 1ns), 0u);
  EXPECT_EQ(s.block_at(2s), 1u);
  EXPECT_EQ(s.color_at(2s - 1ns), Color::A);
  EXPECT_EQ(s.color_at(2s), Color::B);
  EXPECT_EQ(s.color_at(4s), Color::A);
  EXPECT_EQ(s.block_start(3), 6s);
}

TEST(ColoringSchedule, TickReportsEveryFlip) {
  ColoringSchedule s(1s, Timestamp{0}, Color::B);
  EXPECT_TRUE(s.tick(500ms).empty());
  const auto flips = s.tick(3s);
  ASSERT_EQ(flips.size(), 3u);
  EXPECT_EQ(flips[0], (ColoringSchedule::Flip{1s, Color::A, 1}));
  EXPECT_EQ(flips[1], (ColoringSchedule::Flip{2s, Color::B, 2}));
  EXPECT_EQ(flips[2], (ColoringSchedule::Flip{3s, Color::A, 3}));
  EXPECT_EQ(s.active_color(), Color::A);
  EXPECT_EQ(s.epoch(), 3s);
}

TEST(ColoringSchedule, RejectsTimeRegressionAndBadPeriod) {
  ColoringSchedule s(1s);
  s.tick(5s);
  try {
    s.tick(4s);
    FAIL();
  } catch (const DataplaneError& e) {
    EXPECT_EQ(e.code(), DataplaneErrc::kTimeRegression);
  }
  EXPECT_THROW(ColoringSchedule(0s), DataplaneError);
}

TEST(ColoringSchedule, ClockStartOffset) {
  ColoringSchedule s(1s, Timestamp{10s});
  EXPECT_EQ(s.block_at(10s), 0u);
  EXPECT_EQ(s.block_at(11s + 1ns), 1u);
  EXPECT_EQ(s.block_at(5s), 0u);  // before the start counts as block 0
}

class IngressEgress : public ::testing::Test {
 protected:
  void SetUp() override {
    policies.add({Ipv6Prefix::parse("2001:db8:1::/48"), SidList::parse("fc00:1::1,fc00:2::1"), true});
    policies.add({Ipv6Prefix::parse("2001:db8:2::/48"), SidList::parse("fc00:3::1"), false});
    policies.register_monitored(*ingress_engine);
    egress_engine->add_flow(SidList::parse("fc00:1::1,fc00:2::1"));
  }

  SrPolicyTable policies;
  std::unique_ptr<MatcherEngine> ingress_engine = make_engine(EngineKind::kHash);
  std::unique_ptr<MatcherEngine> egress_engine = make_engine(EngineKind::kLinear);
  ColoringSchedule schedule{2s};
};

TEST_F(IngressEgress, MonitoredPacketIsEncapsulatedColoredAndCounted) {
  IngressNode ingress(policies, *ingress_engine, schedule);
  const auto out = ingress.process(inner_to("2001:db8:1::9"), 3s);
  ASSERT_NE(out.policy, nullptr);
  EXPECT_TRUE(out.counted);
  EXPECT_EQ(out.color, Color::B);
  const auto view = codec::decode_packet(out.packet);
  EXPECT_EQ(codec::get_color(view), Color::B);
  EXPECT_EQ(view.srh->path(), SidList::parse("fc00:1::1,fc00:2::1"));
  EXPECT_EQ(ingress_engine->read_counter(SidList::parse("fc00:1::1,fc00:2::1"), Color::B), 1u);
}

TEST_F(IngressEgress, UnmonitoredPolicyEncapsulatesWithoutMark) {
  IngressNode ingress(policies, *ingress_engine, schedule);
  const auto out = ingress.process(inner_to("2001:db8:2::9"), 0s);
  EXPECT_FALSE(out.counted);
  EXPECT_FALSE(out.color);
  EXPECT_FALSE(codec::peek_color(out.packet));
}

TEST_F(IngressEgress, NoPolicyForwardsUnchanged) {
  IngressNode ingress(policies, *ingress_engine, schedule);
  const auto in = inner_to("2001:db8:9::1");
  const auto out = ingress.process(in, 0s);
  EXPECT_EQ(out.policy, nullptr);
  EXPECT_EQ(out.packet, in);
}

TEST_F(IngressEgress, CountingOnlyModeLeavesPacketUnmarked) {
  IngressOptions options;
  options.color_packets = false;
  IngressNode ingress(policies, *ingress_engine, schedule, options);
  const auto out = ingress.process(inner_to("2001:db8:1::9"), 0s);
  EXPECT_TRUE(out.counted);
  EXPECT_FALSE(codec::peek_color(out.packet));
  EXPECT_EQ(ingress_engine->read_counter(SidList::parse("fc00:1::1,fc00:2::1"), Color::A), 1u);
}

TEST_F(IngressEgress, IngressRejectsNonIpv6Inner) {
  IngressNode ingress(policies, *ingress_engine, schedule);
  const codec::Bytes v4(20, 0x45);
  EXPECT_THROW(ingress.process(v4, 0s), CodecError);
}

TEST_F(IngressEgress, EgressCountsByCarriedColorAndDecapsulates) {
  IngressNode ingress(policies, *ingress_engine, schedule);
  EgressNode egress(*egress_engine);
  const auto inner = inner_to("2001:db8:1::9");
  auto out = ingress.process(inner, 2s);  // block 1: B
  codec::advance_to_final_segment_in_place(out.packet);
  const auto r = egress.process(out.packet);
  EXPECT_TRUE(r.decapsulated);
  EXPECT_TRUE(r.counted);
  EXPECT_EQ(r.color, Color::B);
  EXPECT_EQ(r.packet, inner);
  EXPECT_EQ(egress_engine->read_counter(SidList::parse("fc00:1::1,fc00:2::1"), Color::B), 1u);
}

TEST_F(IngressEgress, EgressCountsEvenBeforeFinalSegment) {
  IngressNode ingress(policies, *ingress_engine, schedule);
  EgressNode egress(*egress_engine);
  const auto out = ingress.process(inner_to("2001:db8:1::9"), 0s);
  EXPECT_THROW(egress.process(out.packet), CodecError);
  EXPECT_EQ(egress_engine->read_counter(SidList::parse("fc00:1::1,fc00:2::1"), Color::A), 1u);
}

TEST_F(IngressEgress, EgressPassesPlainPackets) {
  EgressNode egress(*egress_engine);
  const auto plain = inner_to("2001:db8:1::9");
  const auto r = egress.process(plain);
  EXPECT_FALSE(r.decapsulated);
  EXPECT_FALSE(r.counted);
  EXPECT_EQ(r.packet, plain);
}

TEST_F(IngressEgress, PacketAtFlipInstantBelongsToNewBlock) {
  IngressNode ingress(policies, *ingress_engine, schedule);
  EXPECT_EQ(ingress.process(inner_to("2001:db8:1::9"), 2s - 1ns).color, Color::A);
  EXPECT_EQ(ingress.process(inner_to("2001:db8:1::9"), 2s).color, Color::B);
}
