#include <gtest/gtest.h>

#include <vector>

#include "rfmsim/agents.hpp"
#include "rfmsim/dram_model.hpp"

using namespace rfmsim;

namespace {

struct Fixture {
  EventQueue q;
  MemorySystem mem;
  explicit Fixture(TimingParams t = {}, RfmParams r = {}, ControllerOptions o = {}) : mem(q, t, r, o) {}
};

TimingParams fgr() {
  TimingParams t;
  t.fgr_enabled = true;
  return t;
}

std::vector<const CommandRecord*> of_kind(std::span<const CommandRecord> trace, CommandKind k) {
  std::vector<const CommandRecord*> out;
  for (const auto& r : trace)
    if (r.kind == k) out.push_back(&r);
  return out;
}

}  // namespace

TEST(Dram, IdleActIsGrantedImmediately) {
  Fixture f;
  EXPECT_EQ(f.mem.admit_act(0, 5, 1, 1000), 1000);
}

TEST(Dram, SameBankActWaitsForTrc) {
  Fixture f;
  EXPECT_EQ(f.mem.admit_act(0, 0, 1, 0), 0);
  EXPECT_EQ(f.mem.admit_act(0, 0, 2, 20), 48);
}

TEST(Dram, OtherBankIsNotBoundByTrc) {
  Fixture f;
  f.mem.admit_act(0, 0, 1, 0);
  EXPECT_EQ(f.mem.admit_act(0, 1, 1, 20), 20);
}

TEST(Dram, RfmabBlocksWholeRank) {
  Fixture f;
  const auto rec = f.mem.issue_rfmab(0, 0);
  EXPECT_EQ(rec.completion, 410);
  EXPECT_EQ(f.mem.admit_act(0, 17, 0, 100), 410);
}

TEST(Dram, RfmabAtFiveHundred) {
  Fixture f;
  f.q.run_until(500);
  const auto rec = f.mem.issue_rfmab(0, 500);
  EXPECT_EQ(rec.completion, 910);
  EXPECT_EQ(f.mem.rank(0).rank_blocked_until, 910);
  EXPECT_EQ(f.mem.admit_act(0, 31, 0, 600), 910);
}

TEST(Dram, OverlappingRfmabIsRejected) {
  Fixture f;
  f.mem.issue_rfmab(0, 0);
  f.q.run_until(200);
  EXPECT_THROW(f.mem.issue_rfmab(0, 200), SimulationError);
  f.q.run_until(410);
  EXPECT_NO_THROW(f.mem.issue_rfmab(0, 410));
}

TEST(Dram, RfmabLeavesOtherSubchannelAlone) {
  Fixture f;
  f.mem.issue_rfmab(0, 0);
  EXPECT_EQ(f.mem.admit_act(1, 0, 0, 100), 100);
}

TEST(Dram, RefTickBlocksForTrfc) {
  Fixture f;
  const auto rec = f.mem.refresh_tick(0, 0);
  EXPECT_EQ(rec.issue, 0);
  EXPECT_EQ(rec.completion, 410);
  EXPECT_EQ(f.mem.rank(0).rank_blocked_until, 410);
}

TEST(Dram, RefStreamFollowsPeriod) {
  Fixture normal;
  normal.mem.start_refresh();
  normal.q.run_until(3900 * 3);
  std::vector<SimTime> at;
  for (auto* r : of_kind(normal.mem.trace(), CommandKind::Ref))
    if (r->subchannel == 0) at.push_back(r->issue);
  EXPECT_EQ(at, (std::vector<SimTime>{0, 3900, 7800, 11700}));

  Fixture fine(fgr());
  fine.mem.start_refresh();
  fine.q.run_until(2000);
  at.clear();
  for (auto* r : of_kind(fine.mem.trace(), CommandKind::Ref))
    if (r->subchannel == 0) at.push_back(r->issue);
  EXPECT_EQ(at, (std::vector<SimTime>{0, 1950}));
}

TEST(Dram, RefPhaseShiftsStream) {
  TimingParams t;
  t.ref_phase = 1234;
  Fixture f(t);
  f.mem.start_refresh();
  f.q.run_until(6000);
  auto refs = of_kind(f.mem.trace(), CommandKind::Ref);
  ASSERT_FALSE(refs.empty());
  EXPECT_EQ(refs.front()->issue, 1234);
  EXPECT_EQ(refs.back()->issue, 5134);
}

TEST(Dram, RfmsbBlocksOneBankSet) {
  Fixture f(fgr());
  f.q.run_until(1000);
  const auto rec = f.mem.issue_rfmsb(0, 2, 1000);
  EXPECT_EQ(rec.completion, 1190);
  for (int b = 0; b < 32; ++b)
    EXPECT_EQ(f.mem.rank(0).bank_blocked_until[b] == 1190, b % 4 == 2) << "bank " << b;
  EXPECT_EQ(f.mem.admit_act(0, 0, 0, 1050), 1050);
  EXPECT_EQ(f.mem.admit_act(0, 6, 0, 1100), 1190);
}

TEST(Dram, RfmsbNeedsFgr) {
  Fixture f;
  EXPECT_THROW(f.mem.issue_rfmsb(0, 0, 0), ConfigError);
}

TEST(Dram, SaturatingActTriggersRfmabAtItsCompletion) {
  Fixture f;
  SimTime last = 0;
  for (int i = 0; i < 96; ++i) last = f.mem.admit_act(0, 3, i, last);
  f.q.run_until(last + 48);
  auto rfms = of_kind(f.mem.trace(), CommandKind::Rfmab);
  ASSERT_EQ(rfms.size(), 1u);
  EXPECT_EQ(rfms[0]->issue, last + 48);
  EXPECT_EQ(f.mem.counters(0).counter(3), 96);
  // Stalled until the RFM completes, on any bank; the decrement lands first.
  EXPECT_EQ(f.mem.admit_act(0, 20, 0, last + 50), last + 48 + 410);
  EXPECT_EQ(f.mem.counters(0).counter(3), 64);
}

TEST(Dram, RfmDisabledNeverIssuesRfm) {
  ControllerOptions o;
  o.rfm_enabled = false;
  Fixture f({}, {}, o);
  SimTime last = 0;
  for (int i = 0; i < 200; ++i) last = f.mem.admit_act(0, 3, i, last);
  f.q.run_until(last + 1000);
  EXPECT_TRUE(of_kind(f.mem.trace(), CommandKind::Rfmab).empty());
}

TEST(Dram, ActsNeverOverlapRefOrRfmWindows) {
  Fixture f;
  f.mem.start_refresh();
  SimContext ctx{f.q, f.mem};
  DosAgent dos(ctx, {0, AgentRole::Dos, 0, 0, {0}});
  VictimAgent victim(ctx, {1, AgentRole::Victim, 1, 0, {4, 5, 6}}, 0);
  dos.start(0);
  victim.start(0);
  f.q.run_until(3900 * 50);
  std::vector<std::pair<SimTime, SimTime>> blocked;
  for (const auto& r : f.mem.trace())
    if (r.subchannel == 0 && (r.kind == CommandKind::Ref || r.kind == CommandKind::Rfmab))
      blocked.emplace_back(r.issue, r.completion);
  int acts = 0;
  for (const auto& r : f.mem.trace()) {
    if (r.kind != CommandKind::Act || r.subchannel != 0) continue;
    ++acts;
    for (auto [s, e] : blocked) ASSERT_FALSE(r.issue >= s && r.issue < e) << "ACT at " << r.issue;
  }
  EXPECT_GT(acts, 1000);
}

TEST(Dram, ThinkTimeZeroVictimHitsActCeiling) {
  Fixture f;
  f.mem.start_refresh();
  SimContext ctx{f.q, f.mem};
  // Spread over ten banks so the victim never saturates a counter itself.
  VictimAgent victim(ctx, {1, AgentRole::Victim, 1, 0, {4, 5, 6, 7, 8, 9, 10, 11, 12, 13}}, 0);
  victim.start(0);
  const std::int64_t n = 200;
  f.q.run_until(3900 * (n + 1));
  const double per_trefi = static_cast<double>(victim.completed_between(3900, 3900 * (n + 1))) / n;
  // (tREFI - tRFC) / tRC = 72.7 ACTs fit between REFs.
  EXPECT_GE(per_trefi, 72.0);
  EXPECT_LE(per_trefi, 73.0);
  EXPECT_EQ(f.mem.command_count(CommandKind::Rfmab, 0), 0u);
}

TEST(Dram, TraceKindsRoundTrip) {
  for (auto k : {CommandKind::Act, CommandKind::Ref, CommandKind::Rfmab, CommandKind::Rfmsb})
    EXPECT_EQ(parse_command_kind(to_string(k)), k);
  EXPECT_FALSE(parse_command_kind("NOP").has_value());
}
