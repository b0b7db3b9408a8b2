#include <gtest/gtest.h>

#include <vector>

#include "rfmsim/rfm_engine.hpp"

using namespace rfmsim;

namespace {
RaaCounters make(int raaimt) { return RaaCounters(32, 4, RfmParams::for_raaimt(raaimt)); }
}  // namespace

TEST(RfmParams, DefaultPolicy) {
  const auto p = RfmParams::for_raaimt(32);
  EXPECT_EQ(p.raammt, 96);
  EXPECT_EQ(p.ref_decrement, 16);
  EXPECT_THROW(RfmParams::for_raaimt(24).validate(), ConfigError);
  EXPECT_NO_THROW(RfmParams::for_raaimt(16).validate());
}

TEST(RaaCounters, SaturationSetsMandatoryFlag) {
  auto c = make(32);
  std::vector<int> v(32, 0);
  v[3] = 95;
  c.load(v);
  EXPECT_FALSE(c.mandatory_pending());
  EXPECT_EQ(c.on_act(3), 96);
  EXPECT_TRUE(c.mandatory_pending());
}

TEST(RaaCounters, PlainIncrement) {
  auto c = make(32);
  EXPECT_EQ(c.on_act(0), 1);
  EXPECT_FALSE(c.mandatory_pending());
}

TEST(RaaCounters, SaturationAtRaaimt16) {
  auto c = make(16);
  std::vector<int> v(32, 0);
  v[0] = 47;
  c.load(v);
  EXPECT_EQ(c.on_act(0), 48);
  EXPECT_TRUE(c.mandatory_pending());
}

TEST(RaaCounters, ActOnSaturatedBankIsAnInvariantViolation) {
  auto c = make(32);
  std::vector<int> v(32, 0);
  v[0] = 96;
  c.load(v);
  EXPECT_THROW(c.on_act(0), SimulationError);
}

TEST(RaaCounters, RfmabDecrementClampsAtZero) {
  auto c = make(32);
  std::vector<int> v(32, 0);
  v[0] = 96;
  v[1] = 10;
  c.load(v);
  c.apply_rfmab_decrement();
  EXPECT_EQ(c.counter(0), 64);
  EXPECT_EQ(c.counter(1), 0);
  EXPECT_EQ(c.counter(2), 0);
  EXPECT_FALSE(c.mandatory_pending());
  EXPECT_EQ(c.ledger(1).clamp_loss, 22);
}

TEST(RaaCounters, RefDecrement) {
  auto c = make(32);
  std::vector<int> v(32, 0);
  v[0] = 48;
  v[1] = 5;
  c.load(v);
  c.apply_ref_decrement();
  EXPECT_EQ(c.counter(0), 32);
  EXPECT_EQ(c.counter(1), 0);

  auto d = make(16);
  v.assign(32, 0);
  v[0] = 48;
  d.load(v);
  d.apply_ref_decrement();
  EXPECT_EQ(d.counter(0), 40);
}

TEST(RaaCounters, RfmsbDecrementTouchesOneBankSet) {
  auto c = make(32);
  std::vector<int> v(32, 48);
  v[4] = 96;  // bank-set 0
  c.load(v);
  EXPECT_TRUE(c.mandatory_pending_for_set(0));
  c.apply_rfmsb_decrement(0);
  for (int b = 0; b < 32; ++b) {
    if (b == 4) EXPECT_EQ(c.counter(b), 64);
    else EXPECT_EQ(c.counter(b), b % 4 == 0 ? 16 : 48) << "bank " << b;
  }
  EXPECT_FALSE(c.mandatory_pending_for_set(0));

  auto z = make(32);
  z.apply_rfmsb_decrement(2);
  for (int b = 0; b < 32; ++b) EXPECT_EQ(z.counter(b), 0);
}

TEST(RaaCounters, LedgerBalances) {
  auto c = make(32);
  for (int i = 0; i < 40; ++i) c.on_act(7);
  c.apply_ref_decrement();
  c.apply_rfmab_decrement();
  const auto& l = c.ledger(7);
  EXPECT_EQ(l.increments - l.decrements, c.counter(7));
  EXPECT_EQ(c.counter(7), 0);
  EXPECT_EQ(l.clamp_loss, 8);
}

TEST(Limiter, UnrestrictedWithoutRecentRfm) {
  LimiterParams p;
  p.enabled = true;
  ActivationLimiter lim(p, 48);
  for (int i = 0; i < 200; ++i) lim.record_act(0, 0, 100);
  EXPECT_EQ(lim.check(0, 0, 100), LimiterDecision::Allow);
}

TEST(Limiter, DeniesOnceBudgetSpentAfterRecentRfm) {
  LimiterParams p;
  p.enabled = true;
  ActivationLimiter lim(p, 48);
  lim.record_rfm(97);
  EXPECT_TRUE(lim.restricted(100));
  EXPECT_EQ(lim.check(0, 0, 100), LimiterDecision::Allow);
  for (int i = 0; i < 48; ++i) lim.record_act(0, 0, 100);
  EXPECT_EQ(lim.check(0, 0, 100), LimiterDecision::DenyUntilNextTrefi);
  EXPECT_EQ(lim.check(1, 0, 100), LimiterDecision::Allow);
  EXPECT_EQ(lim.check(0, 0, 101), LimiterDecision::Allow);
}

TEST(Limiter, GraceWindowExpires) {
  LimiterParams p;
  p.enabled = true;
  ActivationLimiter lim(p, 48);
  lim.record_rfm(10);
  EXPECT_TRUE(lim.restricted(26));
  EXPECT_FALSE(lim.restricted(27));
}

TEST(Limiter, DefaultBudgetIsOneAndAHalfRaaimt) {
  LimiterParams p;
  EXPECT_EQ(p.resolved_budget(RfmParams::for_raaimt(32)), 48);
  EXPECT_EQ(p.resolved_budget(RfmParams::for_raaimt(16)), 24);
}
