#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rfmsim/timing.hpp"

namespace rfmsim {

/// Per-bank Rolling Accumulated ACT counters of one rank.
///
/// Counters live in [0, raammt]. A bank reaching raammt marks an RFM as
/// mandatory for its scope (the rank for RFMab, its bank-set for RFMsb);
/// the memory controller must not admit further ACTs in that scope until
/// the RFM completes.
class RaaCounters {
 public:
  RaaCounters(int banks, int banks_per_group, RfmParams params);

  /// Counts one activation. Throws SimulationError if the bank is already
  /// saturated (the controller admitted an ACT it should have stalled).
  int on_act(int bank);

  void apply_rfmab_decrement();
  void apply_ref_decrement();
  void apply_rfmsb_decrement(int bank_set);

  int counter(int bank) const { return counters_.at(static_cast<std::size_t>(bank)); }
  std::span<const int> counters() const noexcept { return counters_; }
  const RfmParams& params() const noexcept { return params_; }
  int banks() const noexcept { return static_cast<int>(counters_.size()); }

  /// True while a saturation has not yet been answered by an RFM.
  bool mandatory_pending() const noexcept;
  bool mandatory_pending_for_set(int bank_set) const;

  /// Test hook: place the counters in a given state.
  void load(std::span<const int> values);

  struct Ledger {
    std::int64_t increments = 0;
    std::int64_t decrements = 0;  ///< amount actually removed
    std::int64_t clamp_loss = 0;  ///< amount requested but clamped at 0
  };
  const Ledger& ledger(int bank) const { return ledgers_.at(static_cast<std::size_t>(bank)); }

 private:
  void decrement(int bank, int amount);

  RfmParams params_;
  int banks_per_group_;
  std::vector<int> counters_;
  std::vector<Ledger> ledgers_;
  std::vector<bool> pending_sets_;
  bool pending_rank_ = false;
};

enum class LimiterDecision { Allow, DenyUntilNextTrefi };

struct LimiterParams {
  bool enabled = false;
  /// ACTs per (core, bank) per tREFI while restricted. 0 selects the default
  /// raaimt + raaimt/2, which equals the per-tREFI decrement available from
  /// one RFMab plus one REF.
  int budget = 0;
  /// Activations are unrestricted when no RFM was issued in this many
  /// preceding tREFI intervals.
  int grace_trefis = 16;

  int resolved_budget(const RfmParams& rfm) const noexcept {
    return budget > 0 ? budget : rfm.raaimt + rfm.raaimt / 2;
  }
};

/// Per-core activation limiter for one sub-channel.
class ActivationLimiter {
 public:
  ActivationLimiter(LimiterParams params, int budget);

  LimiterDecision check(int core, int bank, std::int64_t trefi) const;
  void record_act(int core, int bank, std::int64_t trefi);
  void record_rfm(std::int64_t trefi);

  /// Restricted when an RFM was issued in the current interval or in any of
  /// the previous grace_trefis intervals.
  bool restricted(std::int64_t trefi) const noexcept;
  int budget() const noexcept { return budget_; }
  bool enabled() const noexcept { return params_.enabled; }
  int used(int core, int bank, std::int64_t trefi) const;

 private:
  LimiterParams params_;
  int budget_;
  std::optional<std::int64_t> last_rfm_trefi_;
  std::int64_t window_trefi_ = INT64_MIN;
  std::map<std::pair<int, int>, int> used_;
};

}  // namespace rfmsim
