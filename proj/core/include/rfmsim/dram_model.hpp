#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rfmsim/rfm_engine.hpp"
#include "rfmsim/sim_core.hpp"
#include "rfmsim/timing.hpp"

namespace rfmsim {

enum class CommandKind { Act, Ref, Rfmab, Rfmsb };

std::string_view to_string(CommandKind kind) noexcept;
std::optional<CommandKind> parse_command_kind(std::string_view text) noexcept;

/// One command on the DRAM bus. bank is set for ACT, bank_set for RFMSB;
/// unused ids are -1. agent is the requester of an ACT, or the agent whose
/// ACT saturated a counter for an RFM; REF has no agent.
struct CommandRecord {
  CommandKind kind = CommandKind::Act;
  int subchannel = 0;
  int bank = -1;
  int bank_set = -1;
  SimTime issue = 0;
  SimTime completion = 0;
  int agent = -1;

  bool operator==(const CommandRecord&) const = default;
};

/// Which RFM flavour the controller issues when a counter saturates.
enum class RfmCommand { AllBank, SameBank };

struct ControllerOptions {
  bool rfm_enabled = true;
  RfmCommand rfm_command = RfmCommand::AllBank;
  LimiterParams limiter;
  bool record_trace = true;
};

/// Blocking state of the single rank on a sub-channel.
struct RankState {
  std::vector<SimTime> last_act;           ///< kNever until the first ACT
  std::vector<SimTime> bank_blocked_until; ///< RFMsb windows
  SimTime rank_blocked_until = 0;          ///< REF and RFMab windows
  std::int64_t refs_issued = 0;            ///< REF periods already served

  static constexpr SimTime kNever = INT64_MIN / 4;

  /// Earliest time >= t satisfying the rank window, the bank window and tRC.
  SimTime earliest_act(int bank, SimTime t, SimTime tRC) const;
};

struct ActRequest {
  int subchannel = 0;
  int bank = 0;
  std::int64_t row = 0;
  int agent = -1;
  int core = -1;
};

struct ActGrant {
  SimTime requested = 0;
  SimTime granted = 0;
  SimTime completion = 0;
};

/// ACT admission for every sub-channel of one channel, with automatic
/// refresh and mandatory RFM scheduling.
///
/// Sub-channels share the clock but nothing else: each has its own rank
/// state, RAA counters and limiter.
class MemorySystem {
 public:
  using GrantCallback = std::function<void(const ActGrant&)>;
  using RefHook = std::function<void(int subchannel, std::int64_t period, const RaaCounters&)>;

  MemorySystem(EventQueue& queue, TimingParams timing, RfmParams rfm, ControllerOptions options = {});

  MemorySystem(const MemorySystem&) = delete;
  MemorySystem& operator=(const MemorySystem&) = delete;

  /// Schedules the periodic REF stream on every sub-channel.
  void start_refresh();

  /// Queues an ACT request at the current time. The callback runs when the
  /// ACT is granted; requests are delayed, never dropped.
  void request_act(const ActRequest& request, GrantCallback on_grant);

  /// Synchronous convenience for single-requester scenarios: submits an ACT
  /// at requested_at and runs the event loop until it is granted.
  SimTime admit_act(int subchannel, int bank, std::int64_t row, SimTime requested_at);

  /// Issues REF for period `period` at the current time.
  CommandRecord refresh_tick(int subchannel, std::int64_t period);

  /// Issues an RFMab at `at`, which must be the current time.
  CommandRecord issue_rfmab(int subchannel, SimTime at, int agent = -1);

  /// Issues an RFMsb to one bank-set at `at` (current time). FGR only.
  CommandRecord issue_rfmsb(int subchannel, int bank_set, SimTime at, int agent = -1);

  /// Called after each REF decrement (on REF completion).
  void on_ref_complete(RefHook hook) { ref_hooks_.push_back(std::move(hook)); }

  const TimingParams& timing() const noexcept { return timing_; }
  const RfmParams& rfm() const noexcept { return rfm_; }
  const ControllerOptions& options() const noexcept { return options_; }
  EventQueue& queue() noexcept { return queue_; }

  const RankState& rank(int subchannel) const { return sub(subchannel).rank; }
  const RaaCounters& counters(int subchannel) const { return sub(subchannel).raa; }
  RaaCounters& counters(int subchannel) { return sub(subchannel).raa; }
  const ActivationLimiter& limiter(int subchannel) const { return sub(subchannel).limiter; }

  std::span<const CommandRecord> trace() const noexcept { return trace_; }
  std::uint64_t grants(int agent) const;
  std::uint64_t denials(int agent) const;
  std::uint64_t total_denials() const noexcept { return total_denials_; }

  /// Commands of one kind issued so far, recorded or not.
  std::uint64_t command_count(CommandKind kind, int subchannel) const;
  /// Issue times of every RFMab/RFMsb on a sub-channel.
  std::span<const SimTime> rfm_issue_times(int subchannel) const { return sub(subchannel).rfm_issues; }

 private:
  enum class RfmStage { None, Scheduled, Issued };
  struct PendingRfm {
    RfmStage stage = RfmStage::None;
    SimTime wait_until = 0;  ///< scheduled issue time, then completion time
  };
  struct SubChannel {
    RankState rank;
    RaaCounters raa;
    ActivationLimiter limiter;
    PendingRfm rank_rfm;                 ///< RFMab scope
    std::vector<PendingRfm> set_rfm;     ///< RFMsb scope, per bank-set
    SimTime pending_ref_at = 0;
    std::uint64_t counts[4] = {0, 0, 0, 0};
    std::vector<SimTime> rfm_issues;
    std::multiset<SimTime> unapplied;    ///< REF/RFM completions not yet processed
  };

  SubChannel& sub(int subchannel);
  const SubChannel& sub(int subchannel) const;

  void attempt(const ActRequest& request, GrantCallback on_grant, SimTime requested);
  void grant(SubChannel& s, const ActRequest& request, const GrantCallback& on_grant, SimTime requested);
  PendingRfm& scope_of(SubChannel& s, int bank);
  void rfm_event(int subchannel, int bank_set, int agent);
  void ref_event(int subchannel, std::int64_t period);
  SimTime all_banks_free_at(const SubChannel& s) const;
  SimTime set_free_at(const SubChannel& s, int bank_set) const;
  void record(const CommandRecord& rec);

  EventQueue& queue_;
  TimingParams timing_;
  RfmParams rfm_;
  ControllerOptions options_;
  bool auto_refresh_ = false;
  std::vector<SubChannel> subs_;
  std::vector<CommandRecord> trace_;
  std::vector<RefHook> ref_hooks_;
  std::map<int, std::uint64_t> grants_;
  std::map<int, std::uint64_t> denials_;
  std::uint64_t total_denials_ = 0;
};

}  // namespace rfmsim
