#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "rfmsim/dram_model.hpp"
#include "rfmsim/sim_core.hpp"
#include "rfmsim/timing.hpp"

namespace rfmsim {

struct SimContext {
  EventQueue& queue;
  MemorySystem& memory;
};

enum class AgentRole { Sender, Receiver, Dos, Victim, Noise };

std::string_view to_string(AgentRole role) noexcept;

/// Where an agent runs and which banks it owns.
struct AgentPlacement {
  int id = 0;
  AgentRole role = AgentRole::Noise;
  int core = 0;
  int subchannel = 0;
  std::vector<int> banks;
};

/// Enforces bank partitioning: every referenced bank exists and no two
/// agents own the same (sub-channel, bank). Throws ConfigError.
void validate_partitioning(std::span<const AgentPlacement> agents, const TimingParams& timing);

/// Round-robin row selector; consecutive requests always open a new row.
class RowCursor {
 public:
  explicit RowCursor(std::int64_t rows = 1 << 16, std::int64_t first = 0) : rows_(rows), next_(first % rows) {}

  std::int64_t next() noexcept {
    const std::int64_t row = next_;
    next_ = (next_ + 1) % rows_;
    return row;
  }

 private:
  std::int64_t rows_;
  std::int64_t next_;
};

/// Timing plan shared by the covert-channel sender and receiver.
///
/// All offsets are relative to the start of a REF period. The receiver
/// spreads raaimt/2 dependent loads over the post-REF window; the sender
/// starts its burst so that, when transmitting a 1, its RFM lands one tRC
/// before receiver load number `trigger_load`.
struct GadgetSchedule {
  SimTime period = 0;        ///< bit period (REF period)
  SimTime window_start = 0;  ///< tRFC: first instant after REF
  SimTime stall = 0;         ///< tRFC (RFMab) or tRFCsb (RFMsb)
  int receiver_loads = 0;    ///< raaimt / 2
  SimTime load_spacing = 0;  ///< issue-to-issue distance without stalls
  SimTime load_think = 0;    ///< wait after each load completes
  int trigger_load = 0;
  SimTime sender_offset = 0;
  int init_acts = 0;  ///< per period, two periods
  int one_acts = 0;   ///< raaimt + raaimt/2
  int zero_acts = 0;  ///< raaimt/2

  /// Throws ConfigError when the plan does not fit inside one bit period.
  static GadgetSchedule make(const TimingParams& timing, const RfmParams& rfm, RfmCommand command);

  /// Receiver elapsed time without and with one stall.
  SimTime baseline_elapsed(SimTime tRC) const noexcept {
    return static_cast<SimTime>(receiver_loads - 1) * load_spacing + tRC;
  }
};

struct SenderPlan {
  SimTime start_offset = 0;  ///< from the REF period start
  int acts = 0;
};

/// Covert-channel sender: bursts of row-conflicting ACTs to one bank.
class SenderAgent {
 public:
  using Done = std::function<void(SimTime last_completion)>;

  SenderAgent(SimContext ctx, AgentPlacement placement, GadgetSchedule schedule);

  /// Two periods of init_acts each, taking the counter from 0 to 2*raaimt.
  std::vector<SenderPlan> initialize_plan() const;
  /// One period: one_acts for a 1 (saturates once), zero_acts for a 0.
  SenderPlan transmit_plan(int bit) const;

  /// Runs `plan` in the period starting at period_start. Throws
  /// SimulationError if the start time has already passed.
  void run(const SenderPlan& plan, SimTime period_start, Done done);

  /// Issues `count` back-to-back ACTs to `bank` starting now.
  void burst(int bank, int count, Done done);

  const AgentPlacement& placement() const noexcept { return placement_; }
  int bank() const noexcept { return placement_.banks.front(); }

 private:
  SimContext ctx_;
  AgentPlacement placement_;
  GadgetSchedule schedule_;
  RowCursor rows_;
};

/// Covert-channel receiver: timed dependent loads to its own bank.
class ReceiverAgent {
 public:
  using Measured = std::function<void(SimTime elapsed, SimTime finished)>;

  ReceiverAgent(SimContext ctx, AgentPlacement placement, GadgetSchedule schedule);

  /// Performs receiver_loads loads starting at period_start + window_start and
  /// reports the time from the first request to the last completion.
  void measure(SimTime period_start, Measured done);

  const AgentPlacement& placement() const noexcept { return placement_; }
  int bank() const noexcept { return placement_.banks.front(); }

 private:
  void load(int index, SimTime first_request, Measured done);

  SimContext ctx_;
  AgentPlacement placement_;
  GadgetSchedule schedule_;
  RowCursor rows_;
};

/// Denial-of-service pattern: back-to-back ACTs to one bank, forever.
class DosAgent {
 public:
  DosAgent(SimContext ctx, AgentPlacement placement);
  void start(SimTime at);

  /// Issues the next-row ACT; re-arms itself on completion.
  void step();

 private:
  SimContext ctx_;
  AgentPlacement placement_;
  RowCursor rows_;
};

/// Closed-loop victim: one outstanding ACT, round-robin over its banks,
/// think_time between a completion and the next request.
class VictimAgent {
 public:
  VictimAgent(SimContext ctx, AgentPlacement placement, SimTime think_time);
  void start(SimTime at);
  void step();

  /// Completed ACTs whose completion lies in [from, to).
  std::uint64_t completed_between(SimTime from, SimTime to) const;
  std::uint64_t completed() const noexcept { return completions_.size(); }

 private:
  SimContext ctx_;
  AgentPlacement placement_;
  SimTime think_;
  std::size_t next_bank_ = 0;
  RowCursor rows_;
  std::vector<SimTime> completions_;
};

/// Window with a different ACT probability, e.g. a burst of heavy traffic.
struct NoiseBurst {
  SimTime start = 0;
  SimTime end = 0;
  double rate = 1.0;
};

/// On/off modulation of a noise source: time is cut into windows of
/// `window` ns, each active with probability `duty`. window = 0 disables it.
struct NoisePhases {
  SimTime window = 0;
  double duty = 1.0;
};

/// Memoryless background traffic. Every tRC slot, each of its banks
/// independently requests an ACT with probability `rate` (or the rate of a
/// burst covering the slot), unless that bank still has one outstanding.
/// Draws happen every slot regardless of memory state, so the arrival
/// process depends only on the seed.
class NoiseAgent {
 public:
  NoiseAgent(SimContext ctx, AgentPlacement placement, double rate, std::uint64_t seed,
             std::vector<NoiseBurst> bursts = {}, NoisePhases phases = {});
  void start(SimTime at);
  void step();

  std::uint64_t issued() const noexcept { return issued_; }
  std::uint64_t dropped() const noexcept { return dropped_; }

  /// Per-bank probability per tRC slot giving `acts_per_trefi` ACTs per
  /// tREFI on each bank.
  static double rate_for(double acts_per_trefi, const TimingParams& timing) noexcept;

 private:
  double rate_at(SimTime t) const noexcept;

  SimContext ctx_;
  AgentPlacement placement_;
  double rate_;
  Rng rng_;
  std::vector<NoiseBurst> bursts_;
  NoisePhases phases_;
  std::int64_t window_ = -1;
  bool active_ = true;
  std::vector<RowCursor> rows_;
  std::vector<SimTime> busy_until_;
  std::uint64_t issued_ = 0;
  std::uint64_t dropped_ = 0;
};

}  // namespace rfmsim
