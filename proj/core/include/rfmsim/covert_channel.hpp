#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfmsim/agents.hpp"
#include "rfmsim/dram_model.hpp"
#include "rfmsim/timing.hpp"

namespace rfmsim {

/// Raised when refresh probing cannot find a REF.
class SyncError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the preamble clusters are too close to separate.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ChannelMode { Rfmab, Rfmsb };

std::string_view to_string(ChannelMode mode) noexcept;

/// Finds the REF phase by timing back-to-back ACTs to one bank.
///
/// The probe alternates between two rows, one ACT every (1 + kThink) * tRC,
/// and watches consecutive completions; a gap above tRC + tRFC/2 is a
/// stall. The spacing is short enough that every REF delays some ACT. A stall ending at g
/// puts the boundary at g - tRFC (lone REF, or RFM then REF) or at
/// g - 2*tRFC (REF with an RFM queued behind it). A boundary is accepted
/// once a stall one REF period later fits the same hypothesis, so RFM
/// stalls from other traffic are filtered out.
class RefProbe {
 public:
  using Found = std::function<void(SimTime phase)>;
  using Failed = std::function<void(const std::string& why)>;

  RefProbe(SimContext ctx, AgentPlacement placement, int bank);

  /// Starts probing at the current time.
  void run(Found found, Failed failed);

  int attempts() const noexcept { return attempts_; }
  std::uint64_t acts() const noexcept { return acts_; }

  static constexpr int kMaxAttempts = 12;
  static constexpr int kThink = 3;  ///< idle tRCs between probe ACTs

 private:
  void scan(SimTime deadline);
  void stalled(SimTime granted, SimTime completion, SimTime deadline);
  void window_closed();
  void confirm_window();
  void retry(const std::string& why);

  SimContext ctx_;
  AgentPlacement placement_;
  int bank_;
  std::int64_t row_ = 0;
  Found found_;
  Failed failed_;
  SimTime last_completion_ = 0;
  bool have_last_ = false;
  bool confirming_ = false;
  std::vector<SimTime> expected_;  ///< boundaries awaited in this window
  std::vector<SimTime> next_;      ///< hypotheses for the following window
  int attempts_ = 0;
  std::uint64_t acts_ = 0;
};

/// Probes a quiet sub-channel whose REF stream has the given phase and
/// returns the recovered phase in [0, ref_period()).
SimTime synchronize_to_ref(const TimingParams& timing, SimTime probe_start = 0, int bank = 0);

struct Calibration {
  double zero_mean = 0;
  double one_mean = 0;
  double threshold = 0;
};

/// Midpoint of the mean '0' and mean '1' elapsed times. Throws
/// CalibrationError if a class is missing or the means are closer than
/// min_separation.
Calibration calibrate_threshold(std::span<const int> bits, std::span<const SimTime> elapsed,
                                double min_separation);

/// 1 iff elapsed strictly exceeds the threshold.
inline int decode_bit(double elapsed, double threshold) noexcept { return elapsed > threshold ? 1 : 0; }

struct NoiseSource {
  std::vector<int> banks;
  double rate = 0;  ///< ACT probability per tRC slot
  std::vector<NoiseBurst> bursts;
  NoisePhases phases;
};

struct NoiseConfig {
  std::vector<NoiseSource> sources;
  std::uint64_t seed = 1;

  bool empty() const noexcept { return sources.empty(); }
};

struct ChannelConfig {
  ChannelMode mode = ChannelMode::Rfmab;
  TimingParams timing;
  RfmParams rfm;
  ControllerOptions controller;
  int subchannel = 0;
  int receiver_bank = 0;
  int sender_bank = 4;
  int sender_sync_bank = 9;     ///< sender probes here during resync
  int receiver_sync_bank = 14;  ///< receiver probes here
  int preamble_bits = 16;
  int resync_interval = 0;   ///< bits between resyncs, 0 = never
  /// Idle periods per resync, followed by a two-period re-initialization.
  /// 0 picks the number of REFs that drain a full counter plus two periods
  /// of slack for the probe.
  int resync_periods = 0;
  /// false keeps the resync gaps and re-initialization but skips the REF
  /// re-probe, so the slot layout matches a resyncing run.
  bool resync_probe = true;
  bool resync_reinit = true;
  bool sync_shortcut = true; ///< start with known REF phase
  std::optional<double> threshold;  ///< skip calibration when set
  bool allow_foreign_bank_set = false;

  /// Bit period: tREFI, or tREFI/2 with FGR.
  SimTime bit_period() const noexcept { return timing.ref_period(); }
  int drain_periods() const noexcept {
    return resync_periods > 0 ? resync_periods : (rfm.raammt + rfm.ref_decrement - 1) / rfm.ref_decrement + 2;
  }
  RfmCommand rfm_command() const noexcept {
    return mode == ChannelMode::Rfmab ? RfmCommand::AllBank : RfmCommand::SameBank;
  }

  void validate() const;
};

/// Bytes per second for one bit per `period` ns.
double raw_bandwidth(SimTime period) noexcept;

struct ChannelReport {
  ChannelMode mode = ChannelMode::Rfmab;
  std::uint64_t bits_sent = 0;
  std::uint64_t bits_correct = 0;
  double accuracy = 0;
  double raw_bandwidth = 0;        ///< B/s, one sub-channel
  double raw_bandwidth_total = 0;  ///< B/s, all sub-channels
  double effective_bandwidth = 0;  ///< B/s, one sub-channel incl. preamble-free resync overhead
  SimTime bit_period = 0;
  double threshold = 0;
  bool calibration_fallback = false;
  double zero_mean = 0;
  double one_mean = 0;
  SimTime min_one = 0;   ///< noiseless separation check, message bits
  SimTime max_zero = 0;
  std::vector<SimTime> elapsed;          ///< per message bit
  std::vector<SimTime> preamble_elapsed;
  std::vector<int> decoded;
  std::vector<int> sender_counter;  ///< sender-bank RAA value after each REF
  std::uint64_t resyncs = 0;
  std::uint64_t sender_slips = 0;
  std::uint64_t receiver_slips = 0;
  std::uint64_t rfm_commands = 0;
  std::uint64_t ref_commands = 0;
  std::uint64_t noise_acts = 0;
  SimTime phase = 0;
  SimTime end_time = 0;
  GadgetSchedule schedule;
  std::vector<CommandRecord> trace;  ///< empty unless recorded
};

ChannelReport run_channel(const ChannelConfig& config, std::span<const int> message,
                          const NoiseConfig& noise = {});

/// run_channel with RFMsb mode and FGR forced on.
ChannelReport run_channel_rfmsb(ChannelConfig config, std::span<const int> message,
                                const NoiseConfig& noise = {});

/// Deterministic pseudo-random message.
std::vector<int> random_message(std::size_t bits, std::uint64_t seed);
std::vector<int> alternating_message(std::size_t bits, int first = 0);

}  // namespace rfmsim
