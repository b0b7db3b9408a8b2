#include "rfmsim/covert_channel.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

namespace rfmsim {

std::string_view to_string(ChannelMode mode) noexcept {
  return mode == ChannelMode::Rfmab ? "RFMAB" : "RFMSB";
}

RefProbe::RefProbe(SimContext ctx, AgentPlacement placement, int bank)
    : ctx_(ctx), placement_(std::move(placement)), bank_(bank) {}

void RefProbe::run(Found found, Failed failed) {
  found_ = std::move(found);
  failed_ = std::move(failed);
  attempts_ = 0;
  confirming_ = false;
  expected_.clear();
  next_.clear();
  have_last_ = false;
  scan(ctx_.queue.now() + 2 * ctx_.memory.timing().ref_period());
}

void RefProbe::scan(SimTime deadline) {
  if (ctx_.queue.now() > deadline) {
    window_closed();
    return;
  }
  row_ ^= 1;
  ActRequest req{placement_.subchannel, bank_, row_, placement_.id, placement_.core};
  ctx_.memory.request_act(req, [this, deadline](const ActGrant& g) {
    ++acts_;
    const auto& t = ctx_.memory.timing();
    if (have_last_ && g.completion - last_completion_ > t.tRC + t.tRFC / 2) {
      stalled(g.granted, g.completion, deadline);
      return;
    }
    have_last_ = true;
    last_completion_ = g.completion;
    ctx_.queue.schedule(g.completion + kThink * t.tRC, [this, deadline] { scan(deadline); });
  });
}

void RefProbe::stalled(SimTime granted, SimTime completion, SimTime deadline) {
  const auto& t = ctx_.memory.timing();
  const SimTime period = t.ref_period();
  const SimTime hyp[2] = {granted - t.tRFC, granted - 2 * t.tRFC};

  for (SimTime e : expected_) {
    for (SimTime h : hyp) {
      if (std::abs(h - e) > t.tRC) continue;
      const SimTime phase = (e % period + period) % period;
      confirming_ = false;
      ctx_.queue.schedule(completion, [this, phase] { found_(phase); });
      return;
    }
  }
  for (SimTime h : hyp) next_.push_back(h + period);

  if (!confirming_) {
    // First stall: jump ahead to where its REF should recur.
    window_closed();
    return;
  }
  have_last_ = true;
  last_completion_ = completion;
  ctx_.queue.schedule(completion + kThink * t.tRC, [this, deadline] { scan(deadline); });
}

void RefProbe::window_closed() {
  if (confirming_ || next_.empty()) {
    if (++attempts_ >= kMaxAttempts) {
      failed_("refresh synchronization failed after " + std::to_string(attempts_) + " windows: " +
              (next_.empty() ? "no REF-sized stall observed" : "REF not confirmed one period later"));
      return;
    }
  }
  if (next_.empty()) {
    retry("no stall");
    return;
  }
  confirm_window();
}

void RefProbe::confirm_window() {
  const auto& t = ctx_.memory.timing();
  expected_ = std::move(next_);
  next_.clear();
  confirming_ = true;
  have_last_ = false;
  const auto [lo, hi] = std::minmax_element(expected_.begin(), expected_.end());
  const SimTime resume = std::max(ctx_.queue.now(), *lo - 4 * t.tRC);
  const SimTime until = *hi + 2 * t.tRFC + 3 * t.tRC;
  ctx_.queue.schedule(resume, [this, until] { scan(until); });
}

void RefProbe::retry(const std::string&) {
  confirming_ = false;
  expected_.clear();
  have_last_ = false;
  scan(ctx_.queue.now() + 2 * ctx_.memory.timing().ref_period());
}

SimTime synchronize_to_ref(const TimingParams& timing, SimTime probe_start, int bank) {
  EventQueue queue;
  ControllerOptions opts;
  opts.record_trace = false;
  MemorySystem memory(queue, timing, RfmParams{}, opts);
  memory.start_refresh();
  RefProbe probe({queue, memory}, AgentPlacement{0, AgentRole::Receiver, 0, 0, {bank}}, bank);
  std::optional<SimTime> phase;
  std::optional<std::string> error;
  queue.schedule(probe_start, [&] {
    probe.run([&](SimTime p) { phase = p; }, [&](const std::string& why) { error = why; });
  });
  while (!phase && !error && queue.step()) {
  }
  if (error) throw SyncError(*error);
  if (!phase) throw SyncError("refresh synchronization: event queue drained");
  return *phase;
}

Calibration calibrate_threshold(std::span<const int> bits, std::span<const SimTime> elapsed,
                                double min_separation) {
  if (bits.size() != elapsed.size()) throw CalibrationError("calibration: bits and samples differ in length");
  double sum[2] = {0, 0};
  std::size_t n[2] = {0, 0};
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const int b = bits[i] ? 1 : 0;
    sum[b] += static_cast<double>(elapsed[i]);
    ++n[b];
  }
  if (n[0] == 0 || n[1] == 0) throw CalibrationError("calibration: preamble must contain both bit values");
  Calibration c;
  c.zero_mean = sum[0] / static_cast<double>(n[0]);
  c.one_mean = sum[1] / static_cast<double>(n[1]);
  c.threshold = (c.zero_mean + c.one_mean) / 2.0;
  if (c.one_mean - c.zero_mean < min_separation)
    throw CalibrationError("calibration: clusters separated by " + std::to_string(c.one_mean - c.zero_mean) +
                           " ns, need " + std::to_string(min_separation));
  return c;
}

double raw_bandwidth(SimTime period) noexcept { return 1e9 / (8.0 * static_cast<double>(period)); }

std::vector<int> random_message(std::size_t bits, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> out(bits);
  for (auto& b : out) b = static_cast<int>(rng.next() >> 63);
  return out;
}

std::vector<int> alternating_message(std::size_t bits, int first) {
  std::vector<int> out(bits);
  for (std::size_t i = 0; i < bits; ++i) out[i] = static_cast<int>((i + static_cast<std::size_t>(first)) & 1);
  return out;
}

void ChannelConfig::validate() const {
  timing.validate();
  rfm.validate();
  if (mode == ChannelMode::Rfmsb && !timing.fgr_enabled)
    throw ConfigError("channel.mode RFMSB requires timing.fgr_enabled");
  auto check_bank = [&](int b, const char* field) {
    if (b < 0 || b >= timing.banks_per_rank) throw ConfigError(std::string("channel.") + field + " out of range");
  };
  check_bank(receiver_bank, "receiver_bank");
  check_bank(sender_bank, "sender_bank");
  check_bank(sender_sync_bank, "sender_sync_bank");
  check_bank(receiver_sync_bank, "receiver_sync_bank");
  if (subchannel < 0 || subchannel >= timing.subchannels) throw ConfigError("channel.subchannel out of range");
  const int used[] = {receiver_bank, sender_bank, sender_sync_bank, receiver_sync_bank};
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (used[i] == used[j]) throw ConfigError("channel: receiver, sender and sync banks must all differ");
  if (mode == ChannelMode::Rfmsb && !allow_foreign_bank_set &&
      timing.bank_set_of(receiver_bank) != timing.bank_set_of(sender_bank))
    throw ConfigError("channel: in RFMSB mode receiver_bank must share a bank-set with sender_bank");
  if (preamble_bits < 2) throw ConfigError("channel.preamble_bits must be >= 2");
  if (resync_interval < 0) throw ConfigError("channel.resync_interval must be >= 0");
  if (resync_periods != 0 && resync_periods < 2) throw ConfigError("channel.resync_periods must be 0 (auto) or >= 2");
  if (!controller.rfm_enabled) throw ConfigError("channel: RFM must be enabled");
  (void)GadgetSchedule::make(timing, rfm, rfm_command());
}

}  // namespace rfmsim

namespace rfmsim {
namespace {

struct Slot {
  enum Kind { Init, Preamble, Message, Resync } kind;
  std::int64_t period;  ///< first REF period of the slot
  int bit = 0;
  std::size_t index = 0;
};

// Each side walks the same slot list on its own clock. A side that reaches
// a slot after its start time slips to the next period; a resync probes the
// REF stream again and clears the slip.
struct Track {
  SimTime phase = 0;
  std::int64_t slip = 0;
  std::size_t next = 0;
  bool done = false;
  std::uint64_t slips = 0;
  std::uint64_t dropped_inits = 0;
};

class Session {
 public:
  Session(const ChannelConfig& cfg, std::span<const int> message, const NoiseConfig& noise)
      : cfg_(cfg), message_(message.begin(), message.end()) {
    cfg_.validate();
    schedule_ = GadgetSchedule::make(cfg_.timing, cfg_.rfm, cfg_.rfm_command());
    ControllerOptions opts = cfg_.controller;
    opts.rfm_command = cfg_.rfm_command();
    memory_ = std::make_unique<MemorySystem>(queue_, cfg_.timing, cfg_.rfm, opts);
    SimContext ctx{queue_, *memory_};

    const int sc = cfg_.subchannel;
    std::vector<AgentPlacement> placements{
        {0, AgentRole::Sender, 0, sc, {cfg_.sender_bank, cfg_.sender_sync_bank}},
        {1, AgentRole::Receiver, 1, sc, {cfg_.receiver_bank, cfg_.receiver_sync_bank}}};
    for (std::size_t i = 0; i < noise.sources.size(); ++i) {
      const int id = 2 + static_cast<int>(i);
      placements.push_back({id, AgentRole::Noise, id, sc, noise.sources[i].banks});
    }
    validate_partitioning(placements, cfg_.timing);

    sender_ = std::make_unique<SenderAgent>(ctx, placements[0], schedule_);
    receiver_ = std::make_unique<ReceiverAgent>(ctx, placements[1], schedule_);
    sender_probe_ = std::make_unique<RefProbe>(ctx, placements[0], cfg_.sender_sync_bank);
    receiver_probe_ = std::make_unique<RefProbe>(ctx, placements[1], cfg_.receiver_sync_bank);
    for (std::size_t i = 0; i < noise.sources.size(); ++i) {
      const auto& src = noise.sources[i];
      noise_.push_back(std::make_unique<NoiseAgent>(ctx, placements[2 + i], src.rate,
                                                    derive_seed(noise.seed, i), src.bursts, src.phases));
    }

    memory_->on_ref_complete([this](int sub, std::int64_t, const RaaCounters& raa) {
      if (sub == cfg_.subchannel && !(sender_track_.done && receiver_track_.done))
        counter_trace_.push_back(raa.counter(cfg_.sender_bank));
    });
  }

  ChannelReport run();

 private:
  SimTime period() const noexcept { return schedule_.period; }
  SimTime slot_start(const Track& t, std::int64_t p) const { return t.phase + (p + t.slip) * period(); }

  void build_slots(std::int64_t first);
  void sender_next();
  void receiver_next();
  void sender_resync(const Slot& slot);
  void receiver_resync(const Slot& slot);
  void fail(const std::string& why) {
    if (!error_) error_ = why;
  }

  ChannelConfig cfg_;
  std::vector<int> message_;
  std::vector<int> preamble_;
  GadgetSchedule schedule_;
  EventQueue queue_;
  std::unique_ptr<MemorySystem> memory_;
  std::unique_ptr<SenderAgent> sender_;
  std::unique_ptr<ReceiverAgent> receiver_;
  std::unique_ptr<RefProbe> sender_probe_;
  std::unique_ptr<RefProbe> receiver_probe_;
  std::vector<std::unique_ptr<NoiseAgent>> noise_;
  std::vector<Slot> slots_;
  Track sender_track_;
  Track receiver_track_;
  std::vector<SimTime> preamble_elapsed_;
  std::vector<SimTime> message_elapsed_;
  std::vector<int> counter_trace_;
  std::uint64_t resyncs_ = 0;
  std::optional<std::string> error_;
};

void Session::build_slots(std::int64_t first) {
  preamble_ = alternating_message(static_cast<std::size_t>(cfg_.preamble_bits), 0);
  std::int64_t p = first;
  slots_.push_back({Slot::Init, p++});
  slots_.push_back({Slot::Init, p++});
  for (std::size_t i = 0; i < preamble_.size(); ++i) slots_.push_back({Slot::Preamble, p++, preamble_[i], i});
  for (std::size_t i = 0; i < message_.size(); ++i) {
    if (cfg_.resync_interval > 0 && i > 0 && i % static_cast<std::size_t>(cfg_.resync_interval) == 0) {
      // Probe while the sender bank drains to zero, then re-initialize.
      slots_.push_back({Slot::Resync, p, 0, i});
      p += cfg_.drain_periods();
      if (cfg_.resync_reinit) {
        slots_.push_back({Slot::Init, p++});
        slots_.push_back({Slot::Init, p++});
      }
    }
    slots_.push_back({Slot::Message, p++, message_[i] ? 1 : 0, i});
  }
  preamble_elapsed_.assign(preamble_.size(), 0);
  message_elapsed_.assign(message_.size(), 0);
}

void Session::sender_next() {
  auto& tr = sender_track_;
  if (error_) return;
  if (tr.next == slots_.size()) {
    tr.done = true;
    return;
  }
  const Slot slot = slots_[tr.next++];
  if (slot.kind == Slot::Resync) {
    sender_resync(slot);
    return;
  }
  const SenderPlan plan = slot.kind == Slot::Init ? sender_->initialize_plan()[0] : sender_->transmit_plan(slot.bit);
  SimTime start = slot_start(tr, slot.period);
  if (slot.kind == Slot::Init && start + plan.start_offset < queue_.now()) {
    // Init slots carry no data; a late one is dropped instead of slipping.
    ++tr.dropped_inits;
    sender_next();
    return;
  }
  while (start + plan.start_offset < queue_.now()) {
    ++tr.slip;
    ++tr.slips;
    start += period();
  }
  sender_->run(plan, start, [this](SimTime) { sender_next(); });
}

void Session::sender_resync(const Slot& slot) {
  // The transmit bank idles through the drain periods; the probe runs on the
  // sync bank so the drain is not disturbed.
  if (!cfg_.resync_probe) {
    sender_next();
    return;
  }
  const SimTime base = slot_start(sender_track_, slot.period);
  const SimTime probe_at = std::max(queue_.now(), base + cfg_.timing.tRFC);
  queue_.schedule(probe_at, [this] {
    sender_probe_->run(
        [this](SimTime p) {
          sender_track_.phase = p;
          sender_track_.slip = 0;
          sender_next();
        },
        [this](const std::string& why) { fail("sender: " + why); });
  });
}

void Session::receiver_next() {
  auto& tr = receiver_track_;
  if (error_) return;
  while (tr.next < slots_.size() && slots_[tr.next].kind == Slot::Init) ++tr.next;
  if (tr.next == slots_.size()) {
    tr.done = true;
    return;
  }
  const Slot slot = slots_[tr.next++];
  if (slot.kind == Slot::Resync) {
    receiver_resync(slot);
    return;
  }
  SimTime start = slot_start(tr, slot.period);
  while (start + schedule_.window_start < queue_.now()) {
    ++tr.slip;
    ++tr.slips;
    start += period();
  }
  receiver_->measure(start, [this, slot](SimTime elapsed, SimTime) {
    (slot.kind == Slot::Preamble ? preamble_elapsed_ : message_elapsed_)[slot.index] = elapsed;
    receiver_next();
  });
}

void Session::receiver_resync(const Slot& slot) {
  ++resyncs_;
  if (!cfg_.resync_probe) {
    receiver_next();
    return;
  }
  const SimTime base = slot_start(receiver_track_, slot.period);
  const SimTime probe_at = std::max(queue_.now(), base + cfg_.timing.tRFC);
  queue_.schedule(probe_at, [this] {
    receiver_probe_->run(
        [this](SimTime p) {
          receiver_track_.phase = p;
          receiver_track_.slip = 0;
          receiver_next();
        },
        [this](const std::string& why) { fail("receiver: " + why); });
  });
}

ChannelReport Session::run() {
  memory_->start_refresh();
  for (auto& n : noise_) n->start(0);

  std::int64_t first = 0;
  if (cfg_.sync_shortcut) {
    sender_track_.phase = receiver_track_.phase = cfg_.timing.ref_phase;
    build_slots(0);
    sender_next();
    receiver_next();
  } else {
    // Both sides probe from t=0; slots begin once both can have finished.
    first = 3;
    build_slots(first);
    sender_probe_->run(
        [this](SimTime p) {
          sender_track_.phase = p;
          sender_next();
        },
        [this](const std::string& why) { fail("sender: " + why); });
    receiver_probe_->run(
        [this](SimTime p) {
          receiver_track_.phase = p;
          receiver_next();
        },
        [this](const std::string& why) { fail("receiver: " + why); });
  }

  const SimTime cap =
      cfg_.timing.ref_phase +
      (slots_.back().period + static_cast<std::int64_t>(slots_.size()) + 16) * period();
  while (!error_ && !(sender_track_.done && receiver_track_.done)) {
    if (!queue_.step()) throw SimulationError("channel: event queue drained before the protocol finished");
    if (queue_.now() > cap) throw SimulationError("channel: protocol did not finish in time");
  }
  if (error_) throw SyncError(*error_);

  ChannelReport r;
  r.mode = cfg_.mode;
  r.schedule = schedule_;
  r.bit_period = period();
  r.phase = sender_track_.phase;
  r.end_time = queue_.now();
  r.preamble_elapsed = preamble_elapsed_;
  r.elapsed = message_elapsed_;
  r.sender_counter = counter_trace_;
  r.resyncs = resyncs_;
  r.sender_slips = sender_track_.slips;
  r.receiver_slips = receiver_track_.slips;

  if (cfg_.threshold) {
    r.threshold = *cfg_.threshold;
  } else {
    try {
      const auto c = calibrate_threshold(preamble_, preamble_elapsed_, static_cast<double>(schedule_.stall) / 2.0);
      r.threshold = c.threshold;
      r.zero_mean = c.zero_mean;
      r.one_mean = c.one_mean;
    } catch (const CalibrationError&) {
      r.calibration_fallback = true;
      r.threshold = static_cast<double>(schedule_.baseline_elapsed(cfg_.timing.tRC)) +
                    static_cast<double>(schedule_.stall - cfg_.timing.tRC) / 2.0;
    }
  }

  r.bits_sent = message_.size();
  r.decoded.reserve(message_.size());
  SimTime min_one = INT64_MAX, max_zero = 0;
  for (std::size_t i = 0; i < message_.size(); ++i) {
    const int d = decode_bit(static_cast<double>(message_elapsed_[i]), r.threshold);
    r.decoded.push_back(d);
    if (d == (message_[i] ? 1 : 0)) ++r.bits_correct;
    if (message_[i]) min_one = std::min(min_one, message_elapsed_[i]);
    else max_zero = std::max(max_zero, message_elapsed_[i]);
  }
  r.min_one = min_one == INT64_MAX ? 0 : min_one;
  r.max_zero = max_zero;
  r.accuracy = r.bits_sent ? static_cast<double>(r.bits_correct) / static_cast<double>(r.bits_sent) : 0.0;

  r.raw_bandwidth = raw_bandwidth(period());
  r.raw_bandwidth_total = r.raw_bandwidth * cfg_.timing.subchannels;
  const double bits = static_cast<double>(r.bits_sent);
  const double periods = bits + static_cast<double>(resyncs_) * (cfg_.drain_periods() + 2);
  r.effective_bandwidth = periods > 0 ? r.raw_bandwidth * bits / periods : 0.0;

  const int sc = cfg_.subchannel;
  r.rfm_commands = memory_->command_count(CommandKind::Rfmab, sc) + memory_->command_count(CommandKind::Rfmsb, sc);
  r.ref_commands = memory_->command_count(CommandKind::Ref, sc);
  for (const auto& n : noise_) r.noise_acts += n->issued();
  if (cfg_.controller.record_trace) r.trace.assign(memory_->trace().begin(), memory_->trace().end());
  return r;
}

}  // namespace

ChannelReport run_channel(const ChannelConfig& config, std::span<const int> message, const NoiseConfig& noise) {
  Session session(config, message, noise);
  return session.run();
}

ChannelReport run_channel_rfmsb(ChannelConfig config, std::span<const int> message, const NoiseConfig& noise) {
  config.mode = ChannelMode::Rfmsb;
  config.timing.fgr_enabled = true;
  return run_channel(config, message, noise);
}

}  // namespace rfmsim
