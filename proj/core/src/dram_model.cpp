#include "rfmsim/dram_model.hpp"

#include <algorithm>
#include <string>

namespace rfmsim {

std::string_view to_string(CommandKind kind) noexcept {
  switch (kind) {
    case CommandKind::Act: return "ACT";
    case CommandKind::Ref: return "REF";
    case CommandKind::Rfmab: return "RFMAB";
    case CommandKind::Rfmsb: return "RFMSB";
  }
  return "?";
}

std::optional<CommandKind> parse_command_kind(std::string_view text) noexcept {
  if (text == "ACT") return CommandKind::Act;
  if (text == "REF") return CommandKind::Ref;
  if (text == "RFMAB") return CommandKind::Rfmab;
  if (text == "RFMSB") return CommandKind::Rfmsb;
  return std::nullopt;
}

SimTime RankState::earliest_act(int bank, SimTime t, SimTime tRC) const {
  const auto b = static_cast<std::size_t>(bank);
  return std::max({t, rank_blocked_until, bank_blocked_until[b], last_act[b] + tRC});
}

MemorySystem::MemorySystem(EventQueue& queue, TimingParams timing, RfmParams rfm, ControllerOptions options)
    : queue_(queue), timing_(timing), rfm_(rfm), options_(options) {
  timing_.validate();
  if (options_.rfm_command == RfmCommand::SameBank && !timing_.fgr_enabled) {
    throw ConfigError("controller.rfm_command: RFMsb requires FGR mode");
  }
  const auto banks = static_cast<std::size_t>(timing_.banks_per_rank);
  for (int i = 0; i < timing_.subchannels; ++i) {
    SubChannel s{RankState{}, RaaCounters(timing_.banks_per_rank, timing_.banks_per_group, rfm_),
                 ActivationLimiter(options_.limiter, options_.limiter.resolved_budget(rfm_)), PendingRfm{},
                 std::vector<PendingRfm>(static_cast<std::size_t>(timing_.banks_per_group)), 0, {}, {}, {}};
    s.rank.last_act.assign(banks, RankState::kNever);
    s.rank.bank_blocked_until.assign(banks, 0);
    subs_.push_back(std::move(s));
  }
}

MemorySystem::SubChannel& MemorySystem::sub(int subchannel) {
  if (subchannel < 0 || subchannel >= static_cast<int>(subs_.size())) {
    throw std::out_of_range("sub-channel " + std::to_string(subchannel) + " does not exist");
  }
  return subs_[static_cast<std::size_t>(subchannel)];
}

const MemorySystem::SubChannel& MemorySystem::sub(int subchannel) const {
  return const_cast<MemorySystem*>(this)->sub(subchannel);
}

std::uint64_t MemorySystem::grants(int agent) const {
  auto it = grants_.find(agent);
  return it == grants_.end() ? 0 : it->second;
}

std::uint64_t MemorySystem::denials(int agent) const {
  auto it = denials_.find(agent);
  return it == denials_.end() ? 0 : it->second;
}

void MemorySystem::record(const CommandRecord& rec) {
  auto& s = sub(rec.subchannel);
  ++s.counts[static_cast<int>(rec.kind)];
  if (rec.kind == CommandKind::Rfmab || rec.kind == CommandKind::Rfmsb) s.rfm_issues.push_back(rec.issue);
  if (options_.record_trace) trace_.push_back(rec);
}

std::uint64_t MemorySystem::command_count(CommandKind kind, int subchannel) const {
  return sub(subchannel).counts[static_cast<int>(kind)];
}

void MemorySystem::start_refresh() {
  if (auto_refresh_) return;
  auto_refresh_ = true;
  for (int sc = 0; sc < static_cast<int>(subs_.size()); ++sc) {
    auto& s = subs_[static_cast<std::size_t>(sc)];
    const std::int64_t k = s.rank.refs_issued;
    const SimTime at = std::max(queue_.now(), timing_.ref_boundary(k));
    s.pending_ref_at = at;
    queue_.schedule(at, [this, sc, k] { ref_event(sc, k); });
  }
}

SimTime MemorySystem::all_banks_free_at(const SubChannel& s) const {
  const auto& bb = s.rank.bank_blocked_until;
  return std::max(s.rank.rank_blocked_until, *std::max_element(bb.begin(), bb.end()));
}

SimTime MemorySystem::set_free_at(const SubChannel& s, int bank_set) const {
  SimTime t = s.rank.rank_blocked_until;
  for (int b = bank_set; b < timing_.banks_per_rank; b += timing_.banks_per_group) {
    t = std::max(t, s.rank.bank_blocked_until[static_cast<std::size_t>(b)]);
  }
  return t;
}

MemorySystem::PendingRfm& MemorySystem::scope_of(SubChannel& s, int bank) {
  if (options_.rfm_command == RfmCommand::AllBank) return s.rank_rfm;
  return s.set_rfm[static_cast<std::size_t>(timing_.bank_set_of(bank))];
}

void MemorySystem::request_act(const ActRequest& request, GrantCallback on_grant) {
  if (request.bank < 0 || request.bank >= timing_.banks_per_rank) {
    throw std::out_of_range("bank " + std::to_string(request.bank) + " does not exist");
  }
  sub(request.subchannel);
  attempt(request, std::move(on_grant), queue_.now());
}

void MemorySystem::attempt(const ActRequest& request, GrantCallback on_grant, SimTime requested) {
  auto& s = sub(request.subchannel);
  const SimTime now = queue_.now();
  SimTime ready = s.rank.earliest_act(request.bank, now, timing_.tRC);
  bool must_wait = ready > now;

  if (options_.rfm_enabled) {
    // A saturated counter stalls its scope until the RFM completes.
    const PendingRfm& p = scope_of(s, request.bank);
    if (p.stage != RfmStage::None) {
      ready = std::max(ready, p.wait_until);
      must_wait = true;
    }
  }

  // Decrements of a window ending now are applied before ACTs at that instant.
  if (!s.unapplied.empty() && *s.unapplied.begin() <= ready) {
    ready = std::max(ready, *s.unapplied.begin());
    must_wait = true;
  }

  if (auto_refresh_) {
    // The ACT must finish before the next REF; otherwise it goes after it.
    const SimTime due = timing_.ref_boundary(s.rank.refs_issued);
    if (ready + timing_.tRC > due) {
      ready = std::max(ready, s.pending_ref_at);
      must_wait = true;
    }
  }

  if (must_wait) {
    queue_.schedule(ready, [this, request, on_grant = std::move(on_grant), requested]() mutable {
      attempt(request, std::move(on_grant), requested);
    });
    return;
  }

  if (s.limiter.enabled()) {
    const std::int64_t trefi = timing_.trefi_index(now);
    if (s.limiter.check(request.core, request.bank, trefi) == LimiterDecision::DenyUntilNextTrefi) {
      ++denials_[request.agent];
      ++total_denials_;
      const SimTime next = timing_.ref_phase + (trefi + 1) * timing_.tREFI;
      queue_.schedule(next, [this, request, on_grant = std::move(on_grant), requested]() mutable {
        attempt(request, std::move(on_grant), requested);
      });
      return;
    }
  }

  grant(s, request, on_grant, requested);
}

void MemorySystem::grant(SubChannel& s, const ActRequest& request, const GrantCallback& on_grant,
                         SimTime requested) {
  const SimTime t = queue_.now();
  const SimTime done = t + timing_.tRC;
  s.rank.last_act[static_cast<std::size_t>(request.bank)] = t;
  ++grants_[request.agent];
  if (s.limiter.enabled()) s.limiter.record_act(request.core, request.bank, timing_.trefi_index(t));
  record(CommandRecord{CommandKind::Act, request.subchannel, request.bank, -1, t, done, request.agent});

  if (options_.rfm_enabled && s.raa.on_act(request.bank) == rfm_.raammt) {
    // RFM goes out once the saturating ACT's row cycle has finished.
    PendingRfm& p = scope_of(s, request.bank);
    p.stage = RfmStage::Scheduled;
    p.wait_until = done;
    const int sc = request.subchannel;
    const int set = options_.rfm_command == RfmCommand::AllBank ? -1 : timing_.bank_set_of(request.bank);
    const int agent = request.agent;
    queue_.schedule(done, [this, sc, set, agent] { rfm_event(sc, set, agent); });
  }

  if (on_grant) on_grant(ActGrant{requested, t, done});
}

void MemorySystem::rfm_event(int subchannel, int bank_set, int agent) {
  auto& s = sub(subchannel);
  PendingRfm& p = bank_set < 0 ? s.rank_rfm : s.set_rfm[static_cast<std::size_t>(bank_set)];
  if (p.stage != RfmStage::Scheduled) return;
  const SimTime now = queue_.now();

  // A due REF goes first; the RFM follows as soon as REF completes.
  if (auto_refresh_ && timing_.ref_boundary(s.rank.refs_issued) <= now && all_banks_free_at(s) <= now) {
    refresh_tick(subchannel, s.rank.refs_issued);
  }

  const SimTime free_at = bank_set < 0 ? all_banks_free_at(s) : set_free_at(s, bank_set);
  if (free_at > now) {
    p.wait_until = free_at;
    queue_.schedule(free_at, [this, subchannel, bank_set, agent] { rfm_event(subchannel, bank_set, agent); });
    return;
  }
  if (bank_set < 0) {
    issue_rfmab(subchannel, now, agent);
  } else {
    issue_rfmsb(subchannel, bank_set, now, agent);
  }
}

void MemorySystem::ref_event(int subchannel, std::int64_t period) {
  auto& s = sub(subchannel);
  if (s.rank.refs_issued > period) return;
  const SimTime now = queue_.now();
  const SimTime free_at = all_banks_free_at(s);
  if (free_at > now) {
    s.pending_ref_at = free_at;
    queue_.schedule(free_at, [this, subchannel, period] { ref_event(subchannel, period); });
    return;
  }
  refresh_tick(subchannel, period);
}

CommandRecord MemorySystem::refresh_tick(int subchannel, std::int64_t period) {
  auto& s = sub(subchannel);
  const SimTime at = queue_.now();
  if (at < timing_.ref_boundary(period)) {
    throw SimulationError("REF for period " + std::to_string(period) + " issued before its boundary");
  }
  if (s.rank.refs_issued != period) {
    throw SimulationError("REF periods must be served in order");
  }
  if (all_banks_free_at(s) > at) throw SimulationError("REF overlaps an active REF/RFM window");

  const CommandRecord rec{CommandKind::Ref, subchannel, -1, -1, at, at + timing_.tRFC, -1};
  record(rec);
  s.rank.rank_blocked_until = rec.completion;
  s.rank.refs_issued = period + 1;

  s.unapplied.insert(rec.completion);
  queue_.schedule(rec.completion, [this, subchannel, period] {
    auto& sc = sub(subchannel);
    sc.unapplied.erase(sc.unapplied.find(queue_.now()));
    if (options_.rfm_enabled) sc.raa.apply_ref_decrement();
    for (const auto& hook : ref_hooks_) hook(subchannel, period, sc.raa);
  });

  if (auto_refresh_) {
    const SimTime next = timing_.ref_boundary(period + 1);
    s.pending_ref_at = next;
    queue_.schedule(next, [this, subchannel, period] { ref_event(subchannel, period + 1); });
  }
  return rec;
}

CommandRecord MemorySystem::issue_rfmab(int subchannel, SimTime at, int agent) {
  auto& s = sub(subchannel);
  if (at != queue_.now()) throw SimulationError("RFMab must be issued at the current time");
  if (all_banks_free_at(s) > at) {
    throw SimulationError("RFMab at " + std::to_string(at) + " overlaps an active REF/RFM window");
  }
  const CommandRecord rec{CommandKind::Rfmab, subchannel, -1, -1, at, at + timing_.tRFC, agent};
  record(rec);
  s.rank.rank_blocked_until = rec.completion;
  s.rank_rfm.stage = RfmStage::Issued;
  s.rank_rfm.wait_until = rec.completion;
  s.limiter.record_rfm(timing_.trefi_index(at));

  s.unapplied.insert(rec.completion);
  queue_.schedule(rec.completion, [this, subchannel] {
    auto& sc = sub(subchannel);
    sc.unapplied.erase(sc.unapplied.find(queue_.now()));
    if (options_.rfm_enabled) sc.raa.apply_rfmab_decrement();
    sc.rank_rfm = PendingRfm{};
  });
  return rec;
}

CommandRecord MemorySystem::issue_rfmsb(int subchannel, int bank_set, SimTime at, int agent) {
  auto& s = sub(subchannel);
  if (!timing_.fgr_enabled) throw ConfigError("RFMsb requires FGR mode");
  if (bank_set < 0 || bank_set >= timing_.banks_per_group) {
    throw std::out_of_range("bank-set " + std::to_string(bank_set) + " does not exist");
  }
  if (at != queue_.now()) throw SimulationError("RFMsb must be issued at the current time");
  if (set_free_at(s, bank_set) > at) {
    throw SimulationError("RFMsb at " + std::to_string(at) + " overlaps an active window");
  }
  const CommandRecord rec{CommandKind::Rfmsb, subchannel, -1, bank_set, at, at + timing_.tRFCsb, agent};
  record(rec);
  for (int b = bank_set; b < timing_.banks_per_rank; b += timing_.banks_per_group) {
    s.rank.bank_blocked_until[static_cast<std::size_t>(b)] = rec.completion;
  }
  PendingRfm& p = s.set_rfm[static_cast<std::size_t>(bank_set)];
  p.stage = RfmStage::Issued;
  p.wait_until = rec.completion;
  s.limiter.record_rfm(timing_.trefi_index(at));

  s.unapplied.insert(rec.completion);
  queue_.schedule(rec.completion, [this, subchannel, bank_set] {
    auto& sc = sub(subchannel);
    sc.unapplied.erase(sc.unapplied.find(queue_.now()));
    if (options_.rfm_enabled) sc.raa.apply_rfmsb_decrement(bank_set);
    sc.set_rfm[static_cast<std::size_t>(bank_set)] = PendingRfm{};
  });
  return rec;
}

SimTime MemorySystem::admit_act(int subchannel, int bank, std::int64_t row, SimTime requested_at) {
  std::optional<SimTime> granted;
  queue_.schedule(requested_at, [this, subchannel, bank, row, &granted] {
    request_act(ActRequest{subchannel, bank, row, -1, -1}, [&granted](const ActGrant& g) { granted = g.granted; });
  });
  while (!granted) {
    if (!queue_.step()) throw SimulationError("event queue drained before ACT was granted");
  }
  return *granted;
}

}  // namespace rfmsim
