#include "rfmsim/agents.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>

namespace rfmsim {

std::string_view to_string(AgentRole role) noexcept {
  switch (role) {
    case AgentRole::Sender: return "sender";
    case AgentRole::Receiver: return "receiver";
    case AgentRole::Dos: return "dos";
    case AgentRole::Victim: return "victim";
    case AgentRole::Noise: return "noise";
  }
  return "?";
}

void validate_partitioning(std::span<const AgentPlacement> agents, const TimingParams& timing) {
  std::map<std::pair<int, int>, int> owner;
  std::set<int> ids;
  for (const auto& a : agents) {
    if (!ids.insert(a.id).second) throw ConfigError("agents: duplicate agent id " + std::to_string(a.id));
    if (a.subchannel < 0 || a.subchannel >= timing.subchannels)
      throw ConfigError("agents[" + std::to_string(a.id) + "].subchannel out of range");
    if (a.banks.empty()) throw ConfigError("agents[" + std::to_string(a.id) + "].banks is empty");
    for (int b : a.banks) {
      if (b < 0 || b >= timing.banks_per_rank)
        throw ConfigError("agents[" + std::to_string(a.id) + "].banks: bank " + std::to_string(b) + " out of range");
      auto [it, fresh] = owner.emplace(std::pair{a.subchannel, b}, a.id);
      if (!fresh && it->second != a.id)
        throw ConfigError("agents: bank " + std::to_string(b) + " on sub-channel " + std::to_string(a.subchannel) +
                          " shared by agents " + std::to_string(it->second) + " and " + std::to_string(a.id));
    }
  }
}

GadgetSchedule GadgetSchedule::make(const TimingParams& timing, const RfmParams& rfm, RfmCommand command) {
  GadgetSchedule g;
  g.period = timing.ref_period();
  g.window_start = timing.tRFC;
  g.stall = command == RfmCommand::AllBank ? timing.tRFC : timing.tRFCsb;
  g.receiver_loads = rfm.raaimt / 2;
  g.one_acts = rfm.raaimt + rfm.raaimt / 2;
  g.zero_acts = rfm.raaimt / 2;
  g.init_acts = g.one_acts;

  const SimTime tRC = timing.tRC;
  if (g.receiver_loads < 2) throw ConfigError("rfm.raaimt too small for a receiver window");
  // Room for the loads plus one stall of slack on either side.
  const SimTime room = g.period - g.window_start - 2 * g.stall - tRC;
  g.load_spacing = room / (g.receiver_loads - 1);
  if (g.load_spacing < 2 * tRC)
    throw ConfigError("covert schedule infeasible: receiver window too short for raaimt " +
                      std::to_string(rfm.raaimt));
  g.load_think = g.load_spacing - tRC;

  // The sender needs raaimt ACTs after its start to saturate; pick the
  // first load that it can reach from the window start.
  const SimTime lead = tRC + static_cast<SimTime>(rfm.raaimt) * tRC;
  g.trigger_load = static_cast<int>((lead + g.load_spacing - 1) / g.load_spacing);
  g.sender_offset = g.window_start + g.trigger_load * g.load_spacing - lead;
  if (g.trigger_load >= g.receiver_loads || g.sender_offset < g.window_start)
    throw ConfigError("covert schedule infeasible: sender cannot reach the receiver window");

  const SimTime sender_end = g.sender_offset + static_cast<SimTime>(g.one_acts) * tRC + g.stall;
  if (sender_end > g.period)
    throw ConfigError("covert schedule infeasible: sender burst of " + std::to_string(g.one_acts) +
                      " ACTs does not fit in a " + std::to_string(g.period) + " ns period");
  return g;
}

SenderAgent::SenderAgent(SimContext ctx, AgentPlacement placement, GadgetSchedule schedule)
    : ctx_(ctx), placement_(std::move(placement)), schedule_(schedule) {
  if (placement_.banks.empty()) throw ConfigError("sender needs a bank");
}

std::vector<SenderPlan> SenderAgent::initialize_plan() const {
  return {SenderPlan{schedule_.window_start, schedule_.init_acts},
          SenderPlan{schedule_.window_start, schedule_.init_acts}};
}

SenderPlan SenderAgent::transmit_plan(int bit) const {
  return SenderPlan{schedule_.sender_offset, bit ? schedule_.one_acts : schedule_.zero_acts};
}

void SenderAgent::run(const SenderPlan& plan, SimTime period_start, Done done) {
  const SimTime at = period_start + plan.start_offset;
  if (at < ctx_.queue.now()) throw SimulationError("sender plan starts in the past");
  const int count = plan.acts;
  ctx_.queue.schedule(at, [this, count, done = std::move(done)]() mutable { burst(bank(), count, std::move(done)); });
}

void SenderAgent::burst(int bank, int count, Done done) {
  if (count <= 0) {
    if (done) done(ctx_.queue.now());
    return;
  }
  ActRequest req{placement_.subchannel, bank, rows_.next(), placement_.id, placement_.core};
  ctx_.memory.request_act(req, [this, bank, count, done = std::move(done)](const ActGrant& g) mutable {
    if (count == 1) {
      ctx_.queue.schedule(g.completion, [g, done = std::move(done)] {
        if (done) done(g.completion);
      });
      return;
    }
    // Back-to-back: the next request goes out as soon as this one finishes.
    ctx_.queue.schedule(g.completion, [this, bank, count, done = std::move(done)]() mutable {
      burst(bank, count - 1, std::move(done));
    });
  });
}

ReceiverAgent::ReceiverAgent(SimContext ctx, AgentPlacement placement, GadgetSchedule schedule)
    : ctx_(ctx), placement_(std::move(placement)), schedule_(schedule) {
  if (placement_.banks.empty()) throw ConfigError("receiver needs a bank");
}

void ReceiverAgent::measure(SimTime period_start, Measured done) {
  const SimTime at = period_start + schedule_.window_start;
  if (at < ctx_.queue.now()) throw SimulationError("receiver window starts in the past");
  ctx_.queue.schedule(at, [this, at, done = std::move(done)]() mutable { load(0, at, std::move(done)); });
}

void ReceiverAgent::load(int index, SimTime first_request, Measured done) {
  ActRequest req{placement_.subchannel, bank(), rows_.next(), placement_.id, placement_.core};
  ctx_.memory.request_act(req, [this, index, first_request, done = std::move(done)](const ActGrant& g) mutable {
    if (index + 1 == schedule_.receiver_loads) {
      ctx_.queue.schedule(g.completion, [g, first_request, done = std::move(done)] {
        done(g.completion - first_request, g.completion);
      });
      return;
    }
    ctx_.queue.schedule(g.completion + schedule_.load_think,
                        [this, index, first_request, done = std::move(done)]() mutable {
                          load(index + 1, first_request, std::move(done));
                        });
  });
}

DosAgent::DosAgent(SimContext ctx, AgentPlacement placement) : ctx_(ctx), placement_(std::move(placement)) {
  if (placement_.banks.empty()) throw ConfigError("dos agent needs a bank");
}

void DosAgent::start(SimTime at) {
  ctx_.queue.schedule(at, [this] { step(); });
}

void DosAgent::step() {
  ActRequest req{placement_.subchannel, placement_.banks.front(), rows_.next(), placement_.id, placement_.core};
  ctx_.memory.request_act(req, [this](const ActGrant& g) { ctx_.queue.schedule(g.completion, [this] { step(); }); });
}

VictimAgent::VictimAgent(SimContext ctx, AgentPlacement placement, SimTime think_time)
    : ctx_(ctx), placement_(std::move(placement)), think_(think_time) {
  if (placement_.banks.empty()) throw ConfigError("victim needs at least one bank");
  if (think_ < 0) throw ConfigError("victim think time must be >= 0");
}

void VictimAgent::start(SimTime at) {
  ctx_.queue.schedule(at, [this] { step(); });
}

void VictimAgent::step() {
  const int bank = placement_.banks[next_bank_];
  next_bank_ = (next_bank_ + 1) % placement_.banks.size();
  ActRequest req{placement_.subchannel, bank, rows_.next(), placement_.id, placement_.core};
  ctx_.memory.request_act(req, [this](const ActGrant& g) {
    completions_.push_back(g.completion);
    ctx_.queue.schedule(g.completion + think_, [this] { step(); });
  });
}

std::uint64_t VictimAgent::completed_between(SimTime from, SimTime to) const {
  // Completions are appended in grant order, which is monotone in time.
  auto lo = std::lower_bound(completions_.begin(), completions_.end(), from);
  auto hi = std::lower_bound(completions_.begin(), completions_.end(), to);
  return static_cast<std::uint64_t>(hi - lo);
}

NoiseAgent::NoiseAgent(SimContext ctx, AgentPlacement placement, double rate, std::uint64_t seed,
                       std::vector<NoiseBurst> bursts, NoisePhases phases)
    : ctx_(ctx),
      placement_(std::move(placement)),
      rate_(rate),
      rng_(seed),
      bursts_(std::move(bursts)),
      phases_(phases),
      rows_(placement_.banks.size()),
      busy_until_(placement_.banks.size(), 0) {
  if (placement_.banks.empty()) throw ConfigError("noise agent needs at least one bank");
  auto bad = [](double r) { return !(r >= 0.0 && r <= 1.0); };
  if (bad(rate_)) throw ConfigError("noise rate must be in [0, 1]");
  for (const auto& b : bursts_)
    if (bad(b.rate) || b.end < b.start) throw ConfigError("noise burst window invalid");
  if (phases_.window < 0 || bad(phases_.duty)) throw ConfigError("noise phases invalid");
}

double NoiseAgent::rate_for(double acts_per_trefi, const TimingParams& timing) noexcept {
  const double slots = static_cast<double>(timing.tREFI) / static_cast<double>(timing.tRC);
  return std::clamp(acts_per_trefi / slots, 0.0, 1.0);
}

double NoiseAgent::rate_at(SimTime t) const noexcept {
  for (const auto& b : bursts_)
    if (t >= b.start && t < b.end) return b.rate;
  return active_ ? rate_ : 0.0;
}

void NoiseAgent::start(SimTime at) {
  ctx_.queue.schedule(at, [this] { step(); });
}

void NoiseAgent::step() {
  const SimTime now = ctx_.queue.now();
  ctx_.queue.schedule(now + ctx_.memory.timing().tRC, [this] { step(); });
  if (phases_.window > 0 && now / phases_.window != window_) {
    window_ = now / phases_.window;
    active_ = rng_.bernoulli(phases_.duty);
  }
  const double p = rate_at(now);
  for (std::size_t i = 0; i < placement_.banks.size(); ++i) {
    if (!rng_.bernoulli(p)) continue;
    if (now < busy_until_[i]) {
      ++dropped_;
      continue;
    }
    busy_until_[i] = INT64_MAX;
    ++issued_;
    ActRequest req{placement_.subchannel, placement_.banks[i], rows_[i].next(), placement_.id, placement_.core};
    ctx_.memory.request_act(req, [this, i](const ActGrant& g) { busy_until_[i] = g.completion; });
  }
}

}  // namespace rfmsim
