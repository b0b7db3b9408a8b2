#include "rfmsim/dos_analytics.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

#include "rfmsim/agents.hpp"

namespace rfmsim {

void NrfmModelInput::validate() const {
  if (tREFI <= 0 || tRFC <= 0 || tRC <= 0 || raaimt <= 0)
    throw ConfigError("model input: tREFI, tRFC, tRC and raaimt must be positive");
}

Rational Rational::reduced() const noexcept {
  const std::int64_t g = std::gcd(num, den);
  if (g == 0) return *this;
  return {num / g, den / g};
}

Rational analytical_nrfm_exact(const NrfmModelInput& in) {
  in.validate();
  // Doubled to keep tRC*raaimt/2 integral, halved back when possible.
  std::int64_t num = 2 * in.tREFI - 2 * in.tRFC - in.tRC * in.raaimt;
  std::int64_t den = 2 * (in.raaimt * in.tRC + in.tRFC);
  if (num <= 0) return {0, 1};
  if (num % 2 == 0) {
    num /= 2;
    den /= 2;
  }
  return {num, den};
}

double analytical_nrfm(const NrfmModelInput& in) { return analytical_nrfm_exact(in).value(); }

double rfm_time_fraction(const NrfmModelInput& in) {
  in.validate();
  return static_cast<double>(in.tRFC) / static_cast<double>(in.tREFI - in.tRFC);
}

double predicted_max_slowdown(const NrfmModelInput& in) { return analytical_nrfm(in) * rfm_time_fraction(in); }

std::vector<int> rfm_per_trefi(std::span<const SimTime> times, const TimingParams& timing, std::int64_t warmup,
                               std::int64_t window) {
  std::vector<int> out(static_cast<std::size_t>(std::max<std::int64_t>(window, 0)), 0);
  for (SimTime t : times) {
    const std::int64_t k = timing.trefi_index(t) - warmup;
    if (k >= 0 && k < window) ++out[static_cast<std::size_t>(k)];
  }
  return out;
}

double measure_nrfm(std::span<const SimTime> times, const TimingParams& timing, std::int64_t warmup,
                    std::int64_t window) {
  if (window < kMinWindow)
    throw std::invalid_argument("measure_nrfm: window of " + std::to_string(window) + " tREFIs is below " +
                                std::to_string(kMinWindow));
  const auto counts = rfm_per_trefi(times, timing, warmup, window);
  const long total = std::accumulate(counts.begin(), counts.end(), 0L);
  return static_cast<double>(total) / static_cast<double>(window);
}

double measure_nrfm(std::span<const CommandRecord> trace, const TimingParams& timing, std::int64_t warmup,
                    std::int64_t window, int subchannel) {
  std::vector<SimTime> times;
  for (const auto& r : trace)
    if (r.subchannel == subchannel && (r.kind == CommandKind::Rfmab || r.kind == CommandKind::Rfmsb))
      times.push_back(r.issue);
  return measure_nrfm(times, timing, warmup, window);
}

double measure_slowdown(double baseline, double attacked) {
  if (!(baseline > 0)) throw std::invalid_argument("measure_slowdown: baseline throughput must be positive");
  const double s = 1.0 - attacked / baseline;
  return std::clamp(s, 0.0, std::nextafter(1.0, 0.0));
}

void DosConfig::validate() const {
  timing.validate();
  rfm.validate();
  if (trefis < kMinWindow) throw ConfigError("dos.trefis must be >= " + std::to_string(kMinWindow));
  if (warmup < 0) throw ConfigError("dos.warmup must be >= 0");
  if (victims_per_subchannel < 0) throw ConfigError("dos.victims_per_subchannel must be >= 0");
  if (victims_per_subchannel > 0 && victim_banks.size() < static_cast<std::size_t>(victims_per_subchannel))
    throw ConfigError("dos.victim_banks: need at least one bank per victim");
  if (victim_think < 0) throw ConfigError("dos.victim_think must be >= 0");
}

namespace {

struct DosRun {
  std::vector<std::vector<SimTime>> rfm_times;
  std::vector<double> victim_rate;
  std::vector<std::uint64_t> victim_denials;
  std::vector<int> victim_subchannel;
  std::vector<int> victim_ids;
  std::uint64_t attacker_denials = 0;
  std::vector<CommandRecord> trace;
};

DosRun simulate(const DosConfig& cfg, bool attack, bool record) {
  EventQueue queue;
  ControllerOptions opts = cfg.controller;
  opts.record_trace = record;
  MemorySystem memory(queue, cfg.timing, cfg.rfm, opts);
  SimContext ctx{queue, memory};

  const int subs = cfg.timing.subchannels;
  std::vector<AgentPlacement> placements;
  std::vector<std::unique_ptr<DosAgent>> attackers;
  std::vector<std::unique_ptr<VictimAgent>> victims;
  for (int sc = 0; sc < subs; ++sc) {
    if (attack) placements.push_back({sc, AgentRole::Dos, sc, sc, {cfg.attacker_bank}});
    // Split victim_banks into contiguous slices, one per victim.
    const int nv = cfg.victims_per_subchannel;
    for (int v = 0; v < nv; ++v) {
      AgentPlacement p{subs + sc * nv + v, AgentRole::Victim, subs + sc * nv + v, sc, {}};
      for (std::size_t i = static_cast<std::size_t>(v); i < cfg.victim_banks.size(); i += static_cast<std::size_t>(nv))
        p.banks.push_back(cfg.victim_banks[i]);
      placements.push_back(p);
    }
  }
  validate_partitioning(placements, cfg.timing);

  DosRun run;
  for (const auto& p : placements) {
    if (p.role == AgentRole::Dos) {
      attackers.push_back(std::make_unique<DosAgent>(ctx, p));
      attackers.back()->start(0);
    } else {
      victims.push_back(std::make_unique<VictimAgent>(ctx, p, cfg.victim_think));
      victims.back()->start(0);
      run.victim_ids.push_back(p.id);
      run.victim_subchannel.push_back(p.subchannel);
    }
  }
  memory.start_refresh();

  const SimTime from = cfg.timing.ref_phase + cfg.warmup * cfg.timing.tREFI;
  const SimTime to = from + cfg.trefis * cfg.timing.tREFI;
  queue.run_until(to);

  for (int sc = 0; sc < subs; ++sc) {
    auto t = memory.rfm_issue_times(sc);
    run.rfm_times.emplace_back(t.begin(), t.end());
  }
  for (std::size_t i = 0; i < victims.size(); ++i) {
    run.victim_rate.push_back(static_cast<double>(victims[i]->completed_between(from, to)) /
                              static_cast<double>(cfg.trefis));
    run.victim_denials.push_back(memory.denials(run.victim_ids[i]));
  }
  for (const auto& p : placements)
    if (p.role == AgentRole::Dos) run.attacker_denials += memory.denials(p.id);
  if (record) run.trace.assign(memory.trace().begin(), memory.trace().end());
  return run;
}

}  // namespace

DosReport run_dos(const DosConfig& cfg) {
  cfg.validate();
  const auto model = NrfmModelInput::from(cfg.timing, cfg.rfm);

  DosReport r;
  r.raaimt = cfg.rfm.raaimt;
  r.analytical_exact = analytical_nrfm_exact(model);
  r.analytical_nrfm = r.analytical_exact.value();
  r.rfm_time_fraction = rfm_time_fraction(model);
  r.predicted_max_slowdown = predicted_max_slowdown(model);

  const DosRun attacked = simulate(cfg, cfg.attack, cfg.controller.record_trace);
  r.attacker_denials = attacked.attacker_denials;
  double sum = 0;
  for (const auto& times : attacked.rfm_times) {
    r.simulated_per_subchannel.push_back(measure_nrfm(times, cfg.timing, cfg.warmup, cfg.trefis));
    sum += r.simulated_per_subchannel.back();
  }
  r.simulated_nrfm = sum / static_cast<double>(attacked.rfm_times.size());
  r.rfm_series = rfm_per_trefi(attacked.rfm_times.front(), cfg.timing, cfg.warmup, cfg.trefis);

  // Each tREFI holds one REF, the post-REF ACT budget and k RFM cycles.
  const auto& t = cfg.timing;
  const double w = static_cast<double>(cfg.trefis);
  double worst = 1e300;
  for (double n : r.simulated_per_subchannel) {
    const double k = n * w;
    const double used = w * static_cast<double>(t.tRFC + t.tRC * cfg.rfm.raaimt / 2) +
                        k * static_cast<double>(t.tRFC + cfg.rfm.raaimt * t.tRC);
    worst = std::min(worst, w * static_cast<double>(t.tREFI) - used);
  }
  r.time_identity_slack = worst;
  r.time_identity_ok = worst >= -w * static_cast<double>(t.tRC);

  if (!attacked.victim_rate.empty()) {
    const DosRun baseline = cfg.attack ? simulate(cfg, false, false) : attacked;
    for (std::size_t i = 0; i < attacked.victim_rate.size(); ++i) {
      VictimResult v;
      v.agent = attacked.victim_ids[i];
      v.subchannel = attacked.victim_subchannel[i];
      v.baseline = baseline.victim_rate[i];
      v.attacked = attacked.victim_rate[i];
      v.slowdown = measure_slowdown(v.baseline, v.attacked);
      v.denials = attacked.victim_denials[i];
      r.victims.push_back(v);
    }
  }
  r.trace = attacked.trace;
  return r;
}

std::vector<ModelValidation> validate_model(const TimingParams& timing, std::span<const int> raaimts,
                                            std::int64_t trefis) {
  std::vector<ModelValidation> out;
  for (int raaimt : raaimts) {
    DosConfig cfg;
    cfg.timing = timing;
    cfg.rfm = RfmParams::for_raaimt(raaimt);
    cfg.controller.record_trace = false;
    cfg.trefis = trefis;
    cfg.victims_per_subchannel = 0;
    const DosReport r = run_dos(cfg);
    ModelValidation v;
    v.raaimt = raaimt;
    v.analytical = r.analytical_exact;
    v.simulated = r.simulated_nrfm;
    v.relative_error = std::abs(v.simulated - v.analytical.value()) / v.analytical.value();
    out.push_back(v);
  }
  return out;
}

}  // namespace rfmsim
