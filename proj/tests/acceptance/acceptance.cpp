// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "address_oracle.hpp"
#include "counter_oracle.hpp"
#include "nrfm_oracle.hpp"
#include "rfmsim/addressing.hpp"
#include "rfmsim/covert_channel.hpp"
#include "rfmsim/dos_analytics.hpp"
#include "rfmsim/experiment.hpp"

using namespace rfmsim;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// 1. Sender counter at every REF boundary: 0, raaimt, 2*raaimt, then
// 2*raaimt for the rest of the message, whatever the bits are.
Outcome check_counter_trace() {
  ChannelConfig c;
  c.controller.record_trace = false;
  const std::size_t n = 2000;
  std::vector<std::pair<std::string, std::vector<int>>> messages{
      {"ones", std::vector<int>(n, 1)},
      {"zeros", std::vector<int>(n, 0)},
      {"alternating", alternating_message(n)},
      {"random", random_message(n, 1)}};
  const auto g = GadgetSchedule::make(c.timing, c.rfm, c.rfm_command());
  for (const auto& [name, msg] : messages) {
    const auto r = run_channel(c, msg);
    const auto& t = r.sender_counter;
    // The REF at t=0, two init periods, the preamble, and every message bit
    // but the last (the run ends before that bit's REF).
    const std::size_t need = 2 + static_cast<std::size_t>(c.preamble_bits) + n;
    if (t.size() < need) return {false, fmt("%s: only %zu boundaries", name.c_str(), t.size())};
    std::vector<int> expected{0, 32};
    expected.resize(t.size(), 64);
    if (t != expected) {
      const auto at = std::mismatch(t.begin(), t.end(), expected.begin()).first - t.begin();
      return {false, fmt("%s: boundary %td is %d", name.c_str(), at, t[static_cast<std::size_t>(at)])};
    }
    std::vector<int> bits = alternating_message(static_cast<std::size_t>(c.preamble_bits));
    bits.insert(bits.end(), msg.begin(), msg.end());
    const auto o = oracle::sender_boundaries(oracle::CounterRules::for_raaimt(32), g.init_acts, g.one_acts,
                                             g.zero_acts, bits);
    if (o.size() < t.size() || !std::equal(t.begin(), t.end(), o.begin()))
      return {false, name + ": disagrees with oracle"};
  }
  return {true, fmt("4 messages x %zu bits: 0 -> 32 -> 64 -> 64 ...", n)};
}

// 2. Exact analytical rationals, simulated rates against them and against
// reference simulation results.
Outcome check_analytical_model() {
  const std::map<int, std::pair<std::int64_t, std::int64_t>> exact{{32, {2722, 1946}}, {16, {3106, 1178}}};
  const std::map<int, double> reference{{32, 1.37}, {16, 2.6}};
  std::string detail;
  bool ok = true;
  for (int raaimt : {32, 16}) {
    const auto in = NrfmModelInput::from(TimingParams{}, RfmParams::for_raaimt(raaimt));
    const auto r = analytical_nrfm_exact(in);
    const auto o = oracle::nrfm(in.tREFI, in.tRFC, in.tRC, in.raaimt);
    ok = ok && r.num == exact.at(raaimt).first && r.den == exact.at(raaimt).second && r.num == o.num &&
         r.den == o.den;
    DosConfig d;
    d.rfm = RfmParams::for_raaimt(raaimt);
    d.trefis = 1000;
    d.controller.record_trace = false;
    const auto rep = run_dos(d);
    const double e_model = std::abs(rep.simulated_nrfm / r.value() - 1);
    const double e_ref = std::abs(rep.simulated_nrfm / reference.at(raaimt) - 1);
    ok = ok && e_model <= 0.05 && e_ref <= 0.10;
    detail += fmt("raaimt=%d %lld/%lld sim %.3f (%.1f%% vs model, %.1f%% vs ref %.2f); ", raaimt,
                  static_cast<long long>(r.num), static_cast<long long>(r.den), rep.simulated_nrfm, 100 * e_model,
                  100 * e_ref, reference.at(raaimt));
  }
  return {ok, detail};
}

// 3. Noiseless channel.
Outcome check_noiseless_channel() {
  ChannelConfig c;
  c.controller.record_trace = false;
  const auto msg = random_message(10000, derive_seed(1, 0));
  const auto r = run_channel(c, msg);
  std::vector<double> ones, zeros;
  for (std::size_t i = 0; i < msg.size(); ++i) (msg[i] ? ones : zeros).push_back(static_cast<double>(r.elapsed[i]));
  const double gap = mean(ones) - mean(zeros);
  const double lo = 0.7 * static_cast<double>(c.timing.tRFC), hi = 1.2 * static_cast<double>(c.timing.tRFC);
  const bool ok = r.accuracy == 1.0 && gap >= lo && gap <= hi;
  return {ok, fmt("accuracy %.6f, gap %.1f ns in [%.0f, %.0f], separation %lld ns", r.accuracy, gap, lo, hi,
                  static_cast<long long>(r.min_one - r.max_zero))};
}

// 4. Bandwidth arithmetic.
Outcome check_bandwidth() {
  ChannelConfig c;
  c.rfm = RfmParams::for_raaimt(16);
  c.controller.record_trace = false;
  const auto msg = random_message(64, 3);
  const auto ab = run_channel(c, msg);
  const auto sb = run_channel_rfmsb(c, msg);
  const double per = ab.raw_bandwidth / 1024.0, total = ab.raw_bandwidth_total / 1024.0;
  const bool formula = ab.raw_bandwidth == 1e9 / 3900.0 / 8.0;
  const bool ok = formula && std::abs(per - 31.3) < 0.05 && std::abs(total - 62.6) < 0.05 &&
                  sb.raw_bandwidth == 2 * ab.raw_bandwidth && sb.raw_bandwidth_total == 2 * ab.raw_bandwidth_total &&
                  sb.accuracy == 1.0;
  return {ok, fmt("RFMab %.2f KiB/s per sub-channel, %.2f KiB/s total; RFMsb %.2f KiB/s (x%.3f)", per, total,
                  sb.raw_bandwidth / 1024.0, sb.raw_bandwidth / ab.raw_bandwidth)};
}

// 5. Noise. Bursty traffic on three banks of the channel's sub-channel:
// two-tREFI windows, each busy with probability `duty`, during which every
// bank gets an ACT request each tRC. The run without resync keeps the same
// slot layout (gaps and re-initialization) and only skips the REF re-probe.
Outcome check_noise() {
  const std::vector<double> duties{0.05, 0.10, 0.15, 0.20};
  const int seeds = 20;
  ChannelConfig base;
  base.controller.record_trace = false;
  const double slots = static_cast<double>(base.timing.tREFI) / static_cast<double>(base.timing.tRC);
  std::vector<double> mean_with, mean_without, mean_plain;
  int violations = 0, pairs = 0, below_plain = 0;
  std::string worst;
  for (double duty : duties) {
    std::vector<double> with, without, plain;
    for (int s = 1; s <= seeds; ++s) {
      NoiseConfig n;
      n.seed = derive_seed(static_cast<std::uint64_t>(s), 1);
      n.sources.push_back({{16, 17, 18}, 1.0, {}, {2 * base.timing.tREFI, duty}});
      const auto msg = random_message(1000, derive_seed(static_cast<std::uint64_t>(s), 0));
      ChannelConfig c = base;
      plain.push_back(run_channel(c, msg, n).accuracy);
      c.resync_interval = 100;
      c.resync_probe = false;
      const double a0 = run_channel(c, msg, n).accuracy;
      c.resync_probe = true;
      const double a1 = run_channel(c, msg, n).accuracy;
      without.push_back(a0);
      with.push_back(a1);
      if (a1 < plain.back()) ++below_plain;
      ++pairs;
      if (a1 < a0) {
        ++violations;
        worst = fmt("seed %d duty %.2f: %.3f < %.3f", s, duty, a1, a0);
      }
    }
    mean_without.push_back(mean(without));
    mean_with.push_back(mean(with));
    mean_plain.push_back(mean(plain));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < duties.size(); ++i)
    monotone = monotone && mean_without[i] <= mean_without[i - 1] && mean_with[i] <= mean_with[i - 1];
  const bool strict = mean_with.back() > mean_without.back();
  std::string detail = "rate ACT/tREFI/bank: acc without -> with resync:";
  for (std::size_t i = 0; i < duties.size(); ++i)
    detail += fmt(" %.1f: %.3f -> %.3f;", duties[i] * slots, mean_without[i], mean_with[i]);
  detail += fmt(" %d/%d pairs worse with resync", violations, pairs);
  if (!worst.empty()) detail += " (" + worst + ")";
  // Informational: the same runs without any resync gaps.
  detail += "; gapless runs:";
  for (double m : mean_plain) detail += fmt(" %.3f", m);
  detail += fmt(", %d/%d pairs below them with resync", below_plain, pairs);
  return {monotone && violations == 0 && strict, detail};
}

// 6. Victim slowdown under attack.
Outcome check_dos_slowdown() {
  std::map<int, double> slow, pred;
  bool ok = true;
  for (int raaimt : {32, 16}) {
    DosConfig d;
    d.rfm = RfmParams::for_raaimt(raaimt);
    d.victim_think = 0;
    d.controller.record_trace = false;
    const auto r = run_dos(d);
    double s = 0;
    for (const auto& v : r.victims) {
      ok = ok && v.slowdown > 0 && v.slowdown <= r.predicted_max_slowdown + 0.05;
      s += v.slowdown;
    }
    slow[raaimt] = s / static_cast<double>(r.victims.size());
    pred[raaimt] = r.predicted_max_slowdown;
  }
  ok = ok && slow[16] > slow[32];
  return {ok, fmt("raaimt=32 %.3f (max %.3f); raaimt=16 %.3f (max %.3f)", slow[32], pred[32], slow[16], pred[16])};
}

// 7. Limiter.
Outcome check_limiter() {
  bool ok = true;
  std::string detail;
  for (int raaimt : {32, 16}) {
    DosConfig d;
    d.rfm = RfmParams::for_raaimt(raaimt);
    d.trefis = 1000;
    d.controller.limiter.enabled = true;
    d.controller.record_trace = true;
    const auto r = run_dos(d);
    // The benign agent's heaviest per-bank load in any tREFI.
    std::map<std::tuple<int, int, std::int64_t>, int> load;
    std::map<int, bool> benign;
    for (const auto& v : r.victims) benign[v.agent] = true;
    for (const auto& c : r.trace)
      if (c.kind == CommandKind::Act && benign.count(c.agent))
        ++load[{c.agent, c.bank, d.timing.trefi_index(c.issue)}];
    int heaviest = 0;
    for (const auto& [_, k] : load) heaviest = std::max(heaviest, k);
    std::uint64_t denials = 0;
    for (const auto& v : r.victims) denials += v.denials;
    ok = ok && d.trefis >= 160 && r.simulated_nrfm <= 1.05 && denials == 0 && heaviest <= raaimt / 2;
    detail += fmt("raaimt=%d: %.3f RFM/tREFI over %lld tREFIs, benign max %d ACT/bank/tREFI, %llu denials; ", raaimt,
                  r.simulated_nrfm, static_cast<long long>(d.trefis), heaviest,
                  static_cast<unsigned long long>(denials));
  }
  return {ok, detail};
}

// 8. REF phase recovery.
Outcome check_sync() {
  Rng rng(2024);
  SimTime worst = 0;
  int failures = 0;
  for (int i = 0; i < 100; ++i) {
    TimingParams t;
    t.ref_phase = static_cast<SimTime>(rng.below(static_cast<std::uint64_t>(t.ref_period())));
    const SimTime start = static_cast<SimTime>(rng.below(static_cast<std::uint64_t>(t.tREFI)));
    const int bank = static_cast<int>(rng.below(32));
    try {
      const SimTime got = synchronize_to_ref(t, start, bank);
      SimTime err = std::abs(got - t.ref_phase);
      err = std::min(err, t.ref_period() - err);
      worst = std::max(worst, err);
    } catch (const SyncError&) {
      ++failures;
    }
  }
  return {failures == 0 && worst <= 96, fmt("100 phases, worst error %lld ns (limit 96), %d failures",
                                            static_cast<long long>(worst), failures)};
}

// 9. Eviction sets over random layouts, checked by exhaustive decoding.
Outcome check_addressing() {
  Rng rng(99);
  int bad = 0;
  std::size_t addresses = 0;
  for (int i = 0; i < 1000; ++i) {
    const AddressMap m = random_layout(rng);
    const int bank = static_cast<int>(rng.below(static_cast<std::uint64_t>(m.banks())));
    const int sc = static_cast<int>(rng.below(std::uint64_t{1} << m.subchannel.size()));
    const int size = m.associativity + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m.associativity)));
    try {
      const auto set = build_eviction_set(m, bank, size, sc, rng.next());
      addresses += set.size();
      const auto chk = oracle::check_eviction_set(m, set, static_cast<std::uint64_t>(bank),
                                                  static_cast<std::uint64_t>(sc));
      if (!chk.ok() || static_cast<int>(set.size()) != size) ++bad;
      for (auto a : set)
        if (compose(m, map_address(m, a)) != a) ++bad;
    } catch (const std::exception&) {
      ++bad;
    }
  }
  return {bad == 0, fmt("1000 layouts, %zu addresses decoded, %d violations", addresses, bad)};
}

// 10. Byte-identical reruns of every experiment kind.
Outcome check_determinism() {
  const std::vector<std::string> configs{
      R"({"kind": "COVERT", "seed": 5, "covert": {"message_bits": 300, "resync_interval": 100,
          "noise": [{"banks": [16, 17, 18], "rate": 1.0, "phase_window": 7800, "duty": 0.2}]}})",
      R"({"kind": "COVERT", "seed": 6, "timing": {"ref_phase": 1234}, "covert": {"message_bits": 100,
          "sync_shortcut": false}})",
      R"({"kind": "COVERT_RFMSB", "seed": 7, "covert": {"message_bits": 300}})",
      R"({"kind": "DOS", "seed": 8, "dos": {"trefis": 200}, "limiter": {"enabled": true}})",
      R"({"kind": "VALIDATE_MODEL", "validate": {"trefis": 200}})"};
  int same = 0;
  for (const auto& text : configs) {
    const auto c = parse_config(Json::parse(text));
    std::string rep[2], trace[2];
    for (int k = 0; k < 2; ++k) {
      const auto out = run_experiment(c, true);
      rep[k] = out.report.dump(2);
      std::ostringstream t;
      write_trace_csv(t, out.trace);
      trace[k] = t.str();
    }
    if (rep[0] == rep[1] && trace[0] == trace[1] && !trace[0].empty()) ++same;
  }
  return {same == static_cast<int>(configs.size()),
          fmt("%d/%zu configs byte-identical (report and trace)", same, configs.size())};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"C1 counter golden trace", 1, check_counter_trace},
      {"C2 analytical model", 10, check_analytical_model},
      {"C3 noiseless channel", 30, check_noiseless_channel},
      {"C4 bandwidth", 1, check_bandwidth},
      {"C5 noise and resync", 300, check_noise},
      {"C6 DOS slowdown", 60, check_dos_slowdown},
      {"C7 limiter", 60, check_limiter},
      {"C8 REF synchronization", 10, check_sync},
      {"C9 eviction sets", 10, check_addressing},
      {"C10 determinism", 60, check_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %s: %s [%.2f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
