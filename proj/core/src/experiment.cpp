#include "rfmsim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <type_traits>

namespace rfmsim {

std::string_view to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::Covert: return "COVERT";
    case ExperimentKind::CovertRfmsb: return "COVERT_RFMSB";
    case ExperimentKind::Dos: return "DOS";
    case ExperimentKind::ValidateModel: return "VALIDATE_MODEL";
    case ExperimentKind::Sweep: return "SWEEP";
  }
  return "?";
}

namespace {

ExperimentKind parse_kind(const std::string& s, const std::string& path) {
  for (auto k : {ExperimentKind::Covert, ExperimentKind::CovertRfmsb, ExperimentKind::Dos,
                 ExperimentKind::ValidateModel, ExperimentKind::Sweep})
    if (to_string(k) == s) return k;
  throw ConfigError(path + ": unknown experiment kind '" + s + "'");
}

// Typed access to one JSON object; remembers which keys were read so
// unknown (misspelled) keys can be reported.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <class T>
  T integer(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if constexpr (std::is_signed_v<T>) {
        if (u > static_cast<std::uint64_t>(std::numeric_limits<T>::max()))
          throw ConfigError(field(key) + ": value out of range");
      }
      return static_cast<T>(u);
    }
    const auto s = v.get<std::int64_t>();
    if constexpr (std::is_unsigned_v<T>) {
      if (s < 0) throw ConfigError(field(key) + ": must be non-negative");
    } else {
      if (s < std::numeric_limits<T>::min() || s > std::numeric_limits<T>::max())
        throw ConfigError(field(key) + ": value out of range");
    }
    return static_cast<T>(s);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
    return v.get<double>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<int> ints(const std::string& key, std::vector<int> fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(field(key) + ": expected an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw ConfigError(field(key) + ": expected an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  const Json& child(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw ConfigError(field(k) + ": unknown field");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

TimingParams parse_timing(const Json& j, TimingParams t) {
  Reader r(j, "timing");
  t.tRC = r.integer("tRC", t.tRC);
  t.tRFC = r.integer("tRFC", t.tRFC);
  t.tREFI = r.integer("tREFI", t.tREFI);
  t.tRFCsb = r.integer("tRFCsb", t.tRFCsb);
  t.tREFW = r.integer("tREFW", t.tREFW);
  t.banks_per_rank = r.integer("banks_per_rank", t.banks_per_rank);
  t.bankgroups = r.integer("bankgroups", t.bankgroups);
  t.banks_per_group = r.integer("banks_per_group", t.banks_per_group);
  t.subchannels = r.integer("subchannels", t.subchannels);
  t.fgr_enabled = r.boolean("fgr_enabled", t.fgr_enabled);
  t.ref_phase = r.integer("ref_phase", t.ref_phase);
  r.finish();
  return t;
}

RfmParams parse_rfm(const Json& j, int default_raaimt) {
  Reader r(j, "rfm");
  RfmParams p = RfmParams::for_raaimt(r.integer("raaimt", default_raaimt));
  p.raammt = r.integer("raammt", p.raammt);
  p.ref_decrement = r.integer("ref_decrement", p.ref_decrement);
  r.finish();
  return p;
}

LimiterParams parse_limiter(const Json& j) {
  Reader r(j, "limiter");
  LimiterParams p;
  p.enabled = r.boolean("enabled", p.enabled);
  p.budget = r.integer("budget", p.budget);
  p.grace_trefis = r.integer("grace_trefis", p.grace_trefis);
  r.finish();
  if (p.budget < 0) throw ConfigError("limiter.budget: must be >= 0");
  if (p.grace_trefis < 0) throw ConfigError("limiter.grace_trefis: must be >= 0");
  return p;
}

std::vector<NoiseSource> parse_noise(const Json& j) {
  if (!j.is_array()) throw ConfigError("covert.noise: expected an array");
  std::vector<NoiseSource> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "covert.noise." + std::to_string(i);
    Reader r(j[i], path);
    NoiseSource s;
    s.banks = r.ints("banks", {});
    s.rate = r.number("rate", 0.0);
    s.phases.window = r.integer<SimTime>("phase_window", 0);
    s.phases.duty = r.number("duty", 1.0);
    if (r.has("bursts")) {
      const Json& b = r.child("bursts");
      if (!b.is_array()) throw ConfigError(path + ".bursts: expected an array");
      for (std::size_t k = 0; k < b.size(); ++k) {
        Reader br(b[k], path + ".bursts." + std::to_string(k));
        NoiseBurst nb;
        nb.start = br.integer<SimTime>("start", 0);
        nb.end = br.integer<SimTime>("end", 0);
        nb.rate = br.number("rate", 1.0);
        br.finish();
        if (nb.end < nb.start) throw ConfigError(br.where() + ".end: must be >= start");
        if (!(nb.rate >= 0 && nb.rate <= 1)) throw ConfigError(br.where() + ".rate: must be in [0, 1]");
        s.bursts.push_back(nb);
      }
    }
    r.finish();
    if (s.banks.empty()) throw ConfigError(path + ".banks: must list at least one bank");
    if (!(s.rate >= 0 && s.rate <= 1)) throw ConfigError(path + ".rate: must be in [0, 1]");
    if (s.phases.window < 0) throw ConfigError(path + ".phase_window: must be >= 0");
    if (!(s.phases.duty >= 0 && s.phases.duty <= 1)) throw ConfigError(path + ".duty: must be in [0, 1]");
    out.push_back(std::move(s));
  }
  return out;
}

void parse_covert(const Json& j, ExperimentConfig& c) {
  Reader r(j, "covert");
  auto& ch = c.channel;
  c.message_bits = r.integer<std::size_t>("message_bits", c.message_bits);
  c.message = r.string("message", c.message);
  ch.subchannel = r.integer("subchannel", ch.subchannel);
  ch.receiver_bank = r.integer("receiver_bank", ch.receiver_bank);
  ch.sender_bank = r.integer("sender_bank", ch.sender_bank);
  ch.sender_sync_bank = r.integer("sender_sync_bank", ch.sender_sync_bank);
  ch.receiver_sync_bank = r.integer("receiver_sync_bank", ch.receiver_sync_bank);
  ch.preamble_bits = r.integer("preamble_bits", ch.preamble_bits);
  ch.resync_interval = r.integer("resync_interval", ch.resync_interval);
  ch.resync_periods = r.integer("resync_periods", ch.resync_periods);
  ch.resync_probe = r.boolean("resync_probe", ch.resync_probe);
  ch.resync_reinit = r.boolean("resync_reinit", ch.resync_reinit);
  ch.sync_shortcut = r.boolean("sync_shortcut", ch.sync_shortcut);
  ch.allow_foreign_bank_set = r.boolean("allow_foreign_bank_set", ch.allow_foreign_bank_set);
  if (r.has("threshold")) ch.threshold = r.number("threshold", 0.0);
  if (r.has("noise")) c.noise = parse_noise(r.child("noise"));
  r.finish();
  if (c.message != "random" && c.message != "alternating") {
    if (c.message.empty() || c.message.find_first_not_of("01") != std::string::npos)
      throw ConfigError("covert.message: expected \"random\", \"alternating\" or a string of 0/1");
    c.message_bits = c.message.size();
  }
  if (c.message_bits == 0) throw ConfigError("covert.message_bits: must be positive");
}

void parse_dos(const Json& j, DosConfig& d) {
  Reader r(j, "dos");
  d.trefis = r.integer("trefis", d.trefis);
  d.warmup = r.integer("warmup", d.warmup);
  d.attack = r.boolean("attack", d.attack);
  d.attacker_bank = r.integer("attacker_bank", d.attacker_bank);
  d.victim_banks = r.ints("victim_banks", d.victim_banks);
  d.victims_per_subchannel = r.integer("victims_per_subchannel", d.victims_per_subchannel);
  d.victim_think = r.integer("victim_think", d.victim_think);
  r.finish();
}

void parse_validate(const Json& j, ExperimentConfig& c) {
  Reader r(j, "validate");
  c.raaimts = r.ints("raaimts", c.raaimts);
  c.validate_trefis = r.integer("trefis", c.validate_trefis);
  r.finish();
  if (c.raaimts.empty()) throw ConfigError("validate.raaimts: must not be empty");
  if (c.validate_trefis < kMinWindow) throw ConfigError("validate.trefis: must be >= " + std::to_string(kMinWindow));
}

void parse_sweep(const Json& j, SweepSpec& s) {
  Reader r(j, "sweep");
  if (!r.has("base")) throw ConfigError("sweep.base: required");
  s.base = r.child("base");
  if (!s.base.is_object()) throw ConfigError("sweep.base: expected an object");
  if (s.base.contains("kind") && s.base["kind"] == "SWEEP") throw ConfigError("sweep.base.kind: cannot nest SWEEP");
  if (r.has("grid")) {
    const Json& g = r.child("grid");
    if (!g.is_object()) throw ConfigError("sweep.grid: expected an object of arrays");
    for (const auto& [key, values] : g.items()) {
      if (!values.is_array()) throw ConfigError("sweep.grid." + key + ": expected an array");
      s.grid.emplace_back(key, std::vector<Json>(values.begin(), values.end()));
    }
  }
  r.finish();
}

}  // namespace

ExperimentConfig parse_config(const Json& j) {
  Reader r(j, "");
  ExperimentConfig c;
  c.kind = parse_kind(r.string("kind", "COVERT"), "kind");
  c.seed = r.integer<std::uint64_t>("seed", c.seed);
  const bool rfmsb = c.kind == ExperimentKind::CovertRfmsb;
  if (rfmsb) c.timing.fgr_enabled = true;
  if (r.has("timing")) c.timing = parse_timing(r.child("timing"), c.timing);
  if (rfmsb && !c.timing.fgr_enabled) throw ConfigError("timing.fgr_enabled: must be true for COVERT_RFMSB");
  c.rfm = r.has("rfm") ? parse_rfm(r.child("rfm"), rfmsb ? 16 : 32) : RfmParams::for_raaimt(rfmsb ? 16 : 32);
  if (r.has("limiter")) c.limiter = parse_limiter(r.child("limiter"));
  if (r.has("covert")) parse_covert(r.child("covert"), c);
  if (r.has("dos")) parse_dos(r.child("dos"), c.dos);
  if (r.has("validate")) parse_validate(r.child("validate"), c);
  if (r.has("sweep")) parse_sweep(r.child("sweep"), c.sweep);
  r.finish();

  c.timing.validate();
  c.rfm.validate();

  c.channel.mode = rfmsb ? ChannelMode::Rfmsb : ChannelMode::Rfmab;
  c.channel.timing = c.timing;
  c.channel.rfm = c.rfm;
  c.channel.controller.limiter = c.limiter;
  c.dos.timing = c.timing;
  c.dos.rfm = c.rfm;
  c.dos.controller.limiter = c.limiter;

  switch (c.kind) {
    case ExperimentKind::Covert:
    case ExperimentKind::CovertRfmsb: {
      c.channel.validate();
      std::vector<AgentPlacement> placements{
          {0, AgentRole::Sender, 0, c.channel.subchannel, {c.channel.sender_bank, c.channel.sender_sync_bank}},
          {1, AgentRole::Receiver, 1, c.channel.subchannel, {c.channel.receiver_bank, c.channel.receiver_sync_bank}}};
      for (std::size_t i = 0; i < c.noise.size(); ++i)
        placements.push_back({2 + static_cast<int>(i), AgentRole::Noise, 2 + static_cast<int>(i),
                              c.channel.subchannel, c.noise[i].banks});
      validate_partitioning(placements, c.timing);
      break;
    }
    case ExperimentKind::Dos:
      c.dos.validate();
      if (c.dos.attacker_bank < 0 || c.dos.attacker_bank >= c.timing.banks_per_rank)
        throw ConfigError("dos.attacker_bank: out of range");
      for (int b : c.dos.victim_banks) {
        if (b < 0 || b >= c.timing.banks_per_rank) throw ConfigError("dos.victim_banks: bank out of range");
        if (b == c.dos.attacker_bank) throw ConfigError("dos.victim_banks: shares a bank with the attacker");
      }
      break;
    case ExperimentKind::ValidateModel:
      for (int a : c.raaimts) RfmParams::for_raaimt(a).validate();
      break;
    case ExperimentKind::Sweep:
      if (c.sweep.base.is_null()) throw ConfigError("sweep: required for kind SWEEP");
      break;
  }
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["kind"] = std::string(to_string(c.kind));
  j["seed"] = c.seed;
  const auto& t = c.timing;
  j["timing"] = {{"tRC", t.tRC},
                 {"tRFC", t.tRFC},
                 {"tREFI", t.tREFI},
                 {"tRFCsb", t.tRFCsb},
                 {"tREFW", t.tREFW},
                 {"banks_per_rank", t.banks_per_rank},
                 {"bankgroups", t.bankgroups},
                 {"banks_per_group", t.banks_per_group},
                 {"subchannels", t.subchannels},
                 {"fgr_enabled", t.fgr_enabled},
                 {"ref_phase", t.ref_phase}};
  j["rfm"] = {{"raaimt", c.rfm.raaimt}, {"raammt", c.rfm.raammt}, {"ref_decrement", c.rfm.ref_decrement}};
  j["limiter"] = {{"enabled", c.limiter.enabled},
                  {"budget", c.limiter.budget},
                  {"grace_trefis", c.limiter.grace_trefis}};
  switch (c.kind) {
    case ExperimentKind::Covert:
    case ExperimentKind::CovertRfmsb: {
      const auto& ch = c.channel;
      Json cv;
      cv["message_bits"] = c.message_bits;
      cv["message"] = c.message;
      cv["subchannel"] = ch.subchannel;
      cv["receiver_bank"] = ch.receiver_bank;
      cv["sender_bank"] = ch.sender_bank;
      cv["sender_sync_bank"] = ch.sender_sync_bank;
      cv["receiver_sync_bank"] = ch.receiver_sync_bank;
      cv["preamble_bits"] = ch.preamble_bits;
      cv["resync_interval"] = ch.resync_interval;
      cv["resync_periods"] = ch.resync_periods;
      cv["resync_probe"] = ch.resync_probe;
      cv["resync_reinit"] = ch.resync_reinit;
      cv["sync_shortcut"] = ch.sync_shortcut;
      cv["allow_foreign_bank_set"] = ch.allow_foreign_bank_set;
      cv["threshold"] = ch.threshold ? Json(*ch.threshold) : Json(nullptr);
      Json noise = Json::array();
      for (const auto& s : c.noise) {
        Json bursts = Json::array();
        for (const auto& b : s.bursts) bursts.push_back({{"start", b.start}, {"end", b.end}, {"rate", b.rate}});
        noise.push_back({{"banks", s.banks},
                         {"rate", s.rate},
                         {"phase_window", s.phases.window},
                         {"duty", s.phases.duty},
                         {"bursts", bursts}});
      }
      cv["noise"] = noise;
      j["covert"] = cv;
      break;
    }
    case ExperimentKind::Dos:
      j["dos"] = {{"trefis", c.dos.trefis},
                  {"warmup", c.dos.warmup},
                  {"attack", c.dos.attack},
                  {"attacker_bank", c.dos.attacker_bank},
                  {"victim_banks", c.dos.victim_banks},
                  {"victims_per_subchannel", c.dos.victims_per_subchannel},
                  {"victim_think", c.dos.victim_think}};
      break;
    case ExperimentKind::ValidateModel:
      j["validate"] = {{"raaimts", c.raaimts}, {"trefis", c.validate_trefis}};
      break;
    case ExperimentKind::Sweep: {
      Json grid = Json::object();
      for (const auto& [k, v] : c.sweep.grid) grid[k] = v;
      j["sweep"] = {{"base", c.sweep.base}, {"grid", grid}};
      break;
    }
  }
  return j;
}

std::vector<int> make_message(const ExperimentConfig& c) {
  if (c.message == "random") return random_message(c.message_bits, derive_seed(c.seed, 0));
  if (c.message == "alternating") return alternating_message(c.message_bits, 0);
  std::vector<int> out;
  for (char ch : c.message) out.push_back(ch == '1');
  return out;
}

}  // namespace rfmsim

namespace rfmsim {

Json to_json(const ChannelReport& r) {
  Json j;
  j["mode"] = std::string(to_string(r.mode));
  j["bits_sent"] = r.bits_sent;
  j["bits_correct"] = r.bits_correct;
  j["accuracy"] = r.accuracy;
  j["bit_period_ns"] = r.bit_period;
  j["raw_bandwidth_Bps"] = r.raw_bandwidth;
  j["raw_bandwidth_KiBps"] = r.raw_bandwidth / 1024.0;
  j["raw_bandwidth_total_Bps"] = r.raw_bandwidth_total;
  j["raw_bandwidth_total_KiBps"] = r.raw_bandwidth_total / 1024.0;
  j["effective_bandwidth_Bps"] = r.effective_bandwidth;
  j["threshold_ns"] = r.threshold;
  j["calibration_fallback"] = r.calibration_fallback;
  j["zero_mean_ns"] = r.zero_mean;
  j["one_mean_ns"] = r.one_mean;
  j["gap_ns"] = r.one_mean - r.zero_mean;
  j["min_one_ns"] = r.min_one;
  j["max_zero_ns"] = r.max_zero;
  j["resyncs"] = r.resyncs;
  j["sender_slips"] = r.sender_slips;
  j["receiver_slips"] = r.receiver_slips;
  j["rfm_commands"] = r.rfm_commands;
  j["ref_commands"] = r.ref_commands;
  j["noise_acts"] = r.noise_acts;
  j["ref_phase_ns"] = r.phase;
  j["end_time_ns"] = r.end_time;
  const auto& g = r.schedule;
  j["schedule"] = {{"receiver_loads", g.receiver_loads}, {"load_spacing_ns", g.load_spacing},
                   {"trigger_load", g.trigger_load},     {"sender_offset_ns", g.sender_offset},
                   {"one_acts", g.one_acts},             {"zero_acts", g.zero_acts},
                   {"stall_ns", g.stall}};
  j["sender_counter"] = r.sender_counter;
  j["preamble_elapsed_ns"] = r.preamble_elapsed;
  j["elapsed_ns"] = r.elapsed;
  std::string decoded;
  for (int b : r.decoded) decoded += b ? '1' : '0';
  j["decoded"] = decoded;
  return j;
}

Json to_json(const DosReport& r) {
  Json j;
  j["raaimt"] = r.raaimt;
  j["analytical_nrfm"] = r.analytical_nrfm;
  j["analytical_nrfm_exact"] = std::to_string(r.analytical_exact.num) + "/" + std::to_string(r.analytical_exact.den);
  j["simulated_nrfm"] = r.simulated_nrfm;
  j["simulated_nrfm_per_subchannel"] = r.simulated_per_subchannel;
  j["rfm_time_fraction"] = r.rfm_time_fraction;
  j["predicted_max_slowdown"] = r.predicted_max_slowdown;
  Json victims = Json::array();
  for (const auto& v : r.victims)
    victims.push_back({{"agent", v.agent},
                       {"subchannel", v.subchannel},
                       {"baseline_acts_per_trefi", v.baseline},
                       {"attacked_acts_per_trefi", v.attacked},
                       {"slowdown", v.slowdown},
                       {"denials", v.denials}});
  j["victims"] = victims;
  j["attacker_denials"] = r.attacker_denials;
  j["time_identity_slack_ns"] = r.time_identity_slack;
  j["time_identity_ok"] = r.time_identity_ok;
  j["rfm_per_trefi"] = r.rfm_series;
  return j;
}

Json to_json(std::span<const ModelValidation> rows) {
  Json out = Json::array();
  for (const auto& v : rows)
    out.push_back({{"raaimt", v.raaimt},
                   {"analytical_nrfm", v.analytical.value()},
                   {"analytical_nrfm_exact", std::to_string(v.analytical.num) + "/" + std::to_string(v.analytical.den)},
                   {"simulated_nrfm", v.simulated},
                   {"relative_error", v.relative_error}});
  return out;
}

ExperimentOutput run_experiment(const ExperimentConfig& c, bool want_trace) {
  ExperimentOutput out;
  Json report;
  report["simulator"] = "rfmsim";
  report["version"] = RFMSIM_VERSION;
  report["kind"] = std::string(to_string(c.kind));
  report["seed"] = c.seed;
  report["config"] = config_to_json(c);

  switch (c.kind) {
    case ExperimentKind::Covert:
    case ExperimentKind::CovertRfmsb: {
      ChannelConfig ch = c.channel;
      ch.controller.record_trace = want_trace;
      NoiseConfig noise{c.noise, derive_seed(c.seed, 1)};
      const auto message = make_message(c);
      ChannelReport r = c.kind == ExperimentKind::Covert ? run_channel(ch, message, noise)
                                                         : run_channel_rfmsb(ch, message, noise);
      report["result"] = to_json(r);
      out.trace = std::move(r.trace);
      break;
    }
    case ExperimentKind::Dos: {
      DosConfig d = c.dos;
      d.controller.record_trace = want_trace;
      DosReport r = run_dos(d);
      report["result"] = to_json(r);
      out.trace = std::move(r.trace);
      break;
    }
    case ExperimentKind::ValidateModel: {
      const auto rows = validate_model(c.timing, c.raaimts, c.validate_trefis);
      report["result"] = {{"rows", to_json(rows)}};
      break;
    }
    case ExperimentKind::Sweep:
      throw ConfigError("kind: SWEEP runs through the sweep verb");
  }
  out.report = std::move(report);
  return out;
}

void write_trace_csv(std::ostream& out, std::span<const CommandRecord> trace) {
  out << "time,kind,subchannel,bank,agent\n";
  for (const auto& r : trace) {
    const int bank = r.kind == CommandKind::Rfmsb ? r.bank_set : r.bank;
    out << r.issue << ',' << to_string(r.kind) << ',' << r.subchannel << ',' << bank << ',' << r.agent << '\n';
  }
}

std::vector<CommandRecord> read_trace_csv(std::istream& in, const TimingParams& timing) {
  std::string line;
  if (!std::getline(in, line) || line != "time,kind,subchannel,bank,agent")
    throw ConfigError("trace: missing header 'time,kind,subchannel,bank,agent'");
  std::vector<CommandRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[5];
    for (auto& s : f)
      if (!std::getline(ss, s, ',')) throw ConfigError("trace line " + std::to_string(lineno) + ": expected 5 fields");
    const auto kind = parse_command_kind(f[1]);
    if (!kind) throw ConfigError("trace line " + std::to_string(lineno) + ": unknown kind '" + f[1] + "'");
    CommandRecord r;
    try {
      r.kind = *kind;
      r.issue = std::stoll(f[0]);
      r.subchannel = std::stoi(f[2]);
      const int bank = std::stoi(f[3]);
      r.agent = std::stoi(f[4]);
      if (r.kind == CommandKind::Rfmsb) r.bank_set = bank;
      else r.bank = bank;
    } catch (const std::exception&) {
      throw ConfigError("trace line " + std::to_string(lineno) + ": malformed number");
    }
    switch (r.kind) {
      case CommandKind::Act: r.completion = r.issue + timing.tRC; break;
      case CommandKind::Ref:
      case CommandKind::Rfmab: r.completion = r.issue + timing.tRFC; break;
      case CommandKind::Rfmsb: r.completion = r.issue + timing.tRFCsb; break;
    }
    out.push_back(r);
  }
  return out;
}

namespace {

void set_path(Json& j, const std::string& path, const Json& value) {
  Json* cur = &j;
  std::stringstream ss(path);
  std::string seg;
  std::vector<std::string> segs;
  while (std::getline(ss, seg, '.')) segs.push_back(seg);
  if (segs.empty()) throw ConfigError("sweep.grid: empty parameter path");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const bool last = i + 1 == segs.size();
    const std::string& s = segs[i];
    if (cur->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(s);
      } catch (const std::exception&) {
        throw ConfigError("sweep.grid." + path + ": '" + s + "' is not an array index");
      }
      if (idx >= cur->size()) throw ConfigError("sweep.grid." + path + ": index " + s + " out of range");
      cur = &(*cur)[idx];
    } else {
      if (!cur->is_object() && !cur->is_null()) throw ConfigError("sweep.grid." + path + ": not an object");
      cur = &(*cur)[s];
    }
    if (last) *cur = value;
  }
}

std::string cell(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

struct Metric {
  const char* column;
  const char* key;
};

const std::vector<Metric>& metrics_for(ExperimentKind kind) {
  static const std::vector<Metric> covert{{"accuracy", "accuracy"},
                                          {"bits_sent", "bits_sent"},
                                          {"bits_correct", "bits_correct"},
                                          {"threshold_ns", "threshold_ns"},
                                          {"gap_ns", "gap_ns"},
                                          {"raw_bandwidth_Bps", "raw_bandwidth_Bps"},
                                          {"effective_bandwidth_Bps", "effective_bandwidth_Bps"},
                                          {"resyncs", "resyncs"},
                                          {"sender_slips", "sender_slips"},
                                          {"receiver_slips", "receiver_slips"},
                                          {"rfm_commands", "rfm_commands"},
                                          {"calibration_fallback", "calibration_fallback"}};
  static const std::vector<Metric> dos{{"raaimt", "raaimt"},
                                       {"analytical_nrfm", "analytical_nrfm"},
                                       {"simulated_nrfm", "simulated_nrfm"},
                                       {"predicted_max_slowdown", "predicted_max_slowdown"},
                                       {"mean_victim_slowdown", ""},
                                       {"attacker_denials", "attacker_denials"}};
  static const std::vector<Metric> validate{{"max_relative_error", ""}};
  switch (kind) {
    case ExperimentKind::Covert:
    case ExperimentKind::CovertRfmsb: return covert;
    case ExperimentKind::Dos: return dos;
    default: return validate;
  }
}

double metric_value(ExperimentKind kind, const Metric& m, const Json& result) {
  if (*m.key) {
    const Json& v = result.at(m.key);
    return v.is_boolean() ? (v.get<bool>() ? 1.0 : 0.0) : v.get<double>();
  }
  if (kind == ExperimentKind::Dos) {
    double s = 0;
    const auto& vs = result.at("victims");
    for (const auto& v : vs) s += v.at("slowdown").get<double>();
    return vs.empty() ? 0.0 : s / static_cast<double>(vs.size());
  }
  double worst = 0;
  for (const auto& row : result.at("rows")) worst = std::max(worst, row.at("relative_error").get<double>());
  return worst;
}

std::string number_cell(double v) { return Json(v).dump(); }

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, unsigned jobs) {
  ExperimentKind kind = ExperimentKind::Covert;
  if (spec.base.contains("kind")) {
    if (!spec.base["kind"].is_string()) throw ConfigError("sweep.base.kind: expected a string");
    kind = parse_kind(spec.base["kind"].get<std::string>(), "sweep.base.kind");
  }
  if (kind == ExperimentKind::Sweep) throw ConfigError("sweep.base.kind: cannot nest SWEEP");
  const auto& metrics = metrics_for(kind);

  SweepResult out;
  for (const auto& [k, _] : spec.grid) out.columns.push_back(k);
  for (const auto& m : metrics) out.columns.push_back(m.column);
  for (const auto& [k, _] : spec.grid)
    if (k != "seed") out.summary_columns.push_back(k);
  out.summary_columns.push_back("runs");
  for (const auto& m : metrics) out.summary_columns.push_back(std::string("mean_") + m.column);

  std::size_t points = spec.grid.empty() ? 0 : 1;
  for (const auto& [_, v] : spec.grid) points *= v.size();
  if (points == 0) return out;

  // Resolve every point up front so config errors surface before any run.
  std::vector<ExperimentConfig> configs;
  std::vector<std::vector<std::string>> keys;
  for (std::size_t p = 0; p < points; ++p) {
    Json j = spec.base;
    std::vector<std::string> row;
    std::size_t rem = p;
    // Last grid key varies fastest.
    std::vector<std::size_t> idx(spec.grid.size());
    for (std::size_t g = spec.grid.size(); g-- > 0;) {
      idx[g] = rem % spec.grid[g].second.size();
      rem /= spec.grid[g].second.size();
    }
    for (std::size_t g = 0; g < spec.grid.size(); ++g) {
      const Json& v = spec.grid[g].second[idx[g]];
      set_path(j, spec.grid[g].first, v);
      row.push_back(cell(v));
    }
    configs.push_back(parse_config(j));
    keys.push_back(std::move(row));
  }

  std::vector<Json> results(points);
  std::vector<std::exception_ptr> errors(points);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t p; (p = next.fetch_add(1)) < points;) {
      try {
        results[p] = run_experiment(configs[p]).report.at("result");
      } catch (...) {
        errors[p] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(points)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::map<std::string, std::size_t> group_index;
  std::vector<std::vector<std::string>> group_keys;
  std::vector<std::vector<double>> sums;
  std::vector<std::size_t> counts;
  for (std::size_t p = 0; p < points; ++p) {
    std::vector<std::string> row = keys[p];
    std::vector<double> vals;
    for (const auto& m : metrics) {
      vals.push_back(metric_value(kind, m, results[p]));
      row.push_back(number_cell(vals.back()));
    }
    out.rows.push_back(std::move(row));

    std::vector<std::string> gk;
    for (std::size_t g = 0; g < spec.grid.size(); ++g)
      if (spec.grid[g].first != "seed") gk.push_back(keys[p][g]);
    std::string joined;
    for (const auto& s : gk) joined += s + '\x1f';
    auto [it, fresh] = group_index.emplace(joined, group_keys.size());
    if (fresh) {
      group_keys.push_back(gk);
      sums.emplace_back(metrics.size(), 0.0);
      counts.push_back(0);
    }
    for (std::size_t m = 0; m < vals.size(); ++m) sums[it->second][m] += vals[m];
    ++counts[it->second];
  }
  for (std::size_t g = 0; g < group_keys.size(); ++g) {
    std::vector<std::string> row = group_keys[g];
    row.push_back(std::to_string(counts[g]));
    for (double s : sums[g]) row.push_back(number_cell(s / static_cast<double>(counts[g])));
    out.summary_rows.push_back(std::move(row));
  }
  return out;
}

void write_csv(std::ostream& out, const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows) {
  auto emit = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out << ',';
      const bool quote = r[i].find_first_of(",\"\n") != std::string::npos;
      if (!quote) {
        out << r[i];
        continue;
      }
      out << '"';
      for (char ch : r[i]) out << (ch == '"' ? "\"\"" : std::string(1, ch));
      out << '"';
    }
    out << '\n';
  };
  emit(columns);
  for (const auto& r : rows) emit(r);
}

}  // namespace rfmsim
