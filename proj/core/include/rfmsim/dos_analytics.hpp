#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rfmsim/dram_model.hpp"
#include "rfmsim/timing.hpp"

namespace rfmsim {

struct NrfmModelInput {
  std::int64_t tREFI = 3900;
  std::int64_t tRFC = 410;
  std::int64_t tRC = 48;
  std::int64_t raaimt = 32;

  static NrfmModelInput from(const TimingParams& timing, const RfmParams& rfm) {
    return {timing.tREFI, timing.tRFC, timing.tRC, rfm.raaimt};
  }
  void validate() const;
};

/// Exact fraction; not reduced unless asked.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  Rational reduced() const noexcept;
  bool operator==(const Rational& o) const noexcept { return num * o.den == o.num * den; }
};

/// RFMs per tREFI that a single-bank attacker can force:
/// (tREFI - tRFC - tRC*raaimt/2) / (raaimt*tRC + tRFC), floored at zero.
Rational analytical_nrfm_exact(const NrfmModelInput& in);
double analytical_nrfm(const NrfmModelInput& in);

/// Share of issuable time (tREFI - tRFC) spent in RFM.
double rfm_time_fraction(const NrfmModelInput& in);
/// analytical_nrfm * tRFC / (tREFI - tRFC).
double predicted_max_slowdown(const NrfmModelInput& in);

/// RFM commands per tREFI over `window` tREFIs after `warmup` tREFIs.
/// Requires window >= kMinWindow.
double measure_nrfm(std::span<const CommandRecord> trace, const TimingParams& timing, std::int64_t warmup,
                    std::int64_t window, int subchannel = 0);
double measure_nrfm(std::span<const SimTime> rfm_issue_times, const TimingParams& timing, std::int64_t warmup,
                    std::int64_t window);
inline constexpr std::int64_t kMinWindow = 100;

/// Per-tREFI RFM counts for tREFIs [warmup, warmup + window).
std::vector<int> rfm_per_trefi(std::span<const SimTime> rfm_issue_times, const TimingParams& timing,
                               std::int64_t warmup, std::int64_t window);

/// 1 - attacked/baseline clamped to [0, 1). Throws std::invalid_argument
/// if baseline <= 0.
double measure_slowdown(double baseline_throughput, double attacked_throughput);

struct DosConfig {
  TimingParams timing;
  RfmParams rfm;
  ControllerOptions controller;
  std::int64_t trefis = 1000;  ///< measured window
  std::int64_t warmup = 10;
  bool attack = true;
  int attacker_bank = 0;               ///< one attacker per sub-channel
  std::vector<int> victim_banks{4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
  int victims_per_subchannel = 1;      ///< each gets its own slice of victim_banks
  SimTime victim_think = 0;

  void validate() const;
};

struct VictimResult {
  int agent = 0;
  int subchannel = 0;
  double baseline = 0;  ///< ACTs per tREFI without attacker
  double attacked = 0;  ///< ACTs per tREFI with attacker
  double slowdown = 0;
  std::uint64_t denials = 0;
};

struct DosReport {
  int raaimt = 0;
  double analytical_nrfm = 0;
  Rational analytical_exact;
  double simulated_nrfm = 0;  ///< mean over sub-channels
  std::vector<double> simulated_per_subchannel;
  double rfm_time_fraction = 0;
  double predicted_max_slowdown = 0;
  std::vector<VictimResult> victims;
  std::uint64_t attacker_denials = 0;
  /// Aggregate form of the per-window time budget; must be >= 0.
  double time_identity_slack = 0;
  bool time_identity_ok = false;
  std::vector<int> rfm_series;  ///< sub-channel 0, per tREFI
  std::vector<CommandRecord> trace;
};

/// Runs the attacked system and, for victims, a baseline without attackers.
DosReport run_dos(const DosConfig& config);

struct ModelValidation {
  int raaimt = 0;
  Rational analytical;
  double simulated = 0;
  double relative_error = 0;
};

std::vector<ModelValidation> validate_model(const TimingParams& timing, std::span<const int> raaimts,
                                            std::int64_t trefis = 1000);

}  // namespace rfmsim
