#pragma once

#include <stdexcept>
#include <string>

#include "rfmsim/sim_core.hpp"

namespace rfmsim {

/// Invalid user-supplied configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// DDR5 timing constants (ns) and organization of one sub-channel's rank.
struct TimingParams {
  SimTime tRC = 48;       ///< ACT to ACT, same bank
  SimTime tRFC = 410;     ///< all-bank REF and RFMab duration
  SimTime tREFI = 3900;   ///< refresh interval
  SimTime tRFCsb = 190;   ///< RFMsb duration
  SimTime tREFW = 32'000'000;  ///< refresh window (8192 REF groups)
  int banks_per_rank = 32;
  int bankgroups = 8;
  int banks_per_group = 4;
  int subchannels = 2;
  bool fgr_enabled = false;  ///< fine granularity refresh: REF every tREFI/2
  SimTime ref_phase = 0;     ///< offset of the first REF, in [0, ref_period())

  /// Spacing between consecutive REF commands.
  SimTime ref_period() const noexcept { return fgr_enabled ? tREFI / 2 : tREFI; }

  /// Banks sharing an index inside their bank group form one bank-set.
  int bank_set_of(int bank) const noexcept { return bank % banks_per_group; }
  int bank_group_of(int bank) const noexcept { return bank / banks_per_group; }

  /// Start time of REF period k.
  SimTime ref_boundary(std::int64_t k) const noexcept { return ref_phase + k * ref_period(); }

  /// Index of the tREFI interval containing t (tREFI units, even in FGR mode).
  std::int64_t trefi_index(SimTime t) const noexcept;

  /// Index of the REF period containing t.
  std::int64_t ref_period_index(SimTime t) const noexcept;

  void validate() const;
};

/// RFM thresholds. raammt is the saturation value that forces an RFM.
struct RfmParams {
  int raaimt = 32;
  int raammt = 96;
  int ref_decrement = 16;

  /// Default policy: raammt = 3 * raaimt, REF decrements raaimt / 2.
  static RfmParams for_raaimt(int raaimt);

  void validate() const;
};

}  // namespace rfmsim
