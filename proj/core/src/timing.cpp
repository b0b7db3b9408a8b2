#include "rfmsim/timing.hpp"

namespace rfmsim {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

}  // namespace

std::int64_t TimingParams::trefi_index(SimTime t) const noexcept {
  return floor_div(t - ref_phase, tREFI);
}

std::int64_t TimingParams::ref_period_index(SimTime t) const noexcept {
  return floor_div(t - ref_phase, ref_period());
}

void TimingParams::validate() const {
  require(tRC > 0, "timing.tRC", "must be positive");
  require(tRFC > 0, "timing.tRFC", "must be positive");
  require(tRFCsb > 0, "timing.tRFCsb", "must be positive");
  require(tREFI > 0, "timing.tREFI", "must be positive");
  require(tREFW > 0, "timing.tREFW", "must be positive");
  require(!fgr_enabled || tREFI % 2 == 0, "timing.tREFI", "must be even when FGR is enabled");
  require(ref_period() > tRFC + tRC, "timing.tREFI", "refresh period leaves no room for an ACT");
  require(bankgroups > 0, "timing.bankgroups", "must be positive");
  require(banks_per_group > 0, "timing.banks_per_group", "must be positive");
  require(banks_per_rank == bankgroups * banks_per_group, "timing.banks_per_rank",
          "must equal bankgroups * banks_per_group");
  require(subchannels > 0, "timing.subchannels", "must be positive");
  require(ref_phase >= 0 && ref_phase < ref_period(), "timing.ref_phase",
          "must lie in [0, refresh period)");
}

RfmParams RfmParams::for_raaimt(int raaimt) {
  RfmParams p;
  p.raaimt = raaimt;
  p.raammt = 3 * raaimt;
  p.ref_decrement = raaimt / 2;
  return p;
}

void RfmParams::validate() const {
  if (raaimt != 16 && raaimt != 32) throw ConfigError("rfm.raaimt: supported values are 16 and 32");
  if (raammt != 3 * raaimt) throw ConfigError("rfm.raammt: must equal 3 * raaimt");
  if (ref_decrement != raaimt / 2) throw ConfigError("rfm.ref_decrement: must equal raaimt / 2");
}

}  // namespace rfmsim
