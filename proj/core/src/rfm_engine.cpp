#include "rfmsim/rfm_engine.hpp"

#include <algorithm>
#include <string>

namespace rfmsim {

RaaCounters::RaaCounters(int banks, int banks_per_group, RfmParams params)
    : params_(params),
      banks_per_group_(banks_per_group),
      counters_(static_cast<std::size_t>(banks), 0),
      ledgers_(static_cast<std::size_t>(banks)),
      pending_sets_(static_cast<std::size_t>(banks_per_group), false) {}

int RaaCounters::on_act(int bank) {
  int& c = counters_.at(static_cast<std::size_t>(bank));
  if (c >= params_.raammt) {
    throw SimulationError("RAA counter of bank " + std::to_string(bank) +
                          " incremented past RAAMMT=" + std::to_string(params_.raammt));
  }
  ++c;
  ++ledgers_[static_cast<std::size_t>(bank)].increments;
  if (c == params_.raammt) {
    pending_rank_ = true;
    pending_sets_[static_cast<std::size_t>(bank % banks_per_group_)] = true;
  }
  return c;
}

void RaaCounters::decrement(int bank, int amount) {
  auto i = static_cast<std::size_t>(bank);
  const int removed = std::min(counters_[i], amount);
  counters_[i] -= removed;
  ledgers_[i].decrements += removed;
  ledgers_[i].clamp_loss += amount - removed;
}

void RaaCounters::apply_rfmab_decrement() {
  for (int b = 0; b < banks(); ++b) decrement(b, params_.raaimt);
  pending_rank_ = false;
  std::fill(pending_sets_.begin(), pending_sets_.end(), false);
}

void RaaCounters::apply_ref_decrement() {
  for (int b = 0; b < banks(); ++b) decrement(b, params_.ref_decrement);
}

void RaaCounters::apply_rfmsb_decrement(int bank_set) {
  for (int b = bank_set; b < banks(); b += banks_per_group_) decrement(b, params_.raaimt);
  pending_sets_.at(static_cast<std::size_t>(bank_set)) = false;
  pending_rank_ = std::any_of(pending_sets_.begin(), pending_sets_.end(), [](bool p) { return p; });
}

bool RaaCounters::mandatory_pending() const noexcept { return pending_rank_; }

bool RaaCounters::mandatory_pending_for_set(int bank_set) const {
  return pending_sets_.at(static_cast<std::size_t>(bank_set));
}

void RaaCounters::load(std::span<const int> values) {
  if (values.size() != counters_.size()) throw std::invalid_argument("counter count mismatch");
  std::fill(pending_sets_.begin(), pending_sets_.end(), false);
  pending_rank_ = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0 || values[i] > params_.raammt) throw std::invalid_argument("counter out of range");
    counters_[i] = values[i];
    if (values[i] == params_.raammt) {
      pending_rank_ = true;
      pending_sets_[i % static_cast<std::size_t>(banks_per_group_)] = true;
    }
  }
}

ActivationLimiter::ActivationLimiter(LimiterParams params, int budget) : params_(params), budget_(budget) {}

bool ActivationLimiter::restricted(std::int64_t trefi) const noexcept {
  return last_rfm_trefi_.has_value() && *last_rfm_trefi_ >= trefi - params_.grace_trefis;
}

int ActivationLimiter::used(int core, int bank, std::int64_t trefi) const {
  if (trefi != window_trefi_) return 0;
  auto it = used_.find({core, bank});
  return it == used_.end() ? 0 : it->second;
}

LimiterDecision ActivationLimiter::check(int core, int bank, std::int64_t trefi) const {
  if (!params_.enabled || !restricted(trefi)) return LimiterDecision::Allow;
  return used(core, bank, trefi) < budget_ ? LimiterDecision::Allow : LimiterDecision::DenyUntilNextTrefi;
}

void ActivationLimiter::record_act(int core, int bank, std::int64_t trefi) {
  if (trefi != window_trefi_) {
    used_.clear();
    window_trefi_ = trefi;
  }
  ++used_[{core, bank}];
}

void ActivationLimiter::record_rfm(std::int64_t trefi) {
  if (!last_rfm_trefi_ || trefi > *last_rfm_trefi_) last_rfm_trefi_ = trefi;
}

}  // namespace rfmsim
