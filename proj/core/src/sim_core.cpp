#include "rfmsim/sim_core.hpp"

#include <algorithm>
#include <string>

namespace rfmsim {

void EventQueue::schedule(SimTime at, Action action) {
  if (at < now_) {
    throw SimulationError("event in past: scheduled at " + std::to_string(at) +
                          " ns, clock is " + std::to_string(now_) + " ns");
  }
  heap_.push_back(Entry{at, next_seq_++, std::move(action)});
  std::push_heap(heap_.begin(), heap_.end(), Later{});
}

bool EventQueue::step() {
  if (heap_.empty()) return false;
  std::pop_heap(heap_.begin(), heap_.end(), Later{});
  Entry entry = std::move(heap_.back());
  heap_.pop_back();
  now_ = entry.at;
  ++processed_;
  entry.action();
  return true;
}

SimTime EventQueue::run_until(SimTime deadline) {
  while (!heap_.empty() && heap_.front().at <= deadline) step();
  now_ = std::max(now_, deadline);
  return now_;
}

std::uint64_t mix_seed(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) noexcept {
  return mix_seed(root + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) return 0;
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

}  // namespace rfmsim
