#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

namespace rfmsim {

/// Simulation time in integer nanoseconds since the start of a run.
using SimTime = std::int64_t;

/// Raised when the simulator detects an internal protocol or scheduling bug.
/// These are never expected in a correct run; callers treat them as fatal.
class SimulationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Ordered queue of timed callbacks with a monotone clock.
///
/// Events at the same timestamp run in insertion order, so two runs that
/// schedule the same events in the same order produce identical traces.
class EventQueue {
 public:
  using Action = std::function<void()>;

  /// Throws SimulationError when `at` lies before the current clock.
  void schedule(SimTime at, Action action);

  /// Processes every event with time <= deadline and leaves the clock at
  /// max(clock, deadline).
  SimTime run_until(SimTime deadline);

  /// Processes a single event. Returns false when the queue is empty.
  bool step();

  SimTime now() const noexcept { return now_; }
  bool empty() const noexcept { return heap_.empty(); }
  std::size_t pending() const noexcept { return heap_.size(); }
  std::uint64_t processed() const noexcept { return processed_; }

  /// Time of the earliest pending event; only valid when !empty().
  SimTime next_time() const { return heap_.front().at; }

 private:
  struct Entry {
    SimTime at;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const noexcept {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  std::vector<Entry> heap_;
  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
};

/// splitmix64 finalizer; used to fan a root seed out to independent streams.
std::uint64_t mix_seed(std::uint64_t value) noexcept;

/// Seed for stream `stream` under root seed `root`.
/// derive_seed(root, k) = mix_seed(root + 0x9E3779B97F4A7C15 * (k + 1)).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) noexcept;

/// Portable pseudo-random source. std::mt19937_64 output is fixed by the
/// standard; the conversions below avoid implementation-defined
/// distributions so results match across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

}  // namespace rfmsim
