#include <benchmark/benchmark.h>

#include "rfmsim/sim_core.hpp"

using namespace rfmsim;

static void BM_ScheduleAndDrain(benchmark::State& state) {
  const auto n = static_cast<std::int64_t>(state.range(0));
  Rng rng(1);
  for (auto _ : state) {
    EventQueue q;
    std::int64_t sum = 0;
    for (std::int64_t i = 0; i < n; ++i)
      q.schedule(static_cast<SimTime>(rng.below(1'000'000)), [&sum, i] { sum += i; });
    while (q.step()) {
    }
    benchmark::DoNotOptimize(sum);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ScheduleAndDrain)->Arg(1 << 10)->Arg(1 << 16);

// Self-rescheduling chain, the shape of every agent loop.
static void BM_Chain(benchmark::State& state) {
  const auto n = static_cast<std::int64_t>(state.range(0));
  for (auto _ : state) {
    EventQueue q;
    std::int64_t left = n;
    std::function<void()> tick = [&] {
      if (--left > 0) q.schedule(q.now() + 48, tick);
    };
    q.schedule(0, tick);
    while (q.step()) {
    }
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Chain)->Arg(1 << 16);
