#include <benchmark/benchmark.h>

#include "rfmsim/covert_channel.hpp"
#include "rfmsim/dos_analytics.hpp"

using namespace rfmsim;

static void BM_Dos(benchmark::State& state) {
  DosConfig c;
  c.rfm = RfmParams::for_raaimt(static_cast<int>(state.range(0)));
  c.trefis = 1000;
  c.controller.record_trace = false;
  for (auto _ : state) benchmark::DoNotOptimize(run_dos(c).simulated_nrfm);
  state.counters["tREFI/s"] = benchmark::Counter(static_cast<double>(2 * c.trefis) * state.iterations(),
                                                 benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Dos)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_CovertNoiseless(benchmark::State& state) {
  ChannelConfig c;
  c.controller.record_trace = false;
  const auto msg = random_message(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(run_channel(c, msg).accuracy);
  state.counters["bits/s"] =
      benchmark::Counter(static_cast<double>(msg.size()) * state.iterations(), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_CovertNoiseless)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_CovertNoisy(benchmark::State& state) {
  ChannelConfig c;
  c.controller.record_trace = false;
  c.resync_interval = 100;
  NoiseConfig n;
  n.seed = 3;
  n.sources.push_back({{16, 17, 18}, 1.0, {}, {2 * c.timing.tREFI, 0.2}});
  const auto msg = random_message(1000, 1);
  for (auto _ : state) benchmark::DoNotOptimize(run_channel(c, msg, n).accuracy);
}
BENCHMARK(BM_CovertNoisy)->Unit(benchmark::kMillisecond);

static void BM_Sync(benchmark::State& state) {
  TimingParams t;
  t.ref_phase = 1234;
  for (auto _ : state) benchmark::DoNotOptimize(synchronize_to_ref(t));
}
BENCHMARK(BM_Sync);

BENCHMARK_MAIN();
