// Serial reference vs OpenMP kernels. Outputs are bit-identical between the two;
// only wall time differs. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "ablo/counterexample.hpp"
#include "ablo/outer_loop.hpp"
#include "ablo/verification.hpp"

namespace {

using namespace ablo;

Execution exec_of(const benchmark::State& st) { return st.range(0) ? Execution::parallel : Execution::serial; }

const CounterexampleSpec& spec() {
  static const auto s = build_counterexample(0.5, 1.5, 0.06, 0.1, 10);
  return s;
}

void BM_GridSupStats(benchmark::State& st) {
  const auto pb = as_problem(spec());
  const auto sched = InnerSchedule::constant(0.1, 10);
  for (auto _ : st) benchmark::DoNotOptimize(grid_sup_stats(*pb, sched, -50, 50, 2000, exec_of(st)).D2_hat);
  st.SetItemsProcessed(st.iterations() * 2000);
}
BENCHMARK(BM_GridSupStats)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_McUnbiasedness(benchmark::State& st) {
  const auto pb = as_problem(spec());
  const auto sched = InnerSchedule::constant(0.1, 10);
  const Vec theta = Vec::Constant(1, 2.0);
  for (auto _ : st)
    benchmark::DoNotOptimize(mc_unbiasedness(*pb, theta, sched, 0.1, 20000, 1, McEstimator::ufom, exec_of(st)).z);
  st.SetItemsProcessed(st.iterations() * 20000);
}
BENCHMARK(BM_McUnbiasedness)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RunReplicas(benchmark::State& st) {
  const auto pb = as_problem(spec());
  const auto sched = InnerSchedule::constant(0.1, 10);
  const OuterSchedule outer{OuterSchedule::Kind::harmonic, 10.0, 1000};
  for (auto _ : st)
    benchmark::DoNotOptimize(run_replicas(*pb, Ufom{0.1}, sched, outer, 0, 16, -10, 30, RunOptions{}, exec_of(st)));
  st.SetItemsProcessed(st.iterations() * 16 * 1000);
}
BENCHMARK(BM_RunReplicas)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
