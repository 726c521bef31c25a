// Serial reference vs OpenMP node advance for the cluster barrier loop.
#include <benchmark/benchmark.h>

#include "swapsim/cluster.hpp"
#include "swapsim/scenario.hpp"

using namespace swapsim;

namespace {

const Scenario& scenario() {
  static const Scenario sc = [] {
    ScenarioParams p;
    p.functions = 600;
    p.duration = 60 * kMicrosPerSec;
    return make_scenario(p);
  }();
  return sc;
}

void run_cluster_bench(benchmark::State& state, bool parallel) {
  const auto& sc = scenario();
  std::vector<double> rates;
  for (const auto& r : sc.rates) rates.push_back(r.rate_per_minute);
  ClusterConfig c;
  c.nodes = static_cast<int>(state.range(0));
  c.max_nodes = c.nodes;
  c.parallel = parallel;
  for (auto _ : state) {
    auto rep = run_cluster(c, sc.catalog, sc.functions, rates, sc.trace);
    benchmark::DoNotOptimize(rep.normalized_latency.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sc.trace.requests.size()));
}

void BM_ClusterSerial(benchmark::State& s) { run_cluster_bench(s, false); }
void BM_ClusterParallel(benchmark::State& s) { run_cluster_bench(s, true); }

}  // namespace

BENCHMARK(BM_ClusterSerial)->Arg(2)->Arg(6)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClusterParallel)->Arg(2)->Arg(6)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
