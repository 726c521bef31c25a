#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "swapsim/error.hpp"
#include "swapsim/scenario.hpp"
#include "swapsim/sim.hpp"

using namespace swapsim;

namespace {

std::size_t model_index(const std::vector<ModelProfile>& cat, const std::string& name) {
  return find_model(cat, name);
}

EngineConfig one_gpu() {
  EngineConfig cfg;
  cfg.topology.gpu_count = 1;
  cfg.topology.pcie_groups = {{0}};
  cfg.topology.nvlink.clear();
  return cfg;
}

Scenario small_scenario(std::size_t n, double minutes, std::uint64_t seed = 5) {
  ScenarioParams p;
  p.functions = n;
  p.duration = static_cast<Micros>(minutes * 60e6);
  p.seed = seed;
  return make_scenario(p);
}

}  // namespace

TEST_CASE("nearest-rank tail latency") {
  std::vector<double> xs;
  for (int i = 100; i >= 1; --i) xs.push_back(i);
  CHECK(tail_latency(xs, 0.98) == 98);
  CHECK(tail_latency(xs, 0.5) == 50);
  CHECK(tail_latency({}, 0.98) == 0);
  CHECK(tail_latency({7}, 0.98) == 7);
}

TEST_CASE("policy presets") {
  CHECK(policy_select("faaswap").queueing == QueueMode::SloAware);
  const auto simple = policy_select("simpleswap");
  CHECK(simple.queueing == QueueMode::Fifo);
  CHECK(simple.scheduling == SchedulingPolicy::Random);
  CHECK(simple.eviction == EvictionPolicy::PlainLru);
  CHECK(policy_select("faaswap-block").allocator == AllocatorPolicy::NativeCost);
  CHECK(policy_select("native").binding == BindingPolicy::Static);
  CHECK(!policy_select("native").shared_runtime);
  CHECK(policy_select("nonswap").shared_runtime);
  CHECK_THROWS_AS(policy_select("bogus"), Error);
}

TEST_CASE("empty trace") {
  const auto cat = default_catalog();
  std::vector<FunctionSpec> fs = {{"a", 0, 80, 0.98}};
  Trace t;
  t.duration = 60 * kMicrosPerSec;
  const auto rep = run(EngineConfig{}, cat, fs, t);
  CHECK(rep.completed() == 0);
  for (const auto& g : rep.gpus) CHECK(g.load == 0);
  CHECK(rep.functions[0].requests == 0);
}

TEST_CASE("a lone request on a resident model takes exactly its execution time") {
  const auto cat = default_catalog();
  const auto m = model_index(cat, "ResNet-152");
  std::vector<FunctionSpec> fs = {{"a", m, 80, 0.98}};
  Trace t;
  t.requests.push_back({0, 5 * kMicrosPerSec, 0});
  t.duration = 10 * kMicrosPerSec;
  const auto rep = run(EngineConfig{}, cat, fs, t);
  REQUIRE(rep.requests.size() == 1);
  const auto& r = rep.requests[0];
  CHECK(r.kind == SwapKind::NoSwap);
  CHECK(r.end - r.arrival == from_ms(cat[m].exec_ms));
}

TEST_CASE("a cold request pays the pipelined host swap") {
  const auto cat = default_catalog();
  const auto m = model_index(cat, "ResNet-152");
  std::vector<FunctionSpec> fs = {{"a", m, 80, 0.98}};
  Trace t;
  t.requests.push_back({0, kMicrosPerSec, 0});
  t.duration = 2 * kMicrosPerSec;
  EngineConfig cfg;
  cfg.preload = false;
  const auto rep = run(cfg, cat, fs, t);
  const auto& r = rep.requests.at(0);
  CHECK(r.kind == SwapKind::FromHost);
  CHECK(to_ms(r.end - r.arrival) == doctest::Approx(pipeline_pcie_ms(cat[m], {})).epsilon(0.01));
}

TEST_CASE("offered load of twenty ResNet-152 functions on one GPU") {
  const auto cat = default_catalog();
  const auto m = model_index(cat, "ResNet-152");
  std::vector<FunctionSpec> fs;
  std::vector<FunctionRate> rates;
  for (std::uint32_t i = 0; i < 20; ++i) {
    fs.push_back({"f" + std::to_string(i), m, 80, 0.98});
    rates.push_back({i, 10});
  }
  const Micros dur = 30 * 60 * kMicrosPerSec;
  const auto rep = run(one_gpu(), cat, fs, gen_poisson_trace(rates, dur, 9));
  const double expected = 20 * (10.0 / 60.0) * cat[m].exec_ms / 1000.0;
  CHECK(rep.gpus.at(0).load == doctest::Approx(expected).epsilon(0.24));
  CHECK(std::abs(rep.gpus[0].load - expected) <= 0.015);
}

TEST_CASE("every policy conserves requests and keeps latency decomposable") {
  const auto sc = small_scenario(48, 1.5);
  for (const auto& name : policy_names()) {
    CAPTURE(name);
    EngineConfig cfg;
    cfg.policy = policy_select(name);
    cfg.check_invariants = true;
    const auto rep = run(cfg, sc.catalog, sc.functions, sc.trace);
    std::uint64_t done = 0, rejected = 0;
    for (const auto& r : rep.requests) {
      if (r.rejected) {
        ++rejected;
        continue;
      }
      REQUIRE(r.start >= r.arrival);
      REQUIRE(r.end >= r.start);
      const Micros exec = from_ms(sc.catalog[sc.functions[r.function].model].exec_ms);
      // queue wait + swap segment + compute
      CHECK((r.start - r.arrival) + (r.end - r.start - exec) + exec == r.end - r.arrival);
      CHECK(r.end - r.start >= exec);
      if (r.kind == SwapKind::NoSwap) CHECK(r.end - r.start == exec);
      ++done;
    }
    CHECK(done + rejected == sc.trace.requests.size());
    CHECK(rep.completed() == done);
    for (const auto& g : rep.gpus) {
      CHECK(g.load >= 0);
      CHECK(g.load <= 1);
    }
    if (name != "native" && name != "nonswap") CHECK(rejected == 0);
    if (name == "faaswap-random" || name == "simpleswap" || name == "native" || name == "nonswap")
      CHECK(rep.heavy.from_gpu + rep.light.from_gpu == 0);
  }
}

TEST_CASE("identical inputs give identical runs") {
  const auto sc = small_scenario(64, 1);
  for (const char* name : {"faaswap", "faaswap-random"}) {
    EngineConfig cfg;
    cfg.policy = policy_select(name);
    const auto a = run(cfg, sc.catalog, sc.functions, sc.trace);
    const auto b = run(cfg, sc.catalog, sc.functions, sc.trace);
    CHECK(a.requests == b.requests);
    CHECK(a.slo_ratio() == b.slo_ratio());
    CHECK(a.alpha.size() == b.alpha.size());
  }
}

TEST_CASE("at most one request computes per GPU") {
  const auto sc = small_scenario(96, 1, 8);
  const auto rep = run(EngineConfig{}, sc.catalog, sc.functions, sc.trace);
  std::vector<std::vector<std::pair<Micros, Micros>>> per(4);
  for (const auto& r : rep.requests) per[static_cast<std::size_t>(r.gpu)].push_back({r.start, r.end});
  for (auto& v : per) {
    std::sort(v.begin(), v.end());
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i].first >= v[i - 1].second);
  }
}

TEST_CASE("native packs whole footprints and rejects the overflow") {
  const auto cat = default_catalog();
  const auto m = model_index(cat, "Bert-qa");
  std::vector<FunctionSpec> fs;
  std::vector<FunctionRate> rates;
  for (std::uint32_t i = 0; i < 80; ++i) {
    fs.push_back({"f" + std::to_string(i), m, 200, 0.98});
    rates.push_back({i, 2});
  }
  EngineConfig cfg;
  cfg.policy = policy_select("native");
  const auto rep = run(cfg, cat, fs, gen_poisson_trace(rates, 5 * 60 * kMicrosPerSec, 4));
  std::size_t served = 0;
  for (const auto& f : rep.functions) served += f.rejected == 0 ? 1 : 0;
  const auto per_gpu = static_cast<std::size_t>(31.0 / 2.4);
  CHECK(served <= 4 * per_gpu);
  CHECK(served >= 4 * (per_gpu - 1));
  for (const auto& f : rep.functions)
    if (f.rejected) CHECK(!f.compliant);
}

TEST_CASE("invalid configuration is rejected") {
  const auto cat = default_catalog();
  std::vector<FunctionSpec> fs = {{"a", 99, 80, 0.98}};
  CHECK_THROWS_AS(Engine(EngineConfig{}, cat, fs), Error);
  EngineConfig cfg;
  cfg.native_alloc_ms = -1;
  CHECK_THROWS_AS(Engine(cfg, cat, {{"a", 0, 80, 0.98}}), Error);
}
