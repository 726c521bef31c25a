#pragma once

#include <map>
#include <optional>
#include <random>
#include <vector>

#include "swapsim/memory.hpp"
#include "swapsim/topology.hpp"
#include "swapsim/workload.hpp"

namespace swapsim {

enum class SwapKind { NoSwap, FromHost, FromGpu };
const char* to_string(SwapKind k);

struct ModelInfo {
  Bytes bytes = 0;  // GPU bytes one copy occupies
  Heaviness heaviness = Heaviness::Light;
};

struct GpuState {
  GpuId id = 0;
  bool busy = false;
  // In-flight inbound swap, if any.
  std::optional<std::pair<ModelKey, Heaviness>> loading;
  std::map<ModelKey, Micros> resident;  // model -> last use
  std::map<ModelKey, int> pins;         // in use, loading, or being copied from
  Micros idle_since = 0;
};

struct NodeState {
  const NodeTopology* topo = nullptr;
  std::vector<GpuState> gpus;

  explicit NodeState(const NodeTopology& t);
  bool available(GpuId g) const { return !gpus[static_cast<std::size_t>(g)].busy; }
  bool any_available() const;
  bool resident(ModelKey m, GpuId g) const;
  int copy_count(ModelKey m) const;
  bool pinned(ModelKey m, GpuId g) const;
  void pin(ModelKey m, GpuId g);
  void unpin(ModelKey m, GpuId g);
};

struct Eviction {
  ModelKey model = 0;
  GpuId gpu = 0;
  bool operator==(const Eviction&) const = default;
};

struct Decision {
  GpuId gpu = 0;
  SwapKind kind = SwapKind::NoSwap;
  GpuId src = -1;  // FromGpu only
  std::vector<Eviction> evictions;
  bool operator==(const Decision&) const = default;
};

// Ties among equally good GPUs go to the one idle the longest, then the lowest id.
bool idle_before(const GpuState& a, const GpuState& b);

// Interference-aware placement.
Decision schedule(ModelKey model, const NodeState& state);
// Baseline: never copies over NVLink, random GPU for host swaps.
Decision schedule_random(ModelKey model, const NodeState& state, std::mt19937_64& rng);

enum class EvictionPolicy { HeavinessLru, PlainLru };

// Minimal LRU prefix covering bytes_needed, low-priority group first.
std::vector<ModelKey> pick_eviction_victims(GpuId gpu, Bytes bytes_needed, const NodeState& state,
                                            const std::vector<ModelInfo>& models,
                                            EvictionPolicy policy = EvictionPolicy::HeavinessLru);

void touch(NodeState& state, ModelKey model, GpuId gpu, Micros now);

}  // namespace swapsim
