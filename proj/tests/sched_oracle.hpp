#pragma once

#include <algorithm>
#include <limits>
#include <tuple>
#include <vector>

#include "swapsim/scheduler.hpp"

// Brute-force reference for the interference-aware placement: enumerate every
// feasible decision, score it, take the minimum.
namespace oracle {

using namespace swapsim;

struct Scored {
  std::tuple<int, int, Micros, GpuId, GpuId> key;
  Decision d;
};

inline int neighbor_load(const NodeState& s, GpuId g) {
  int r = 0;
  for (GpuId n : s.topo->neighbors(g)) {
    const auto& ld = s.gpus[static_cast<std::size_t>(n)].loading;
    if (ld) r = std::max(r, ld->second == Heaviness::Heavy ? 2 : 1);
  }
  return r;
}

inline Decision schedule(ModelKey model, const NodeState& s) {
  std::vector<Scored> all;
  for (const auto& dst : s.gpus) {
    if (dst.busy) continue;
    if (dst.resident.count(model)) {
      all.push_back({{0, 0, dst.idle_since, dst.id, -1}, {dst.id, SwapKind::NoSwap, -1, {}}});
      continue;
    }
    for (const auto& src : s.gpus) {
      if (src.id == dst.id || !src.resident.count(model)) continue;
      const auto cls = s.topo->nvlink_class(src.id, dst.id);
      if (cls == NvLinkClass::None) continue;
      const int speed = cls == NvLinkClass::Fast ? 0 : 1;
      all.push_back({{1, speed, dst.idle_since, dst.id, src.id}, {dst.id, SwapKind::FromGpu, src.id, {}}});
    }
    all.push_back({{2, neighbor_load(s, dst.id), dst.idle_since, dst.id, -1}, {dst.id, SwapKind::FromHost, -1, {}}});
  }
  const auto best = std::min_element(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.key < b.key; });
  return best->d;
}

inline std::vector<ModelKey> victims(GpuId gpu, Bytes need, const NodeState& s, const std::vector<ModelInfo>& info,
                                     bool heaviness_aware) {
  const auto& g = s.gpus[static_cast<std::size_t>(gpu)];
  std::vector<std::pair<Micros, ModelKey>> low, high;
  for (const auto& [m, t] : g.resident) {
    if (g.pins.count(m)) continue;
    int copies = 0;
    for (const auto& o : s.gpus) copies += o.resident.count(m) ? 1 : 0;
    const bool protect = heaviness_aware && info[m].heaviness == Heaviness::Heavy && copies == 1;
    (protect ? high : low).push_back({t, m});
  }
  std::sort(low.begin(), low.end());
  std::sort(high.begin(), high.end());
  std::vector<ModelKey> out;
  Bytes freed = 0;
  for (const auto* group : {&low, &high}) {
    for (const auto& [t, m] : *group) {
      if (freed >= need) return out;
      out.push_back(m);
      freed += info[m].bytes;
    }
  }
  return out;
}

}  // namespace oracle
