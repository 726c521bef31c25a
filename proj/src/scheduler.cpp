#include "swapsim/scheduler.hpp"

#include <algorithm>
#include <string>
#include <tuple>

#include "swapsim/error.hpp"

namespace swapsim {

const char* to_string(SwapKind k) {
  switch (k) {
    case SwapKind::NoSwap: return "noswap";
    case SwapKind::FromHost: return "fromhost";
    case SwapKind::FromGpu: return "fromgpu";
  }
  return "noswap";
}

NodeState::NodeState(const NodeTopology& t) : topo(&t) {
  gpus.resize(static_cast<std::size_t>(t.gpu_count()));
  for (int g = 0; g < t.gpu_count(); ++g) gpus[static_cast<std::size_t>(g)].id = g;
}

bool NodeState::any_available() const {
  return std::any_of(gpus.begin(), gpus.end(), [](const GpuState& g) { return !g.busy; });
}

bool NodeState::resident(ModelKey m, GpuId g) const { return gpus[static_cast<std::size_t>(g)].resident.count(m) > 0; }

int NodeState::copy_count(ModelKey m) const {
  return static_cast<int>(std::count_if(gpus.begin(), gpus.end(), [&](const GpuState& g) { return g.resident.count(m) > 0; }));
}

bool NodeState::pinned(ModelKey m, GpuId g) const { return gpus[static_cast<std::size_t>(g)].pins.count(m) > 0; }

void NodeState::pin(ModelKey m, GpuId g) { ++gpus[static_cast<std::size_t>(g)].pins[m]; }

void NodeState::unpin(ModelKey m, GpuId g) {
  auto& pins = gpus[static_cast<std::size_t>(g)].pins;
  auto it = pins.find(m);
  require(it != pins.end(), ErrorKind::InvalidState, "unpin of model that is not pinned");
  if (--it->second == 0) pins.erase(it);
}

bool idle_before(const GpuState& a, const GpuState& b) {
  return std::tie(a.idle_since, a.id) < std::tie(b.idle_since, b.id);
}

namespace {

void check_request(const NodeState& s) {
  require(s.any_available(), ErrorKind::Scheduling, "schedule: no available GPU");
}

std::vector<const GpuState*> available_by_idle(const NodeState& s) {
  std::vector<const GpuState*> out;
  for (const auto& g : s.gpus)
    if (!g.busy) out.push_back(&g);
  std::sort(out.begin(), out.end(), [](const GpuState* a, const GpuState* b) { return idle_before(*a, *b); });
  return out;
}

std::optional<Decision> resident_on_available(ModelKey model, const std::vector<const GpuState*>& avail) {
  for (const GpuState* g : avail)
    if (g->resident.count(model)) return Decision{g->id, SwapKind::NoSwap, -1, {}};
  return std::nullopt;
}

}  // namespace

Decision schedule(ModelKey model, const NodeState& s) {
  check_request(s);
  const auto avail = available_by_idle(s);
  if (auto d = resident_on_available(model, avail)) return *d;

  // Copy from a busy holder over the fastest NVLink.
  std::optional<Decision> best;
  int best_class = 0;
  for (const GpuState* dst : avail) {
    for (const auto& src : s.gpus) {
      if (!src.resident.count(model) || src.id == dst->id) continue;
      const int cls = static_cast<int>(s.topo->nvlink_class(src.id, dst->id));
      if (cls == 0) continue;
      // avail is already in preference order and sources are scanned by id,
      // so only a strictly faster link displaces the incumbent.
      if (!best || cls > best_class) {
        best = Decision{dst->id, SwapKind::FromGpu, src.id, {}};
        best_class = cls;
      }
    }
  }
  if (best) return *best;

  // Host swap: avoid GPUs whose PCIe neighbour is loading, then tolerate light loads.
  auto rank = [&](const GpuState* g) {
    int r = 0;
    for (GpuId n : s.topo->neighbors(g->id)) {
      const auto& ld = s.gpus[static_cast<std::size_t>(n)].loading;
      if (!ld) continue;
      r = std::max(r, ld->second == Heaviness::Light ? 1 : 2);
    }
    return r;
  };
  const GpuState* pick = nullptr;
  int pick_rank = 3;
  for (const GpuState* g : avail) {
    const int r = rank(g);
    if (r < pick_rank) {
      pick = g;
      pick_rank = r;
    }
  }
  return Decision{pick->id, SwapKind::FromHost, -1, {}};
}

Decision schedule_random(ModelKey model, const NodeState& s, std::mt19937_64& rng) {
  check_request(s);
  const auto avail = available_by_idle(s);
  if (auto d = resident_on_available(model, avail)) return *d;
  std::vector<GpuId> ids;
  for (const auto& g : s.gpus)
    if (!g.busy) ids.push_back(g.id);
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  return Decision{ids[pick(rng)], SwapKind::FromHost, -1, {}};
}

std::vector<ModelKey> pick_eviction_victims(GpuId gpu, Bytes bytes_needed, const NodeState& s,
                                            const std::vector<ModelInfo>& models, EvictionPolicy policy) {
  require(gpu >= 0 && gpu < static_cast<int>(s.gpus.size()), ErrorKind::InvalidParameter, "gpu id out of range");
  const GpuState& g = s.gpus[static_cast<std::size_t>(gpu)];
  struct Cand {
    int group;
    Micros last_use;
    ModelKey model;
    Bytes bytes;
  };
  std::vector<Cand> cands;
  for (const auto& [m, last] : g.resident) {
    if (g.pins.count(m)) continue;
    require(m < models.size(), ErrorKind::InvalidParameter, "model without info");
    int group = 0;
    if (policy == EvictionPolicy::HeavinessLru && models[m].heaviness == Heaviness::Heavy && s.copy_count(m) < 2)
      group = 1;
    cands.push_back({group, last, m, models[m].bytes});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return std::tie(a.group, a.last_use, a.model) < std::tie(b.group, b.last_use, b.model);
  });
  std::vector<ModelKey> out;
  Bytes freed = 0;
  for (const auto& c : cands) {
    if (freed >= bytes_needed) break;
    out.push_back(c.model);
    freed += c.bytes;
  }
  if (freed < bytes_needed) {
    fail(ErrorKind::Capacity, "cannot free " + std::to_string(bytes_needed) + " bytes on gpu " + std::to_string(gpu));
  }
  return out;
}

void touch(NodeState& s, ModelKey model, GpuId gpu, Micros now) {
  require(gpu >= 0 && gpu < static_cast<int>(s.gpus.size()), ErrorKind::InvalidParameter, "gpu id out of range");
  auto& res = s.gpus[static_cast<std::size_t>(gpu)].resident;
  auto it = res.find(model);
  require(it != res.end(), ErrorKind::InvalidState, "touch: model not resident on gpu " + std::to_string(gpu));
  it->second = now;
}

}  // namespace swapsim
