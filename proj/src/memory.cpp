#include "swapsim/memory.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "swapsim/error.hpp"

namespace swapsim {

const char* to_string(PartitionKind k) {
  switch (k) {
    case PartitionKind::Unassigned: return "unassigned";
    case PartitionKind::Reserved: return "reserved";
    case PartitionKind::FixedPool: return "fixed";
    case PartitionKind::Buddy: return "buddy";
  }
  return "unassigned";
}

namespace {

constexpr int kBlockGpuShift = 48;

GpuId gpu_of(BlockId id) { return static_cast<GpuId>(id >> kBlockGpuShift) - 1; }

[[noreturn]] void broken(const std::string& what) { fail(ErrorKind::InvariantViolation, what); }

}  // namespace

MemoryManager::MemoryManager(const NodeTopology& topo, MemoryConfig cfg) : cfg_(cfg) {
  init(topo.gpu_count(), cfg_.gpu_memory_override ? cfg_.gpu_memory_override : topo.gpu_memory());
}

MemoryManager::MemoryManager(int gpu_count, Bytes gpu_memory, MemoryConfig cfg) : cfg_(cfg) {
  init(gpu_count, gpu_memory);
}

void MemoryManager::init(int gpu_count, Bytes gpu_memory) {
  require(gpu_count >= 1, ErrorKind::InvalidParameter, "memory: gpu count must be >= 1");
  require(cfg_.partition_size > 0, ErrorKind::InvalidParameter, "memory.partition_size must be > 0");
  require(cfg_.fixed_block > 0, ErrorKind::InvalidParameter, "memory.fixed_block must be > 0");
  require(cfg_.buddy_min > 0, ErrorKind::InvalidParameter, "memory.buddy_min must be > 0");
  require(cfg_.runtime_reserve < gpu_memory, ErrorKind::InvalidParameter, "memory.runtime_reserve exceeds GPU memory");
  require(cfg_.fixed_block <= cfg_.partition_size, ErrorKind::InvalidParameter,
          "memory.fixed_block must not exceed memory.partition_size");
  require(cfg_.partition_size % cfg_.buddy_min == 0 && cfg_.fixed_block % cfg_.buddy_min == 0,
          ErrorKind::InvalidParameter, "memory.buddy_min must divide partition and fixed block sizes");
  gpu_memory_ = gpu_memory;
  partitions_per_gpu_ = static_cast<std::size_t>(gpu_memory / cfg_.partition_size);
  // Slack past the last whole partition counts toward the reserve.
  const auto usable_parts = static_cast<std::size_t>((gpu_memory - cfg_.runtime_reserve) / cfg_.partition_size);
  require(usable_parts >= 1, ErrorKind::InvalidParameter, "memory.runtime_reserve leaves no usable partitions");
  reserved_partitions_ = partitions_per_gpu_ - usable_parts;
  slots_ = static_cast<std::size_t>(cfg_.partition_size / cfg_.fixed_block);
  max_order_ = 0;
  while ((cfg_.buddy_min << (max_order_ + 1)) <= cfg_.partition_size) ++max_order_;

  gpus_.assign(static_cast<std::size_t>(gpu_count), GpuPool{});
  for (auto& gp : gpus_) {
    gp.parts.resize(partitions_per_gpu_);
    for (std::size_t i = 0; i < reserved_partitions_; ++i) gp.parts[i].kind = PartitionKind::Reserved;
  }
  after_mutation();
}

MemoryManager::GpuPool& MemoryManager::pool(GpuId gpu) {
  require(gpu >= 0 && gpu < gpu_count(), ErrorKind::InvalidParameter, "gpu id out of range");
  return gpus_[static_cast<std::size_t>(gpu)];
}

const MemoryManager::GpuPool& MemoryManager::pool(GpuId gpu) const {
  require(gpu >= 0 && gpu < gpu_count(), ErrorKind::InvalidParameter, "gpu id out of range");
  return gpus_[static_cast<std::size_t>(gpu)];
}

Bytes MemoryManager::buddy_region_start(PartitionKind kind) const {
  return kind == PartitionKind::FixedPool ? static_cast<Bytes>(slots_) * cfg_.fixed_block : 0;
}

int MemoryManager::order_for(Bytes size) const {
  int k = 0;
  while (order_size(k) < size) {
    ++k;
    if (k > max_order_) fail(ErrorKind::Oversize, "block of " + std::to_string(size) + " bytes exceeds partition");
  }
  return k;
}

void MemoryManager::assign(PartitionState& p, PartitionKind kind) const {
  p.kind = kind;
  p.slots.assign(kind == PartitionKind::FixedPool ? slots_ : 0, 0);
  p.slots_used = 0;
  p.free_by_order.assign(static_cast<std::size_t>(max_order_ + 1), {});
  p.buddy_used.clear();
  p.buddy_free = 0;
  // Carve the buddy region into maximal aligned blocks.
  Bytes o = buddy_region_start(kind);
  const Bytes end = cfg_.partition_size;
  while (o < end) {
    int k = max_order_;
    while (k > 0 && (o % order_size(k) != 0 || o + order_size(k) > end)) --k;
    p.free_by_order[static_cast<std::size_t>(k)].insert(o);
    p.buddy_free += order_size(k);
    o += order_size(k);
  }
}

void MemoryManager::maybe_release(PartitionState& p) const {
  if (p.kind != PartitionKind::FixedPool && p.kind != PartitionKind::Buddy) return;
  if (p.slots_used != 0 || !p.buddy_used.empty()) return;
  p.kind = PartitionKind::Unassigned;
  p.slots.clear();
  p.free_by_order.clear();
  p.buddy_free = 0;
  p.owner_blocks.clear();
}

int MemoryManager::smallest_fit_order(const PartitionState& p, int order) const {
  if (p.kind != PartitionKind::FixedPool && p.kind != PartitionKind::Buddy) return -1;
  for (int j = order; j <= max_order_; ++j)
    if (!p.free_by_order[static_cast<std::size_t>(j)].empty()) return j;
  return -1;
}

bool MemoryManager::buddy_can_fit(const PartitionState& p, int order) const {
  return smallest_fit_order(p, order) >= 0;
}

std::optional<BlockId> MemoryManager::alloc_in(GpuPool& gp, GpuId gpu, int part, Bytes size,
                                               std::optional<ModelKey> owner) {
  PartitionState& p = gp.parts[static_cast<std::size_t>(part)];
  ++gp.version;
  Block b;
  b.gpu = gpu;
  b.partition = part;
  b.requested = size;
  b.owner = owner;
  if (size == cfg_.fixed_block && p.kind == PartitionKind::FixedPool && p.slots_used < p.slots.size()) {
    const auto it = std::find(p.slots.begin(), p.slots.end(), BlockId{0});
    const auto slot = static_cast<std::size_t>(it - p.slots.begin());
    b.offset = partition_base(part) + slot * cfg_.fixed_block;
    b.size = cfg_.fixed_block;
    b.id = (static_cast<BlockId>(gpu + 1) << kBlockGpuShift) | next_block_++;
    *it = b.id;
    ++p.slots_used;
  } else {
    const int k = order_for(size);
    int j = smallest_fit_order(p, k);
    if (j < 0) return std::nullopt;
    auto& list = p.free_by_order[static_cast<std::size_t>(j)];
    const Bytes off = *list.begin();
    list.erase(list.begin());
    while (j > k) {
      --j;
      p.free_by_order[static_cast<std::size_t>(j)].insert(off + order_size(j));
    }
    p.buddy_used[off] = k;
    p.buddy_free -= order_size(k);
    b.offset = partition_base(part) + off;
    b.size = order_size(k);
    b.id = (static_cast<BlockId>(gpu + 1) << kBlockGpuShift) | next_block_++;
  }
  p.used += b.size;
  if (owner) ++p.owner_blocks[*owner];
  gp.allocated += b.size;
  gp.requested += b.requested;
  gp.blocks.emplace(b.id, b);
  return b.id;
}

std::optional<BlockId> MemoryManager::alloc_fixed(GpuPool& gp, GpuId gpu, std::optional<ModelKey> owner,
                                                  std::size_t remaining_hint, int preferred) {
  auto free_slots = [&](const PartitionState& p) { return p.slots.size() - p.slots_used; };
  if (preferred >= 0) {
    const auto& p = gp.parts[static_cast<std::size_t>(preferred)];
    if (p.kind == PartitionKind::FixedPool && free_slots(p) > 0)
      return alloc_in(gp, gpu, preferred, cfg_.fixed_block, owner);
  }
  int best = -1;
  std::size_t best_free = 0;
  for (std::size_t i = 0; i < gp.parts.size(); ++i) {
    const auto& p = gp.parts[i];
    if (p.kind != PartitionKind::FixedPool || static_cast<int>(i) == excluded_) continue;
    const std::size_t f = free_slots(p);
    if (f >= remaining_hint && (best < 0 || f < best_free)) {
      best = static_cast<int>(i);
      best_free = f;
    }
  }
  if (best < 0 && !no_claim_) {
    for (std::size_t i = 0; i < gp.parts.size(); ++i) {
      if (gp.parts[i].kind == PartitionKind::Unassigned && static_cast<int>(i) != excluded_) {
        assign(gp.parts[i], PartitionKind::FixedPool);
        best = static_cast<int>(i);
        break;
      }
    }
  }
  if (best < 0) {
    for (std::size_t i = 0; i < gp.parts.size(); ++i) {
      const auto& p = gp.parts[i];
      if (p.kind != PartitionKind::FixedPool || static_cast<int>(i) == excluded_) continue;
      const std::size_t f = free_slots(p);
      if (f > 0 && (best < 0 || f > best_free)) {
        best = static_cast<int>(i);
        best_free = f;
      }
    }
  }
  if (best < 0) return std::nullopt;
  return alloc_in(gp, gpu, best, cfg_.fixed_block, owner);
}

std::optional<BlockId> MemoryManager::alloc_buddy(GpuPool& gp, GpuId gpu, Bytes size, std::optional<ModelKey> owner,
                                                  const std::vector<int>& preferred) {
  const int k = order_for(size);
  for (int part : preferred) {
    if (part != excluded_ && buddy_can_fit(gp.parts[static_cast<std::size_t>(part)], k))
      return alloc_in(gp, gpu, part, size, owner);
  }
  int best = -1;
  int best_order = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < gp.parts.size(); ++i) {
    if (static_cast<int>(i) == excluded_) continue;
    const int j = smallest_fit_order(gp.parts[i], k);
    if (j >= 0 && j < best_order) {
      best = static_cast<int>(i);
      best_order = j;
    }
  }
  if (best < 0 && !no_claim_) {
    for (std::size_t i = 0; i < gp.parts.size(); ++i) {
      if (gp.parts[i].kind == PartitionKind::Unassigned && static_cast<int>(i) != excluded_) {
        assign(gp.parts[i], PartitionKind::Buddy);
        best = static_cast<int>(i);
        break;
      }
    }
  }
  if (best < 0) return std::nullopt;
  return alloc_in(gp, gpu, best, size, owner);
}

std::optional<Block> MemoryManager::alloc_block(GpuId gpu, Bytes size, std::optional<ModelKey> owner) {
  require(size > 0, ErrorKind::InvalidParameter, "alloc_block: size must be > 0");
  if (size > cfg_.partition_size) fail(ErrorKind::Oversize, "alloc_block: size exceeds partition size");
  GpuPool& gp = pool(gpu);
  std::optional<BlockId> id = size == cfg_.fixed_block ? alloc_fixed(gp, gpu, owner, 1, -1)
                                                       : alloc_buddy(gp, gpu, size, owner, {});
  after_mutation();
  if (!id) return std::nullopt;
  return gp.blocks.at(*id);
}

void MemoryManager::release(GpuPool& gp, BlockId id) {
  auto it = gp.blocks.find(id);
  if (it == gp.blocks.end()) broken("free of unallocated block " + std::to_string(id));
  const Block b = it->second;
  ++gp.version;
  PartitionState& p = gp.parts[static_cast<std::size_t>(b.partition)];
  const Bytes rel = b.offset - partition_base(b.partition);
  if (p.kind == PartitionKind::FixedPool && rel < buddy_region_start(p.kind)) {
    const auto slot = static_cast<std::size_t>(rel / cfg_.fixed_block);
    if (p.slots[slot] != id) broken("slot bookkeeping mismatch");
    p.slots[slot] = 0;
    --p.slots_used;
  } else {
    auto u = p.buddy_used.find(rel);
    if (u == p.buddy_used.end()) broken("buddy bookkeeping mismatch");
    int k = u->second;
    p.buddy_used.erase(u);
    p.buddy_free += order_size(k);
    Bytes off = rel;
    while (k < max_order_) {
      const Bytes buddy = off ^ order_size(k);
      auto& list = p.free_by_order[static_cast<std::size_t>(k)];
      auto f = list.find(buddy);
      if (f == list.end()) break;
      list.erase(f);
      off = std::min(off, buddy);
      ++k;
    }
    p.free_by_order[static_cast<std::size_t>(k)].insert(off);
  }
  p.used -= b.size;
  if (b.owner) {
    auto o = p.owner_blocks.find(*b.owner);
    if (--o->second == 0) p.owner_blocks.erase(o);
  }
  gp.allocated -= b.size;
  gp.requested -= b.requested;
  gp.blocks.erase(it);
  maybe_release(p);
}

void MemoryManager::free_block(BlockId id) {
  const GpuId gpu = gpu_of(id);
  if (gpu < 0 || gpu >= gpu_count()) broken("free of unallocated block " + std::to_string(id));
  GpuPool& gp = pool(gpu);
  auto it = gp.blocks.find(id);
  if (it == gp.blocks.end()) broken("free of unallocated block " + std::to_string(id));
  if (it->second.mapped) fail(ErrorKind::InvalidState, "block belongs to a loaded model; use evict_model");
  release(gp, id);
  after_mutation();
}

const Block& MemoryManager::block(BlockId id) const {
  const GpuId gpu = gpu_of(id);
  if (gpu < 0 || gpu >= gpu_count()) fail(ErrorKind::InvalidParameter, "unknown block");
  const auto& gp = pool(gpu);
  auto it = gp.blocks.find(id);
  if (it == gp.blocks.end()) fail(ErrorKind::InvalidParameter, "unknown block");
  return it->second;
}

std::optional<LoadResult> MemoryManager::load_model(ModelKey model, const std::vector<Bytes>& sizes, GpuId gpu) {
  GpuPool& gp = pool(gpu);
  require(!sizes.empty(), ErrorKind::InvalidParameter, "load_model: empty block list");
  if (gp.copies.count(model)) fail(ErrorKind::InvalidState, "model already resident on gpu " + std::to_string(gpu));
  for (Bytes s : sizes) {
    require(s > 0, ErrorKind::InvalidParameter, "load_model: empty block");
    if (s > cfg_.partition_size) fail(ErrorKind::Oversize, "load_model: block exceeds partition size");
  }
  auto lay = layouts_.find(model);
  if (lay != layouts_.end()) {
    require(lay->second.sizes == sizes, ErrorKind::InvalidState, "load_model: block list differs from earlier load");
  }

  std::size_t fixed_left = static_cast<std::size_t>(std::count(sizes.begin(), sizes.end(), cfg_.fixed_block));
  std::vector<BlockId> ids;
  std::vector<int> used_parts;
  int current = -1;
  bool ok = true;
  for (Bytes s : sizes) {
    std::optional<BlockId> id;
    if (s == cfg_.fixed_block) {
      id = alloc_fixed(gp, gpu, model, fixed_left, current);
      if (id) {
        --fixed_left;
        current = gp.blocks.at(*id).partition;
      }
    } else {
      id = alloc_buddy(gp, gpu, s, model, used_parts);
    }
    if (!id) {
      ok = false;
      break;
    }
    ids.push_back(*id);
    const int part = gp.blocks.at(*id).partition;
    if (std::find(used_parts.begin(), used_parts.end(), part) == used_parts.end()) used_parts.push_back(part);
  }
  if (!ok) {
    for (auto it = ids.rbegin(); it != ids.rend(); ++it) release(gp, *it);
    after_mutation();
    return std::nullopt;
  }
  if (lay == layouts_.end()) {
    Layout l;
    l.sizes = sizes;
    Bytes base = static_cast<Bytes>(model + 1) << 40;
    for (Bytes s : sizes) {
      l.bases.push_back(base);
      base += s;
    }
    layouts_.emplace(model, std::move(l));
  }
  for (BlockId id : ids) gp.blocks.at(id).mapped = true;
  gp.copies.emplace(model, std::move(ids));
  host_.insert(model);
  after_mutation();
  return LoadResult{0, static_cast<int>(used_parts.size())};
}

Bytes MemoryManager::evict_model(ModelKey model, GpuId gpu) {
  GpuPool& gp = pool(gpu);
  auto it = gp.copies.find(model);
  if (it == gp.copies.end()) fail(ErrorKind::InvalidState, "model not resident on gpu " + std::to_string(gpu));
  Bytes freed = 0;
  for (BlockId id : it->second) {
    freed += gp.blocks.at(id).requested;
    release(gp, id);
  }
  gp.copies.erase(it);
  after_mutation();
  return freed;
}

bool MemoryManager::resident(ModelKey model, GpuId gpu) const { return pool(gpu).copies.count(model) > 0; }

bool MemoryManager::host_resident(ModelKey model) const { return host_.count(model) > 0; }

std::vector<GpuId> MemoryManager::copies(ModelKey model) const {
  std::vector<GpuId> out;
  for (GpuId g = 0; g < gpu_count(); ++g)
    if (resident(model, g)) out.push_back(g);
  return out;
}

Bytes MemoryManager::logical_base(ModelKey model) const {
  auto it = layouts_.find(model);
  if (it == layouts_.end()) fail(ErrorKind::TranslationFault, "model has no logical mapping");
  return it->second.bases.front();
}

Translation MemoryManager::translate(ModelKey model, Bytes logical, std::optional<GpuId> gpu) const {
  auto lay = layouts_.find(model);
  if (lay == layouts_.end()) fail(ErrorKind::TranslationFault, "model has no logical mapping");
  const auto& bases = lay->second.bases;
  auto ub = std::upper_bound(bases.begin(), bases.end(), logical);
  if (ub == bases.begin()) fail(ErrorKind::TranslationFault, "address below mapped range");
  const auto idx = static_cast<std::size_t>(ub - bases.begin()) - 1;
  const Bytes delta = logical - bases[idx];
  if (delta >= lay->second.sizes[idx]) fail(ErrorKind::TranslationFault, "address past block end");
  GpuId g = -1;
  if (gpu) {
    g = *gpu;
    if (!resident(model, g)) fail(ErrorKind::TranslationFault, "model not resident on requested gpu");
  } else {
    for (GpuId c = 0; c < gpu_count() && g < 0; ++c)
      if (resident(model, c)) g = c;
    if (g < 0) fail(ErrorKind::TranslationFault, "model not resident on any gpu");
  }
  const BlockId id = pool(g).copies.at(model)[idx];
  return {g, pool(g).blocks.at(id).offset + delta};
}

std::vector<Mapping> MemoryManager::block_map(ModelKey model) const {
  std::vector<Mapping> out;
  auto lay = layouts_.find(model);
  if (lay == layouts_.end()) return out;
  for (GpuId g = 0; g < gpu_count(); ++g) {
    auto c = pool(g).copies.find(model);
    if (c == pool(g).copies.end()) continue;
    for (std::size_t i = 0; i < c->second.size(); ++i) {
      const Block& b = pool(g).blocks.at(c->second[i]);
      out.push_back({lay->second.bases[i], lay->second.sizes[i], g, b.offset, b.id});
    }
  }
  return out;
}

bool MemoryManager::relocate_model(ModelKey model, GpuId from, GpuId to) {
  require(from != to, ErrorKind::InvalidParameter, "relocate_model: source equals destination");
  if (!resident(model, from)) fail(ErrorKind::InvalidState, "relocate_model: model not resident on source");
  if (!load_model(model, layouts_.at(model).sizes, to)) return false;
  evict_model(model, from);
  return true;
}

double MemoryManager::contiguity(const GpuPool& gp) const {
  std::vector<std::pair<Bytes, Bytes>> free;  // [begin, end)
  for (std::size_t i = 0; i < gp.parts.size(); ++i) {
    const auto& p = gp.parts[i];
    const Bytes base = partition_base(static_cast<int>(i));
    if (p.kind == PartitionKind::Unassigned) {
      free.emplace_back(base, base + cfg_.partition_size);
      continue;
    }
    if (p.kind == PartitionKind::Reserved) continue;
    for (std::size_t s = 0; s < p.slots.size(); ++s) {
      if (p.slots[s] == 0) free.emplace_back(base + s * cfg_.fixed_block, base + (s + 1) * cfg_.fixed_block);
    }
    for (std::size_t k = 0; k < p.free_by_order.size(); ++k) {
      for (Bytes off : p.free_by_order[k]) free.emplace_back(base + off, base + off + order_size(static_cast<int>(k)));
    }
  }
  std::sort(free.begin(), free.end());
  Bytes total = 0, largest = 0, run = 0, run_end = 0;
  for (const auto& [b, e] : free) {
    total += e - b;
    run = (run > 0 && b == run_end) ? run + (e - b) : (e - b);
    run_end = e;
    largest = std::max(largest, run);
  }
  return total == 0 ? 1.0 : static_cast<double>(largest) / static_cast<double>(total);
}

bool MemoryManager::evacuate(GpuPool& gp, GpuId gpu, int source, int& moved) {
  std::vector<BlockId> ids;
  for (const auto& [id, b] : gp.blocks) {
    if (b.partition != source) continue;
    if (!b.mapped) return false;
    ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end(),
            [&](BlockId a, BlockId b) { return gp.blocks.at(a).offset < gp.blocks.at(b).offset; });
  const GpuPool snapshot = gp;
  const double before = contiguity(gp);

  excluded_ = source;
  no_claim_ = true;
  bool ok = true;
  for (BlockId id : ids) {
    const Block old = gp.blocks.at(id);
    std::vector<int> preferred;
    if (old.owner) {
      for (std::size_t i = 0; i < gp.parts.size(); ++i)
        if (static_cast<int>(i) != source && gp.parts[i].owner_blocks.count(*old.owner))
          preferred.push_back(static_cast<int>(i));
    }
    std::optional<BlockId> fresh;
    if (old.requested == cfg_.fixed_block) {
      fresh = alloc_fixed(gp, gpu, old.owner, 1, preferred.empty() ? -1 : preferred.front());
    } else {
      fresh = alloc_buddy(gp, gpu, old.requested, old.owner, preferred);
    }
    if (!fresh) {
      ok = false;
      break;
    }
    gp.blocks.at(*fresh).mapped = true;
    auto& copy = gp.copies.at(*old.owner);
    std::replace(copy.begin(), copy.end(), id, *fresh);
    release(gp, id);
  }
  excluded_ = -1;
  no_claim_ = false;
  if (ok && contiguity(gp) + 1e-12 < before) ok = false;
  if (!ok) {
    gp = snapshot;
    return false;
  }
  moved += static_cast<int>(ids.size());
  return true;
}

// Necessary conditions only: enough free fixed slots and buddy bytes outside the source.
bool MemoryManager::may_evacuate(const GpuPool& gp, int source) const {
  std::size_t fixed_needed = 0;
  Bytes buddy_needed = 0;
  const auto& src = gp.parts[static_cast<std::size_t>(source)];
  if (src.kind == PartitionKind::FixedPool) fixed_needed = src.slots_used;
  buddy_needed = src.used - static_cast<Bytes>(fixed_needed) * cfg_.fixed_block;
  std::size_t fixed_free = 0;
  Bytes buddy_free = 0;
  for (std::size_t i = 0; i < gp.parts.size(); ++i) {
    if (static_cast<int>(i) == source) continue;
    const auto& p = gp.parts[i];
    if (p.kind == PartitionKind::FixedPool) fixed_free += slots_ - p.slots_used;
    if (p.kind == PartitionKind::FixedPool || p.kind == PartitionKind::Buddy) buddy_free += p.buddy_free;
  }
  return fixed_needed <= fixed_free && buddy_needed <= buddy_free;
}

Bytes usable_model_memory(Bytes gpu_memory, const MemoryConfig& cfg) {
  if (cfg.partition_size == 0 || cfg.runtime_reserve >= gpu_memory) return 0;
  return (gpu_memory - cfg.runtime_reserve) / cfg.partition_size * cfg.partition_size;
}

bool MemoryManager::consolidate_round(GpuPool& gp, GpuId gpu, int& moved) {
  std::vector<int> cand;
  Bytes spare_total = 0;
  for (std::size_t i = 0; i < gp.parts.size(); ++i) {
    const auto& p = gp.parts[i];
    if (p.kind != PartitionKind::FixedPool && p.kind != PartitionKind::Buddy) continue;
    cand.push_back(static_cast<int>(i));
    spare_total += cfg_.partition_size - p.used;
  }
  std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) {
    return gp.parts[static_cast<std::size_t>(a)].used < gp.parts[static_cast<std::size_t>(b)].used;
  });
  for (int c : cand) {
    const auto& p = gp.parts[static_cast<std::size_t>(c)];
    const Bytes spare_elsewhere = spare_total - (cfg_.partition_size - p.used);
    if (p.used > spare_elsewhere || !may_evacuate(gp, c)) continue;
    if (evacuate(gp, gpu, c, moved)) return true;
  }
  return false;
}

int MemoryManager::consolidate(GpuId gpu) {
  GpuPool& gp = pool(gpu);
  int moved = 0;
  if (gp.settled == gp.version) return 0;
  for (std::size_t round = 0; round < gp.parts.size(); ++round) {
    if (!consolidate_round(gp, gpu, moved)) break;
  }
  gp.settled = gp.version;
  after_mutation();
  return moved;
}

Bytes MemoryManager::usable_bytes(GpuId gpu) const {
  pool(gpu);
  return usable_model_memory(gpu_memory_, cfg_);
}

Bytes MemoryManager::free_bytes(GpuId gpu) const { return usable_bytes(gpu) - pool(gpu).allocated; }

Bytes MemoryManager::allocated_bytes(GpuId gpu) const { return pool(gpu).allocated; }

MemoryStats MemoryManager::stats(GpuId gpu) const {
  const GpuPool& gp = pool(gpu);
  MemoryStats s;
  s.capacity = gpu_memory_;
  s.reserved = gpu_memory_ - usable_model_memory(gpu_memory_, cfg_);
  s.allocated = gp.allocated;
  s.requested = gp.requested;
  s.free = free_bytes(gpu);
  s.contiguity = contiguity(gp);
  s.fragmentation = 1.0 - s.contiguity;
  for (const auto& p : gp.parts) {
    if (p.kind == PartitionKind::FixedPool) ++s.fixed_partitions;
    if (p.kind == PartitionKind::Buddy) ++s.buddy_partitions;
    if (p.kind == PartitionKind::Unassigned) ++s.unassigned_partitions;
  }
  return s;
}

std::vector<MemoryPartition> MemoryManager::partitions(GpuId gpu) const {
  const GpuPool& gp = pool(gpu);
  std::vector<MemoryPartition> out;
  for (std::size_t i = 0; i < gp.parts.size(); ++i)
    out.push_back({gpu, partition_base(static_cast<int>(i)), cfg_.partition_size, gp.parts[i].kind});
  return out;
}

std::vector<Block> MemoryManager::blocks(GpuId gpu) const {
  std::vector<Block> out;
  for (const auto& [id, b] : pool(gpu).blocks) out.push_back(b);
  std::sort(out.begin(), out.end(), [](const Block& a, const Block& b) { return a.offset < b.offset; });
  return out;
}

void MemoryManager::after_mutation() const {
  if (cfg_.check_invariants) check_invariants();
}

void MemoryManager::check_pool(GpuId gpu, const GpuPool& gp) const {
  std::vector<const Block*> sorted;
  Bytes allocated = 0, requested = 0;
  std::vector<Bytes> used(gp.parts.size(), 0);
  std::vector<std::map<ModelKey, int>> owners(gp.parts.size());
  for (const auto& [id, b] : gp.blocks) {
    if (b.id != id || b.gpu != gpu) broken("block identity mismatch");
    if (b.partition < 0 || static_cast<std::size_t>(b.partition) >= gp.parts.size()) broken("bad partition index");
    const auto& p = gp.parts[static_cast<std::size_t>(b.partition)];
    const Bytes base = partition_base(b.partition);
    if (b.offset < base || b.offset + b.size > base + cfg_.partition_size) broken("block outside its partition");
    if (p.kind != PartitionKind::FixedPool && p.kind != PartitionKind::Buddy) broken("block in unusable partition");
    if (b.requested == 0 || b.requested > b.size) broken("block smaller than request");
    const Bytes rel = b.offset - base;
    if (p.kind == PartitionKind::FixedPool && rel < buddy_region_start(p.kind)) {
      if (rel % cfg_.fixed_block || b.size != cfg_.fixed_block) broken("misaligned pool block");
      if (p.slots[static_cast<std::size_t>(rel / cfg_.fixed_block)] != id) broken("slot table mismatch");
    } else {
      auto u = p.buddy_used.find(rel);
      if (u == p.buddy_used.end() || order_size(u->second) != b.size) broken("buddy table mismatch");
      if (rel % b.size) broken("misaligned buddy block");
    }
    allocated += b.size;
    requested += b.requested;
    used[static_cast<std::size_t>(b.partition)] += b.size;
    if (b.owner) ++owners[static_cast<std::size_t>(b.partition)][*b.owner];
    sorted.push_back(&b);
  }
  std::sort(sorted.begin(), sorted.end(), [](const Block* a, const Block* b) { return a->offset < b->offset; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1]->offset + sorted[i - 1]->size > sorted[i]->offset) broken("allocated blocks overlap");
  }
  if (allocated != gp.allocated || requested != gp.requested) broken("allocation totals drifted");

  Bytes free_total = 0;
  for (std::size_t i = 0; i < gp.parts.size(); ++i) {
    const auto& p = gp.parts[i];
    if (i < reserved_partitions_) {
      if (p.kind != PartitionKind::Reserved) broken("reserved partition reassigned");
      continue;
    }
    if (p.kind == PartitionKind::Reserved) broken("unexpected reserved partition");
    if (p.kind == PartitionKind::Unassigned) {
      if (used[i] != 0 || !p.owner_blocks.empty()) broken("unassigned partition holds blocks");
      free_total += cfg_.partition_size;
      continue;
    }
    if (used[i] != p.used) broken("partition usage drifted");
    if (owners[i] != p.owner_blocks) broken("partition owner counts drifted");
    if (used[i] == 0) broken("empty partition not reclaimed");
    std::size_t slots_used = 0;
    for (BlockId s : p.slots) {
      if (s) {
        ++slots_used;
      } else {
        free_total += cfg_.fixed_block;
      }
    }
    if (slots_used != p.slots_used) broken("slot count drifted");
    // Buddy region must be tiled exactly by used and free blocks.
    std::vector<std::pair<Bytes, Bytes>> tiles;
    Bytes bfree = 0;
    for (std::size_t k = 0; k < p.free_by_order.size(); ++k) {
      for (Bytes off : p.free_by_order[k]) {
        const Bytes sz = order_size(static_cast<int>(k));
        tiles.emplace_back(off, off + sz);
        bfree += sz;
        if (k + 1 < p.free_by_order.size() && p.free_by_order[k].count(off ^ sz)) broken("free buddies not merged");
      }
    }
    for (const auto& [off, k] : p.buddy_used) tiles.emplace_back(off, off + order_size(k));
    std::sort(tiles.begin(), tiles.end());
    Bytes cursor = buddy_region_start(p.kind);
    for (const auto& [b, e] : tiles) {
      if (b != cursor) broken("buddy region not tiled");
      cursor = e;
    }
    if (cursor != cfg_.partition_size) broken("buddy region not tiled");
    if (bfree != p.buddy_free) broken("buddy free count drifted");
    free_total += bfree;
  }
  if (free_total + gp.allocated != usable_bytes(gpu)) broken("allocated + free != usable capacity");

  for (const auto& [model, ids] : gp.copies) {
    auto lay = layouts_.find(model);
    if (lay == layouts_.end() || lay->second.sizes.size() != ids.size()) broken("copy without layout");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = gp.blocks.find(ids[i]);
      if (it == gp.blocks.end()) broken("mapped block not allocated");
      if (it->second.owner != model || it->second.requested != lay->second.sizes[i] || !it->second.mapped)
        broken("mapping mismatch");
    }
    if (!host_.count(model)) broken("loaded model missing host copy");
  }
}

void MemoryManager::check_invariants() const {
  for (GpuId g = 0; g < gpu_count(); ++g) check_pool(g, gpus_[static_cast<std::size_t>(g)]);
}

BlockCacheMemory::BlockCacheMemory(int gpu_count, Bytes gpu_memory, Bytes runtime_reserve)
    : capacity_(gpu_memory), reserve_(runtime_reserve) {
  require(gpu_count >= 1, ErrorKind::InvalidParameter, "memory: gpu count must be >= 1");
  require(runtime_reserve < gpu_memory, ErrorKind::InvalidParameter, "memory.runtime_reserve exceeds GPU memory");
  usable_ = gpu_memory - runtime_reserve;
  gpus_.resize(static_cast<std::size_t>(gpu_count));
}

std::optional<LoadResult> BlockCacheMemory::load_model(ModelKey model, const std::vector<Bytes>& blocks, GpuId gpu) {
  require(gpu >= 0 && gpu < gpu_count(), ErrorKind::InvalidParameter, "gpu id out of range");
  Device& d = gpus_[static_cast<std::size_t>(gpu)];
  if (d.models.count(model)) fail(ErrorKind::InvalidState, "model already resident on gpu " + std::to_string(gpu));
  std::vector<Bytes> granted;
  int calls = 0;
  for (Bytes s : blocks) {
    auto it = d.cache.lower_bound(s);
    if (it != d.cache.end()) {
      granted.push_back(*it);
      d.cache.erase(it);
      continue;
    }
    while (d.device_used + s > usable_ && !d.cache.empty()) {
      auto big = std::prev(d.cache.end());
      d.device_used -= *big;
      d.cache.erase(big);
      ++calls;
    }
    if (d.device_used + s > usable_) {
      for (Bytes g : granted) d.cache.insert(g);
      d.native_calls += static_cast<std::uint64_t>(calls);
      return std::nullopt;
    }
    d.device_used += s;
    granted.push_back(s);
    ++calls;
  }
  d.native_calls += static_cast<std::uint64_t>(calls);
  d.models.emplace(model, std::move(granted));
  return LoadResult{calls, 0};
}

Bytes BlockCacheMemory::evict_model(ModelKey model, GpuId gpu) {
  require(gpu >= 0 && gpu < gpu_count(), ErrorKind::InvalidParameter, "gpu id out of range");
  Device& d = gpus_[static_cast<std::size_t>(gpu)];
  auto it = d.models.find(model);
  if (it == d.models.end()) fail(ErrorKind::InvalidState, "model not resident on gpu " + std::to_string(gpu));
  Bytes freed = 0;
  for (Bytes b : it->second) {
    d.cache.insert(b);
    freed += b;
  }
  d.models.erase(it);
  return freed;
}

bool BlockCacheMemory::resident(ModelKey model, GpuId gpu) const {
  require(gpu >= 0 && gpu < gpu_count(), ErrorKind::InvalidParameter, "gpu id out of range");
  return gpus_[static_cast<std::size_t>(gpu)].models.count(model) > 0;
}

Bytes BlockCacheMemory::free_bytes(GpuId gpu) const {
  require(gpu >= 0 && gpu < gpu_count(), ErrorKind::InvalidParameter, "gpu id out of range");
  const Device& d = gpus_[static_cast<std::size_t>(gpu)];
  Bytes in_use = 0;
  for (const auto& [m, bs] : d.models) in_use += std::accumulate(bs.begin(), bs.end(), Bytes{0});
  return usable_ - in_use;
}

MemoryStats BlockCacheMemory::stats(GpuId gpu) const {
  const Device& d = gpus_[static_cast<std::size_t>(gpu)];
  MemoryStats s;
  s.capacity = capacity_;
  s.reserved = reserve_;
  s.free = free_bytes(gpu);
  s.allocated = usable_ - s.free;
  s.requested = s.allocated;
  s.native_calls = d.native_calls;
  return s;
}

void BlockCacheMemory::check_invariants() const {
  for (const Device& d : gpus_) {
    Bytes total = std::accumulate(d.cache.begin(), d.cache.end(), Bytes{0});
    for (const auto& [m, bs] : d.models) total += std::accumulate(bs.begin(), bs.end(), Bytes{0});
    if (total != d.device_used) broken("block cache accounting drifted");
    if (d.device_used > usable_) broken("block cache exceeds device memory");
  }
}

}  // namespace swapsim
