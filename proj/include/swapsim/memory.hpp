#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "swapsim/topology.hpp"
#include "swapsim/units.hpp"

namespace swapsim {

// A model copy is keyed by the owning function.
using ModelKey = std::uint32_t;
using BlockId = std::uint64_t;

enum class PartitionKind { Unassigned, Reserved, FixedPool, Buddy };
const char* to_string(PartitionKind k);

struct MemoryPartition {
  GpuId gpu = 0;
  Bytes base = 0;
  Bytes size = 0;
  PartitionKind kind = PartitionKind::Unassigned;
};

struct Block {
  BlockId id = 0;
  GpuId gpu = 0;
  int partition = 0;
  Bytes offset = 0;     // physical, from the start of the GPU's address space
  Bytes size = 0;       // granted
  Bytes requested = 0;  // asked for
  std::optional<ModelKey> owner;
  bool mapped = false;  // part of a loaded model copy; only these are relocatable
};

struct Mapping {
  Bytes logical_base = 0;
  Bytes size = 0;
  GpuId gpu = 0;
  Bytes physical = 0;
  BlockId block = 0;
};

struct Translation {
  GpuId gpu = 0;
  Bytes physical = 0;
};

struct MemoryConfig {
  Bytes partition_size = 240 * MiB;  // 12 fixed blocks
  Bytes fixed_block = 20 * MiB;
  Bytes runtime_reserve = 1 * GiB;
  Bytes buddy_min = 2 * MiB;
  Bytes gpu_memory_override = 0;  // 0 = take from topology
  bool check_invariants = false;  // run check_invariants() after every mutation
};

// Bytes available to model blocks once the reserve and any partial trailing partition are set aside.
Bytes usable_model_memory(Bytes gpu_memory, const MemoryConfig& cfg);

struct MemoryStats {
  Bytes capacity = 0;
  Bytes reserved = 0;
  Bytes allocated = 0;  // granted bytes, excluding the runtime reserve
  Bytes requested = 0;
  Bytes free = 0;
  double contiguity = 1.0;     // largest free run / total free
  double fragmentation = 0.0;  // 1 - contiguity
  int fixed_partitions = 0;
  int buddy_partitions = 0;
  int unassigned_partitions = 0;
  std::uint64_t native_calls = 0;
};

struct LoadResult {
  int native_calls = 0;
  int partitions_used = 0;
};

// What the simulator needs from an allocator.
class ModelMemory {
 public:
  virtual ~ModelMemory() = default;
  // nullopt is the out-of-memory signal; nothing is left allocated in that case.
  virtual std::optional<LoadResult> load_model(ModelKey model, const std::vector<Bytes>& blocks, GpuId gpu) = 0;
  virtual Bytes evict_model(ModelKey model, GpuId gpu) = 0;
  virtual bool resident(ModelKey model, GpuId gpu) const = 0;
  virtual Bytes free_bytes(GpuId gpu) const = 0;
  virtual Bytes usable_bytes(GpuId gpu) const = 0;
  virtual int consolidate(GpuId gpu) = 0;
  virtual MemoryStats stats(GpuId gpu) const = 0;
  virtual void check_invariants() const = 0;
  virtual int gpu_count() const = 0;
};

// Pre-allocated pool: partitions, fixed-size slot pools and buddy regions.
class MemoryManager final : public ModelMemory {
 public:
  MemoryManager(const NodeTopology& topo, MemoryConfig cfg);
  MemoryManager(int gpu_count, Bytes gpu_memory, MemoryConfig cfg);

  std::optional<Block> alloc_block(GpuId gpu, Bytes size, std::optional<ModelKey> owner = std::nullopt);
  void free_block(BlockId id);
  const Block& block(BlockId id) const;

  std::optional<LoadResult> load_model(ModelKey model, const std::vector<Bytes>& blocks, GpuId gpu) override;
  Bytes evict_model(ModelKey model, GpuId gpu) override;
  bool resident(ModelKey model, GpuId gpu) const override;
  bool host_resident(ModelKey model) const;
  std::vector<GpuId> copies(ModelKey model) const;

  // With several resident copies and no gpu given, the lowest GPU id is used.
  Translation translate(ModelKey model, Bytes logical, std::optional<GpuId> gpu = std::nullopt) const;
  Bytes logical_base(ModelKey model) const;
  std::vector<Mapping> block_map(ModelKey model) const;
  // Copy to `to`, then invalidate `from`. False if `to` lacks space.
  bool relocate_model(ModelKey model, GpuId from, GpuId to);

  int consolidate(GpuId gpu) override;

  Bytes free_bytes(GpuId gpu) const override;
  Bytes usable_bytes(GpuId gpu) const override;
  Bytes allocated_bytes(GpuId gpu) const;
  MemoryStats stats(GpuId gpu) const override;
  std::vector<MemoryPartition> partitions(GpuId gpu) const;
  std::vector<Block> blocks(GpuId gpu) const;
  int gpu_count() const override { return static_cast<int>(gpus_.size()); }
  std::size_t slots_per_partition() const { return slots_; }
  const MemoryConfig& config() const { return cfg_; }

  void check_invariants() const override;

 private:
  struct PartitionState {
    PartitionKind kind = PartitionKind::Unassigned;
    std::vector<BlockId> slots;                    // FixedPool, 0 = free
    std::size_t slots_used = 0;
    std::vector<std::set<Bytes>> free_by_order;    // buddy free blocks, offsets relative to partition
    std::map<Bytes, int> buddy_used;               // relative offset -> order
    Bytes buddy_free = 0;
    Bytes used = 0;                                // granted bytes in this partition
    std::map<ModelKey, int> owner_blocks;
  };
  struct GpuPool {
    std::vector<PartitionState> parts;
    std::unordered_map<BlockId, Block> blocks;
    std::map<ModelKey, std::vector<BlockId>> copies;
    Bytes allocated = 0;
    Bytes requested = 0;
    std::uint64_t version = 0;             // bumped on every alloc/free
    std::uint64_t settled = ~0ULL;         // version at which consolidation last found nothing to do
  };
  struct Layout {
    std::vector<Bytes> sizes;
    std::vector<Bytes> bases;
  };

  void init(int gpu_count, Bytes gpu_memory);
  GpuPool& pool(GpuId gpu);
  const GpuPool& pool(GpuId gpu) const;
  Bytes partition_base(int index) const { return static_cast<Bytes>(index) * cfg_.partition_size; }
  Bytes buddy_region_start(PartitionKind kind) const;
  int order_for(Bytes size) const;
  Bytes order_size(int order) const { return cfg_.buddy_min << order; }

  void assign(PartitionState& p, PartitionKind kind) const;
  void maybe_release(PartitionState& p) const;
  bool buddy_can_fit(const PartitionState& p, int order) const;
  int smallest_fit_order(const PartitionState& p, int order) const;

  std::optional<BlockId> alloc_in(GpuPool& gp, GpuId gpu, int part, Bytes size, std::optional<ModelKey> owner);
  std::optional<BlockId> alloc_fixed(GpuPool& gp, GpuId gpu, std::optional<ModelKey> owner,
                                     std::size_t remaining_hint, int preferred);
  std::optional<BlockId> alloc_buddy(GpuPool& gp, GpuId gpu, Bytes size, std::optional<ModelKey> owner,
                                     const std::vector<int>& preferred);
  void release(GpuPool& gp, BlockId id);
  double contiguity(const GpuPool& gp) const;
  bool evacuate(GpuPool& gp, GpuId gpu, int source, int& moved);
  bool consolidate_round(GpuPool& gp, GpuId gpu, int& moved);
  bool may_evacuate(const GpuPool& gp, int source) const;
  void check_pool(GpuId gpu, const GpuPool& gp) const;
  void after_mutation() const;

  MemoryConfig cfg_;
  Bytes gpu_memory_ = 0;
  std::size_t partitions_per_gpu_ = 0;
  std::size_t reserved_partitions_ = 0;
  std::size_t slots_ = 0;
  int max_order_ = 0;
  std::vector<GpuPool> gpus_;
  std::unordered_map<ModelKey, Layout> layouts_;
  std::set<ModelKey> host_;
  std::uint64_t next_block_ = 1;
  int excluded_ = -1;      // partition skipped while evacuating
  bool no_claim_ = false;  // forbid claiming unassigned partitions
};

// Baseline allocator: native allocation with a cache of released blocks.
// Every cache miss is one native allocation call.
class BlockCacheMemory final : public ModelMemory {
 public:
  BlockCacheMemory(int gpu_count, Bytes gpu_memory, Bytes runtime_reserve);

  std::optional<LoadResult> load_model(ModelKey model, const std::vector<Bytes>& blocks, GpuId gpu) override;
  Bytes evict_model(ModelKey model, GpuId gpu) override;
  bool resident(ModelKey model, GpuId gpu) const override;
  Bytes free_bytes(GpuId gpu) const override;
  Bytes usable_bytes(GpuId /*gpu*/) const override { return usable_; }
  int consolidate(GpuId /*gpu*/) override { return 0; }
  MemoryStats stats(GpuId gpu) const override;
  void check_invariants() const override;
  int gpu_count() const override { return static_cast<int>(gpus_.size()); }

 private:
  struct Device {
    Bytes device_used = 0;  // natively allocated, cached or in use
    std::multiset<Bytes> cache;
    std::map<ModelKey, std::vector<Bytes>> models;
    std::uint64_t native_calls = 0;
  };
  Bytes capacity_;
  Bytes reserve_;
  Bytes usable_;
  std::vector<Device> gpus_;
};

}  // namespace swapsim
