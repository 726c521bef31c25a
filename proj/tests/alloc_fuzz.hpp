#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "swapsim/error.hpp"
#include "swapsim/memory.hpp"

namespace testutil {

struct FuzzCounts {
  std::uint64_t ops = 0;
  std::uint64_t allocs = 0, frees = 0, loads = 0, evicts = 0, consolidations = 0, relocations = 0;
  std::uint64_t ooms = 0, moved = 0, violations = 0;
};

inline swapsim::MemoryConfig small_pool_config() {
  using namespace swapsim;
  MemoryConfig c;
  c.partition_size = 512 * KiB;
  c.fixed_block = 40 * KiB;  // 12 slots and a 32 KiB tail per pool partition
  c.buddy_min = 8 * KiB;
  c.runtime_reserve = 512 * KiB;
  c.check_invariants = true;
  return c;
}

// Random alloc/free/load/evict/consolidate/relocate driver. The allocator
// checks its own invariants after every mutation; this driver additionally
// re-derives every translation from the block map.
inline FuzzCounts allocator_fuzz(std::uint64_t seed, std::uint64_t ops, int gpus = 2,
                                 swapsim::Bytes gpu_memory = 4 * swapsim::MiB) {
  using namespace swapsim;
  const MemoryConfig cfg = small_pool_config();
  MemoryManager mm(gpus, gpu_memory, cfg);
  std::mt19937_64 rng(seed);
  FuzzCounts c;

  std::vector<std::vector<Bytes>> models;
  for (int m = 0; m < 12; ++m) {
    std::vector<Bytes> spec(2 + rng() % 14, cfg.fixed_block);
    spec.push_back(1 + rng() % (cfg.fixed_block - 1));
    if (m % 3 == 0) spec.push_back(cfg.fixed_block + 1 + rng() % (100 * KiB));
    std::shuffle(spec.begin(), spec.end(), rng);
    models.push_back(spec);
  }
  std::set<BlockId> loose;
  std::set<std::pair<ModelKey, GpuId>> resident;
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  auto verify_translation = [&]() {
    if (resident.empty()) return;
    auto it = resident.begin();
    std::advance(it, static_cast<long>(pick(resident.size())));
    const auto [m, g] = *it;
    for (const auto& map : mm.block_map(m)) {
      if (map.gpu != g) continue;
      const Bytes delta = map.size > 1 ? rng() % map.size : 0;
      const auto tr = mm.translate(m, map.logical_base + delta, g);
      if (tr.gpu != g || tr.physical != map.physical + delta) ++c.violations;
    }
  };

  for (std::uint64_t i = 0; i < ops; ++i) {
    ++c.ops;
    const GpuId g = static_cast<GpuId>(pick(static_cast<std::size_t>(gpus)));
    try {
      switch (pick(20)) {
        case 0: case 1: case 2: case 3: {
          const Bytes size = pick(2) ? cfg.fixed_block : 1 + rng() % (160 * KiB);
          ++c.allocs;
          if (auto b = mm.alloc_block(g, size, std::nullopt)) {
            loose.insert(b->id);
          } else {
            ++c.ooms;
          }
          break;
        }
        case 4: case 5: case 6: {
          if (loose.empty()) break;
          auto it = loose.begin();
          std::advance(it, static_cast<long>(pick(loose.size())));
          mm.free_block(*it);
          loose.erase(it);
          ++c.frees;
          break;
        }
        case 7: case 8: case 9: case 10: {
          const auto m = static_cast<ModelKey>(pick(models.size()));
          if (resident.count({m, g})) break;
          ++c.loads;
          if (mm.load_model(m, models[m], g)) {
            resident.insert({m, g});
          } else {
            ++c.ooms;
          }
          break;
        }
        case 11: case 12: case 13: {
          if (resident.empty()) break;
          auto it = resident.begin();
          std::advance(it, static_cast<long>(pick(resident.size())));
          Bytes want = 0;
          for (Bytes b : models[it->first]) want += b;
          if (mm.evict_model(it->first, it->second) != want) ++c.violations;
          resident.erase(it);
          ++c.evicts;
          break;
        }
        case 14: {
          ++c.consolidations;
          c.moved += static_cast<std::uint64_t>(mm.consolidate(g));
          break;
        }
        case 15: {
          if (resident.empty() || gpus < 2) break;
          auto it = resident.begin();
          std::advance(it, static_cast<long>(pick(resident.size())));
          const auto [m, from] = *it;
          const GpuId to = (from + 1) % gpus;
          if (resident.count({m, to})) break;
          const Bytes delta = rng() % models[m].front();
          const Bytes logical = mm.logical_base(m) + delta;
          auto block0 = [&](GpuId on) {
            for (const auto& map : mm.block_map(m))
              if (map.gpu == on && map.logical_base == mm.logical_base(m)) return map.physical;
            return ~Bytes{0};
          };
          const auto before = mm.translate(m, logical, from);
          if (before.physical - block0(from) != delta) ++c.violations;
          if (mm.relocate_model(m, from, to)) {
            resident.erase(it);
            resident.insert({m, to});
            const auto after = mm.translate(m, logical, to);
            if (after.gpu != to || after.physical - block0(to) != delta) ++c.violations;
            ++c.relocations;
          }
          break;
        }
        default:
          verify_translation();
          break;
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InvariantViolation) {
        if (std::getenv("FUZZ_DEBUG")) std::fprintf(stderr, "op %llu: %s\n", static_cast<unsigned long long>(i), e.what());
        ++c.violations;
      } else {
        throw;
      }
    }
    for (GpuId q = 0; q < gpus; ++q) {
      const auto s = mm.stats(q);
      if (s.allocated + s.free + s.reserved != s.capacity) ++c.violations;
    }
  }
  return c;
}

}  // namespace testutil
