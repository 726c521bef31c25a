#include <algorithm>
#include <map>
#include <random>

#include "alloc_fuzz.hpp"
#include "doctest.h"
#include "swapsim/error.hpp"
#include "swapsim/memory.hpp"
#include "swapsim/workload.hpp"

using namespace swapsim;

namespace {

MemoryConfig checked() {
  MemoryConfig c;
  c.partition_size = 256 * MiB;
  c.check_invariants = true;
  return c;
}

int count_kind(const MemoryManager& mm, GpuId g, PartitionKind k) {
  const auto ps = mm.partitions(g);
  return static_cast<int>(std::count_if(ps.begin(), ps.end(), [&](const auto& p) { return p.kind == k; }));
}

// Reference: first-fit over a flat byte range.
class FirstFit {
 public:
  explicit FirstFit(Bytes capacity) : cap_(capacity) {}
  std::optional<Bytes> alloc(Bytes size) {
    Bytes cursor = 0;
    for (const auto& [off, sz] : used_) {
      if (off - cursor >= size) break;
      cursor = off + sz;
    }
    if (cursor + size > cap_) return std::nullopt;
    used_[cursor] = size;
    return cursor;
  }
  void free(Bytes off) { used_.erase(off); }

 private:
  Bytes cap_;
  std::map<Bytes, Bytes> used_;
};

}  // namespace

TEST_CASE("pool initialisation") {
  const auto topo = default_v100_node();
  MemoryManager mm(topo, checked());
  CHECK(mm.partitions(0).size() == 128);
  CHECK(count_kind(mm, 0, PartitionKind::Reserved) == 4);
  CHECK(count_kind(mm, 0, PartitionKind::Unassigned) == 124);
  CHECK(mm.allocated_bytes(0) == 0);
  CHECK(mm.free_bytes(0) == 31 * GiB);
  CHECK(mm.slots_per_partition() == 12);

  MemoryConfig bad = checked();
  bad.partition_size = 0;
  CHECK_THROWS_AS(MemoryManager(topo, bad), Error);
  bad = checked();
  bad.runtime_reserve = 32 * GiB;
  CHECK_THROWS_AS(MemoryManager(topo, bad), Error);
  bad = checked();
  bad.fixed_block = 512 * MiB;
  CHECK_THROWS_AS(MemoryManager(topo, bad), Error);
}

TEST_CASE("default layout tiles partitions with fixed blocks and folds slack into the reserve") {
  MemoryConfig c;
  c.check_invariants = true;
  MemoryManager mm(default_v100_node(), c);
  CHECK(mm.slots_per_partition() == 12);
  CHECK(mm.partitions(0).size() == 136);  // 32 GiB / 240 MiB, 128 MiB slack
  CHECK(count_kind(mm, 0, PartitionKind::Reserved) == 4);
  CHECK(mm.usable_bytes(0) == 132 * 240 * MiB);
  CHECK(mm.stats(0).reserved == 32 * GiB - 132 * 240 * MiB);
  CHECK(usable_model_memory(32 * GiB, c) == mm.usable_bytes(0));
  // A model made of whole fixed blocks fills partitions without leftovers.
  REQUIRE(mm.load_model(1, std::vector<Bytes>(24, 20 * MiB), 0));
  CHECK(mm.stats(0).fixed_partitions == 2);
  CHECK(mm.stats(0).buddy_partitions == 0);

  c.partition_size = 192 * MiB;
  MemoryManager odd(default_v100_node(), c);
  CHECK(odd.partitions(0).size() == 170);
  CHECK(odd.usable_bytes(0) == 165 * 192 * MiB);
}

TEST_CASE("alloc_block serves fixed blocks from pools and rounds others to powers of two") {
  MemoryManager mm(default_v100_node(), checked());
  const auto a = mm.alloc_block(0, 20 * MiB, 7u);
  REQUIRE(a);
  CHECK(mm.partitions(0)[static_cast<std::size_t>(a->partition)].kind == PartitionKind::FixedPool);
  CHECK(a->size == 20 * MiB);
  const auto b = mm.alloc_block(0, 3 * MiB);
  REQUIRE(b);
  CHECK(b->size == 4 * MiB);
  CHECK(b->offset % (4 * MiB) == 0);
  CHECK_THROWS_AS(mm.alloc_block(0, 257 * MiB), Error);
  CHECK_THROWS_AS(mm.alloc_block(0, 0), Error);
}

TEST_CASE("small requests use the tail of a pool partition") {
  MemoryManager mm(default_v100_node(), checked());
  const auto a = mm.alloc_block(0, 20 * MiB);
  const auto b = mm.alloc_block(0, 10 * MiB);
  REQUIRE(a);
  REQUIRE(b);
  CHECK(b->partition == a->partition);
  CHECK(b->offset - mm.partitions(0)[static_cast<std::size_t>(b->partition)].base == 240 * MiB);
}

TEST_CASE("full GPU signals out of memory") {
  MemoryManager mm(1, 1 * GiB, [] {
    auto c = checked();
    c.runtime_reserve = 256 * MiB;
    return c;
  }());
  int n = 0;
  while (mm.alloc_block(0, 128 * MiB)) ++n;
  CHECK(n == 6);
  CHECK_FALSE(mm.alloc_block(0, 128 * MiB).has_value());
  CHECK(mm.free_bytes(0) == 0);
}

TEST_CASE("buddy merge and reuse") {
  MemoryManager mm(default_v100_node(), checked());
  const auto a = mm.alloc_block(0, 4 * MiB);
  const auto b = mm.alloc_block(0, 4 * MiB);
  REQUIRE(a);
  REQUIRE(b);
  CHECK((a->offset ^ b->offset) == 4 * MiB);
  mm.free_block(a->id);
  mm.free_block(b->id);
  // Merged all the way back, so the partition was reclaimed.
  CHECK(count_kind(mm, 0, PartitionKind::Buddy) == 0);
  const auto c = mm.alloc_block(0, 8 * MiB);
  REQUIRE(c);
  CHECK(c->offset == std::min(a->offset, b->offset));

  const auto d = mm.alloc_block(0, 6 * MiB);
  const Bytes off = d->offset;
  mm.free_block(d->id);
  CHECK(mm.alloc_block(0, 6 * MiB)->offset == off);

  try {
    mm.free_block(d->id);
    FAIL("double free not detected");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvariantViolation);
  }
  CHECK_THROWS_AS(mm.free_block(12345), Error);
}

TEST_CASE("model packing") {
  MemoryManager mm(default_v100_node(), checked());
  const auto r = mm.load_model(1, std::vector<Bytes>(4, 20 * MiB), 0);
  REQUIRE(r);
  CHECK(r->partitions_used == 1);
  CHECK(mm.resident(1, 0));
  CHECK_THROWS_AS(mm.load_model(1, std::vector<Bytes>(4, 20 * MiB), 0), Error);

  // 30 fixed blocks and a remainder: three partitions, remainder in a pool tail.
  const auto cat = default_catalog();
  const auto& r152 = cat[find_model(cat, "ResNet-152")];
  std::vector<Bytes> shared = synthesize_blocks(r152.footprint_bytes - 1 * GiB);
  const auto r2 = mm.load_model(2, shared, 1);
  REQUIRE(r2);
  CHECK(r2->partitions_used == 3);
}

TEST_CASE("loading ResNet-152 into 1 GiB of free memory fails cleanly") {
  const auto cat = default_catalog();
  const auto& m = cat[find_model(cat, "ResNet-152")];
  MemoryManager mm(1, 2 * GiB, checked());
  CHECK(mm.free_bytes(0) == 1 * GiB);
  CHECK_FALSE(mm.load_model(0, m.block_spec, 0).has_value());
  CHECK(mm.allocated_bytes(0) == 0);
  CHECK_FALSE(mm.resident(0, 0));
}

TEST_CASE("eviction invalidates the GPU copy and keeps the host copy") {
  const auto cat = default_catalog();
  const auto& m = cat[find_model(cat, "ResNet-152")];
  MemoryManager mm(default_v100_node(), checked());
  REQUIRE(mm.load_model(5, m.block_spec, 0));
  REQUIRE(mm.load_model(5, m.block_spec, 2));
  CHECK(mm.copies(5) == std::vector<GpuId>{0, 2});
  CHECK(mm.evict_model(5, 0) == m.footprint_bytes);
  CHECK_FALSE(mm.resident(5, 0));
  CHECK(mm.resident(5, 2));
  CHECK(mm.host_resident(5));
  CHECK(mm.allocated_bytes(0) == 0);
  CHECK_THROWS_AS(mm.evict_model(5, 0), Error);
  CHECK(count_kind(mm, 0, PartitionKind::FixedPool) == 0);
}

TEST_CASE("translation") {
  MemoryManager mm(default_v100_node(), checked());
  const std::vector<Bytes> spec = {20 * MiB, 20 * MiB, 5 * MiB};
  REQUIRE(mm.load_model(3, spec, 0));
  const Bytes base = mm.logical_base(3);
  const auto map = mm.block_map(3);
  REQUIRE(map.size() == 3);
  CHECK(mm.translate(3, base).physical == map[0].physical);
  CHECK(mm.translate(3, base + 20 * MiB + 17).physical == map[1].physical + 17);
  CHECK_THROWS_AS(mm.translate(3, base + 45 * MiB), Error);
  CHECK_THROWS_AS(mm.translate(3, base - 1), Error);
  CHECK_THROWS_AS(mm.translate(4, base), Error);

  const Bytes probe = base + 40 * MiB + 12345;
  const auto before = mm.translate(3, probe);
  REQUIRE(mm.relocate_model(3, 0, 3));
  const auto after = mm.translate(3, probe);
  CHECK(after.gpu == 3);
  CHECK(after.physical - mm.block_map(3)[2].physical == before.physical - map[2].physical);
  CHECK_THROWS_AS(mm.translate(3, probe, 0), Error);
}

TEST_CASE("consolidation empties a sparse partition") {
  MemoryManager mm(default_v100_node(), checked());
  for (ModelKey m = 0; m < 24; ++m) REQUIRE(mm.load_model(m, {20 * MiB}, 0));
  for (ModelKey m = 0; m < 24; m += 2) mm.evict_model(m, 0);
  CHECK(count_kind(mm, 0, PartitionKind::FixedPool) == 2);
  const double before = mm.stats(0).contiguity;
  CHECK(mm.consolidate(0) == 6);
  CHECK(count_kind(mm, 0, PartitionKind::FixedPool) == 1);
  CHECK(mm.stats(0).contiguity >= before);
  CHECK(mm.consolidate(0) == 0);
  // Loose blocks are never moved.
  const auto loose = mm.alloc_block(1, 20 * MiB);
  REQUIRE(mm.load_model(99, {20 * MiB}, 1));
  mm.consolidate(1);
  CHECK(mm.block(loose->id).offset == loose->offset);
}

TEST_CASE("consolidation keeps translations offset-consistent") {
  MemoryManager mm(default_v100_node(), checked());
  std::mt19937_64 rng(9);
  std::vector<std::vector<Bytes>> specs;
  for (ModelKey m = 0; m < 30; ++m) {
    std::vector<Bytes> s(1 + rng() % 9, 20 * MiB);
    s.push_back(1 + rng() % (30 * MiB));
    specs.push_back(s);
    REQUIRE(mm.load_model(m, s, 0));
  }
  for (ModelKey m = 0; m < 30; m += 3) mm.evict_model(m, 0);
  std::map<std::pair<ModelKey, Bytes>, Bytes> deltas;
  const int moved = mm.consolidate(0);
  CHECK(moved > 0);
  for (ModelKey m = 0; m < 30; ++m) {
    if (m % 3 == 0) continue;
    for (const auto& map : mm.block_map(m)) {
      const Bytes d = map.size / 2;
      CHECK(mm.translate(m, map.logical_base + d).physical == map.physical + d);
    }
  }
  for (ModelKey m = 0; m < 30; m += 3) REQUIRE(mm.load_model(m, specs[m], 0));
}

TEST_CASE("fixed-size workloads: pool satisfies at least what first-fit satisfies") {
  MemoryConfig c = checked();
  c.fixed_block = 16 * MiB;
  c.runtime_reserve = 256 * MiB;
  const Bytes mem = 4 * GiB;
  MemoryManager mm(1, mem, c);
  FirstFit ff(mem - c.runtime_reserve);
  std::mt19937_64 rng(21);
  std::vector<std::pair<BlockId, Bytes>> live;
  int both = 0, ours_only = 0, theirs_only = 0;
  for (int i = 0; i < 20000; ++i) {
    if (!live.empty() && rng() % 100 < 45) {
      const auto k = static_cast<std::size_t>(rng() % live.size());
      mm.free_block(live[k].first);
      ff.free(live[k].second);
      live.erase(live.begin() + static_cast<long>(k));
      continue;
    }
    auto a = mm.alloc_block(0, c.fixed_block);
    auto b = ff.alloc(c.fixed_block);
    if (a && b) {
      ++both;
      live.emplace_back(a->id, *b);
    } else if (a) {
      ++ours_only;
      mm.free_block(a->id);
    } else if (b) {
      ++theirs_only;
      ff.free(*b);
    }
  }
  CHECK(theirs_only == 0);
  CHECK(both > 1000);
  MESSAGE("both " << both << " ours-only " << ours_only);
}

TEST_CASE("randomised allocator operations keep every invariant") {
  const auto c = testutil::allocator_fuzz(1, 20000);
  CHECK(c.violations == 0);
  CHECK(c.loads > 0);
  CHECK(c.ooms > 0);
  CHECK(c.relocations > 0);
}

TEST_CASE("block cache baseline") {
  BlockCacheMemory bc(1, 2 * GiB, 1 * GiB);
  const std::vector<Bytes> spec = {20 * MiB, 20 * MiB, 7 * MiB};
  auto r = bc.load_model(0, spec, 0);
  REQUIRE(r);
  CHECK(r->native_calls == 3);
  CHECK(bc.evict_model(0, 0) == 47 * MiB);
  r = bc.load_model(1, spec, 0);
  REQUIRE(r);
  CHECK(r->native_calls == 0);
  const std::vector<Bytes> other = {20 * MiB, 9 * MiB};
  r = bc.load_model(2, other, 0);
  REQUIRE(r);
  CHECK(r->native_calls == 2);
  bc.check_invariants();
  CHECK(bc.stats(0).native_calls == 5);
  std::vector<Bytes> huge(60, 20 * MiB);
  CHECK_FALSE(bc.load_model(3, huge, 0).has_value());
  bc.check_invariants();
}
