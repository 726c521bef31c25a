#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "swapsim/cluster.hpp"
#include "swapsim/scenario.hpp"
#include "swapsim/sim.hpp"

namespace swapsim {

// One [function.<id>] section.
struct FunctionEntry {
  std::string id;
  std::string model;
  double rate_per_min = 10;
  double deadline_ms = 80;
  double percentile = 0.98;
  bool operator==(const FunctionEntry&) const = default;
};

// Flat mirror of the INI file, in file units. See README for the key reference.
struct SimConfig {
  // [run]
  std::string policy = "faaswap";
  double duration_s = 600;
  std::uint64_t seed = 1;
  bool preload = true;
  double routing_overhead_ms = 0;
  // [topology]
  std::string preset = "v100";  // v100: 4 GPUs, 2 switches, hybrid NVLink; pcie: pairs per switch, no NVLink
  int gpus = 4;
  double pcie_gib_s = 2.0;
  double host_gib_s = 0;  // 0 = sum of switch uplinks
  double nvlink_slow_gib_s = 3.125;
  double gpu_memory_gib = 32;
  // [memory]
  double partition_mib = 240;
  double fixed_block_mib = 20;
  double runtime_reserve_mib = 1024;
  double buddy_min_mib = 2;
  double native_alloc_ms = 10;
  double consolidate_period_ms = 10000;
  // [transfer]
  double group_size_mib = 2;
  bool pipeline = true;
  // [queueing]
  double alpha0 = 0.5;
  double scalar = 2.0;
  double threshold = 0.04;
  double period_ms = 10000;
  double burst_factor = 2.0;
  // [model]
  std::string catalog;  // empty = built-in profiles
  double slowdown_threshold = kDefaultSlowdownThreshold;
  double private_runtime_mib = 1024;
  // [workload]
  std::string trace;  // empty = Poisson arrivals from the rates
  std::size_t functions = 160;  // used when there are no [function.*] sections
  double rate_min = 5;
  double rate_max = 30;
  std::string rate_dist = "powerlaw";
  double rate_tail = ScenarioParams{}.rate_tail;
  double cv_deadline_ms = 80;
  double nlp_deadline_ms = 200;
  double percentile = 0.98;
  std::vector<FunctionEntry> function_list;
  // [cluster]
  int nodes = 1;
  int max_nodes = 1;
  double cluster_period_ms = 10000;
  int low_periods = 3;
  double headroom = 0.7;
  double network_gbps = 2.0;
  double rate_smoothing = 0.5;
  bool parallel = true;

  // Directory used to resolve relative catalog and trace paths.
  std::string base_dir = ".";

  bool operator==(const SimConfig&) const = default;

  // Throws Error(Config) naming the offending field as section.key.
  void validate() const;
  EngineConfig engine() const;
  ClusterConfig cluster() const;
  std::string resolve(const std::string& path) const;
};

SimConfig parse_config(std::istream& in, const std::string& base_dir = ".");
SimConfig load_config(const std::string& path);
void write_config(std::ostream& out, const SimConfig& cfg);

// Applies "section.key=value" and revalidates, e.g. "workload.functions=320".
void apply_override(SimConfig& cfg, const std::string& assignment);

struct Workload {
  std::vector<ModelProfile> catalog;
  std::vector<FunctionSpec> functions;
  std::vector<double> rate_per_min;
  Trace trace;
};

// Catalog, function list and trace for a config. Deterministic in cfg.
Workload build_workload(const SimConfig& cfg);

}  // namespace swapsim
