#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "swapsim/sim.hpp"

namespace swapsim {

struct ClusterConfig {
  EngineConfig node;  // every node runs this config; node i uses seed node.seed + i
  int nodes = 1;
  int max_nodes = 1;
  Micros period = 10 * kMicrosPerSec;
  int low_periods = 3;         // consecutive low-group periods before a function moves
  double headroom = 0.7;       // node load must stay below headroom * gpu count
  double network_gbps = 2.0;   // inter-node model copy bandwidth, GB/s
  double rate_smoothing = 0.5; // weight of the newest period in the rate estimate
  bool parallel = true;        // advance nodes with OpenMP between barriers

  void validate() const;
};

// Longest-processing-time placement: heaviest load first onto the least-loaded node,
// ties to the lowest node id.
std::vector<int> place_initial(const std::vector<double>& loads, int nodes);

struct Migration {
  Micros time = 0;
  std::uint32_t function = 0;
  int from = 0;
  int to = -1;          // -1 when deferred
  Micros ready = 0;     // arrivals held until this time
  bool provisioned = false;
  bool deferred = false;
  double src_load = 0;  // estimated, before the move
  double dst_load = 0;  // estimated, after the move
};

struct NodeSummary {
  int id = 0;
  Micros started = 0;
  std::size_t functions = 0;  // homed here at the end
  double slo_ratio = 1.0;
  std::vector<double> gpu_load;
  double load_variance = 0;
  std::uint64_t completed = 0;
  std::uint64_t rejected = 0;
};

struct ClusterFunctionReport {
  FunctionReport stats;  // samples from the final home node only
  int home = 0;
  int migrations = 0;
  Micros window_start = 0;  // start of the SLO window on the home node
};

struct ClusterReport {
  std::string policy;
  Micros duration = 0;
  std::vector<NodeSummary> nodes;
  std::vector<ClusterFunctionReport> functions;
  std::vector<Migration> migrations;
  std::vector<std::pair<Micros, int>> node_count;  // (time, nodes) at every change
  std::vector<double> normalized_latency;          // latency / deadline, every completed request
  SwapCounts light, heavy;
  std::uint64_t deferred = 0;

  double slo_ratio() const;
  double normalized_p99() const;
  std::size_t moved() const;
};

class Cluster {
 public:
  // expected_rate: requests per minute per function, used for placement and as the initial estimate.
  Cluster(ClusterConfig cfg, std::vector<ModelProfile> catalog, std::vector<FunctionSpec> functions,
          std::vector<double> expected_rate);
  ~Cluster();

  ClusterReport run(const Trace& trace);

  // Barrier step: advance every node to t, then rebalance.
  void advance(Micros t);
  std::vector<Migration> rebalance(Micros t);

  int home(std::uint32_t f) const { return placement_[f]; }
  std::size_t node_count() const { return nodes_.size(); }
  double node_load(int n) const;
  double function_load(std::uint32_t f) const;
  const Engine& engine(int n) const { return *nodes_.at(static_cast<std::size_t>(n)); }

 private:
  void inject(const Trace& trace, std::size_t& cursor, Micros until);
  int provision(Micros t);
  ClusterReport report(Micros duration) const;

  ClusterConfig cfg_;
  std::vector<ModelProfile> catalog_;
  std::vector<FunctionSpec> functions_;
  std::vector<std::unique_ptr<Engine>> nodes_;
  std::vector<Micros> started_;
  std::vector<int> placement_;
  std::vector<double> rate_;          // smoothed requests per minute
  std::vector<std::uint64_t> seen_;   // arrivals in the current period
  std::vector<Micros> held_until_;
  std::vector<int> moves_;
  std::vector<Micros> window_start_;
  std::vector<Migration> log_;
  std::vector<std::pair<Micros, int>> node_count_;
  Micros last_period_ = 0;
};

ClusterReport run_cluster(const ClusterConfig& cfg, const std::vector<ModelProfile>& catalog,
                          const std::vector<FunctionSpec>& functions, const std::vector<double>& expected_rate,
                          const Trace& trace);

}  // namespace swapsim
