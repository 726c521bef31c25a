#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "swapsim/topology.hpp"
#include "swapsim/units.hpp"

namespace swapsim {

inline constexpr GpuId kHost = -1;

int group_count(Bytes transfer_bytes, Bytes group_size);

// Two-stage fill-and-drain pipeline over n equal groups.
double pipeline_latency(double t_transfer_total, double t_compute_total, int n_groups);

using LinkId = int;

struct LinkInfo {
  std::string name;
  double capacity = 0;  // bytes/sec
};

// Link 0 is the host link, then one uplink per PCIe group, then one per NVLink pair.
class LinkTable {
 public:
  explicit LinkTable(const NodeTopology& topo);

  std::vector<LinkId> route(GpuId src, GpuId dst) const;
  std::size_t size() const { return links_.size(); }
  const LinkInfo& link(LinkId id) const { return links_.at(static_cast<std::size_t>(id)); }
  const std::vector<LinkInfo>& links() const { return links_; }
  LinkId host_link() const { return 0; }
  LinkId uplink(int group) const { return 1 + group; }
  std::optional<LinkId> nvlink(GpuId a, GpuId b) const;

 private:
  const NodeTopology* topo_;
  std::vector<LinkInfo> links_;
  std::vector<int> nvlink_id_;  // gpu_count^2, -1 = none
};

using TaskId = std::uint64_t;

struct PipelineSpec {
  int n_groups = 1;
  double compute_per_group_us = 0;
};

struct CompletedTransfer {
  TaskId id = 0;
  double start_us = 0;
  double finish_us = 0;
  Bytes bytes = 0;
  // Time the last pipelined compute stage finishes; equals finish_us when no pipeline is attached.
  double compute_done_us = 0;
};

// Equal-share bandwidth model: each active task progresses at
// min over its links of capacity / |tasks on that link|, recomputed whenever
// the active set changes. Time is continuous (double microseconds).
class FairShareNetwork {
 public:
  explicit FairShareNetwork(std::vector<double> capacities_bytes_per_sec);

  TaskId start(double now_us, Bytes bytes, std::vector<LinkId> links,
               std::optional<PipelineSpec> pipeline = std::nullopt);
  // Moves time forward, finishing tasks at their exact completion instants.
  std::vector<CompletedTransfer> advance(double now_us);
  std::optional<double> next_completion() const;

  bool active(TaskId id) const;
  double rate(TaskId id) const;  // bytes/us
  double remaining(TaskId id) const;
  std::size_t active_count() const { return tasks_.size(); }
  std::size_t tasks_on(LinkId link) const { return link_load_.at(static_cast<std::size_t>(link)); }
  double now() const { return now_; }

 private:
  struct Task {
    TaskId id;
    double bytes_total;
    double remaining;
    double start_us;
    std::vector<LinkId> links;
    double rate = 0;
    std::optional<PipelineSpec> pipe;
    int groups_done = 0;
    double compute_done = 0;
  };

  void recompute_rates();
  void progress(Task& t, double dt);

  std::vector<double> capacity_;  // bytes/us
  std::vector<std::size_t> link_load_;
  std::vector<Task> tasks_;
  double now_ = 0;
  TaskId next_id_ = 1;
};

// Exact completion times for a static batch of tasks (all known up front),
// computed by sweeping rate segments. Used as an independent check.
struct ScheduledTransfer {
  double start_us;
  Bytes bytes;
  std::vector<LinkId> links;
};
std::vector<double> simulate_transfers(const std::vector<double>& capacities_bytes_per_sec,
                                       const std::vector<ScheduledTransfer>& batch);

}  // namespace swapsim
