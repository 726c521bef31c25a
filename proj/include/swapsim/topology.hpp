#pragma once

#include <vector>

#include "swapsim/units.hpp"

namespace swapsim {

enum class NvLinkClass { None, Slow, Fast };
const char* to_string(NvLinkClass c);

struct TopologyParams {
  int gpu_count = 4;
  std::vector<std::vector<GpuId>> pcie_groups;
  double pcie_bandwidth = 2.0 * static_cast<double>(GiB);         // bytes/sec per switch uplink
  double host_link_bandwidth = 0;                                 // 0 = sum of uplinks
  double nvlink_slow_bandwidth = 3.125 * static_cast<double>(GiB);  // Fast is 2x
  std::vector<std::vector<NvLinkClass>> nvlink;                   // empty = no NVLink
  Bytes gpu_memory = 32 * GiB;
};

// Immutable interconnect description of one worker node.
class NodeTopology {
 public:
  explicit NodeTopology(TopologyParams params);

  int gpu_count() const { return params_.gpu_count; }
  int group_count() const { return static_cast<int>(params_.pcie_groups.size()); }
  const std::vector<GpuId>& group_members(int group) const;
  int pcie_group(GpuId g) const;
  // Other GPUs behind the same PCIe switch.
  std::vector<GpuId> neighbors(GpuId g) const;

  NvLinkClass nvlink_class(GpuId a, GpuId b) const;
  double nvlink_bandwidth(GpuId a, GpuId b) const;
  double nvlink_slow_bandwidth() const { return params_.nvlink_slow_bandwidth; }
  double nvlink_fast_bandwidth() const { return 2.0 * params_.nvlink_slow_bandwidth; }
  double pcie_bandwidth() const { return params_.pcie_bandwidth; }
  double host_link_bandwidth() const { return params_.host_link_bandwidth; }
  Bytes gpu_memory() const { return params_.gpu_memory; }

  const TopologyParams& params() const { return params_; }

 private:
  void check_gpu(GpuId g) const;

  TopologyParams params_;
  std::vector<int> group_of_;
};

// Four GPUs, switch pairs {0,1} {2,3}, ring 0-1-3-2-0 Fast, diagonals Slow.
TopologyParams default_v100_params();
NodeTopology default_v100_node();

}  // namespace swapsim
