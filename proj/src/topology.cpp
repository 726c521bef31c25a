#include "swapsim/topology.hpp"

#include <string>

#include "swapsim/error.hpp"

namespace swapsim {

const char* to_string(NvLinkClass c) {
  switch (c) {
    case NvLinkClass::None: return "none";
    case NvLinkClass::Slow: return "slow";
    case NvLinkClass::Fast: return "fast";
  }
  return "none";
}

NodeTopology::NodeTopology(TopologyParams p) : params_(std::move(p)) {
  const int n = params_.gpu_count;
  require(n >= 1, ErrorKind::InvalidParameter, "topology.gpus must be >= 1");
  require(params_.pcie_bandwidth > 0, ErrorKind::InvalidParameter, "topology.pcie_bandwidth must be > 0");
  require(params_.nvlink_slow_bandwidth > 0, ErrorKind::InvalidParameter,
          "topology.nvlink_slow_bandwidth must be > 0");
  require(params_.gpu_memory > 0, ErrorKind::InvalidParameter, "topology.gpu_memory must be > 0");

  if (params_.pcie_groups.empty()) {
    for (GpuId g = 0; g < n; ++g) params_.pcie_groups.push_back({g});
  }
  group_of_.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t gi = 0; gi < params_.pcie_groups.size(); ++gi) {
    require(!params_.pcie_groups[gi].empty(), ErrorKind::InvalidParameter, "topology.groups: empty group");
    for (GpuId g : params_.pcie_groups[gi]) {
      require(g >= 0 && g < n, ErrorKind::InvalidParameter,
              "topology.groups: gpu " + std::to_string(g) + " out of range");
      require(group_of_[static_cast<std::size_t>(g)] < 0, ErrorKind::InvalidParameter,
              "topology.groups: gpu " + std::to_string(g) + " in more than one group");
      group_of_[static_cast<std::size_t>(g)] = static_cast<int>(gi);
    }
  }
  for (GpuId g = 0; g < n; ++g) {
    require(group_of_[static_cast<std::size_t>(g)] >= 0, ErrorKind::InvalidParameter,
            "topology.groups: gpu " + std::to_string(g) + " not in any group");
  }

  if (params_.nvlink.empty()) {
    params_.nvlink.assign(static_cast<std::size_t>(n),
                          std::vector<NvLinkClass>(static_cast<std::size_t>(n), NvLinkClass::None));
  }
  require(params_.nvlink.size() == static_cast<std::size_t>(n), ErrorKind::InvalidParameter,
          "topology.nvlink: matrix size mismatch");
  for (std::size_t a = 0; a < params_.nvlink.size(); ++a) {
    require(params_.nvlink[a].size() == static_cast<std::size_t>(n), ErrorKind::InvalidParameter,
            "topology.nvlink: matrix size mismatch");
    require(params_.nvlink[a][a] == NvLinkClass::None, ErrorKind::InvalidParameter,
            "topology.nvlink: diagonal must be none");
    for (std::size_t b = 0; b < a; ++b) {
      require(params_.nvlink[a][b] == params_.nvlink[b][a], ErrorKind::InvalidParameter,
              "topology.nvlink: matrix must be symmetric");
    }
  }

  if (params_.host_link_bandwidth <= 0) {
    params_.host_link_bandwidth = params_.pcie_bandwidth * static_cast<double>(params_.pcie_groups.size());
  }
}

void NodeTopology::check_gpu(GpuId g) const {
  require(g >= 0 && g < params_.gpu_count, ErrorKind::InvalidParameter, "gpu id " + std::to_string(g) + " out of range");
}

const std::vector<GpuId>& NodeTopology::group_members(int group) const {
  require(group >= 0 && group < group_count(), ErrorKind::InvalidParameter, "group id out of range");
  return params_.pcie_groups[static_cast<std::size_t>(group)];
}

int NodeTopology::pcie_group(GpuId g) const {
  check_gpu(g);
  return group_of_[static_cast<std::size_t>(g)];
}

std::vector<GpuId> NodeTopology::neighbors(GpuId g) const {
  std::vector<GpuId> out;
  for (GpuId o : group_members(pcie_group(g)))
    if (o != g) out.push_back(o);
  return out;
}

NvLinkClass NodeTopology::nvlink_class(GpuId a, GpuId b) const {
  check_gpu(a);
  check_gpu(b);
  return params_.nvlink[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
}

double NodeTopology::nvlink_bandwidth(GpuId a, GpuId b) const {
  switch (nvlink_class(a, b)) {
    case NvLinkClass::None: return 0;
    case NvLinkClass::Slow: return nvlink_slow_bandwidth();
    case NvLinkClass::Fast: return nvlink_fast_bandwidth();
  }
  return 0;
}

TopologyParams default_v100_params() {
  TopologyParams p;
  p.gpu_count = 4;
  p.pcie_groups = {{0, 1}, {2, 3}};
  using C = NvLinkClass;
  p.nvlink = {
      {C::None, C::Fast, C::Fast, C::Slow},
      {C::Fast, C::None, C::Slow, C::Fast},
      {C::Fast, C::Slow, C::None, C::Fast},
      {C::Slow, C::Fast, C::Fast, C::None},
  };
  return p;
}

NodeTopology default_v100_node() { return NodeTopology(default_v100_params()); }

}  // namespace swapsim
