#include "doctest.h"
#include "swapsim/error.hpp"
#include "swapsim/topology.hpp"

using namespace swapsim;

TEST_CASE("default node layout") {
  const auto t = default_v100_node();
  CHECK(t.gpu_count() == 4);
  CHECK(t.gpu_memory() == 32 * GiB);
  CHECK(t.nvlink_class(0, 0) == NvLinkClass::None);
  CHECK(t.nvlink_fast_bandwidth() / t.nvlink_slow_bandwidth() == 2.0);
  CHECK(t.pcie_group(0) == t.pcie_group(1));
  CHECK(t.pcie_group(2) == t.pcie_group(3));
  CHECK(t.pcie_group(0) != t.pcie_group(2));
  CHECK(t.neighbors(0) == std::vector<GpuId>{1});
  CHECK(t.neighbors(3) == std::vector<GpuId>{2});
  for (GpuId a = 0; a < 4; ++a) {
    bool fast_peer = false;
    for (GpuId b = 0; b < 4; ++b) {
      CHECK(t.nvlink_class(a, b) == t.nvlink_class(b, a));
      if (t.nvlink_class(a, b) == NvLinkClass::Fast) fast_peer = true;
      if (a != b) CHECK(t.nvlink_class(a, b) != NvLinkClass::None);
    }
    CHECK(fast_peer);
  }
  CHECK(t.nvlink_class(0, 1) == NvLinkClass::Fast);
  CHECK(t.nvlink_class(0, 3) == NvLinkClass::Slow);
  CHECK(t.host_link_bandwidth() == 2 * t.pcie_bandwidth());
}

TEST_CASE("custom topologies and errors") {
  TopologyParams p;
  p.gpu_count = 2;
  p.pcie_groups = {{0, 1}};
  const NodeTopology t(p);
  CHECK(t.nvlink_class(0, 1) == NvLinkClass::None);
  CHECK(t.nvlink_bandwidth(0, 1) == 0);
  CHECK_THROWS_AS(t.pcie_group(2), Error);
  CHECK_THROWS_AS(t.nvlink_class(-1, 0), Error);

  auto bad = default_v100_params();
  bad.nvlink[0][1] = NvLinkClass::Slow;
  CHECK_THROWS_AS(NodeTopology{bad}, Error);
  bad = default_v100_params();
  bad.nvlink[2][2] = NvLinkClass::Fast;
  CHECK_THROWS_AS(NodeTopology{bad}, Error);
  bad = default_v100_params();
  bad.pcie_groups = {{0, 1}, {1, 2, 3}};
  CHECK_THROWS_AS(NodeTopology{bad}, Error);
  bad = default_v100_params();
  bad.pcie_groups = {{0, 1}, {2}};
  CHECK_THROWS_AS(NodeTopology{bad}, Error);
}
