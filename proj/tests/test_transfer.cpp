#include <algorithm>
#include <random>

#include "doctest.h"
#include "fairshare_oracle.hpp"
#include "swapsim/error.hpp"
#include "swapsim/transfer.hpp"

using namespace swapsim;

namespace {

// Group-by-group event simulation of the two-stage pipeline.
double pipeline_by_events(double tt, double tc_total, int n) {
  const double tx = tt / n, tc = tc_total / n;
  double transfer_end = 0, compute_end = 0;
  for (int k = 0; k < n; ++k) {
    transfer_end += tx;
    compute_end = std::max(transfer_end, compute_end) + tc;
  }
  return compute_end;
}

}  // namespace

TEST_CASE("group count") {
  CHECK(group_count(26 * MiB, 2 * MiB) == 13);
  CHECK(group_count(1, 2 * MiB) == 1);
  CHECK(group_count(2 * MiB, 2 * MiB) == 1);
  CHECK(group_count(2 * MiB + 1, 2 * MiB) == 2);
  CHECK_THROWS_AS(group_count(0, 2 * MiB), Error);
}

TEST_CASE("pipeline latency formula") {
  CHECK(pipeline_latency(26, 19, 1) == doctest::Approx(45));
  CHECK(pipeline_latency(20, 10, 10) == doctest::Approx(21));
  CHECK(pipeline_by_events(20, 10, 10) == doctest::Approx(21));
  CHECK(pipeline_latency(26, 19, 13) == doctest::Approx(27.4615).epsilon(1e-4));
  CHECK_THROWS_AS(pipeline_latency(0, 1, 1), Error);
  CHECK_THROWS_AS(pipeline_latency(1, 1, 0), Error);
}

TEST_CASE("pipeline formula agrees with group events and stays within bounds") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> t(0.01, 300.0);
  std::uniform_int_distribution<int> n(1, 400);
  for (int i = 0; i < 5000; ++i) {
    const double tt = t(rng), tc = t(rng);
    const int g = n(rng);
    const double p = pipeline_latency(tt, tc, g);
    CHECK(p == doctest::Approx(pipeline_by_events(tt, tc, g)).epsilon(1e-9));
    CHECK(p >= std::max(tt, tc) - 1e-9);
    CHECK(p <= tt + tc + 1e-9);
  }
}

TEST_CASE("routes on the default node") {
  const auto topo = default_v100_node();
  const LinkTable lt(topo);
  CHECK(lt.route(kHost, 0) == std::vector<LinkId>{lt.host_link(), lt.uplink(0)});
  CHECK(lt.route(kHost, 3) == std::vector<LinkId>{lt.host_link(), lt.uplink(1)});
  CHECK(lt.route(0, 1) == std::vector<LinkId>{*lt.nvlink(0, 1)});
  CHECK(lt.link(*lt.nvlink(0, 1)).capacity == topo.nvlink_fast_bandwidth());
  CHECK(lt.link(*lt.nvlink(0, 3)).capacity == topo.nvlink_slow_bandwidth());
  CHECK_THROWS_AS(lt.route(0, 0), Error);
  CHECK_THROWS_AS(lt.route(kHost, 4), Error);

  TopologyParams p;
  p.gpu_count = 4;
  p.pcie_groups = {{0, 1}, {2, 3}};
  const NodeTopology plain(p);
  const LinkTable pl(plain);
  CHECK(pl.route(0, 2) == std::vector<LinkId>{pl.uplink(0), pl.uplink(1)});
  CHECK(pl.route(0, 1) == std::vector<LinkId>{pl.uplink(0)});
}

TEST_CASE("equal split and late joiner") {
  const double cap = 1e9;  // 1000 bytes/us
  const Bytes b = 1'000'000;
  {
    const auto f = simulate_transfers({cap}, {{0, b, {0}}, {0, b, {0}}});
    CHECK(f[0] == doctest::Approx(2000));
    CHECK(f[1] == doctest::Approx(2000));
  }
  {
    // Second joins at half of the first's solo time.
    const auto f = simulate_transfers({cap}, {{0, b, {0}}, {500, b, {0}}});
    CHECK(f[0] == doctest::Approx(1500));
    CHECK(f[1] == doctest::Approx(2000));
  }
  {
    const auto f = simulate_transfers({cap, cap}, {{0, b, {0}}, {0, b, {1}}});
    CHECK(f[0] == doctest::Approx(1000));
    CHECK(f[1] == doctest::Approx(1000));
  }
}

TEST_CASE("rate is the minimum share over the task's links") {
  FairShareNetwork net({2e9, 1e9});
  const auto a = net.start(0, 1000, {0, 1});
  CHECK(net.rate(a) == doctest::Approx(1000));
  const auto b = net.start(0, 1000, {0});
  CHECK(net.rate(a) == doctest::Approx(1000));
  CHECK(net.rate(b) == doctest::Approx(1000));
  const auto c = net.start(0, 1000, {1});
  CHECK(net.rate(a) == doctest::Approx(500));
  CHECK(net.rate(c) == doctest::Approx(500));
  CHECK(net.tasks_on(0) == 2);
}

TEST_CASE("pipelined compute completion under a constant rate matches the formula") {
  FairShareNetwork net({1e9});
  const Bytes bytes = 20'000'000;  // 20 ms at 1000 B/us
  const int n = 10;
  net.start(0, bytes, {0}, PipelineSpec{n, 1000.0});
  const auto done = net.advance(1e9);
  REQUIRE(done.size() == 1);
  CHECK(done[0].finish_us == doctest::Approx(20000));
  CHECK(done[0].compute_done_us == doctest::Approx(pipeline_latency(20000, 10000, n)));
}

TEST_CASE("pipelined compute under a rate change matches group events") {
  // First half at full rate, then a competitor halves it.
  FairShareNetwork net({1e9});
  net.start(0, 10'000'000, {0}, PipelineSpec{10, 300.0});
  net.advance(4000);
  net.start(4000, 100'000'000, {0});
  std::vector<CompletedTransfer> done;
  while (done.empty()) done = net.advance(*net.next_completion());
  // Oracle: group k lands when cumulative bytes reach k MB.
  double t = 0, compute = 0, moved = 0;
  for (int k = 1; k <= 10; ++k) {
    const double target = 1e6 * k;
    while (moved < target - 1e-6) {
      const double rate = t < 4000 ? 1000.0 : 500.0;
      const double horizon = t < 4000 ? 4000 : 1e18;
      const double step = std::min((target - moved) / rate, horizon - t);
      moved += step * rate;
      t += step;
    }
    compute = std::max(t, compute) + 300.0;
  }
  CHECK(done[0].finish_us == doctest::Approx(t));
  CHECK(done[0].compute_done_us == doctest::Approx(compute));
}

TEST_CASE("event-driven network matches the independent oracle on random batches") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto sched = testutil::random_schedule(rng, 3, 6);
    const auto got = simulate_transfers(sched.capacities, sched.batch);
    const auto want = testutil::fairshare_oracle(sched.capacities, sched.batch);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1.0);
  }
}
