#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "swapsim/error.hpp"
#include "swapsim/queueing.hpp"

using namespace swapsim;

namespace {

std::vector<RankedFunction> ranked(std::initializer_list<double> rrcs) {
  std::vector<RankedFunction> out;
  std::uint32_t id = 0;
  for (double r : rrcs) out.push_back({id++, r});
  return out;
}

RequestQueues two_functions(QueueMode mode = QueueMode::SloAware) {
  RequestQueues::Params p;
  p.mode = mode;
  return RequestQueues(p, {100, 100}, {0.98, 0.98}, {10, 10});
}

}  // namespace

TEST_CASE("rrc hand values") {
  CHECK(rrc(0, 0, 0.98) == 0);
  CHECK(rrc(100, 90, 0.98) == doctest::Approx(400).epsilon(1e-12));
  CHECK(rrc(100, 100, 0.98) == doctest::Approx(-100).epsilon(1e-12));
  CHECK_THROWS_AS(rrc(1, 1, 1.0), Error);
  CHECK_THROWS_AS(rrc(1, 1, 0.0), Error);
}

TEST_CASE("normalized rrc scales by mean latency") {
  CHECK(normalized_rrc(100, 90, 0.98, 25) == doctest::Approx(10000));
  CHECK(normalized_rrc(0, 0, 0.98, 150) == 0);
  CHECK(normalized_rrc(100, 90, 0.98, 150) > normalized_rrc(100, 90, 0.98, 25));
  FunctionSloState s;
  s.prior_latency_ms = 7;
  CHECK(s.latency_estimate() == 7);
  s.record(10, true);
  s.record(20, false);
  CHECK(s.latency_estimate() == doctest::Approx(15));
  CHECK(s.n == 2);
  CHECK(s.m == 1);
}

TEST_CASE("rrc monotonicity and the serve-to-comply rule") {
  for (int n = 0; n <= 60; ++n) {
    for (int m = 0; m <= n; ++m) {
      if (n < 60) CHECK(rrc(n + 1, m, 0.9) > rrc(n, m, 0.9));
      if (m < n) CHECK(rrc(n, m + 1, 0.9) < rrc(n, m, 0.9));
      const double r = rrc(n, m, 0.9);
      if (r > 0) {
        const double k = std::ceil(r - 1e-9);
        CHECK(rrc(n + k, m + k, 0.9) <= 1e-9);
      }
    }
  }
}

TEST_CASE("partition hand values") {
  const auto p = partition(ranked({-5, 10, 30}), 0.3);
  CHECK(p.high == std::vector<std::uint32_t>{0, 1});
  CHECK(p.low == std::vector<std::uint32_t>{2});
  CHECK(partition(ranked({-5, 10, 30}), 1.0).high.size() == 3);
  const auto zero = partition(ranked({4, -1, 0, 9}), 0.0);
  CHECK(zero.high == std::vector<std::uint32_t>{1, 2});
  CHECK_THROWS_AS(partition(ranked({1}), 1.5), Error);
}

TEST_CASE("partition is monotone in alpha and invariant to positive scaling") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> val(-500, 2000), a(0, 1), scale(0.01, 100);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<RankedFunction> fs;
    const int n = 1 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) fs.push_back({static_cast<std::uint32_t>(i), std::round(val(rng))});
    double a1 = a(rng), a2 = a(rng);
    if (a1 > a2) std::swap(a1, a2);
    auto h1 = partition(fs, a1).high;
    auto h2 = partition(fs, a2).high;
    std::sort(h1.begin(), h1.end());
    std::sort(h2.begin(), h2.end());
    CHECK(std::includes(h2.begin(), h2.end(), h1.begin(), h1.end()));

    const double k = scale(rng);
    auto scaled = fs;
    for (auto& f : scaled) f.rrc *= k;
    CHECK(partition(scaled, a1).high == partition(fs, a1).high);
    for (std::size_t i = 0; i + 1 < fs.size(); ++i) {
      CHECK(high_before(fs[i], fs[i + 1], HighOrder::SplitPositiveFirst) ==
            high_before(scaled[i], scaled[i + 1], HighOrder::SplitPositiveFirst));
      CHECK(low_before(fs[i], fs[i + 1]) == low_before(scaled[i], scaled[i + 1]));
    }
  }
}

TEST_CASE("alpha auto-configuration") {
  CHECK(auto_config_alpha(0.4, 0.80, 0.90) == doctest::Approx(0.8));
  CHECK(auto_config_alpha(0.6, 0.90, 0.80) == doctest::Approx(0.3));
  CHECK(auto_config_alpha(0.5, 0.85, 0.87) == doctest::Approx(0.5));
  CHECK_THROWS_AS(auto_config_alpha(0.5, 0.8, 0.9, 1.0), Error);
  double alpha = 0.1;
  for (int i = 0; i < 10; ++i) alpha = auto_config_alpha(alpha, 0.1, 0.9);
  CHECK(alpha == 1.0);
  for (int i = 0; i < 60; ++i) alpha = auto_config_alpha(alpha, 0.9, 0.1);
  CHECK(alpha > 0);
}

TEST_CASE("high queue order: small positive rrc, then larger, then negatives") {
  const RankedFunction a{0, 50}, b{1, -10}, c{2, 5}, d{3, -1};
  CHECK(high_before(a, b, HighOrder::SplitPositiveFirst));
  CHECK(high_before(c, a, HighOrder::SplitPositiveFirst));
  CHECK(high_before(d, b, HighOrder::SplitPositiveFirst));
  CHECK(high_before(a, c, HighOrder::PureReverse));
  CHECK(low_before({0, 500}, {1, 900}));
}

TEST_CASE("dispatch: high before low, empty gives none") {
  auto q = two_functions();
  CHECK(!q.peek(0));
  // Function 0 is behind on its SLO, function 1 is far behind.
  for (int i = 0; i < 10; ++i) {
    q.push({static_cast<std::uint64_t>(i), 0, 0});
    q.on_dispatch({static_cast<std::uint64_t>(i), 0, 0});
    q.on_complete({static_cast<std::uint64_t>(i), 0, 0}, from_ms(i < 9 ? 50 : 500));
    q.pop({static_cast<std::uint64_t>(i), 0, 0});
  }
  for (int i = 10; i < 20; ++i) {
    q.push({static_cast<std::uint64_t>(i), 1, 0});
    q.on_dispatch({static_cast<std::uint64_t>(i), 1, 0});
    q.on_complete({static_cast<std::uint64_t>(i), 1, 0}, from_ms(500));
    q.pop({static_cast<std::uint64_t>(i), 1, 0});
  }
  CHECK(q.current_rrc(0, 0) < q.current_rrc(1, 0));
  q.push({100, 0, from_ms(1000)});
  q.push({101, 1, from_ms(1000)});
  q.repartition(from_ms(1000));  // alpha 0.5 keeps only the smaller positive rrc high
  CHECK(q.in_high(0));
  CHECK(!q.in_high(1));
  CHECK(q.peek(from_ms(1000))->function == 0);
  CHECK(q.peek(from_ms(1000), {0})->function == 1);
  CHECK(q.size() == 2);
}

TEST_CASE("fifo mode serves by arrival") {
  auto q = two_functions(QueueMode::Fifo);
  q.push({1, 1, 5});
  q.push({2, 0, 7});
  CHECK(q.peek(10)->id == 1);
  q.pop({1, 1, 5});
  CHECK(q.peek(10)->id == 2);
  CHECK_THROWS_AS(q.pop({1, 1, 5}), Error);
}

TEST_CASE("expired queued requests count toward n") {
  auto q = two_functions();
  q.push({1, 0, 0});
  CHECK(q.current_rrc(0, from_ms(50)) == 0);
  CHECK(q.current_rrc(0, from_ms(150)) > 0);
}

TEST_CASE("period tick adapts alpha from the compliant ratio") {
  auto q = two_functions();
  auto row = q.period_tick(0);
  CHECK(row.alpha == 0.5);
  CHECK(row.slo_ratio == 1.0);
  // Both functions fall behind: ratio drops by more than the threshold.
  for (std::uint32_t f = 0; f < 2; ++f) {
    q.push({f, f, 0});
    q.on_dispatch({f, f, 0});
    q.on_complete({f, f, 0}, from_ms(400));
    q.pop({f, f, 0});
  }
  row = q.period_tick(from_ms(10000));
  CHECK(row.slo_ratio == 0.0);
  CHECK(row.alpha == doctest::Approx(0.25));
  CHECK(row.high_count + row.low_count == 2);
}
