#pragma once

#include <algorithm>
#include <limits>
#include <random>
#include <vector>

#include "swapsim/transfer.hpp"

namespace testutil {

struct RandomSchedule {
  std::vector<double> capacities;
  std::vector<swapsim::ScheduledTransfer> batch;
};

inline RandomSchedule random_schedule(std::mt19937_64& rng, int max_links, int max_tasks) {
  RandomSchedule s;
  std::uniform_int_distribution<int> nl(1, max_links), nt(1, max_tasks);
  std::uniform_real_distribution<double> cap(0.5e9, 8e9), start(0, 5000);
  std::uniform_int_distribution<swapsim::Bytes> bytes(100'000, 10'000'000);
  const int links = nl(rng);
  for (int l = 0; l < links; ++l) s.capacities.push_back(cap(rng));
  const int tasks = nt(rng);
  for (int i = 0; i < tasks; ++i) {
    swapsim::ScheduledTransfer t;
    t.start_us = start(rng);
    t.bytes = bytes(rng);
    for (int l = 0; l < links; ++l)
      if (rng() % 2) t.links.push_back(l);
    if (t.links.empty()) t.links.push_back(static_cast<int>(rng() % static_cast<unsigned>(links)));
    s.batch.push_back(t);
  }
  return s;
}

// Piecewise-constant integration: between consecutive start/finish instants
// every rate is constant, so each segment is solved in closed form.
inline std::vector<double> fairshare_oracle(const std::vector<double>& caps,
                                            const std::vector<swapsim::ScheduledTransfer>& batch) {
  const std::size_t n = batch.size();
  std::vector<double> rem(n), finish(n, -1);
  for (std::size_t i = 0; i < n; ++i) rem[i] = static_cast<double>(batch[i].bytes);
  double t = std::numeric_limits<double>::infinity();
  for (const auto& b : batch) t = std::min(t, b.start_us);
  std::size_t done = 0;
  while (done < n) {
    std::vector<int> users(caps.size(), 0);
    std::vector<bool> act(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      act[i] = finish[i] < 0 && batch[i].start_us <= t;
      if (act[i])
        for (int l : batch[i].links) ++users[static_cast<std::size_t>(l)];
    }
    std::vector<double> rate(n, 0);
    double next = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (finish[i] < 0 && batch[i].start_us > t) next = std::min(next, batch[i].start_us);
      if (!act[i]) continue;
      double r = std::numeric_limits<double>::infinity();
      for (int l : batch[i].links)
        r = std::min(r, caps[static_cast<std::size_t>(l)] / 1e6 / users[static_cast<std::size_t>(l)]);
      rate[i] = r;
      next = std::min(next, t + rem[i] / r);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!act[i]) continue;
      rem[i] -= rate[i] * (next - t);
      if (rem[i] <= 1e-6 * static_cast<double>(batch[i].bytes)) {
        finish[i] = next;
        ++done;
      }
    }
    t = next;
  }
  return finish;
}

}  // namespace testutil
