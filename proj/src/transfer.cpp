#include "swapsim/transfer.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "swapsim/error.hpp"

namespace swapsim {

int group_count(Bytes transfer_bytes, Bytes group_size) {
  require(transfer_bytes > 0 && group_size > 0, ErrorKind::InvalidParameter, "group_count: sizes must be > 0");
  return static_cast<int>((transfer_bytes + group_size - 1) / group_size);
}

double pipeline_latency(double t_transfer_total, double t_compute_total, int n_groups) {
  require(t_transfer_total > 0 && t_compute_total > 0 && n_groups >= 1, ErrorKind::InvalidParameter,
          "pipeline_latency: inputs must be positive");
  const double n = n_groups;
  const double tx = t_transfer_total / n;
  const double tc = t_compute_total / n;
  return tx + (n - 1) * std::max(tx, tc) + tc;
}

LinkTable::LinkTable(const NodeTopology& topo) : topo_(&topo) {
  links_.push_back({"host", topo.host_link_bandwidth()});
  for (int g = 0; g < topo.group_count(); ++g) {
    links_.push_back({"pcie" + std::to_string(g), topo.pcie_bandwidth()});
  }
  const int n = topo.gpu_count();
  nvlink_id_.assign(static_cast<std::size_t>(n * n), -1);
  for (GpuId a = 0; a < n; ++a) {
    for (GpuId b = a + 1; b < n; ++b) {
      if (topo.nvlink_class(a, b) == NvLinkClass::None) continue;
      const int id = static_cast<int>(links_.size());
      links_.push_back({"nvlink" + std::to_string(a) + "-" + std::to_string(b), topo.nvlink_bandwidth(a, b)});
      nvlink_id_[static_cast<std::size_t>(a * n + b)] = id;
      nvlink_id_[static_cast<std::size_t>(b * n + a)] = id;
    }
  }
}

std::optional<LinkId> LinkTable::nvlink(GpuId a, GpuId b) const {
  const int n = topo_->gpu_count();
  require(a >= 0 && a < n && b >= 0 && b < n, ErrorKind::InvalidParameter, "nvlink: gpu id out of range");
  const int id = nvlink_id_[static_cast<std::size_t>(a * n + b)];
  if (id < 0) return std::nullopt;
  return id;
}

std::vector<LinkId> LinkTable::route(GpuId src, GpuId dst) const {
  const int n = topo_->gpu_count();
  require(dst >= 0 && dst < n, ErrorKind::Routing, "route: destination out of range");
  require(src != dst, ErrorKind::Routing, "route: source equals destination");
  if (src == kHost) return {host_link(), uplink(topo_->pcie_group(dst))};
  require(src >= 0 && src < n, ErrorKind::Routing, "route: source out of range");
  if (auto id = nvlink(src, dst)) return {*id};
  const int gs = topo_->pcie_group(src);
  const int gd = topo_->pcie_group(dst);
  if (gs == gd) return {uplink(gs)};
  return {uplink(gs), uplink(gd)};
}

FairShareNetwork::FairShareNetwork(std::vector<double> capacities) {
  for (double c : capacities) {
    require(c > 0, ErrorKind::InvalidParameter, "link capacity must be > 0");
    capacity_.push_back(per_us(c));
  }
  link_load_.assign(capacity_.size(), 0);
}

TaskId FairShareNetwork::start(double now_us, Bytes bytes, std::vector<LinkId> links,
                               std::optional<PipelineSpec> pipeline) {
  require(!links.empty(), ErrorKind::Routing, "transfer with empty link set");
  for (LinkId l : links) {
    require(l >= 0 && static_cast<std::size_t>(l) < capacity_.size(), ErrorKind::Routing, "unknown link id");
  }
  if (pipeline) {
    require(pipeline->n_groups >= 1 && pipeline->compute_per_group_us >= 0, ErrorKind::InvalidParameter,
            "pipeline spec must have >= 1 group");
  }
  // Bank progress of running tasks before the share changes.
  auto done = advance(now_us);
  require(done.empty(), ErrorKind::InvalidState, "advance() must be drained before start()");

  Task t;
  t.id = next_id_++;
  t.bytes_total = static_cast<double>(bytes);
  t.remaining = t.bytes_total;
  t.start_us = now_us;
  t.links = std::move(links);
  t.pipe = pipeline;
  t.compute_done = now_us;
  for (LinkId l : t.links) ++link_load_[static_cast<std::size_t>(l)];
  tasks_.push_back(std::move(t));
  recompute_rates();
  return tasks_.back().id;
}

void FairShareNetwork::recompute_rates() {
  for (Task& t : tasks_) {
    double r = std::numeric_limits<double>::infinity();
    for (LinkId l : t.links) {
      const auto i = static_cast<std::size_t>(l);
      r = std::min(r, capacity_[i] / static_cast<double>(link_load_[i]));
    }
    t.rate = r;
  }
}

void FairShareNetwork::progress(Task& t, double dt) {
  if (dt <= 0 || t.remaining <= 0) return;
  const double moved = std::min(t.remaining, t.rate * dt);
  if (t.pipe) {
    const double before = t.bytes_total - t.remaining;
    const double after = before + moved;
    const int n = t.pipe->n_groups;
    const double group = t.bytes_total / n;
    while (t.groups_done < n - 1) {
      const double boundary = group * (t.groups_done + 1);
      if (boundary > after) break;
      const double x = now_ + (boundary - before) / t.rate;
      t.compute_done = std::max(x, t.compute_done) + t.pipe->compute_per_group_us;
      ++t.groups_done;
    }
  }
  t.remaining -= moved;
}

std::vector<CompletedTransfer> FairShareNetwork::advance(double now_us) {
  require(now_us >= now_ - 1e-6, ErrorKind::InvalidState, "network time moved backwards");
  std::vector<CompletedTransfer> out;
  while (true) {
    if (tasks_.empty()) {
      now_ = std::max(now_, now_us);
      break;
    }
    double tmin = std::numeric_limits<double>::infinity();
    for (const Task& t : tasks_) tmin = std::min(tmin, now_ + t.remaining / t.rate);
    if (tmin > now_us) {
      for (Task& t : tasks_) progress(t, now_us - now_);
      now_ = std::max(now_, now_us);
      break;
    }
    for (Task& t : tasks_) progress(t, tmin - now_);
    now_ = std::max(now_, tmin);
    std::vector<Task> keep;
    for (Task& t : tasks_) {
      const double finish = now_ + t.remaining / t.rate;
      if (finish <= now_ + 1e-9) {
        CompletedTransfer c;
        c.id = t.id;
        c.start_us = t.start_us;
        c.finish_us = now_;
        c.bytes = static_cast<Bytes>(std::llround(t.bytes_total));
        c.compute_done_us = now_;
        if (t.pipe) {
          // The final group lands at completion.
          while (t.groups_done < t.pipe->n_groups) {
            t.compute_done = std::max(now_, t.compute_done) + t.pipe->compute_per_group_us;
            ++t.groups_done;
          }
          c.compute_done_us = t.compute_done;
        }
        for (LinkId l : t.links) --link_load_[static_cast<std::size_t>(l)];
        out.push_back(c);
      } else {
        keep.push_back(std::move(t));
      }
    }
    tasks_ = std::move(keep);
    recompute_rates();
  }
  return out;
}

std::optional<double> FairShareNetwork::next_completion() const {
  if (tasks_.empty()) return std::nullopt;
  double tmin = std::numeric_limits<double>::infinity();
  for (const Task& t : tasks_) tmin = std::min(tmin, now_ + t.remaining / t.rate);
  return tmin;
}

bool FairShareNetwork::active(TaskId id) const {
  return std::any_of(tasks_.begin(), tasks_.end(), [&](const Task& t) { return t.id == id; });
}

double FairShareNetwork::rate(TaskId id) const {
  for (const Task& t : tasks_)
    if (t.id == id) return t.rate;
  return 0;
}

double FairShareNetwork::remaining(TaskId id) const {
  for (const Task& t : tasks_)
    if (t.id == id) return t.remaining;
  return 0;
}

std::vector<double> simulate_transfers(const std::vector<double>& capacities,
                                       const std::vector<ScheduledTransfer>& batch) {
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return batch[a].start_us < batch[b].start_us; });
  FairShareNetwork net(capacities);
  std::vector<double> finish(batch.size(), 0);
  std::vector<std::pair<TaskId, std::size_t>> ids;
  auto collect = [&](const std::vector<CompletedTransfer>& done) {
    for (const auto& c : done)
      for (auto& [id, idx] : ids)
        if (id == c.id) finish[idx] = c.finish_us;
  };
  for (std::size_t idx : order) {
    collect(net.advance(batch[idx].start_us));
    ids.emplace_back(net.start(batch[idx].start_us, batch[idx].bytes, batch[idx].links), idx);
  }
  while (auto t = net.next_completion()) collect(net.advance(*t));
  return finish;
}

}  // namespace swapsim
